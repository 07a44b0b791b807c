from setuptools import setup

with open("README.md", "r", encoding="utf-8") as fh:
    long_description = fh.read()

setup(
    name="emotalk",
    version="0.1.0",
    author="emotalk developers",
    description="Audio-driven emotional talking-head generation from landmarks",
    long_description=long_description,
    long_description_content_type="text/markdown",
    install_requires=["numpy",
                      "scipy",
                      "numba",
                      "pandas",
                      "tqdm",
                      "typing_extensions",
                      "torch",
                      "soundfile",
                      "opencv-python-headless"],
    extras_require={
        "vgg": ["torchvision"],
        "test": ["pytest"],
    },
    entry_points={
        "console_scripts": ["emotalk=emotalk.cli:main"],
    },
    packages=["emotalk"],
    python_requires=">=3.8",
    classifiers=[
        "Programming Language :: Python :: 3",
        "Operating System :: OS Independent"]
)
