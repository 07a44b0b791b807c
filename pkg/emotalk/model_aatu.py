"""
Attention-augmented translator.
Code to render frames from a landmark sketch and a reference face with a CBAM-augmented U-net, and its losses.
"""

import os

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from .model_attention import CBAM


UNET_WIDTHS = (32, 64, 128, 256, 512)
N_ATTENTION_LEVELS = 4
IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)
# relu1_2, relu2_2, relu3_4, relu4_4 of VGG-19 features
VGG_SLICES = (4, 9, 18, 27)


def check_if_torchvision():
    try:
        import torchvision
    except Exception:
        raise ImportError('torchvision is not installed. Please install it with: pip install torchvision')
    return torchvision


class ConvBlock(nn.Module):

    def __init__(self, in_ch, out_ch):
        super().__init__()
        self.body = nn.Sequential(
            nn.Conv2d(in_ch, out_ch, 3, padding=1),
            nn.ReLU(),
            nn.Conv2d(out_ch, out_ch, 3, padding=1),
            nn.ReLU(),
        )

    def forward(self, x):
        return self.body(x)


class AATU(nn.Module):
    """
    U-net translator with CBAM after the first four encoder and decoder levels.

    The encoder has five levels separated by 2x max-pooling. Each decoder level upsamples with a transposed
    convolution, concatenates the encoder skip, applies a convolution block and, for all four decoder levels, a CBAM.
    A 1x1 convolution and a sigmoid produce the RGB frame.

    Parameters
    ----------
    in_channels : int
        Input channels: landmark sketch (1) plus reference image (3).
    widths : tuple
        Channel width of each encoder level.
    reduction : int
        CBAM channel reduction ratio.
    use_cbam : bool
        If False, every CBAM is replaced by the identity.
    """

    def __init__(self, in_channels=4, out_channels=3, widths=UNET_WIDTHS, reduction=8, use_cbam=True):
        super().__init__()
        if len(widths) != N_ATTENTION_LEVELS + 1:
            raise ValueError('widths must list {0} levels, got {1}.'.format(N_ATTENTION_LEVELS + 1, len(widths)))
        self.in_channels = in_channels
        self.widths = tuple(widths)
        self.use_cbam = use_cbam

        def att(ch):
            return CBAM(ch, reduction) if use_cbam else nn.Identity()

        self.enc = nn.ModuleList()
        prev = in_channels
        for w in widths:
            self.enc.append(ConvBlock(prev, w))
            prev = w
        self.enc_att = nn.ModuleList([att(w) for w in widths[:N_ATTENTION_LEVELS]])

        self.up = nn.ModuleList()
        self.dec = nn.ModuleList()
        self.dec_att = nn.ModuleList()
        for lvl in reversed(range(N_ATTENTION_LEVELS)):
            self.up.append(nn.ConvTranspose2d(widths[lvl + 1], widths[lvl], 2, stride=2))
            self.dec.append(ConvBlock(2 * widths[lvl], widths[lvl]))
            self.dec_att.append(att(widths[lvl]))
        self.out = nn.Conv2d(widths[0], out_channels, 1)

        # Test hook: zero the bottleneck activations
        self.zero_bottleneck = False

    @property
    def min_size(self):
        return 2 ** N_ATTENTION_LEVELS

    def forward(self, x):
        if x.dim() != 4 or x.shape[1] != self.in_channels:
            raise ValueError('Translator input must be (batch, {0}, H, W), got {1}.'.format(
                self.in_channels, tuple(x.shape)))
        H, W = x.shape[-2:]
        if H != W or H % self.min_size != 0:
            raise ValueError('Translator input must be square with a side divisible by {0}, got {1}x{2}.'.format(
                self.min_size, H, W))

        skips = []
        for lvl in range(N_ATTENTION_LEVELS):
            x = self.enc_att[lvl](self.enc[lvl](x))
            skips.append(x)
            x = F.max_pool2d(x, 2)
        x = self.enc[-1](x)
        if self.zero_bottleneck:
            x = torch.zeros_like(x)

        for up, dec, att, skip in zip(self.up, self.dec, self.dec_att, reversed(skips)):
            x = att(dec(torch.cat([up(x), skip], dim=1)))

        return torch.sigmoid(self.out(x))


def make_translator_input(sketch, reference):
    """
    Stacks a landmark sketch (H x W or B x H x W) with reference images (3 x H x W or B x 3 x H x W) by channel.

    Channel 0 is the sketch, channels 1-3 the reference.
    """

    sketch = torch.as_tensor(sketch)
    reference = torch.as_tensor(reference)
    if sketch.dim() == 2:
        sketch = sketch.unsqueeze(0)
    if reference.dim() == 3:
        reference = reference.unsqueeze(0)
    if sketch.dim() == 3:
        sketch = sketch.unsqueeze(1)
    if sketch.shape[-2:] != reference.shape[-2:] or reference.shape[1] != 3:
        raise ValueError('Sketch {0} and reference {1} shapes do not match.'.format(
            tuple(sketch.shape), tuple(reference.shape)))
    if reference.shape[0] != sketch.shape[0]:
        reference = reference.expand(sketch.shape[0], -1, -1, -1)
    return torch.cat([sketch.to(reference.dtype), reference], dim=1)


def unet_forward(model, x):
    """
    Renders frames (B x 3 x H x W) in [0, 1] from translator inputs (B x 4 x H x W).
    """

    return model(x)


class PerceptualExtractor(nn.Module):
    """
    Frozen multi-layer convolutional feature pyramid.

    By default a fixed-seed, randomly initialized pyramid of 3x3 convolutions, the first at stride 1 and the rest at
    stride 2, each followed by a ReLU. Features are taken after each layer. With `pretrained`, VGG-19 features are
    used instead.

    Parameters
    ----------
    widths : tuple
        Output channels of each layer of the random pyramid.
    seed : int
        Seed of the random initialization.
    layers : list, None
        Indices of the layers used by the loss. If None, all layers.
    pretrained : bool, str, None
        True loads torchvision's VGG-19 ImageNet weights, a path loads a VGG-19 `features` state dict from file.
    """

    def __init__(self, widths=(32, 64, 128, 256), seed=0, layers=None, pretrained=None):
        super().__init__()
        self.pretrained = bool(pretrained)
        if pretrained:
            self.stages = self._vgg_stages(pretrained)
            self.register_buffer('norm_mean', torch.tensor(IMAGENET_MEAN).view(1, 3, 1, 1))
            self.register_buffer('norm_std', torch.tensor(IMAGENET_STD).view(1, 3, 1, 1))
        else:
            with torch.random.fork_rng(devices=[]):
                torch.manual_seed(seed)
                stages, prev = [], 3
                for i, w in enumerate(widths):
                    stride = 1 if i == 0 else 2
                    stages.append(nn.Sequential(nn.Conv2d(prev, w, 3, stride=stride, padding=1), nn.ReLU()))
                    prev = w
            self.stages = nn.ModuleList(stages)
        n = len(self.stages)
        self.layers = list(range(n)) if layers is None else list(layers)
        if len(self.layers) == 0 or any(i < 0 or i >= n for i in self.layers):
            raise ValueError('layers must be indices in [0, {0}), got {1}.'.format(n, layers))

        for p in self.parameters():
            p.requires_grad = False
        self.eval()

    @staticmethod
    def _vgg_stages(pretrained):
        tv = check_if_torchvision()
        if isinstance(pretrained, str):
            if not os.path.isfile(pretrained):
                raise FileNotFoundError('VGG-19 weights {0} not found.'.format(pretrained))
            features = tv.models.vgg19(weights=None).features
            features.load_state_dict(torch.load(pretrained, map_location='cpu'))
        else:
            features = tv.models.vgg19(weights=tv.models.VGG19_Weights.DEFAULT).features
        stages, start = [], 0
        for end in VGG_SLICES:
            stages.append(nn.Sequential(*[features[i] for i in range(start, end)]))
            start = end
        return nn.ModuleList(stages)

    def train(self, mode=True):
        # Always frozen
        return super().train(False)

    def forward(self, x):
        if self.pretrained:
            x = (x - self.norm_mean) / self.norm_std
        feats = []
        for stage in self.stages:
            x = stage(x)
            feats.append(x)
        return [feats[i] for i in self.layers]


def l1_loss(out, target):
    """
    Mean absolute difference over all pixels and channels.
    """

    if out.shape != target.shape:
        raise ValueError('Output {0} and target {1} shapes differ.'.format(tuple(out.shape), tuple(target.shape)))
    return torch.mean(torch.abs(out - target))


def perceptual_loss(out, target, extractor):
    """
    Perceptual loss.

    Parameters
    ----------
    out : Tensor
        Generated frames (B x 3 x H x W).
    target : Tensor
        Real frames with the shape of `out`.
    extractor : PerceptualExtractor
        Frozen feature pyramid.

    Returns
    -------
    loss : Tensor
        Mean over the selected layers of the mean absolute feature difference.
    """

    if extractor is None:
        raise ValueError('Perceptual extractor is not initialized, build a PerceptualExtractor first.')
    if out.shape != target.shape:
        raise ValueError('Output {0} and target {1} shapes differ.'.format(tuple(out.shape), tuple(target.shape)))
    fo, ft = extractor(out), extractor(target)
    return torch.stack([torch.mean(torch.abs(a - b)) for a, b in zip(fo, ft)]).mean()


def stage2_loss(out, target, extractor, perceptual_weight=1.0):
    """
    L1 + perceptual_weight * L_per. Returns the total and both components.
    """

    l1 = l1_loss(out, target)
    if perceptual_weight == 0:
        per = torch.zeros_like(l1)
    else:
        per = perceptual_loss(out, target, extractor)
    return l1 + perceptual_weight * per, l1, per


def to_chw(img):
    """
    H x W x 3 float array to a 3 x H x W float32 tensor.
    """

    return torch.as_tensor(np.ascontiguousarray(np.transpose(img, (2, 0, 1))), dtype=torch.float32)


def to_hwc(t):
    return np.transpose(t.detach().cpu().double().numpy(), (1, 2, 0))
