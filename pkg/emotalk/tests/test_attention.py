import pytest
import torch
import torch.nn.functional as F
from torch.autograd import gradcheck
from torch.func import functional_call
from ..model_attention import ChannelAttention, SpatialAttention, CBAM, channel_attention, spatial_attention, cbam


def test_channel_attention():
    torch.manual_seed(0)
    ca = ChannelAttention(16, 8).double()
    x = torch.randn(2, 16, 5, 7, dtype=torch.float64)
    a = ca(x)
    assert a.shape == (2, 16, 1, 1)
    assert torch.all((a > 0) & (a < 1))

    # Shared MLP oracle
    W1 = ca.mlp[0].weight[:, :, 0, 0]
    W2 = ca.mlp[2].weight[:, :, 0, 0]
    avg = x.mean(dim=(2, 3))
    mx = x.flatten(2).max(dim=2).values
    expected = torch.sigmoid(torch.relu(avg @ W1.T) @ W2.T + torch.relu(mx @ W1.T) @ W2.T)
    assert torch.allclose(a[:, :, 0, 0], expected, atol=1e-12)

    with pytest.raises(ValueError):
        ChannelAttention(4, 8)
    with pytest.raises(ValueError):
        ChannelAttention(12, 8)


def test_spatial_attention():
    torch.manual_seed(1)
    sa = SpatialAttention(7).double()
    x = torch.randn(2, 4, 9, 9, dtype=torch.float64)
    a = sa(x)
    assert a.shape == (2, 1, 9, 9)
    assert torch.all((a > 0) & (a < 1))

    s = torch.cat([x.mean(dim=1, keepdim=True), x.max(dim=1, keepdim=True).values], dim=1)
    expected = torch.sigmoid(F.conv2d(F.pad(s, (3, 3, 3, 3), mode='reflect'), sa.conv.weight, sa.conv.bias))
    assert torch.allclose(a, expected, atol=1e-12)

    # Maps too small to reflect fall back to replicate padding
    small = torch.randn(1, 4, 2, 2, dtype=torch.float64)
    assert sa(small).shape == (1, 1, 2, 2)

    with pytest.raises(ValueError):
        SpatialAttention(6)


def test_cbam_bounds():
    torch.manual_seed(2)
    cbam = CBAM(16, 8).double()
    for _ in range(100):
        x = torch.randn(2, 16, 8, 8, dtype=torch.float64) * 3
        ch, sp = cbam.gates(x)
        assert torch.all((ch > 0) & (ch < 1))
        assert torch.all((sp > 0) & (sp < 1))
        out = cbam(x)
        assert out.shape == x.shape
        assert torch.all(out.abs() <= x.abs())


def test_cbam_composition():
    torch.manual_seed(3)
    cbam = CBAM(8, 4).double()
    x = torch.randn(1, 8, 6, 6, dtype=torch.float64)
    xc = x * cbam.channel(x)
    assert torch.allclose(cbam(x), xc * cbam.spatial(xc), atol=1e-12)

    cbam.bypass_gates = True
    assert torch.equal(cbam(x), x)


def test_cbam_gradcheck():
    torch.manual_seed(4)
    cbam = CBAM(4, 2, kernel_size=3).double()
    x = torch.randn(1, 4, 4, 4, dtype=torch.float64, requires_grad=True)
    names = [n for n, _ in cbam.named_parameters()]
    params = tuple(p.detach().clone().requires_grad_(True) for p in cbam.parameters())

    def fn(x, *tensors):
        return functional_call(cbam, dict(zip(names, tensors)), (x,)).sum()

    assert gradcheck(fn, (x,) + params, eps=1e-5, atol=1e-6, rtol=1e-4)


def test_channel_attention_degenerate():
    x = torch.randn(1, 4, 3, 3, dtype=torch.float64)
    W1 = torch.zeros(2, 4, 1, 1, dtype=torch.float64)
    W2 = torch.randn(4, 2, 1, 1, dtype=torch.float64)
    assert torch.all(channel_attention(x, W1, W2) == 0.5)

    # Constant maps pool to the same value twice
    const = torch.arange(4, dtype=torch.float64).view(1, 4, 1, 1).expand(1, 4, 3, 3)
    W1 = torch.randn(2, 4, 1, 1, dtype=torch.float64)
    pooled = torch.arange(4, dtype=torch.float64)
    mlp = W2[:, :, 0, 0] @ torch.relu(W1[:, :, 0, 0] @ pooled)
    assert torch.allclose(channel_attention(const, W1, W2)[0, :, 0, 0], torch.sigmoid(2 * mlp), atol=1e-12)


def test_spatial_attention_functional():
    x = torch.randn(1, 3, 6, 6, dtype=torch.float64)
    w = torch.zeros(1, 2, 7, 7, dtype=torch.float64)
    b = torch.zeros(1, dtype=torch.float64)
    assert torch.all(spatial_attention(x, w, b) == 0.5)

    # Circular padding makes the map equivariant to wrapped shifts
    w = torch.randn(1, 2, 3, 3, dtype=torch.float64)
    a = spatial_attention(x, w, b, 'circular')
    shifted = spatial_attention(torch.roll(x, (1, 2), dims=(2, 3)), w, b, 'circular')
    assert torch.allclose(shifted, torch.roll(a, (1, 2), dims=(2, 3)), atol=1e-12)


def test_cbam_functional():
    torch.manual_seed(5)
    module = CBAM(8, 4).double()
    x = torch.randn(2, 8, 6, 6, dtype=torch.float64)
    assert torch.equal(cbam(x, module.channel, module.spatial), module(x))
