"""
Attention.
Channel-then-spatial attention gating (CBAM) used inside the translator's shallow layers.
"""

import torch
import torch.nn as nn
import torch.nn.functional as F


def channel_attention(x, W1, W2):
    """
    Channel weights sigmoid(MLP(avgpool(x)) + MLP(maxpool(x))) of a shared bias-free MLP.

    Parameters
    ----------
    x : Tensor
        Feature map (B x C x H x W).
    W1 : Tensor
        First MLP layer as a 1x1 convolution weight (C/r x C x 1 x 1).
    W2 : Tensor
        Second MLP layer (C x C/r x 1 x 1).

    Returns
    -------
    a : Tensor
        Weights in (0, 1) of shape B x C x 1 x 1.
    """

    def mlp(v):
        return F.conv2d(F.relu(F.conv2d(v, W1)), W2)

    avg = x.mean(dim=(2, 3), keepdim=True)
    mx = x.amax(dim=(2, 3), keepdim=True)
    return torch.sigmoid(mlp(avg) + mlp(mx))


def spatial_attention(x, weight, bias, padding_mode='reflect'):
    """
    Spatial weights sigmoid(conv_kxk([mean_c(x); max_c(x)])) of shape B x 1 x H x W.

    Maps are reflect-padded; when a side is not larger than the padding, replicate padding is used instead.
    """

    pad = weight.shape[-1] // 2
    s = torch.cat([x.mean(dim=1, keepdim=True), x.amax(dim=1, keepdim=True)], dim=1)
    if padding_mode == 'reflect' and min(s.shape[-2:]) <= pad:
        padding_mode = 'replicate'
    s = F.pad(s, (pad,) * 4, mode=padding_mode)
    return torch.sigmoid(F.conv2d(s, weight, bias))


def cbam(x, channel, spatial):
    """
    Channel gating followed by spatial gating of the channel-gated map.
    """

    xc = x * channel(x)
    return xc * spatial(xc)


class ChannelAttention(nn.Module):

    def __init__(self, channels, reduction=8):
        super().__init__()
        if reduction > channels:
            raise ValueError('reduction={0} is larger than the number of channels ({1}).'.format(reduction, channels))
        if channels % reduction != 0:
            raise ValueError('channels={0} must be divisible by reduction={1}.'.format(channels, reduction))
        self.mlp = nn.Sequential(
            nn.Conv2d(channels, channels // reduction, 1, bias=False),
            nn.ReLU(),
            nn.Conv2d(channels // reduction, channels, 1, bias=False),
        )

    def forward(self, x):
        return channel_attention(x, self.mlp[0].weight, self.mlp[2].weight)


class SpatialAttention(nn.Module):
    """
    Setting `padding_mode` to 'circular' wraps the borders.
    """

    def __init__(self, kernel_size=7, padding_mode='reflect'):
        super().__init__()
        if kernel_size % 2 != 1:
            raise ValueError('kernel_size must be odd, got {0}.'.format(kernel_size))
        self.padding_mode = padding_mode
        self.conv = nn.Conv2d(2, 1, kernel_size, padding=0, bias=True)

    def forward(self, x):
        return spatial_attention(x, self.conv.weight, self.conv.bias, self.padding_mode)


class CBAM(nn.Module):
    """
    Sequential channel then spatial gating: x' = sa(x * ca(x)) * (x * ca(x)).

    Parameters
    ----------
    channels : int
        Number of input channels.
    reduction : int
        Channel MLP reduction ratio.
    kernel_size : int
        Spatial attention kernel size.
    """

    def __init__(self, channels, reduction=8, kernel_size=7):
        super().__init__()
        self.channel = ChannelAttention(channels, reduction)
        self.spatial = SpatialAttention(kernel_size)
        # Test hook: gates forced to ones
        self.bypass_gates = False

    def gates(self, x):
        if self.bypass_gates:
            ones = x.new_ones(())
            return ones, ones
        ch = self.channel(x)
        return ch, self.spatial(x * ch)

    def forward(self, x):
        if self.bypass_gates:
            return x
        return cbam(x, self.channel, self.spatial)
