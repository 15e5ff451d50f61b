"""Toy-scale dilated U-Net for single-channel tile segmentation.

A standard U-Net encoder/decoder with a sequential dilation module in
the bottleneck: dilated 3x3 convolutions applied one after another with
increasing rates, their outputs summed residually with the bottleneck
input so the receptive field grows without losing resolution. Batch
normalization and dropout are applied in every convolution block.

The architecture is documented here as this package's own choice at toy
scale (base 16 channels, depth 4); channel counts and dropout placement
are not claimed to match any particular clinical-scale model.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn


@dataclass(frozen=True)
class ModelSpec:
    depth: int = 4  # number of 2x down-sampling stages
    base_channels: int = 16
    dilations: tuple[int, ...] = (1, 2, 4, 8)
    dropout: float = 0.1
    batch_norm: bool = True

    def __post_init__(self):
        if self.depth < 1 or self.base_channels < 1:
            raise ValueError("depth and base_channels must be >= 1")
        d = tuple(int(x) for x in self.dilations)
        if not d or d[0] != 1 or list(d) != sorted(set(d)):
            raise ValueError(
                f"dilations must be strictly increasing and start at 1, got {d}")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError(f"dropout must be in [0, 1), got {self.dropout}")
        object.__setattr__(self, "dilations", d)


def _conv_block(in_ch: int, out_ch: int, spec: ModelSpec, dilation: int = 1) -> nn.Sequential:
    layers: list[nn.Module] = [
        nn.Conv2d(in_ch, out_ch, kernel_size=3, padding=dilation, dilation=dilation)
    ]
    if spec.batch_norm:
        layers.append(nn.BatchNorm2d(out_ch))
    layers.append(nn.ReLU(inplace=True))
    if spec.dropout > 0:
        layers.append(nn.Dropout2d(spec.dropout))
    return nn.Sequential(*layers)


class SequentialDilationModule(nn.Module):
    """Chained dilated convolutions whose stage outputs are summed residually."""

    def __init__(self, channels: int, spec: ModelSpec):
        super().__init__()
        self.stages = nn.ModuleList(
            _conv_block(channels, channels, spec, dilation=d) for d in spec.dilations
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        acc = x
        y = x
        for stage in self.stages:
            y = stage(y)
            acc = acc + y
        return acc


class DilatedUNet(nn.Module):
    """U-Net with a sequential dilation bottleneck; sigmoid probability output."""

    def __init__(self, spec: ModelSpec | None = None):
        super().__init__()
        spec = spec or ModelSpec()
        self.spec = spec
        chans = [spec.base_channels * 2 ** i for i in range(spec.depth + 1)]

        self.encoders = nn.ModuleList()
        in_ch = 1
        for ch in chans[:-1]:
            self.encoders.append(nn.Sequential(
                _conv_block(in_ch, ch, spec), _conv_block(ch, ch, spec)))
            in_ch = ch
        self.pool = nn.MaxPool2d(2)

        self.bottleneck_in = _conv_block(chans[-2], chans[-1], spec)
        self.dilation = SequentialDilationModule(chans[-1], spec)

        self.upconvs = nn.ModuleList()
        self.decoders = nn.ModuleList()
        for hi, lo in zip(chans[:0:-1], chans[-2::-1]):
            self.upconvs.append(nn.ConvTranspose2d(hi, lo, kernel_size=2, stride=2))
            self.decoders.append(nn.Sequential(
                _conv_block(2 * lo, lo, spec), _conv_block(lo, lo, spec)))

        self.head = nn.Conv2d(chans[0], 1, kernel_size=1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        """Map (N, 1, H, W) inputs in [0, 1] to probabilities of airway."""
        skips = []
        for enc in self.encoders:
            x = enc(x)
            skips.append(x)
            x = self.pool(x)
        x = self.dilation(self.bottleneck_in(x))
        for up, dec, skip in zip(self.upconvs, self.decoders, reversed(skips)):
            x = up(x)
            x = dec(torch.cat([x, skip], dim=1))
        return torch.sigmoid(self.head(x))
