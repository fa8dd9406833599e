"""U-Net generator and convolutional discriminator.

The generator is a symmetric encoder/decoder with skip connections:
4x4 stride-2 convolutions, leaky ReLU + batch norm down the encoder,
ReLU + batch norm up the decoder, tanh output, and 0.5 dropout on the
three innermost decoder blocks (kept active at test time when the
config asks for stochastic draws). The discriminator is a patch
classifier over the conditions/imagery concatenation with a sigmoid
output. Two reference sizes are provided plus arbitrary toy sizes for
small inputs; an n-stage generator needs the input extent divisible by
2**n.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import torch
from torch import nn

GAN_1GB_FILTERS = (64, 128, 256, 512, 512, 512, 512, 512)
GAN_1GB_DISC = (64, 128, 256, 512, 1)
GAN_7GB_FILTERS = (160, 320, 640, 1280, 1280, 1280, 1280, 1280)
GAN_7GB_DISC = (160, 320, 640, 1280, 1)


@dataclass(frozen=True)
class GanConfig:
    generator_filters: tuple[int, ...] = GAN_1GB_FILTERS
    discriminator_filters: tuple[int, ...] = GAN_1GB_DISC
    decoder_filters: tuple[int, ...] | None = None  # None -> mirror the encoder
    in_channels: int = 32
    out_channels: int = 4
    kernel: int = 4
    dropout: float = 0.5
    adversarial_weight: float = 1.0
    reconstruction_weight: float = 100.0  # L1 weight against the target imagery
    use_discriminator: bool = True
    test_time_dropout: bool = True

    def __post_init__(self):
        object.__setattr__(self, "generator_filters", tuple(self.generator_filters))
        object.__setattr__(
            self, "discriminator_filters", tuple(self.discriminator_filters)
        )
        if self.decoder_filters is not None:
            mirror = tuple(reversed(self.generator_filters))
            if tuple(self.decoder_filters) != mirror:
                raise ValueError(
                    f"decoder filters {self.decoder_filters} break the encoder/"
                    f"decoder symmetry (expected {mirror})"
                )
        if len(self.generator_filters) < 2:
            raise ValueError("generator needs at least two stages")
        if self.discriminator_filters[-1] != 1:
            raise ValueError("discriminator must end in a single-channel map")


def gan_1gb(in_channels: int = 32) -> GanConfig:
    return GanConfig(in_channels=in_channels)


def gan_7gb(in_channels: int = 32) -> GanConfig:
    return GanConfig(
        generator_filters=GAN_7GB_FILTERS,
        discriminator_filters=GAN_7GB_DISC,
        in_channels=in_channels,
    )


class _Down(nn.Module):
    def __init__(self, cin, cout, kernel, norm=True):
        super().__init__()
        layers = [nn.Conv2d(cin, cout, kernel, stride=2, padding=1, bias=not norm)]
        if norm:
            layers.append(nn.BatchNorm2d(cout))
        layers.append(nn.LeakyReLU(0.2, inplace=True))
        self.block = nn.Sequential(*layers)

    def forward(self, x):
        return self.block(x)


class _Up(nn.Module):
    def __init__(self, cin, cout, kernel, dropout):
        super().__init__()
        self.deconv = nn.ConvTranspose2d(cin, cout, kernel, stride=2, padding=1, bias=False)
        self.norm = nn.BatchNorm2d(cout)
        self.act = nn.ReLU(inplace=True)
        self.dropout_p = dropout

    def forward(self, x, active_dropout):
        x = self.act(self.norm(self.deconv(x)))
        if self.dropout_p > 0:
            # explicit call so draws stay stochastic at test time on demand
            x = nn.functional.dropout(x, self.dropout_p, training=active_dropout)
        return x


class UNetGenerator(nn.Module):
    """Conditions (B, Cin, H, W) -> imagery (B, 4, H, W) in [-1, 1]."""

    def __init__(self, cfg: GanConfig):
        super().__init__()
        filters = cfg.generator_filters
        self.cfg = cfg
        downs = []
        cin = cfg.in_channels
        for i, f in enumerate(filters):
            downs.append(_Down(cin, f, cfg.kernel, norm=0 < i < len(filters) - 1))
            cin = f
        self.downs = nn.ModuleList(downs)

        ups = []
        rev = tuple(reversed(filters))
        for i in range(len(filters) - 1):
            cin = rev[i] if i == 0 else rev[i] * 2
            dropout = cfg.dropout if i < 3 else 0.0
            ups.append(_Up(cin, rev[i + 1], cfg.kernel, dropout))
        self.ups = nn.ModuleList(ups)
        self.final = nn.ConvTranspose2d(
            filters[0] * 2, cfg.out_channels, cfg.kernel, stride=2, padding=1
        )

    def forward(self, x, active_dropout: bool | None = None):
        if active_dropout is None:
            active_dropout = self.training or self.cfg.test_time_dropout
        skips = []
        for down in self.downs:
            x = down(x)
            skips.append(x)
        x = skips[-1]
        for i, up in enumerate(self.ups):
            x = up(x, active_dropout)
            x = torch.cat([x, skips[-2 - i]], dim=1)
        return torch.tanh(self.final(x))


class PatchDiscriminator(nn.Module):
    """Probability map that a (conditions, imagery) pair is real."""

    def __init__(self, cfg: GanConfig):
        super().__init__()
        filters = cfg.discriminator_filters
        layers: list[nn.Module] = []
        cin = cfg.in_channels + cfg.out_channels
        for i, f in enumerate(filters[:-1]):
            stride = 2 if i < len(filters) - 2 else 1
            layers.append(
                nn.Conv2d(cin, f, cfg.kernel, stride=stride, padding=1, bias=i == 0)
            )
            if i > 0:
                layers.append(nn.BatchNorm2d(f))
            layers.append(nn.LeakyReLU(0.2, inplace=True))
            cin = f
        layers.append(nn.Conv2d(cin, 1, cfg.kernel, stride=1, padding=1))
        layers.append(nn.Sigmoid())
        self.net = nn.Sequential(*layers)

    def forward(self, conditions, imagery):
        return self.net(torch.cat([conditions, imagery], dim=1))


def count_parameters(module: nn.Module) -> int:
    return sum(p.numel() for p in module.parameters())


def build_models(
    cfg: GanConfig, device: str = "cpu"
) -> tuple[UNetGenerator, PatchDiscriminator, dict]:
    """Instantiate both networks and report their parameter counts.

    ``device='meta'`` builds shape-only models, which makes the
    parameter audit of the full-size configurations cheap.
    """
    with torch.device(device):
        generator = UNetGenerator(cfg)
        discriminator = PatchDiscriminator(cfg)
    counts = {
        "generator": count_parameters(generator),
        "discriminator": count_parameters(discriminator),
    }
    counts["total"] = counts["generator"] + counts["discriminator"]
    return generator, discriminator, counts
