"""Convolutional backbones for the concept predictor.

Two options: a compact 3-block CNN sized for desk-scale runs on CPU, and an
Inception-style deep network (torchvision's InceptionV3 adapted to grayscale
input) for full-scale parity. Both expose ``cam_layer``, the final
convolutional activation module used by gradient-CAM hooks.
"""

from __future__ import annotations

import torch
from torch import nn

from ..errors import ModelError


class CompactCNN(nn.Module):
    """Three conv blocks over (image, x, y) channels, then a GAP classifier.

    Coordinate channels keep location-coded findings separable despite the
    global pooling; the pooled head keeps spatially-averaged gradients
    proportional to per-channel class evidence, so gradient-CAM maps stay
    faithful.
    """

    def __init__(self, n_outputs: int, image_size: int):
        super().__init__()
        if image_size % 8 != 0 or image_size < 32:
            raise ModelError(
                f"compact backbone needs image_size divisible by 8 and >= 32, got {image_size}"
            )
        self.image_size = image_size
        coords = torch.linspace(-1.0, 1.0, image_size)
        yy, xx = torch.meshgrid(coords, coords, indexing="ij")
        self.register_buffer("coord_grid", torch.stack([xx, yy]).unsqueeze(0))

        def block(cin: int, cout: int) -> nn.Sequential:
            return nn.Sequential(
                nn.Conv2d(cin, cout, 3, padding=1),
                nn.BatchNorm2d(cout),
                nn.ReLU(),
                nn.MaxPool2d(2),
            )

        self.features = nn.Sequential(block(3, 24), block(24, 48), block(48, 96))
        self.cam_layer = self.features[2][2]  # last ReLU before final pooling
        head = nn.Linear(96, n_outputs)
        nn.init.constant_(head.bias, -2.0)  # start near the sparse-concept base rate
        self.classifier = nn.Sequential(
            nn.AdaptiveAvgPool2d(1),
            nn.Flatten(),
            nn.Linear(96, 96),
            nn.ReLU(),
            head,
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        grid = self.coord_grid.expand(x.shape[0], -1, -1, -1)
        return self.classifier(self.features(torch.cat([x, grid], dim=1)))


class InceptionBackbone(nn.Module):
    """Grayscale wrapper around torchvision InceptionV3 (min input 75x75)."""

    def __init__(self, n_outputs: int, image_size: int):
        super().__init__()
        if image_size < 75:
            raise ModelError(f"inception backbone needs image_size >= 75, got {image_size}")
        from torchvision.models import inception_v3

        self.image_size = image_size
        # No aux head: its fixed 5x5 pooling assumes near-canonical (299px)
        # inputs and breaks on smaller studies.
        self.net = inception_v3(weights=None, aux_logits=False, init_weights=True,
                                num_classes=n_outputs)
        self.cam_layer = self.net.Mixed_7c

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        x = x.expand(-1, 3, -1, -1)
        out = self.net(x)
        return out.logits if isinstance(out, tuple) else out


def build_backbone(name: str, n_outputs: int, image_size: int) -> nn.Module:
    if name == "small":
        return CompactCNN(n_outputs, image_size)
    if name == "paper":
        return InceptionBackbone(n_outputs, image_size)
    raise ModelError(f"unknown backbone {name!r}")
