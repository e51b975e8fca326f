"""Toy model registry for the console scripts and tests."""

from __future__ import annotations

import torch
from torch import nn

from .errors import UnknownLayer


class Tiny2Conv(nn.Module):
    """conv -> relu -> conv; the smallest chain worth pruning."""

    def __init__(self, in_channels=3, hidden=8, out_channels=4):
        super().__init__()
        self.conv1 = nn.Conv2d(in_channels, hidden, 3, padding=1)
        self.relu = nn.ReLU()
        self.conv2 = nn.Conv2d(hidden, out_channels, 3, padding=1)

    def forward(self, x):
        return self.conv2(self.relu(self.conv1(x)))


class ConvBn(nn.Module):
    """conv -> bn -> relu -> conv; exercises norm-state slicing."""

    def __init__(self, in_channels=3, hidden=8, out_channels=4):
        super().__init__()
        self.conv1 = nn.Conv2d(in_channels, hidden, 3, padding=1)
        self.bn1 = nn.BatchNorm2d(hidden)
        self.relu = nn.ReLU()
        self.conv2 = nn.Conv2d(hidden, out_channels, 3, padding=1)

    def forward(self, x):
        return self.conv2(self.relu(self.bn1(self.conv1(x))))


class ConvPoolLinear(nn.Module):
    """conv -> relu -> global pool -> linear; 1:1 channel-to-feature head."""

    def __init__(self, in_channels=3, hidden=8, classes=5):
        super().__init__()
        self.conv1 = nn.Conv2d(in_channels, hidden, 3, padding=1)
        self.relu = nn.ReLU()
        self.pool = nn.AdaptiveAvgPool2d(1)
        self.head = nn.Linear(hidden, classes)

    def forward(self, x):
        pooled = self.pool(self.relu(self.conv1(x)))
        return self.head(pooled.flatten(1))


REGISTRY = {
    "tiny2conv": Tiny2Conv,
    "convbn": ConvBn,
    "convpoollinear": ConvPoolLinear,
}


def build_model(name: str, seed: int = 0) -> nn.Module:
    if name not in REGISTRY:
        raise UnknownLayer(f"unknown model {name!r}; choose from {sorted(REGISTRY)}")
    torch.manual_seed(seed)
    return REGISTRY[name]()
