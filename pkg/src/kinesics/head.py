"""Trainable CNN head mapping frozen backbone features to kinesic categories."""

from dataclasses import dataclass, field

import numpy as np
import torch
from torch import nn

from .backbone import FeatureMap
from .taxonomy import KinesicCategory


@dataclass
class HeadConfig:
    feature_shape: tuple  # (C', T', V) of the backbone feature map
    categories: list = field(default_factory=lambda: list(KinesicCategory))
    conv_channels: list = field(default_factory=lambda: [128, 64])
    kernel_size: int = 3
    dropout: float = 0.5

    def __post_init__(self):
        self.feature_shape = tuple(self.feature_shape)
        self.categories = [KinesicCategory(c) for c in self.categories]
        if len(self.categories) < 2:
            raise ValueError("need at least two kinesic categories")
        if len(set(self.categories)) != len(self.categories):
            raise ValueError("duplicate categories")

    @property
    def num_categories(self) -> int:
        return len(self.categories)


class KinesicsHead(nn.Module):
    """Small 2D CNN over the (time, joint) plane of the backbone feature map."""

    def __init__(self, config: HeadConfig):
        super().__init__()
        self.config = config
        c_in = config.feature_shape[0]
        pad = config.kernel_size // 2
        layers = []
        for c_out in config.conv_channels:
            layers += [
                nn.Conv2d(c_in, c_out, config.kernel_size, padding=pad),
                nn.BatchNorm2d(c_out),
                nn.ReLU(inplace=True),
                nn.MaxPool2d(2, ceil_mode=True),
            ]
            c_in = c_out
        self.convs = nn.Sequential(*layers)
        self.pool = nn.AdaptiveAvgPool2d(1)
        self.dropout = nn.Dropout(config.dropout)
        self.fc = nn.Linear(c_in, config.num_categories)

    def forward(self, x):
        if tuple(x.shape[1:]) != self.config.feature_shape:
            raise ValueError(
                f"feature shape {tuple(x.shape[1:])} does not match config "
                f"{self.config.feature_shape}"
            )
        x = self.convs(x)
        x = self.pool(x).flatten(1)
        return self.fc(self.dropout(x))


def _as_map(features) -> np.ndarray:
    if isinstance(features, FeatureMap):
        return features.map
    return np.asarray(features, dtype=np.float32)


def head_forward(features, model: KinesicsHead) -> np.ndarray:
    """Eval-mode logits for one feature map, as numpy."""
    was_training = model.training
    model.eval()
    try:
        with torch.no_grad():
            x = torch.from_numpy(_as_map(features)).unsqueeze(0)
            logits = model(x)
    finally:
        model.train(was_training)
    return logits[0].numpy()


def predict_kinesic(features, model: KinesicsHead) -> KinesicCategory:
    """Argmax kinesic category; ties break toward the lowest output index."""
    logits = head_forward(features, model)
    if not np.all(np.isfinite(logits)):
        raise ValueError("non-finite head logits")
    return model.config.categories[int(np.argmax(logits))]
