"""ST-GCN activity backbone and its feature extraction surface.

The backbone alternates graph convolutions over the skeleton with temporal
convolutions over frames.  Its last activation map before global pooling is
the transfer representation handed to the kinesics head; the pooled vector is
exposed alongside it.
"""

from dataclasses import dataclass, field

import numpy as np
import torch
from torch import nn

from .graph import SkeletonGraph, build_graph


@dataclass
class BackboneConfig:
    num_classes: int
    channels: list = field(
        default_factory=lambda: [64, 64, 64, 64, 128, 128, 128, 256, 256, 256]
    )
    # temporal downsampling at the first 128- and 256-channel stages
    strides: list = None
    temporal_kernel: int = 9
    dropout: float = 0.5
    in_channels: int = 3
    num_frames: int = 64
    num_joints: int = 25
    num_persons: int = 2
    partition_strategy: str = "spatial"
    edge_importance: bool = True

    def __post_init__(self):
        if self.strides is None:
            self.strides = [1] * len(self.channels)
            for i in range(1, len(self.channels)):
                if self.channels[i] != self.channels[i - 1]:
                    self.strides[i] = 2
        if len(self.strides) != len(self.channels):
            raise ValueError("strides and channels must have equal length")


@dataclass
class FeatureMap:
    """Final-hidden-layer activations: pre-pooling map plus the pooled vector."""

    map: np.ndarray     # (C', T', V)
    pooled: np.ndarray  # (C',)


class GraphConv(nn.Module):
    """Spatial graph convolution: one learned transform per adjacency partition."""

    def __init__(self, in_channels, out_channels, adjacency, edge_importance=True):
        super().__init__()
        self.register_buffer("adjacency", torch.as_tensor(adjacency))
        k = adjacency.shape[0]
        self.conv = nn.Conv2d(in_channels, out_channels * k, kernel_size=1)
        if edge_importance:
            self.edge_weight = nn.Parameter(torch.ones_like(self.adjacency))
        else:
            self.edge_weight = None

    def forward(self, x):
        n, _, t, v = x.shape
        a = self.adjacency
        if self.edge_weight is not None:
            a = a * self.edge_weight
        x = self.conv(x)
        x = x.view(n, a.shape[0], -1, t, v)
        return torch.einsum("nkctv,kvw->nctw", x, a)


class STGCNBlock(nn.Module):
    def __init__(self, in_channels, out_channels, adjacency, temporal_kernel=9,
                 stride=1, dropout=0.0, residual=True, edge_importance=True):
        super().__init__()
        pad = (temporal_kernel - 1) // 2
        self.gcn = GraphConv(in_channels, out_channels, adjacency, edge_importance)
        self.tcn = nn.Sequential(
            nn.BatchNorm2d(out_channels),
            nn.ReLU(inplace=True),
            nn.Conv2d(out_channels, out_channels, (temporal_kernel, 1),
                      stride=(stride, 1), padding=(pad, 0)),
            nn.BatchNorm2d(out_channels),
            nn.Dropout(dropout),
        )
        if not residual:
            self.residual = None
        elif in_channels == out_channels and stride == 1:
            self.residual = nn.Identity()
        else:
            self.residual = nn.Sequential(
                nn.Conv2d(in_channels, out_channels, 1, stride=(stride, 1)),
                nn.BatchNorm2d(out_channels),
            )
        self.relu = nn.ReLU(inplace=True)

    def forward(self, x):
        res = 0 if self.residual is None else self.residual(x)
        x = self.tcn(self.gcn(x))
        return self.relu(x + res)


class STGCNBackbone(nn.Module):
    """Stacked ST-GCN blocks, person-pooled features, and a classifier layer.

    Input tensor layout is (N, C, T, V, M).  Both persons run through shared
    weights; their activation maps are max-pooled before classification, so
    the output is invariant to person order.
    """

    def __init__(self, config: BackboneConfig, graph: SkeletonGraph = None):
        super().__init__()
        if graph is None:
            graph = build_graph(strategy=config.partition_strategy)
        if graph.num_joints != config.num_joints:
            raise ValueError(
                f"graph has {graph.num_joints} joints, config expects "
                f"{config.num_joints}"
            )
        self.config = config
        self.graph = graph
        self.data_bn = nn.BatchNorm1d(config.in_channels * config.num_joints)
        blocks = []
        in_ch = config.in_channels
        for i, (out_ch, stride) in enumerate(zip(config.channels, config.strides)):
            blocks.append(
                STGCNBlock(
                    in_ch, out_ch, graph.adjacency,
                    temporal_kernel=config.temporal_kernel,
                    stride=stride,
                    dropout=config.dropout,
                    residual=(i > 0),
                    edge_importance=config.edge_importance,
                )
            )
            in_ch = out_ch
        self.blocks = nn.ModuleList(blocks)
        self.fc = nn.Linear(in_ch, config.num_classes)

    @property
    def feature_channels(self) -> int:
        return self.config.channels[-1]

    def feature_shape(self):
        """(C', T', V) of the pre-pooling feature map, fixed by the config."""
        t = self.config.num_frames
        for s in self.config.strides:
            t = (t + s - 1) // s
        return (self.config.channels[-1], t, self.config.num_joints)

    def features(self, x):
        """Person-pooled final-hidden-layer map, shape (N, C', T', V)."""
        n, c, t, v, m = x.shape
        if (c, v, m) != (self.config.in_channels, self.config.num_joints,
                         self.config.num_persons):
            raise ValueError(
                f"input (C,V,M)=({c},{v},{m}) does not match config "
                f"({self.config.in_channels},{self.config.num_joints},"
                f"{self.config.num_persons})"
            )
        if t != self.config.num_frames:
            raise ValueError(f"input T={t}, config expects {self.config.num_frames}")
        # (N, C, T, V, M) -> (N*M, C, T, V) with shared weights per person
        x = x.permute(0, 4, 3, 1, 2).reshape(n * m, v * c, t)
        x = self.data_bn(x)
        x = x.view(n, m, v, c, t).permute(0, 1, 3, 4, 2).reshape(n * m, c, t, v)
        for block in self.blocks:
            x = block(x)
        x = x.view(n, m, *x.shape[1:])
        return x.max(dim=1).values

    def forward(self, x):
        feat = self.features(x)
        pooled = feat.mean(dim=(2, 3))
        return self.fc(pooled), feat


def normalize_sequence(seq: np.ndarray) -> np.ndarray:
    """Center a (T, M, V, C) sequence on the mean pelvis of the tracked persons.

    Using the mean over all non-empty persons (rather than person 1 alone)
    keeps the result invariant to person order; zero-padded absent persons are
    excluded so padding does not drag the origin.
    """
    seq = seq.astype(np.float32)
    pelvis = seq[:, :, 0, :]  # (T, M, C)
    present = np.abs(seq).sum(axis=(0, 2, 3)) > 0  # (M,)
    if not present.any():
        return seq
    offset = pelvis[:, present, :].mean(axis=(0, 1))  # (C,)
    out = seq - offset[None, None, None, :]
    out[:, ~present] = 0.0
    return out


def to_model_tensor(seq: np.ndarray) -> torch.Tensor:
    """(T, M, V, C) sample array -> (C, T, V, M) normalized model tensor."""
    seq = normalize_sequence(seq)
    return torch.from_numpy(np.ascontiguousarray(seq.transpose(3, 0, 2, 1)))


def backbone_forward(seq: np.ndarray, model: STGCNBackbone):
    """Run one (T, M, V, C) sample through the backbone in eval mode.

    Returns (logits, FeatureMap) as numpy arrays.
    """
    was_training = model.training
    model.eval()
    try:
        with torch.no_grad():
            x = to_model_tensor(seq).unsqueeze(0)
            logits, feat = model(x)
    finally:
        model.train(was_training)
    feat = feat[0].numpy()
    return logits[0].numpy(), FeatureMap(map=feat, pooled=feat.mean(axis=(1, 2)))


def predict_activity(logits: np.ndarray) -> int:
    """Argmax class index; ties break toward the lowest index."""
    logits = np.asarray(logits)
    if not np.all(np.isfinite(logits)):
        raise ValueError("non-finite logits")
    return int(np.argmax(logits))


def extract_features(bundle, model: STGCNBackbone) -> dict:
    """Eval-mode FeatureMap for every record, keyed by sample name."""
    out = {}
    for rec in bundle.records:
        try:
            _, feat = backbone_forward(rec.keypoint, model)
        except Exception as e:
            raise RuntimeError(f"feature extraction failed for {rec.frame_dir}") from e
        out[rec.frame_dir] = feat
    return out
