"""Training loops for the backbone and the frozen-transfer head.

Both loops are deterministic given (config, seed) with single-worker data
loading.  The head loop additionally enforces the frozen-backbone contract:
the backbone checkpoint's parameter bytes must be identical before and after.
"""

import copy
import logging
import time
from dataclasses import dataclass, field

import numpy as np
import torch
from torch import nn
from torch.utils.data import DataLoader, TensorDataset

from .backbone import STGCNBackbone, to_model_tensor
from .checkpoint import load_checkpoint, state_checksum
from .dataset import resample_time
from .head import KinesicsHead

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    seed: int = 0
    epochs: int = 50
    batch_size: int = 16
    optimizer: str = "sgd"
    lr: float = 0.1
    momentum: float = 0.9
    weight_decay: float = 1e-4
    lr_decay_gamma: float = 0.1
    lr_decay_at: tuple = (0.5, 0.75)  # fractions of total epochs
    early_stop_patience: int = None
    device: str = "cpu"

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


@dataclass
class TrainReport:
    epochs: list = field(default_factory=list)  # per-epoch metric dicts
    best_epoch: int = -1
    best_val_accuracy: float = 0.0
    final_val_accuracy: float = 0.0
    duration_seconds: float = 0.0

    def to_dict(self) -> dict:
        return {
            "epochs": self.epochs,
            "best_epoch": self.best_epoch,
            "best_val_accuracy": self.best_val_accuracy,
            "final_val_accuracy": self.final_val_accuracy,
            "duration_seconds": self.duration_seconds,
        }


@dataclass
class FeatureSet:
    """Extracted feature maps plus the checksum of the backbone that made them."""

    features: dict  # sample name -> FeatureMap
    backbone_checksum: str


def extract_feature_set(bundle, model: STGCNBackbone) -> FeatureSet:
    from .backbone import extract_features

    return FeatureSet(
        features=extract_features(bundle, model),
        backbone_checksum=state_checksum(model.state_dict()),
    )


def bundle_to_tensors(bundle, num_frames, label_index=None):
    """Stack a bundle's records into (train, val) TensorDatasets.

    label_index maps activity labels to contiguous class indices; defaults to
    sorted distinct labels in the bundle.
    """
    if label_index is None:
        label_index = {lab: i for i, lab in enumerate(sorted(bundle.labels()))}
    by_name = bundle.record_map()

    def stack(names):
        xs, ys = [], []
        for name in names:
            rec = by_name[name]
            seq = resample_time(rec.keypoint, num_frames)
            xs.append(to_model_tensor(seq))
            ys.append(label_index[rec.label])
        if not xs:
            return None
        return TensorDataset(torch.stack(xs), torch.tensor(ys, dtype=torch.long))

    return stack(bundle.train_names), stack(bundle.val_names), label_index


def _evaluate(model, dataset, criterion, device):
    model.eval()
    loader = DataLoader(dataset, batch_size=64)
    loss_sum, correct, total = 0.0, 0, 0
    with torch.no_grad():
        for x, y in loader:
            x, y = x.to(device), y.to(device)
            out = model(x)
            logits = out[0] if isinstance(out, tuple) else out
            loss_sum += criterion(logits, y).item() * len(y)
            correct += (logits.argmax(dim=1) == y).sum().item()
            total += len(y)
    return loss_sum / total, 100.0 * correct / total


def fit_classifier(model, train_ds, val_ds, config: TrainConfig,
                   class_weights=None) -> TrainReport:
    """Shared SGD loop; mutates model in place and reloads the best epoch."""
    device = torch.device(config.device)
    model.to(device)
    if config.optimizer != "sgd":
        raise ValueError(f"unsupported optimizer {config.optimizer!r}")
    opt = torch.optim.SGD(
        model.parameters(), lr=config.lr, momentum=config.momentum,
        weight_decay=config.weight_decay,
    )
    milestones = sorted({max(1, int(config.epochs * f)) for f in config.lr_decay_at})
    sched = torch.optim.lr_scheduler.MultiStepLR(
        opt, milestones=milestones, gamma=config.lr_decay_gamma
    )
    weight = None
    if class_weights is not None:
        weight = torch.as_tensor(class_weights, dtype=torch.float32, device=device)
    criterion = nn.CrossEntropyLoss(weight=weight)

    gen = torch.Generator().manual_seed(config.seed)
    loader = DataLoader(
        train_ds, batch_size=config.batch_size, shuffle=True, generator=gen
    )

    if val_ds is None:
        log.warning("no validation samples; using the training set for validation")
        val_ds = train_ds

    report = TrainReport()
    best_state = None
    start = time.monotonic()
    stale = 0
    for epoch in range(config.epochs):
        model.train()
        loss_sum, correct, total = 0.0, 0, 0
        for x, y in loader:
            x, y = x.to(device), y.to(device)
            out = model(x)
            logits = out[0] if isinstance(out, tuple) else out
            loss = criterion(logits, y)
            if not torch.isfinite(loss):
                raise RuntimeError(f"training diverged at epoch {epoch}")
            opt.zero_grad()
            loss.backward()
            opt.step()
            loss_sum += loss.item() * len(y)
            correct += (logits.argmax(dim=1) == y).sum().item()
            total += len(y)
        sched.step()
        val_loss, val_acc = _evaluate(model, val_ds, criterion, device)
        report.epochs.append(
            {
                "epoch": epoch,
                "train_loss": loss_sum / total,
                "train_accuracy": 100.0 * correct / total,
                "val_loss": val_loss,
                "val_accuracy": val_acc,
            }
        )
        if best_state is None or val_acc > report.best_val_accuracy:
            report.best_epoch = epoch
            report.best_val_accuracy = val_acc
            best_state = copy.deepcopy(model.state_dict())
            stale = 0
        else:
            stale += 1
            if (config.early_stop_patience is not None
                    and stale >= config.early_stop_patience):
                log.info("early stop at epoch %d", epoch)
                break
        log.debug("epoch %d: %s", epoch, report.epochs[-1])
    report.final_val_accuracy = report.epochs[-1]["val_accuracy"]
    report.duration_seconds = time.monotonic() - start
    model.load_state_dict(best_state)
    return report


def train_backbone(bundle, graph, backbone_config, train_config: TrainConfig):
    """Train the ST-GCN on the bundle's activity labels.

    backbone_config.num_classes must equal the number of distinct labels in
    the bundle; labels map to class indices in sorted order.
    Returns (model, report, label_index).
    """
    if not bundle.records:
        raise ValueError("empty bundle")
    distinct = sorted(bundle.labels())
    if backbone_config.num_classes != len(distinct):
        raise ValueError(
            f"config num_classes={backbone_config.num_classes} but bundle has "
            f"{len(distinct)} distinct labels {distinct}"
        )
    torch.manual_seed(train_config.seed)
    model = STGCNBackbone(backbone_config, graph)
    train_ds, val_ds, label_index = bundle_to_tensors(
        bundle, backbone_config.num_frames
    )
    if train_ds is None:
        raise ValueError("bundle has no training samples")
    report = fit_classifier(model, train_ds, val_ds, train_config)
    return model, report, label_index


def train_head(feature_set: FeatureSet, categories: dict, head_config,
               train_config: TrainConfig, backbone_checkpoint):
    """Train the kinesics head on frozen backbone features.

    categories maps sample name -> KinesicCategory.  The referenced backbone
    checkpoint must be the one that produced feature_set; its parameter bytes
    are checksummed before and after training and any change is a hard
    failure.  Returns (model, report, (train_names, val_names) used).
    """
    _, ckpt_state, payload = load_checkpoint(backbone_checkpoint, "backbone")
    before = state_checksum(ckpt_state)
    if before != feature_set.backbone_checksum:
        raise ValueError(
            "feature set was not extracted with the referenced backbone "
            f"checkpoint (checksum {feature_set.backbone_checksum[:12]} != "
            f"{before[:12]})"
        )

    cat_index = {c: i for i, c in enumerate(head_config.categories)}
    names = sorted(feature_set.features)
    split = payload.get("extra", {}).get("val_names")
    if split is None:
        raise ValueError("backbone checkpoint lacks the split needed for the head")
    val_names = [n for n in names if n in set(split)]
    train_names = [n for n in names if n not in set(split)]

    def stack(subset):
        xs, ys = [], []
        for name in subset:
            xs.append(torch.from_numpy(feature_set.features[name].map))
            ys.append(cat_index[categories[name]])
        if not xs:
            return None
        return TensorDataset(torch.stack(xs), torch.tensor(ys, dtype=torch.long))

    train_ds, val_ds = stack(train_names), stack(val_names)
    if train_ds is None:
        raise ValueError("no training features")

    # inverse-frequency weights: the adaptor category has a single activity
    counts = np.bincount(
        [cat_index[categories[n]] for n in train_names],
        minlength=head_config.num_categories,
    ).astype(np.float64)
    weights = counts.sum() / np.maximum(counts, 1.0) / head_config.num_categories

    torch.manual_seed(train_config.seed)
    model = KinesicsHead(head_config)
    report = fit_classifier(model, train_ds, val_ds, train_config,
                            class_weights=weights)

    _, ckpt_state_after, _ = load_checkpoint(backbone_checkpoint, "backbone")
    after = state_checksum(ckpt_state_after)
    if after != before:
        raise RuntimeError(
            "frozen-transfer contract violated: backbone checkpoint changed "
            "during head training"
        )
    return model, report, (train_names, val_names)
