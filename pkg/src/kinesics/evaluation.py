"""Metrics, confusion matrices, and the five-subset experiment harness."""

import hashlib
import json
import logging
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from . import __version__
from .backbone import BackboneConfig, predict_activity, backbone_forward
from .checkpoint import config_to_dict, save_checkpoint, state_checksum
from .dataset import filter_by_labels
from .graph import build_graph
from .head import HeadConfig, head_forward
from .taxonomy import KinesicCategory, categories_present, kinesic_of
from .training import TrainConfig, extract_feature_set, train_backbone, train_head

log = logging.getLogger(__name__)

# Activity-label subsets of the five reference experiments, keyed by size.
TABLE2_SUBSETS = {
    4: [2, 4, 8, 11],
    6: [2, 4, 5, 7, 8, 11],
    8: [0, 2, 4, 6, 7, 8, 9, 11],
    10: [0, 1, 2, 3, 5, 6, 7, 8, 10, 11],
    12: list(range(12)),
}

# Published (backbone %, head %) accuracy pairs per subset size.
REFERENCE_ACCURACIES = {
    4: (77.0, 85.0),
    6: (75.0, 81.0),
    8: (70.0, 70.0),
    10: (67.0, 58.0),
    12: (55.0, 48.0),
}


def accuracy(predictions, labels) -> float:
    """Percent of matching prediction/label pairs."""
    predictions = np.asarray(predictions)
    labels = np.asarray(labels)
    if predictions.shape != labels.shape:
        raise ValueError("predictions and labels must have equal length")
    if predictions.size == 0:
        raise ValueError("empty input")
    # same expression order as 100 * trace(cm) / total, so the two agree exactly
    return 100.0 * int(np.sum(predictions == labels)) / predictions.size


def confusion_matrix(predictions, labels, k: int) -> np.ndarray:
    """k x k counts; entry (i, j) counts samples with label i predicted j."""
    predictions = np.asarray(predictions)
    labels = np.asarray(labels)
    if predictions.shape != labels.shape:
        raise ValueError("predictions and labels must have equal length")
    if ((predictions < 0) | (predictions >= k) | (labels < 0) | (labels >= k)).any():
        raise ValueError(f"values out of range [0, {k})")
    cm = np.zeros((k, k), dtype=np.int64)
    np.add.at(cm, (labels, predictions), 1)
    return cm


def aggregate_confusion_by_category(activity_cm, labels, categories):
    """Collapse an activity-level confusion matrix through the taxonomy."""
    cat_index = {c: i for i, c in enumerate(categories)}
    out = np.zeros((len(categories), len(categories)), dtype=np.int64)
    for i, li in enumerate(labels):
        for j, lj in enumerate(labels):
            out[cat_index[kinesic_of(li)], cat_index[kinesic_of(lj)]] += activity_cm[i, j]
    return out


def bundle_checksum(bundle) -> str:
    h = hashlib.sha256()
    for part in (bundle.train_names, bundle.val_names):
        h.update(json.dumps(list(part)).encode())
    for rec in bundle.records:
        h.update(rec.frame_dir.encode())
        h.update(bytes([rec.label]))
        h.update(rec.keypoint.astype("<f4").tobytes())
    return h.hexdigest()


@dataclass
class ExperimentSpec:
    """One subset experiment: which activities, and how both stages train."""

    subset_id: int
    seed: int = 0
    labels: list = None
    backbone_config: BackboneConfig = None
    backbone_train: TrainConfig = None
    head_train: TrainConfig = None
    head_categories: str = "present"  # or "all": always the full five

    def __post_init__(self):
        if self.subset_id not in TABLE2_SUBSETS:
            raise ValueError(
                f"subset_id must be one of {sorted(TABLE2_SUBSETS)}, "
                f"got {self.subset_id}"
            )
        if self.labels is None:
            self.labels = list(TABLE2_SUBSETS[self.subset_id])
        if sorted(self.labels) != sorted(TABLE2_SUBSETS[self.subset_id]):
            raise ValueError(
                f"labels {self.labels} do not match subset {self.subset_id}: "
                f"{TABLE2_SUBSETS[self.subset_id]}"
            )
        if self.backbone_config is None:
            self.backbone_config = BackboneConfig(num_classes=len(self.labels))
        if self.backbone_config.num_classes != len(self.labels):
            raise ValueError("backbone num_classes must equal the subset size")
        if self.backbone_train is None:
            self.backbone_train = TrainConfig(seed=self.seed, epochs=80, lr=0.1)
        if self.head_train is None:
            self.head_train = TrainConfig(seed=self.seed, epochs=50, lr=0.01)
        if self.head_categories not in ("present", "all"):
            raise ValueError("head_categories must be 'present' or 'all'")


@dataclass
class ExperimentResult:
    subset_id: int
    labels: list
    categories: list
    stgcn_accuracy: float
    cnn_accuracy: float
    activity_confusion: np.ndarray
    category_confusion: np.ndarray
    provenance: dict
    backbone_report: dict = None
    head_report: dict = None

    def to_dict(self) -> dict:
        return {
            "subset_id": self.subset_id,
            "labels": list(self.labels),
            "categories": [int(c) for c in self.categories],
            "stgcn_accuracy": self.stgcn_accuracy,
            "cnn_accuracy": self.cnn_accuracy,
            "activity_confusion": self.activity_confusion.tolist(),
            "category_confusion": self.category_confusion.tolist(),
            "provenance": self.provenance,
            "backbone_report": self.backbone_report,
            "head_report": self.head_report,
        }


def run_experiment(spec: ExperimentSpec, bundle, out_dir=None) -> ExperimentResult:
    """Full pipeline for one subset: filter, train backbone, extract features,
    train head, evaluate both stages on the cross-subject test split."""
    if not set(spec.labels) <= bundle.labels():
        missing = sorted(set(spec.labels) - bundle.labels())
        raise ValueError(f"bundle lacks samples for labels {missing}")
    if out_dir is None:
        out_dir = Path(tempfile.mkdtemp(prefix="kinesics-exp-"))
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    sub = filter_by_labels(bundle, spec.labels)
    graph = build_graph(strategy=spec.backbone_config.partition_strategy)

    try:
        model, bb_report, label_index = train_backbone(
            sub, graph, spec.backbone_config, spec.backbone_train
        )
    except Exception as e:
        raise RuntimeError(f"subset {spec.subset_id}: backbone training failed") from e

    backbone_path = out_dir / f"backbone_subset{spec.subset_id}.pt"
    save_checkpoint(
        backbone_path, "backbone", spec.backbone_config, model.state_dict(),
        extra={"val_names": list(sub.val_names),
               "label_index": {str(k): v for k, v in label_index.items()}},
    )

    by_name = sub.record_map()
    test_names = list(sub.val_names)
    if not test_names:
        raise RuntimeError(f"subset {spec.subset_id}: empty test split")
    y_true, y_pred = [], []
    for name in test_names:
        rec = by_name[name]
        from .dataset import resample_time

        seq = resample_time(rec.keypoint, spec.backbone_config.num_frames)
        logits, _ = backbone_forward(seq, model)
        y_true.append(label_index[rec.label])
        y_pred.append(predict_activity(logits))
    stgcn_acc = accuracy(y_pred, y_true)
    activity_cm = confusion_matrix(y_pred, y_true, len(spec.labels))

    feature_set = extract_feature_set(
        _resampled(sub, spec.backbone_config.num_frames), model
    )
    categories = {rec.frame_dir: kinesic_of(rec.label) for rec in sub.records}
    if spec.head_categories == "present":
        cat_list = categories_present(spec.labels)
    else:
        cat_list = list(KinesicCategory)
    head_config = HeadConfig(
        feature_shape=model.feature_shape(), categories=cat_list,
        dropout=spec.backbone_config.dropout,
    )
    try:
        head, head_report, _ = train_head(
            feature_set, categories, head_config, spec.head_train, backbone_path
        )
    except Exception as e:
        raise RuntimeError(f"subset {spec.subset_id}: head training failed") from e

    cat_index = {c: i for i, c in enumerate(cat_list)}
    c_true, c_pred = [], []
    for name in test_names:
        logits = head_forward(feature_set.features[name], head)
        c_true.append(cat_index[categories[name]])
        c_pred.append(int(np.argmax(logits)))
    cnn_acc = accuracy(c_pred, c_true)
    category_cm = confusion_matrix(c_pred, c_true, len(cat_list))

    head_path = out_dir / f"head_subset{spec.subset_id}.pt"
    save_checkpoint(
        head_path, "head", head_config, head.state_dict(),
        extra={"category_index": [int(c) for c in cat_list],
               "backbone_checksum": feature_set.backbone_checksum},
    )

    provenance = {
        "version": __version__,
        "seed": spec.seed,
        "subset_id": spec.subset_id,
        "labels": list(spec.labels),
        "bundle_checksum": bundle_checksum(bundle),
        "backbone_config": config_to_dict(spec.backbone_config),
        "head_config": config_to_dict(head_config),
        "backbone_train": config_to_dict(spec.backbone_train),
        "head_train": config_to_dict(spec.head_train),
        "backbone_checksum": state_checksum(model.state_dict()),
        "head_checksum": state_checksum(head.state_dict()),
        "test_size": len(test_names),
    }
    return ExperimentResult(
        subset_id=spec.subset_id,
        labels=list(spec.labels),
        categories=cat_list,
        stgcn_accuracy=stgcn_acc,
        cnn_accuracy=cnn_acc,
        activity_confusion=activity_cm,
        category_confusion=category_cm,
        provenance=provenance,
        backbone_report=bb_report.to_dict(),
        head_report=head_report.to_dict(),
    )


def _resampled(bundle, num_frames):
    from .dataset import DatasetBundle, SampleRecord, resample_time

    records = [
        SampleRecord(
            frame_dir=r.frame_dir, label=r.label,
            total_frames=num_frames,
            keypoint=resample_time(r.keypoint, num_frames),
        )
        for r in bundle.records
    ]
    return DatasetBundle(
        train_names=list(bundle.train_names),
        val_names=list(bundle.val_names),
        records=records,
    )


def result_from_dict(d: dict) -> ExperimentResult:
    return ExperimentResult(
        subset_id=d["subset_id"],
        labels=list(d["labels"]),
        categories=[KinesicCategory(c) for c in d["categories"]],
        stgcn_accuracy=d["stgcn_accuracy"],
        cnn_accuracy=d["cnn_accuracy"],
        activity_confusion=np.asarray(d["activity_confusion"], dtype=np.int64),
        category_confusion=np.asarray(d["category_confusion"], dtype=np.int64),
        provenance=d.get("provenance", {}),
        backbone_report=d.get("backbone_report"),
        head_report=d.get("head_report"),
    )


def trend_summary(results) -> dict:
    """Descriptive trend over the five subsets: is backbone accuracy
    non-increasing in subset size, and how do the two accuracy columns
    co-vary (Spearman rank correlation)?"""
    ordered = sorted(results, key=lambda r: r.subset_id)
    stgcn = [r.stgcn_accuracy for r in ordered]
    cnn = [r.cnn_accuracy for r in ordered]
    non_increasing = all(a >= b for a, b in zip(stgcn, stgcn[1:]))
    rho = float(stats.spearmanr(stgcn, cnn).statistic)
    return {
        "subset_ids": [r.subset_id for r in ordered],
        "stgcn_accuracies": stgcn,
        "cnn_accuracies": cnn,
        "stgcn_non_increasing": non_increasing,
        "spearman_stgcn_cnn": rho,
    }


def run_table2(bundle, seed=0, make_spec=None, out_dir=None):
    """Run all five subset experiments and summarize the trend.

    make_spec(subset_id, seed) may supply customized ExperimentSpecs, e.g.
    smaller architectures for CI-scale data.
    """
    if not bundle.labels() >= set(range(12)):
        missing = sorted(set(range(12)) - bundle.labels())
        raise ValueError(f"bundle must cover all 12 labels; missing {missing}")
    if make_spec is None:
        make_spec = lambda subset_id, seed: ExperimentSpec(subset_id=subset_id, seed=seed)
    results = []
    for subset_id in sorted(TABLE2_SUBSETS):
        spec = make_spec(subset_id, seed)
        log.info("running subset %d", subset_id)
        results.append(run_experiment(spec, bundle, out_dir=out_dir))
    return results, trend_summary(results)
