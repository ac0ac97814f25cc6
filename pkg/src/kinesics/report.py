"""Experiment report rendering: delimited results table, text summary, and
confusion-matrix figures."""

import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .evaluation import REFERENCE_ACCURACIES, trend_summary
from .taxonomy import activity_name


def _plot_confusion(cm, tick_labels, title, path):
    fig, ax = plt.subplots(figsize=(max(4, 0.6 * len(tick_labels)),) * 2)
    im = ax.imshow(cm, cmap="Blues")
    ax.set_xticks(range(len(tick_labels)), tick_labels, rotation=45, ha="right")
    ax.set_yticks(range(len(tick_labels)), tick_labels)
    ax.set_xlabel("predicted")
    ax.set_ylabel("true")
    ax.set_title(title)
    thresh = cm.max() / 2 if cm.max() else 0.5
    for i in range(cm.shape[0]):
        for j in range(cm.shape[1]):
            ax.text(j, i, str(cm[i, j]), ha="center", va="center",
                    color="white" if cm[i, j] > thresh else "black", fontsize=8)
    fig.colorbar(im, ax=ax, shrink=0.8)
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)


def render_report(results, out_dir, summary=None):
    """Write results.tsv, summary.txt, per-result JSON, and confusion plots.

    The table file is byte-deterministic for identical results.
    """
    if not results:
        raise ValueError("no results to render")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    rows = ["subset_id\tlabels\tstgcn_accuracy\tcnn_accuracy"]
    for r in sorted(results, key=lambda r: r.subset_id):
        labels = ",".join(str(v) for v in r.labels)
        rows.append(
            f"{r.subset_id}\t{labels}\t{r.stgcn_accuracy:.2f}\t{r.cnn_accuracy:.2f}"
        )
    (out_dir / "results.tsv").write_text("\n".join(rows) + "\n")

    written = [out_dir / "results.tsv"]
    for r in sorted(results, key=lambda r: r.subset_id):
        stem = f"subset{r.subset_id}"
        with open(out_dir / f"{stem}.json", "w") as f:
            json.dump(r.to_dict(), f, indent=1, sort_keys=True)
        act_names = [f"{a}: {activity_name(a)}" for a in r.labels]
        _plot_confusion(
            np.asarray(r.activity_confusion), act_names,
            f"{stem} activities ({r.stgcn_accuracy:.1f}%)",
            out_dir / f"{stem}_activity_confusion.png",
        )
        cat_names = [c.name.lower() for c in r.categories]
        _plot_confusion(
            np.asarray(r.category_confusion), cat_names,
            f"{stem} kinesic categories ({r.cnn_accuracy:.1f}%)",
            out_dir / f"{stem}_category_confusion.png",
        )
        written += [
            out_dir / f"{stem}.json",
            out_dir / f"{stem}_activity_confusion.png",
            out_dir / f"{stem}_category_confusion.png",
        ]

    lines = ["Kinesics recognition results", "=" * 30, ""]
    for r in sorted(results, key=lambda r: r.subset_id):
        ref = REFERENCE_ACCURACIES.get(r.subset_id)
        extra = ""
        if ref:
            flags = []
            if abs(r.stgcn_accuracy - ref[0]) > 10:
                flags.append(f"backbone off reference {ref[0]:.0f}%")
            if abs(r.cnn_accuracy - ref[1]) > 10:
                flags.append(f"head off reference {ref[1]:.0f}%")
            if flags:
                extra = "  [" + "; ".join(flags) + "]"
        lines.append(
            f"subset {r.subset_id:>2}: backbone {r.stgcn_accuracy:6.2f}%  "
            f"head {r.cnn_accuracy:6.2f}%{extra}"
        )
    if summary is None and len(results) > 1:
        summary = trend_summary(results)
    if summary is not None:
        lines += [
            "",
            f"backbone accuracy non-increasing with subset size: "
            f"{summary['stgcn_non_increasing']}",
            f"Spearman rank correlation backbone vs head: "
            f"{summary['spearman_stgcn_cnn']:.3f}",
        ]
    (out_dir / "summary.txt").write_text("\n".join(lines) + "\n")
    written.append(out_dir / "summary.txt")
    return written
