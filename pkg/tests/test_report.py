import numpy as np
import pytest

from kinesics.evaluation import ExperimentResult, trend_summary
from kinesics.report import render_report
from kinesics.taxonomy import KinesicCategory, categories_present


def _fake_result(subset_id, stgcn, cnn):
    from kinesics.evaluation import TABLE2_SUBSETS

    labels = TABLE2_SUBSETS[subset_id]
    cats = categories_present(labels)
    k, c = len(labels), len(cats)
    return ExperimentResult(
        subset_id=subset_id,
        labels=labels,
        categories=cats,
        stgcn_accuracy=stgcn,
        cnn_accuracy=cnn,
        activity_confusion=np.eye(k, dtype=np.int64) * 3,
        category_confusion=np.eye(c, dtype=np.int64) * 3,
        provenance={"seed": 0},
    )


def test_single_result_table(tmp_path):
    render_report([_fake_result(4, 77.0, 85.0)], tmp_path)
    table = (tmp_path / "results.tsv").read_text().splitlines()
    assert table[0].startswith("subset_id")
    assert len(table) == 2
    assert table[1].split("\t") == ["4", "2,4,8,11", "77.00", "85.00"]


def test_rerender_byte_identical(tmp_path):
    results = [_fake_result(4, 77.0, 85.0), _fake_result(12, 55.0, 48.0)]
    render_report(results, tmp_path / "a")
    render_report(results, tmp_path / "b")
    assert (tmp_path / "a" / "results.tsv").read_bytes() == (
        tmp_path / "b" / "results.tsv"
    ).read_bytes()


def test_five_results_include_trend(tmp_path):
    pairs = {4: (77, 85), 6: (75, 81), 8: (70, 70), 10: (67, 58), 12: (55, 48)}
    results = [_fake_result(s, *pairs[s]) for s in pairs]
    render_report(results, tmp_path, summary=trend_summary(results))
    summary = (tmp_path / "summary.txt").read_text()
    assert "non-increasing with subset size: True" in summary
    assert "Spearman rank correlation" in summary
    table = (tmp_path / "results.tsv").read_text().splitlines()
    assert len(table) == 6


def test_plots_and_json_written(tmp_path):
    render_report([_fake_result(4, 77.0, 85.0)], tmp_path)
    assert (tmp_path / "subset4.json").exists()
    assert (tmp_path / "subset4_activity_confusion.png").stat().st_size > 0
    assert (tmp_path / "subset4_category_confusion.png").stat().st_size > 0


def test_empty_results_rejected(tmp_path):
    with pytest.raises(ValueError):
        render_report([], tmp_path)
