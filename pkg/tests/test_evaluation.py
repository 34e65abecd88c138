"""Evaluation metrics, report schema, and confusion rendering."""

import numpy as np
import pytest

from awapd.errors import InvalidArgument
from awapd.evaluation import EvalReport, evaluate, render_confusion_png
from awapd.signal_model import CLASS_NAMES


def balanced_set(n_per_class):
    samples, labels = [], []
    for i, c in enumerate(CLASS_NAMES):
        for j in range(n_per_class):
            samples.append([float(i), float(j)])
            labels.append(c)
    return samples, labels


def test_perfect_predictor():
    samples, labels = balanced_set(5)
    truth = dict(zip(map(tuple, samples), labels))
    report = evaluate(lambda x: truth[tuple(x)], samples, labels)
    assert report.overall_accuracy == 100.0
    assert np.allclose(np.diag(report.confusion_percent), 100.0)
    assert np.allclose(report.confusion_percent, np.eye(6) * 100.0)


def test_always_c_predictor_on_balanced_set():
    samples, labels = balanced_set(10)
    report = evaluate(lambda x: "C", samples, labels)
    assert report.overall_accuracy == pytest.approx(100.0 / 6.0)
    assert np.allclose(report.confusion_percent[:, 0], 100.0)
    assert np.allclose(report.confusion_percent[:, 1:], 0.0)


def test_row_sums_100_before_rounding():
    rng = np.random.default_rng(1)
    samples, labels = balanced_set(7)
    report = evaluate(lambda x: CLASS_NAMES[rng.integers(0, 6)], samples, labels)
    sums = report.confusion_percent.sum(axis=1)
    assert np.all(np.abs(sums - 100.0) < 1e-9)


def test_zero_support_row_flagged_and_all_zero():
    samples, labels = balanced_set(4)
    keep = [i for i, l in enumerate(labels) if l != "SI"]
    samples = [samples[i] for i in keep]
    labels = [labels[i] for i in keep]
    report = evaluate(lambda x: "C", samples, labels)
    assert report.zero_support_classes == ["SI"]
    assert np.allclose(report.confusion_percent[5], 0.0)


def test_balanced_accuracy_equals_mean_of_per_class():
    rng = np.random.default_rng(2)
    samples, labels = balanced_set(25)
    report = evaluate(
        lambda x: labels[rng.integers(0, len(labels))], samples, labels
    )
    assert report.overall_accuracy == pytest.approx(report.per_class_accuracy.mean(), abs=1e-9)


def test_order_permutation_changes_nothing_but_timing():
    samples, labels = balanced_set(6)
    predict = lambda x: CLASS_NAMES[int(x[0]) % 6]
    a = evaluate(predict, samples, labels)
    perm = np.random.default_rng(3).permutation(len(samples))
    b = evaluate(predict, [samples[i] for i in perm], [labels[i] for i in perm])
    assert a.confusion_counts == b.confusion_counts
    assert a.overall_accuracy == b.overall_accuracy


def test_empty_set_rejected():
    with pytest.raises(InvalidArgument):
        evaluate(lambda x: "C", [], [])


def test_unknown_label_rejected():
    with pytest.raises(InvalidArgument):
        evaluate(lambda x: "C", [[1.0]], ["XX"])


def test_report_json_roundtrip(tmp_path):
    samples, labels = balanced_set(5)
    report = evaluate(lambda x: "I", samples, labels, model={"kind": "stub"})
    path = tmp_path / "report.json"
    report.save(path)
    back = EvalReport.load(path)
    assert back.confusion_counts == report.confusion_counts
    assert back.overall_accuracy == report.overall_accuracy
    assert back.classes == report.classes
    assert back.model == {"kind": "stub"}


def test_render_confusion_deterministic(tmp_path):
    samples, labels = balanced_set(5)
    report = evaluate(lambda x: CLASS_NAMES[int(x[0]) % 2], samples, labels)
    a, b = tmp_path / "a.png", tmp_path / "b.png"
    render_confusion_png(report, a)
    render_confusion_png(report, b)
    assert a.read_bytes() == b.read_bytes()
    assert a.stat().st_size > 1000


def test_render_confusion_with_zero_row(tmp_path):
    samples, labels = balanced_set(3)
    keep = [i for i, l in enumerate(labels) if l not in ("CS",)]
    report = evaluate(lambda x: "C", [samples[i] for i in keep], [labels[i] for i in keep])
    out = tmp_path / "conf.png"
    render_confusion_png(report, out)
    assert out.exists() and out.stat().st_size > 1000
