"""Classifier evaluation: accuracy, row-normalized confusion, timing.

The confusion matrix is stored as integer counts; percentages are exact
ratios computed from those counts at access time, so populated rows sum
to 100 up to float rounding (< 1e-9).  Per-image timing is wall-clock
over the predictions only (model loading and feature extraction are
excluded) with the worker count recorded alongside.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .errors import InvalidArgument
from .signal_model import CLASS_NAMES

SCHEMA_VERSION = 1


@dataclass
class EvalReport:
    classes: list
    n_test: int
    confusion_counts: list  # KxK ints, rows = true class
    mean_test_time_per_image_ms: float
    threads: int
    model: dict  # free-form descriptor of the evaluated model

    @property
    def confusion_percent(self) -> np.ndarray:
        counts = np.asarray(self.confusion_counts, dtype=np.float64)
        totals = counts.sum(axis=1, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            percent = np.where(totals > 0, 100.0 * counts / totals, 0.0)
        return percent

    @property
    def per_class_accuracy(self) -> np.ndarray:
        return np.diag(self.confusion_percent)

    @property
    def overall_accuracy(self) -> float:
        counts = np.asarray(self.confusion_counts, dtype=np.int64)
        return 100.0 * np.trace(counts) / counts.sum()

    @property
    def zero_support_classes(self) -> list:
        counts = np.asarray(self.confusion_counts, dtype=np.int64)
        return [c for c, row in zip(self.classes, counts) if row.sum() == 0]

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "model": self.model,
            "classes": list(self.classes),
            "n_test": self.n_test,
            "overall_accuracy": self.overall_accuracy,
            "per_class_accuracy": [float(v) for v in self.per_class_accuracy],
            "confusion_percent": [[float(v) for v in row] for row in self.confusion_percent],
            "confusion_counts": [[int(v) for v in row] for row in self.confusion_counts],
            "zero_support_classes": self.zero_support_classes,
            "timing": {
                "mean_test_time_per_image_ms": self.mean_test_time_per_image_ms,
                "threads": self.threads,
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)

    def save(self, path: Union[str, Path]) -> None:
        Path(path).write_text(self.to_json() + "\n", encoding="utf-8")

    @classmethod
    def from_dict(cls, doc: dict) -> "EvalReport":
        if doc.get("schema_version") != SCHEMA_VERSION:
            raise InvalidArgument(f"unsupported report version {doc.get('schema_version')!r}")
        timing = doc.get("timing", {})
        return cls(
            classes=list(doc["classes"]),
            n_test=int(doc["n_test"]),
            confusion_counts=[[int(v) for v in row] for row in doc["confusion_counts"]],
            mean_test_time_per_image_ms=float(timing.get("mean_test_time_per_image_ms", 0.0)),
            threads=int(timing.get("threads", 1)),
            model=doc.get("model", {}),
        )

    @classmethod
    def load(cls, path: Union[str, Path]) -> "EvalReport":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def evaluate(
    predict: Callable[[Sequence[float]], str],
    samples: Sequence[Sequence[float]],
    labels: Sequence[str],
    classes: Sequence[str] = CLASS_NAMES,
    model: Optional[dict] = None,
    threads: int = 1,
) -> EvalReport:
    """Run a predict function over a labeled test set and tally results."""
    if len(samples) == 0:
        raise InvalidArgument("test set must be nonempty")
    if len(samples) != len(labels):
        raise InvalidArgument("samples and labels must have the same length")
    index = {c: i for i, c in enumerate(classes)}
    try:
        true_idx = [index[l] for l in labels]
    except KeyError as exc:
        raise InvalidArgument(f"label {exc} not among the evaluation classes") from exc

    k = len(classes)
    counts = np.zeros((k, k), dtype=np.int64)
    t0 = time.perf_counter()
    predictions = [predict(x) for x in samples]
    elapsed = time.perf_counter() - t0
    for ti, pred in zip(true_idx, predictions):
        try:
            counts[ti, index[pred]] += 1
        except KeyError as exc:
            raise InvalidArgument(f"prediction {exc} not among the evaluation classes") from exc

    return EvalReport(
        classes=list(classes),
        n_test=len(samples),
        confusion_counts=counts.tolist(),
        mean_test_time_per_image_ms=1000.0 * elapsed / len(samples),
        threads=threads,
        model=model or {},
    )


def render_confusion_png(report: EvalReport, path: Union[str, Path]) -> None:
    """Render the row-normalized confusion heatmap with 0.1% annotations.

    Zero-support rows are drawn in neutral gray with hatching.  Output is
    byte-deterministic for a fixed report.
    """
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    percent = report.confusion_percent
    k = len(report.classes)
    zero_rows = [i for i, c in enumerate(report.classes) if c in report.zero_support_classes]

    fig, ax = plt.subplots(figsize=(5.4, 4.8), dpi=120)
    masked = np.ma.masked_array(percent, mask=np.zeros_like(percent, dtype=bool))
    for i in zero_rows:
        masked.mask[i, :] = True
    cmap = plt.get_cmap("Blues").copy()
    cmap.set_bad("0.85")
    im = ax.imshow(masked, vmin=0.0, vmax=100.0, cmap=cmap)
    for i in zero_rows:
        ax.add_patch(
            plt.Rectangle((-0.5, i - 0.5), k, 1.0, fill=False, hatch="///",
                          edgecolor="0.55", linewidth=0)
        )
    for i in range(k):
        for j in range(k):
            if i in zero_rows:
                continue
            v = percent[i, j]
            ax.text(j, i, f"{v:.1f}", ha="center", va="center", fontsize=8,
                    color="white" if v > 60 else "black")
    ax.set_xticks(range(k), report.classes)
    ax.set_yticks(range(k), report.classes)
    ax.set_xlabel("Predicted class")
    ax.set_ylabel("True class")
    acc = report.overall_accuracy
    ax.set_title(f"Row-normalized confusion (accuracy {acc:.2f}%)")
    fig.colorbar(im, ax=ax, label="% of true class")
    fig.tight_layout()
    fig.savefig(path, metadata={"Software": "awapd"})
    plt.close(fig)
