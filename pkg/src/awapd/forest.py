"""Random forest over handcrafted feature vectors, written from scratch.

Trees are grown on bootstrap samples with per-node random feature
subsets; splits minimize Gini impurity over midpoint thresholds between
consecutive distinct sorted values.  Every tie (impurity across features
and thresholds, leaf majorities, forest votes) breaks toward the lowest
feature index / lowest threshold / lowest canonical class, which makes
training and prediction exactly reproducible for a given seed.

The serialized model is a self-describing JSON document:

    {"version": 1, "classes": [...], "feature_names": [...],
     "config": {...}, "trees": [{"nodes": [{"feat", "thr", "l", "r"}
                                           | {"counts": [...]}]}]}

Node 0 is the root; leaves carry per-class training-sample counts.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .errors import InvalidArgument, ModelFormatError
from .seeding import stream

MODEL_VERSION = 1


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 200
    max_depth: Optional[int] = None  # None = unlimited
    min_samples_leaf: int = 1
    features_per_split: Optional[int] = None  # None = floor(sqrt(n_features))
    bootstrap: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise InvalidArgument("n_trees must be >= 1")
        if self.min_samples_leaf < 1:
            raise InvalidArgument("min_samples_leaf must be >= 1")
        if self.max_depth is not None and self.max_depth < 1:
            raise InvalidArgument("max_depth must be >= 1 or None")
        if self.features_per_split is not None and self.features_per_split < 1:
            raise InvalidArgument("features_per_split must be >= 1")

    def to_dict(self) -> dict:
        return {
            "n_trees": self.n_trees,
            "max_depth": self.max_depth,
            "min_samples_leaf": self.min_samples_leaf,
            "features_per_split": self.features_per_split,
            "bootstrap": self.bootstrap,
            "seed": self.seed,
        }


def gini(counts: np.ndarray) -> float:
    """Gini impurity of a class-count vector."""
    n = counts.sum()
    if n == 0:
        return 0.0
    p = counts / n
    return float(1.0 - (p * p).sum())


def best_split(
    X: np.ndarray,
    y: np.ndarray,
    idx: np.ndarray,
    features: Sequence[int],
    n_classes: int,
    min_samples_leaf: int,
) -> Optional[tuple[float, int, float]]:
    """Minimum-cost (cost, feature, threshold) over the candidate set.

    Candidates for a feature are the midpoints between consecutive
    distinct sorted values (midpoints that round down onto the left value
    are dropped).  Cost is the size-weighted child Gini sum.  Features
    are scanned in ascending index order and only strictly better costs
    replace the incumbent, so ties resolve to the lowest feature index
    and then the lowest threshold.
    """
    m = len(idx)
    y_node = y[idx]
    best: Optional[tuple[float, int, float]] = None
    for f in sorted(features):
        x = X[idx, f]
        order = np.argsort(x, kind="stable")
        xs = x[order]
        if xs[0] == xs[-1]:
            continue
        ys = y_node[order]
        onehot = np.zeros((m, n_classes), dtype=np.float64)
        onehot[np.arange(m), ys] = 1.0
        cum = np.cumsum(onehot, axis=0)
        total = cum[-1]
        boundary = np.flatnonzero(xs[:-1] != xs[1:])  # split after position i
        if len(boundary) == 0:
            continue
        nl = (boundary + 1).astype(np.float64)
        nr = m - nl
        valid = (nl >= min_samples_leaf) & (nr >= min_samples_leaf)
        if not valid.any():
            continue
        cl = cum[boundary]
        cr = total - cl
        gl = 1.0 - ((cl / nl[:, None]) ** 2).sum(axis=1)
        gr = 1.0 - ((cr / nr[:, None]) ** 2).sum(axis=1)
        cost = (nl * gl + nr * gr) / m
        cost[~valid] = np.inf
        thr = (xs[boundary] + xs[boundary + 1]) / 2.0
        cost[thr <= xs[boundary]] = np.inf  # ulp-adjacent values: no usable midpoint
        k = int(np.argmin(cost))  # first minimum = lowest threshold
        if not np.isfinite(cost[k]):
            continue
        if best is None or cost[k] < best[0]:
            best = (float(cost[k]), int(f), float(thr[k]))
    return best


def _grow_tree(
    X: np.ndarray,
    y: np.ndarray,
    idx: np.ndarray,
    cfg: ForestConfig,
    fps: int,
    n_classes: int,
    rng: np.random.Generator,
) -> list[dict]:
    """Grow one tree depth-first; returns the node list (root at 0)."""
    n_features = X.shape[1]
    nodes: list[dict] = []

    def leaf(node_idx: np.ndarray) -> int:
        counts = np.bincount(y[node_idx], minlength=n_classes)
        nodes.append({"counts": [int(c) for c in counts]})
        return len(nodes) - 1

    def grow(node_idx: np.ndarray, depth: int) -> int:
        if len(node_idx) < 2 * cfg.min_samples_leaf:
            return leaf(node_idx)
        if cfg.max_depth is not None and depth >= cfg.max_depth:
            return leaf(node_idx)
        y_node = y[node_idx]
        if (y_node == y_node[0]).all():  # pure
            return leaf(node_idx)
        feats = rng.choice(n_features, size=min(fps, n_features), replace=False)
        found = best_split(X, y, node_idx, feats, n_classes, cfg.min_samples_leaf)
        if found is None:
            return leaf(node_idx)
        _, f, thr = found
        mask = X[node_idx, f] < thr
        pos = len(nodes)
        nodes.append({"feat": f, "thr": thr, "l": -1, "r": -1})
        nodes[pos]["l"] = grow(node_idx[mask], depth + 1)
        nodes[pos]["r"] = grow(node_idx[~mask], depth + 1)
        return pos

    grow(idx, 0)
    return nodes


@dataclass
class ForestModel:
    trees: list  # list of node lists
    feature_names: list
    classes: list  # canonical order
    config: ForestConfig

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def predict_one(self, x: Sequence[float]) -> tuple[str, np.ndarray]:
        """(winning class, per-class vote fractions) for one vector."""
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.n_features,):
            raise InvalidArgument(
                f"feature vector has length {x.shape}, model expects {self.n_features}"
            )
        votes = np.zeros(len(self.classes), dtype=np.int64)
        for nodes in self.trees:
            node = nodes[0]
            while "feat" in node:
                node = nodes[node["l"] if x[node["feat"]] < node["thr"] else node["r"]]
            votes[int(np.argmax(node["counts"]))] += 1  # argmax ties -> lowest class
        fractions = votes / self.config.n_trees
        return self.classes[int(np.argmax(votes))], fractions

    def predict(self, X: Sequence[Sequence[float]]) -> list[str]:
        return [self.predict_one(x)[0] for x in X]


def train(
    X: Sequence[Sequence[float]],
    labels: Sequence[str],
    classes: Sequence[str],
    feature_names: Sequence[str],
    cfg: Optional[ForestConfig] = None,
) -> ForestModel:
    """Fit a forest; single-class input is legal and yields constant predictors.

    `classes` fixes the canonical label order used for vote tie-breaking;
    labels outside it are rejected.
    """
    if cfg is None:
        cfg = ForestConfig()
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise InvalidArgument("need at least 2 samples")
    if X.shape[1] != len(feature_names):
        raise InvalidArgument("feature_names length must match the data width")
    class_index = {c: i for i, c in enumerate(classes)}
    try:
        y = np.array([class_index[l] for l in labels], dtype=np.intp)
    except KeyError as exc:
        raise InvalidArgument(f"label {exc} not in the class list") from exc
    if len(y) != X.shape[0]:
        raise InvalidArgument("labels length must match the number of samples")
    if cfg.features_per_split is not None and cfg.features_per_split > X.shape[1]:
        raise InvalidArgument("features_per_split exceeds the number of features")

    fps = cfg.features_per_split or max(1, math.floor(math.sqrt(X.shape[1])))
    n = X.shape[0]
    trees = []
    for t in range(cfg.n_trees):
        rng = stream(cfg.seed, "tree", t)
        idx = rng.integers(0, n, size=n) if cfg.bootstrap else np.arange(n)
        trees.append(_grow_tree(X, y, np.asarray(idx), cfg, fps, len(classes), rng))
    return ForestModel(
        trees=trees, feature_names=list(feature_names), classes=list(classes), config=cfg
    )


def save(model: ForestModel, path: Union[str, Path]) -> None:
    doc = {
        "version": MODEL_VERSION,
        "classes": model.classes,
        "feature_names": model.feature_names,
        "config": model.config.to_dict(),
        "trees": [{"nodes": nodes} for nodes in model.trees],
    }
    Path(path).write_text(json.dumps(doc, separators=(",", ":")), encoding="utf-8")


def load(path: Union[str, Path]) -> ForestModel:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ModelFormatError(f"{path}: not a valid model file: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("version") != MODEL_VERSION:
        raise ModelFormatError(
            f"{path}: unsupported model version {doc.get('version') if isinstance(doc, dict) else doc!r}"
        )
    try:
        cfg = ForestConfig(**doc["config"])
        model = ForestModel(
            trees=[t["nodes"] for t in doc["trees"]],
            feature_names=list(doc["feature_names"]),
            classes=list(doc["classes"]),
            config=cfg,
        )
    except (KeyError, TypeError, InvalidArgument) as exc:
        raise ModelFormatError(f"{path}: bad model document: {exc}") from exc
    for nodes in model.trees:
        for node in nodes:
            if "feat" not in node and "counts" not in node:
                raise ModelFormatError(f"{path}: node is neither split nor leaf")
    return model
