"""Fine-tuning and evaluation of the two image classifiers.

Both networks keep their pretrained convolutional stack (when a
checkpoint is available; otherwise random initialization is used and
recorded) and get a fresh six-class fully connected head.  Training is
SGD with momentum, cross-entropy loss, validation accuracy monitored
each epoch with optional plateau early stopping.

The evaluation report uses the same JSON schema as the primary
toolkit's EvalReport (schema_version 1), so the primary `eval
--from-report` command renders its confusion matrix unchanged.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
import torch
import torch.nn as nn
from torch.utils.data import DataLoader
from torchvision import models as tvm

from .data import CLASSES, AwaImageFolder

ARCH_INPUT_SIZE = {"inception_v3": 299, "resnet_18": 224}

REPORT_SCHEMA_VERSION = 1  # matches the primary toolkit's EvalReport


@dataclass
class TrainSpec:
    architecture: str  # "inception_v3" | "resnet_18"
    data_root: str
    seed: int = 0
    learning_rate: float = 0.001
    momentum: float = 0.9
    batch_size: int = 32
    max_epochs: int = 100
    patience: Optional[int] = 5  # epochs without val improvement; None = off
    weights: str = "pretrained"  # "pretrained" (fallback to random) | "none"
    freeze_backbone: bool = False
    limit_per_class: int = 0  # 0 = use every image

    def __post_init__(self):
        if self.architecture not in ARCH_INPUT_SIZE:
            raise ValueError(f"unknown architecture {self.architecture!r}")
        if self.max_epochs < 1 or self.max_epochs > 100:
            raise ValueError("max_epochs must be in 1..100")

    @property
    def input_size(self) -> int:
        return ARCH_INPUT_SIZE[self.architecture]


def build_model(arch: str, weights: str = "none") -> tuple[nn.Module, str]:
    """The backbone with a fresh 6-class head; returns (model, provenance)."""
    provenance = "random_init"
    pretrained = None
    if weights == "pretrained":
        try:
            if arch == "resnet_18":
                pretrained = tvm.ResNet18_Weights.IMAGENET1K_V1
                model = tvm.resnet18(weights=pretrained)
            else:
                pretrained = tvm.Inception_V3_Weights.IMAGENET1K_V1
                model = tvm.inception_v3(weights=pretrained)
            provenance = f"torchvision:{pretrained}"
        except Exception:
            pretrained = None  # checkpoint unavailable (offline); fall back
            provenance = "random_init (pretrained checkpoint unavailable)"
    if pretrained is None:
        model = tvm.resnet18(weights=None) if arch == "resnet_18" else tvm.inception_v3(
            weights=None, init_weights=True
        )
    if arch == "resnet_18":
        model.fc = nn.Linear(model.fc.in_features, len(CLASSES))
    else:
        model.fc = nn.Linear(model.fc.in_features, len(CLASSES))
        if model.AuxLogits is not None:
            model.AuxLogits.fc = nn.Linear(model.AuxLogits.fc.in_features, len(CLASSES))
    return model, provenance


def _epoch_pass(model, loader, loss_fn, optimizer=None, inception=False):
    training = optimizer is not None
    model.train(training)
    total = correct = 0
    loss_sum = 0.0
    with torch.set_grad_enabled(training):
        for x, y in loader:
            if training:
                optimizer.zero_grad()
                out = model(x)
                if inception and isinstance(out, tvm.InceptionOutputs):
                    loss = loss_fn(out.logits, y) + 0.4 * loss_fn(out.aux_logits, y)
                    logits = out.logits
                else:
                    loss = loss_fn(out, y)
                    logits = out
                loss.backward()
                optimizer.step()
            else:
                logits = model(x)
                loss = loss_fn(logits, y)
            loss_sum += float(loss.detach()) * len(y)
            correct += int((logits.argmax(1) == y).sum())
            total += len(y)
    return loss_sum / total, correct / total


def finetune(spec: TrainSpec) -> tuple[nn.Module, dict]:
    """Train per the spec; returns (model, history-and-provenance dict)."""
    torch.manual_seed(spec.seed)
    train_ds = AwaImageFolder(spec.data_root, "train", spec.input_size, spec.limit_per_class)
    val_ds = AwaImageFolder(spec.data_root, "val", spec.input_size, spec.limit_per_class)
    train_dl = DataLoader(
        train_ds, batch_size=spec.batch_size, shuffle=True,
        generator=torch.Generator().manual_seed(spec.seed),
    )
    val_dl = DataLoader(val_ds, batch_size=max(spec.batch_size, 64))

    model, provenance = build_model(spec.architecture, spec.weights)
    if spec.freeze_backbone:
        for name, param in model.named_parameters():
            if not name.startswith("fc.") and "AuxLogits" not in name:
                param.requires_grad = False
    params = [p for p in model.parameters() if p.requires_grad]
    optimizer = torch.optim.SGD(params, lr=spec.learning_rate, momentum=spec.momentum)
    loss_fn = nn.CrossEntropyLoss()
    inception = spec.architecture == "inception_v3"

    history = {"train_loss": [], "train_acc": [], "val_loss": [], "val_acc": []}
    best_val = -1.0
    best_state = None
    stale = 0
    for epoch in range(spec.max_epochs):
        tl, ta = _epoch_pass(model, train_dl, loss_fn, optimizer, inception)
        vl, va = _epoch_pass(model, val_dl, loss_fn)
        history["train_loss"].append(tl)
        history["train_acc"].append(ta)
        history["val_loss"].append(vl)
        history["val_acc"].append(va)
        if va > best_val:
            best_val, stale = va, 0
            best_state = {k: v.detach().clone() for k, v in model.state_dict().items()}
        else:
            stale += 1
            if spec.patience is not None and stale >= spec.patience:
                break
    if best_state is not None:
        model.load_state_dict(best_state)

    info = {
        "architecture": spec.architecture,
        "input_size": spec.input_size,
        "weights": provenance,
        "freeze_backbone": spec.freeze_backbone,
        "learning_rate": spec.learning_rate,
        "momentum": spec.momentum,
        "batch_size": spec.batch_size,
        "epochs_run": len(history["val_acc"]),
        "max_epochs": spec.max_epochs,
        "seed": spec.seed,
        "best_val_accuracy": best_val,
        "history": history,
    }
    return model, info


def evaluate_cnn(model: nn.Module, spec: TrainSpec, info: Optional[dict] = None) -> dict:
    """Predict the test subset and assemble an EvalReport-schema document."""
    test_ds = AwaImageFolder(spec.data_root, "test", spec.input_size, spec.limit_per_class)
    test_dl = DataLoader(test_ds, batch_size=max(spec.batch_size, 64))
    model.eval()
    k = len(CLASSES)
    counts = np.zeros((k, k), dtype=np.int64)
    t0 = time.perf_counter()
    preds, trues = [], []
    with torch.no_grad():
        for x, y in test_dl:
            preds.append(model(x).argmax(1))
            trues.append(y)
    elapsed = time.perf_counter() - t0
    for p, t in zip(torch.cat(preds).tolist(), torch.cat(trues).tolist()):
        counts[t, p] += 1

    totals = counts.sum(axis=1, keepdims=True)
    percent = np.where(totals > 0, 100.0 * counts / totals, 0.0)
    model_desc = {"kind": "cnn"}
    if info:
        model_desc.update({kk: vv for kk, vv in info.items() if kk != "history"})
        model_desc["history"] = info["history"]
    return {
        "schema_version": REPORT_SCHEMA_VERSION,
        "model": model_desc,
        "classes": list(CLASSES),
        "n_test": int(counts.sum()),
        "overall_accuracy": float(100.0 * np.trace(counts) / counts.sum()),
        "per_class_accuracy": [float(v) for v in np.diag(percent)],
        "confusion_percent": [[float(v) for v in row] for row in percent],
        "confusion_counts": [[int(v) for v in row] for row in counts],
        "zero_support_classes": [c for c, n in zip(CLASSES, totals.ravel()) if n == 0],
        "timing": {
            "mean_test_time_per_image_ms": 1000.0 * elapsed / max(1, counts.sum()),
            "threads": torch.get_num_threads(),
        },
    }


def write_report(report: dict, path) -> None:
    """Atomic write: the consumer never sees a half-written report."""
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(report, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    tmp.replace(path)
