"""Training loop behavior and report schema."""

import json

import numpy as np
import pytest
import torch

from cnn_harness.data import CLASSES
from cnn_harness.train import TrainSpec, evaluate_cnn, finetune, write_report

REQUIRED_REPORT_KEYS = {
    "schema_version", "model", "classes", "n_test", "overall_accuracy",
    "per_class_accuracy", "confusion_percent", "confusion_counts",
    "zero_support_classes", "timing",
}


def test_trainspec_validation(tiny_dataset):
    with pytest.raises(ValueError):
        TrainSpec(architecture="vgg", data_root=str(tiny_dataset))
    with pytest.raises(ValueError):
        TrainSpec(architecture="resnet_18", data_root=str(tiny_dataset), max_epochs=101)
    assert TrainSpec(architecture="inception_v3", data_root=str(tiny_dataset)).input_size == 299


@pytest.fixture(scope="module")
def trained(tiny_dataset):
    spec = TrainSpec(
        architecture="resnet_18", data_root=str(tiny_dataset),
        seed=1, learning_rate=0.01, max_epochs=3, patience=None, weights="none",
    )
    model, info = finetune(spec)
    return spec, model, info


def test_history_recorded(trained):
    _, _, info = trained
    assert info["epochs_run"] == 3
    for key in ("train_loss", "train_acc", "val_loss", "val_acc"):
        assert len(info["history"][key]) == 3
    assert info["weights"] == "random_init"


def test_report_schema_and_rowsums(trained, tmp_path):
    spec, model, info = trained
    report = evaluate_cnn(model, spec, info)
    assert REQUIRED_REPORT_KEYS <= set(report)
    assert report["schema_version"] == 1
    assert report["classes"] == list(CLASSES)
    assert report["n_test"] == 12
    for row, total in zip(report["confusion_percent"],
                          np.sum(report["confusion_counts"], axis=1)):
        if total:
            assert abs(sum(row) - 100.0) <= 0.1
    out = tmp_path / "report.json"
    write_report(report, out)
    assert json.loads(out.read_text())["n_test"] == 12


def test_one_batch_overfit_capacity():
    # standard capacity check: a single batch memorized within 50 epochs
    # (lr 0.01 for the check; the production default stays 0.001)
    torch.manual_seed(0)
    from cnn_harness.train import build_model

    model, _ = build_model("resnet_18", weights="none")
    x = torch.rand(16, 3, 224, 224)
    y = torch.arange(16) % 6
    opt = torch.optim.SGD(model.parameters(), lr=0.01, momentum=0.9)
    loss_fn = torch.nn.CrossEntropyLoss()
    model.train()
    loss = None
    for step in range(50):
        opt.zero_grad()
        loss = loss_fn(model(x), y)
        loss.backward()
        opt.step()
        if loss.item() < 0.1:
            break
    assert loss is not None and loss.item() < 0.1, f"final loss {loss.item():.3f}"


def test_early_stopping_cuts_epochs(tiny_dataset):
    spec = TrainSpec(
        architecture="resnet_18", data_root=str(tiny_dataset),
        seed=2, learning_rate=0.0, max_epochs=6, patience=2, weights="none",
    )
    # zero learning rate: validation accuracy can never improve after
    # epoch 1, so patience must stop training well before max_epochs
    _, info = finetune(spec)
    assert info["epochs_run"] <= 3
