"""Command-line entry point: `cnn train --arch ... --data <root> --out report.json`."""

from __future__ import annotations

import argparse
import sys

from .data import DatasetLayoutError, InputError
from .train import TrainSpec, evaluate_cnn, finetune, write_report


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cnn", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    t = sub.add_parser("train", help="fine-tune a classifier and write its eval report")
    t.add_argument("--arch", required=True, choices=["inception_v3", "resnet_18"])
    t.add_argument("--data", required=True, help="dataset root (train/val/test layout)")
    t.add_argument("--out", required=True, help="report JSON path (EvalReport schema)")
    t.add_argument("--epochs", type=int, default=100)
    t.add_argument("--batch-size", type=int, default=32)
    t.add_argument("--lr", type=float, default=0.001)
    t.add_argument("--momentum", type=float, default=0.9)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--patience", type=int, default=5, help="0 disables early stopping")
    t.add_argument("--weights", choices=["pretrained", "none"], default="pretrained")
    t.add_argument("--freeze-backbone", action="store_true")
    t.add_argument("--limit-per-class", type=int, default=0)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    spec = TrainSpec(
        architecture=args.arch,
        data_root=args.data,
        seed=args.seed,
        learning_rate=args.lr,
        momentum=args.momentum,
        batch_size=args.batch_size,
        max_epochs=args.epochs,
        patience=args.patience or None,
        weights=args.weights,
        freeze_backbone=args.freeze_backbone,
        limit_per_class=args.limit_per_class,
    )
    try:
        model, info = finetune(spec)
        report = evaluate_cnn(model, spec, info)
    except (DatasetLayoutError, InputError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    write_report(report, args.out)
    print(
        f"{args.arch}: test accuracy {report['overall_accuracy']:.2f}% "
        f"({info['epochs_run']} epochs, weights: {info['weights']}) -> {args.out}"
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
