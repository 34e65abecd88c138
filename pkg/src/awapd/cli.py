"""Command-line entry point wiring the pipeline stages together.

Every subcommand is a thin wrapper over one library operation; exit
codes are 0 on success, 1 on a domain error (bad input data, failed
gate), and 2 on a usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from . import dataset as ds
from . import forest as rf
from . import pipeline as pl
from .awa import PulseFeatures, RenderConfig, render_awa
from .errors import AwaPdError, InvalidArgument
from .evaluation import EvalReport, evaluate, render_confusion_png
from .pulse_detection import DetectionConfig, detect_pulses, read_pulses_csv, write_pulses_csv
from .signal_model import CLASSES, CLASS_NAMES, PdClass, read_waveform_csv, write_waveform_csv
from .simulator import (
    SimulatorConfig,
    default_config,
    excitation_waveform,
    ground_truth,
    simulate,
    write_ground_truth_csv,
)


def _load_pulses(path: Path) -> list[PulseFeatures]:
    rows = read_pulses_csv(path)
    return [
        PulseFeatures(amplitude=h, width=w, area=h * w, time=t) for t, h, _, w in rows
    ]


def _cmd_simulate(args) -> int:
    cfg = (
        SimulatorConfig.from_dict(json.loads(Path(args.config).read_text(encoding="utf-8")))
        if args.config
        else default_config()
    )
    if args.seed is not None:
        from dataclasses import replace

        cfg = replace(cfg, master_seed=args.seed)
    cls = PdClass(args.pd_class)
    out = Path(args.out) / cls.value
    out.mkdir(parents=True, exist_ok=True)
    for run in range(args.runs):
        w = simulate(cls, cfg, run)
        write_waveform_csv(w, out / f"run_{run:04d}.csv")
        write_ground_truth_csv(ground_truth(cls, cfg, run), out / f"run_{run:04d}_truth.csv")
    if args.emit_excitation:
        write_waveform_csv(excitation_waveform(cfg), Path(args.out) / "excitation.csv")
    print(f"wrote {args.runs} waveform/truth pairs to {out}")
    return 0


def _cmd_detect(args) -> int:
    cfg = DetectionConfig(
        min_height=args.min_height,
        min_prominence=args.min_prominence,
        absolute_value=not args.no_abs,
    )
    src = Path(args.infile)
    if src.is_dir():
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        n = 0
        for f in sorted(src.glob("*.csv")):
            if f.stem.endswith("_truth"):
                continue
            peaks = detect_pulses(read_waveform_csv(f), cfg)
            write_pulses_csv(peaks, out_dir / f.name)
            n += 1
        print(f"detected pulses in {n} waveforms -> {out_dir}")
    else:
        peaks = detect_pulses(read_waveform_csv(src), cfg)
        write_pulses_csv(peaks, Path(args.out))
        print(f"{len(peaks)} pulses -> {args.out}")
    return 0


def _cmd_render(args) -> int:
    if (args.ranges is None) == (args.auto_ranges_from is None):
        raise InvalidArgument("give exactly one of --ranges or --auto-ranges-from")
    if args.ranges:
        try:
            a_hi, r_hi, w_hi = (float(v) for v in args.ranges.split(","))
        except ValueError as exc:
            raise InvalidArgument(f"--ranges wants 'a_hi,r_hi,w_hi': {exc}") from exc
        ranges = ((0.0, a_hi), (0.0, r_hi), (0.0, w_hi))
    else:
        manifest = ds.DatasetManifest.load(args.auto_ranges_from)
        r = manifest.render
        ranges = (tuple(r["amplitude_range"]), tuple(r["area_range"]), tuple(r["width_range"]))
    cfg = RenderConfig(
        image_width=args.size,
        image_height=args.size,
        amplitude_range=ranges[0],
        area_range=ranges[1],
        width_range=ranges[2],
        point_radius=args.radius,
        margin=args.margin,
    )
    src = Path(args.pulses)
    if src.is_dir():
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        for f in sorted(src.glob("*.csv")):
            render_awa(_load_pulses(f), cfg).save_png(out_dir / (f.stem + ".png"))
        print(f"rendered {len(list(src.glob('*.csv')))} images -> {out_dir}")
    else:
        render_awa(_load_pulses(src), cfg).save_png(args.out)
        print(f"rendered {args.out}")
    return 0


def _cmd_dataset_build(args) -> int:
    pulses_dir = Path(args.pulses)
    pulse_sets = {}
    for cls in CLASSES:
        cdir = pulses_dir / cls.value
        if not cdir.is_dir():
            raise InvalidArgument(f"missing pulse directory for class {cls.value}: {cdir}")
        pulse_sets[cls] = [_load_pulses(f) for f in sorted(cdir.glob("*.csv"))]
    ratios = tuple(float(v) for v in args.ratios.split(","))
    manifest = ds.build_dataset(
        pulse_sets,
        args.out,
        augment_spec=ds.AugmentSpec(multiplier=args.multiplier),
        ratios=ratios,
        seed=args.seed,
        image_size=args.size,
        point_radius=args.radius,
        threads=args.threads,
    )
    counts = manifest.counts()
    total = sum(sum(v.values()) for v in counts.values())
    print(f"built dataset with {total} images -> {args.out}")
    return 0


def _cmd_dataset_verify(args) -> int:
    root = Path(args.dir)
    manifest = ds.DatasetManifest.load(args.manifest or root / "manifest.json")
    report = ds.verify_integrity(manifest, root)
    print(json.dumps(report.to_dict(), indent=1, sort_keys=True))
    return 0 if report.clean else 1


def _cmd_features(args) -> int:
    root = Path(args.infile)
    manifest = ds.DatasetManifest.load(root / "manifest.json")
    rows = pl.feature_table(manifest, root)
    pl.write_features_csv(rows, args.out)
    print(f"extracted {len(rows)} feature rows -> {args.out}")
    return 0


def _forest_config_from_args(args) -> rf.ForestConfig:
    return rf.ForestConfig(
        n_trees=args.trees,
        max_depth=args.max_depth,
        min_samples_leaf=args.min_samples_leaf,
        features_per_split=args.features_per_split,
        bootstrap=not args.no_bootstrap,
        seed=args.seed,
    )


def _cmd_train_rf(args) -> int:
    rows = [r for r in pl.read_features_csv(args.features) if r["subset"] == args.subset]
    if not rows:
        raise InvalidArgument(f"no rows with subset {args.subset!r} in {args.features}")
    model = rf.train(
        [r["vector"] for r in rows],
        [r["class"] for r in rows],
        classes=list(CLASS_NAMES),
        feature_names=list(pl.FEATURE_NAMES),
        cfg=_forest_config_from_args(args),
    )
    rf.save(model, args.out)
    print(f"trained {args.trees} trees on {len(rows)} samples -> {args.out}")
    return 0


def _cmd_predict_rf(args) -> int:
    model = rf.load(args.model)
    rows = pl.read_features_csv(args.features)
    if args.subset:
        rows = [r for r in rows if r["subset"] == args.subset]
    lines = ["image_id,class,predicted," + ",".join(f"vote_{c}" for c in model.classes)]
    for r in rows:
        cls, fractions = model.predict_one(r["vector"])
        votes = ",".join(repr(float(v)) for v in fractions)
        lines.append(f"{r['image_id']},{r['class']},{cls},{votes}")
    Path(args.out).write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"predicted {len(rows)} rows -> {args.out}")
    return 0


def _cmd_eval(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.from_report:
        report = EvalReport.load(args.from_report)
    else:
        if not (args.model and args.features):
            raise InvalidArgument("eval needs --model and --features, or --from-report")
        model = rf.load(args.model)
        rows = [r for r in pl.read_features_csv(args.features) if r["subset"] == args.subset]
        if not rows:
            raise InvalidArgument(f"no rows with subset {args.subset!r}")
        report = evaluate(
            lambda x: model.predict_one(x)[0],
            [r["vector"] for r in rows],
            [r["class"] for r in rows],
            classes=model.classes,
            model={"kind": "random_forest", "n_trees": model.config.n_trees},
        )
        report.save(out / "report.json")
    render_confusion_png(report, out / "confusion.png")
    print(f"accuracy {report.overall_accuracy:.2f}% over {report.n_test} images -> {out}")
    if args.min_accuracy is not None and report.overall_accuracy < args.min_accuracy:
        print(
            f"accuracy below the --min-accuracy gate ({args.min_accuracy:.2f}%)",
            file=sys.stderr,
        )
        return 1
    return 0


def _cmd_all(args) -> int:
    cfg = pl.PipelineConfig.load(args.config) if args.config else pl.PipelineConfig()
    if args.seed is not None:
        cfg.master_seed = args.seed
        if cfg.simulator is not None:
            from dataclasses import replace

            cfg.simulator = replace(cfg.simulator, master_seed=args.seed)
    if args.threads is not None:
        cfg.threads = args.threads
    if args.min_accuracy is not None:
        cfg.min_accuracy = args.min_accuracy
    report = pl.run_pipeline(cfg, args.out)
    print(
        f"pipeline complete: accuracy {report.overall_accuracy:.2f}% "
        f"on {report.n_test} test images -> {args.out}"
    )
    return 0


def _cmd_info(args) -> int:
    if args.schema:
        print(json.dumps(pl.config_schema(), indent=1, sort_keys=True))
    else:
        print(f"awapd {__version__}")
        print("deterministic AWA pattern toolkit; all randomness flows from the")
        print("config master seed, so reruns reproduce artifacts byte for byte")
        print("(wall-clock timing fields excepted).")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="awapd", description=__doc__)
    p.add_argument("--version", action="version", version=f"awapd {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="generate synthetic PD waveforms + ground truth")
    s.add_argument("--class", dest="pd_class", required=True, choices=CLASS_NAMES)
    s.add_argument("--runs", type=int, default=1)
    s.add_argument("--config", help="SimulatorConfig JSON (default: shipped config)")
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--out", required=True)
    s.add_argument("--emit-excitation", action="store_true")
    s.set_defaults(fn=_cmd_simulate)

    s = sub.add_parser("detect", help="detect pulses in waveform CSV(s)")
    s.add_argument("--in", dest="infile", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--min-height", type=float, default=None)
    s.add_argument("--min-prominence", type=float, default=None)
    s.add_argument("--no-abs", action="store_true", help="skip rectification")
    s.set_defaults(fn=_cmd_detect)

    s = sub.add_parser("render", help="rasterize pulse CSV(s) into AWA PNG(s)")
    s.add_argument("--pulses", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--size", type=int, default=256)
    s.add_argument("--radius", type=int, default=2)
    s.add_argument("--margin", type=int, default=8)
    s.add_argument("--ranges", help="a_hi,r_hi,w_hi (lows are 0)")
    s.add_argument("--auto-ranges-from", help="dataset manifest with shared ranges")
    s.set_defaults(fn=_cmd_render)

    s = sub.add_parser("dataset", help="build or verify an image dataset")
    dsub = s.add_subparsers(dest="dataset_command", required=True)
    b = dsub.add_parser("build")
    b.add_argument("--pulses", required=True, help="directory with <CLASS>/*.csv pulse lists")
    b.add_argument("--out", required=True)
    b.add_argument("--multiplier", type=int, default=5)
    b.add_argument("--ratios", default="0.6,0.2,0.2")
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--size", type=int, default=256)
    b.add_argument("--radius", type=int, default=2)
    b.add_argument("--threads", type=int, default=1)
    b.set_defaults(fn=_cmd_dataset_build)
    v = dsub.add_parser("verify")
    v.add_argument("--dir", required=True)
    v.add_argument("--manifest", default=None)
    v.set_defaults(fn=_cmd_dataset_verify)

    s = sub.add_parser("features", help="extract feature vectors from a dataset")
    s.add_argument("--in", dest="infile", required=True, help="dataset directory")
    s.add_argument("--out", required=True)
    s.set_defaults(fn=_cmd_features)

    s = sub.add_parser("train-rf", help="train the random forest")
    s.add_argument("--features", required=True)
    s.add_argument("--subset", default="train")
    s.add_argument("--out", required=True)
    s.add_argument("--trees", type=int, default=200)
    s.add_argument("--max-depth", type=int, default=None)
    s.add_argument("--min-samples-leaf", type=int, default=1)
    s.add_argument("--features-per-split", type=int, default=None)
    s.add_argument("--no-bootstrap", action="store_true")
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(fn=_cmd_train_rf)

    s = sub.add_parser("predict-rf", help="predict classes for feature rows")
    s.add_argument("--model", required=True)
    s.add_argument("--features", required=True)
    s.add_argument("--subset", default=None)
    s.add_argument("--out", required=True)
    s.set_defaults(fn=_cmd_predict_rf)

    s = sub.add_parser("eval", help="evaluate a model and render its confusion matrix")
    s.add_argument("--model")
    s.add_argument("--features")
    s.add_argument("--subset", default="test")
    s.add_argument("--from-report", help="render an existing EvalReport JSON")
    s.add_argument("--out", required=True)
    s.add_argument("--min-accuracy", type=float, default=None)
    s.set_defaults(fn=_cmd_eval)

    s = sub.add_parser("all", help="run the full synthetic experiment")
    s.add_argument("--config", help="pipeline config JSON")
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--threads", type=int, default=None)
    s.add_argument("--out", required=True)
    s.add_argument("--min-accuracy", type=float, default=None)
    s.set_defaults(fn=_cmd_all)

    s = sub.add_parser("info", help="tool and config-schema information")
    s.add_argument("--schema", action="store_true")
    s.set_defaults(fn=_cmd_info)

    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except AwaPdError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
