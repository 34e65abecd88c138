"""End-to-end synthetic experiment: simulate through evaluate.

One master seed drives every stage; stage randomness is namespaced by
role labels inside the seeded streams, so rerunning a pipeline with the
same config reproduces every artifact byte for byte.  The one exception
is the timing block of report.json, which is wall-clock by definition.

Persisted layout under the output directory:

    pulses/<class>/run_NNNN.csv      detected pulse lists
    waveforms/<class>/run_NNNN.csv   raw waveforms (only with keep_waveforms)
    dataset/{train,val,test}/<class>/*.png + dataset/manifest.json
    features.csv
    model/forest.json
    report/report.json + confusion.png + class_samples.png

A `.partial` marker sits in the output directory while a run is in
flight; it is removed on success and left behind on failure.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np

from . import dataset as ds
from . import forest as rf
from .awa import PulseFeatures
from .errors import InvalidArgument, PipelineError
from .evaluation import EvalReport, evaluate, render_confusion_png
from .image_features import FEATURE_NAMES, extract
from .pulse_detection import DetectionConfig, detect_pulses, write_pulses_csv
from .signal_model import CLASSES, write_waveform_csv
from .simulator import SimulatorConfig, desk_config, simulate

PIPELINE_SCHEMA_VERSION = 1


@dataclass
class PipelineConfig:
    """One JSON document configuring every stage (see config_schema)."""

    master_seed: int = 20260810
    runs_per_class: int = 60
    simulator: Optional[SimulatorConfig] = None  # None = desk-scale default
    detection: DetectionConfig = field(
        default_factory=lambda: DetectionConfig(min_height=0.02, min_prominence=0.02)
    )
    image_size: int = 128
    point_radius: int = 2
    margin: int = 8
    augment: ds.AugmentSpec = field(default_factory=lambda: ds.AugmentSpec(multiplier=3))
    split_ratios: tuple = (0.6, 0.2, 0.2)
    forest: rf.ForestConfig = field(default_factory=rf.ForestConfig)
    threads: int = 1
    keep_waveforms: bool = False
    min_accuracy: Optional[float] = None

    def resolved_simulator(self) -> SimulatorConfig:
        from dataclasses import replace

        cfg = self.simulator if self.simulator is not None else desk_config()
        return replace(cfg, master_seed=self.master_seed)

    def resolved_forest(self) -> rf.ForestConfig:
        from dataclasses import replace

        return replace(self.forest, seed=self.master_seed)

    def to_dict(self) -> dict:
        return {
            "schema_version": PIPELINE_SCHEMA_VERSION,
            "master_seed": self.master_seed,
            "runs_per_class": self.runs_per_class,
            "simulator": self.resolved_simulator().to_dict(),
            "detection": {
                "min_height": self.detection.min_height,
                "min_prominence": self.detection.min_prominence,
                "absolute_value": self.detection.absolute_value,
            },
            "render": {
                "image_size": self.image_size,
                "point_radius": self.point_radius,
                "margin": self.margin,
            },
            "augment": self.augment.to_dict(),
            "split_ratios": list(self.split_ratios),
            "forest": {
                "n_trees": self.forest.n_trees,
                "max_depth": self.forest.max_depth,
                "min_samples_leaf": self.forest.min_samples_leaf,
                "features_per_split": self.forest.features_per_split,
                "bootstrap": self.forest.bootstrap,
            },
            "threads": self.threads,
            "keep_waveforms": self.keep_waveforms,
            "min_accuracy": self.min_accuracy,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "PipelineConfig":
        if doc.get("schema_version", PIPELINE_SCHEMA_VERSION) != PIPELINE_SCHEMA_VERSION:
            raise InvalidArgument(f"unsupported pipeline schema {doc.get('schema_version')!r}")
        out = cls()
        if "master_seed" in doc:
            out.master_seed = int(doc["master_seed"])
        if "runs_per_class" in doc:
            out.runs_per_class = int(doc["runs_per_class"])
        if "simulator" in doc and doc["simulator"] is not None:
            sim = dict(doc["simulator"])
            sim.setdefault("master_seed", out.master_seed)
            out.simulator = SimulatorConfig.from_dict(sim)
        if "detection" in doc:
            out.detection = DetectionConfig(**doc["detection"])
        if "render" in doc:
            r = doc["render"]
            out.image_size = int(r.get("image_size", out.image_size))
            out.point_radius = int(r.get("point_radius", out.point_radius))
            out.margin = int(r.get("margin", out.margin))
        if "augment" in doc:
            out.augment = ds.AugmentSpec.from_dict(doc["augment"])
        if "split_ratios" in doc:
            out.split_ratios = tuple(doc["split_ratios"])
        if "forest" in doc:
            out.forest = rf.ForestConfig(**doc["forest"])
        if "threads" in doc:
            out.threads = int(doc["threads"])
        if "keep_waveforms" in doc:
            out.keep_waveforms = bool(doc["keep_waveforms"])
        if "min_accuracy" in doc and doc["min_accuracy"] is not None:
            out.min_accuracy = float(doc["min_accuracy"])
        return out

    @classmethod
    def load(cls, path: Union[str, Path]) -> "PipelineConfig":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def config_schema() -> dict:
    """A machine-readable sketch of the pipeline config document."""
    return {
        "schema_version": PIPELINE_SCHEMA_VERSION,
        "master_seed": "int; the single source of randomness for every stage",
        "runs_per_class": "int; simulated waveforms (= original images) per class",
        "simulator": "SimulatorConfig document; master_seed is overridden by the pipeline seed",
        "detection": {"min_height": "volts or null (auto)", "min_prominence": "volts or null", "absolute_value": "bool"},
        "render": {"image_size": "px", "point_radius": "px", "margin": "px"},
        "augment": ds.AugmentSpec().to_dict(),
        "split_ratios": [0.6, 0.2, 0.2],
        "forest": {"n_trees": 200, "max_depth": None, "min_samples_leaf": 1,
                   "features_per_split": None, "bootstrap": True},
        "threads": 1,
        "keep_waveforms": False,
        "min_accuracy": "percent or null; eval exits nonzero below this",
    }


def _stage(name):
    """Wrap a stage body so failures carry the stage name."""

    def deco(fn):
        def run(*args, **kwargs):
            try:
                return fn(*args, **kwargs)
            except PipelineError:
                raise
            except Exception as exc:
                raise PipelineError(name, exc) from exc

        return run

    return deco


@_stage("simulate")
def _simulate_and_detect(cfg: PipelineConfig, out: Path) -> dict:
    sim_cfg = cfg.resolved_simulator()
    pulse_sets: dict = {}
    for cls in CLASSES:
        sets = []
        for run in range(cfg.runs_per_class):
            w = simulate(cls, sim_cfg, run)
            if cfg.keep_waveforms:
                wdir = out / "waveforms" / cls.value
                wdir.mkdir(parents=True, exist_ok=True)
                write_waveform_csv(w, wdir / f"run_{run:04d}.csv")
            peaks = detect_pulses(w, cfg.detection)
            pdir = out / "pulses" / cls.value
            pdir.mkdir(parents=True, exist_ok=True)
            write_pulses_csv(peaks, pdir / f"run_{run:04d}.csv")
            sets.append([PulseFeatures.from_peak(p) for p in peaks])
        pulse_sets[cls] = sets
    return pulse_sets


@_stage("dataset")
def _build_dataset(cfg: PipelineConfig, out: Path, pulse_sets) -> ds.DatasetManifest:
    return ds.build_dataset(
        pulse_sets,
        out / "dataset",
        augment_spec=cfg.augment,
        ratios=cfg.split_ratios,
        seed=cfg.master_seed,
        image_size=cfg.image_size,
        point_radius=cfg.point_radius,
        margin=cfg.margin,
        threads=cfg.threads,
    )


@_stage("verify")
def _verify(manifest: ds.DatasetManifest, out: Path) -> None:
    report = ds.verify_integrity(manifest, out / "dataset")
    if not report.clean:
        raise InvalidArgument(f"dataset integrity check failed: {report.to_dict()}")


def feature_table(manifest: ds.DatasetManifest, dataset_dir: Union[str, Path]) -> list[dict]:
    """Extract the 74-value vector of every image in the manifest."""
    from PIL import Image

    rows = []
    for rec in manifest.images:
        path = manifest.image_path(dataset_dir, rec)
        arr = np.asarray(Image.open(path).convert("RGB"))
        vec = extract(arr).to_array()
        rows.append(
            {"image_id": rec.image_id, "class": rec.pd_class, "subset": rec.subset,
             "vector": vec}
        )
    return rows


def write_features_csv(rows: list[dict], path: Union[str, Path]) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["image_id", "class", "subset", *FEATURE_NAMES])
        for row in rows:
            writer.writerow(
                [row["image_id"], row["class"], row["subset"],
                 *(repr(float(v)) for v in row["vector"])]
            )


def read_features_csv(path: Union[str, Path]) -> list[dict]:
    rows = []
    with Path(path).open("r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[:3] != ["image_id", "class", "subset"] or tuple(header[3:]) != FEATURE_NAMES:
            raise InvalidArgument(f"{path}: not a feature table (bad header)")
        for line in reader:
            if not line:
                continue
            rows.append(
                {"image_id": line[0], "class": line[1], "subset": line[2],
                 "vector": np.array([float(v) for v in line[3:]], dtype=np.float64)}
            )
    return rows


@_stage("features")
def _features(manifest: ds.DatasetManifest, out: Path) -> list[dict]:
    rows = feature_table(manifest, out / "dataset")
    write_features_csv(rows, out / "features.csv")
    return rows


@_stage("train")
def _train(cfg: PipelineConfig, out: Path, rows: list[dict]) -> rf.ForestModel:
    train_rows = [r for r in rows if r["subset"] == "train"]
    model = rf.train(
        [r["vector"] for r in train_rows],
        [r["class"] for r in train_rows],
        classes=[c.value for c in CLASSES],
        feature_names=list(FEATURE_NAMES),
        cfg=cfg.resolved_forest(),
    )
    (out / "model").mkdir(parents=True, exist_ok=True)
    rf.save(model, out / "model" / "forest.json")
    return model


def _class_samples_figure(manifest: ds.DatasetManifest, dataset_dir: Path, path: Path) -> None:
    """A small per-class gallery of original training images."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    from PIL import Image

    fig, axes = plt.subplots(2, 3, figsize=(7.5, 5.2), dpi=120)
    for ax, cls in zip(axes.ravel(), manifest.classes):
        rec = next(
            r for r in manifest.images
            if r.pd_class == cls and r.parent_id is None and r.subset == "train"
        )
        ax.imshow(np.asarray(Image.open(manifest.image_path(dataset_dir, rec))))
        ax.set_title(cls)
        ax.set_xticks([])
        ax.set_yticks([])
    fig.suptitle("AWA patterns by source class (train originals)")
    fig.tight_layout()
    fig.savefig(path, metadata={"Software": "awapd"})
    plt.close(fig)


@_stage("eval")
def _evaluate(cfg: PipelineConfig, out: Path, rows: list[dict], model: rf.ForestModel,
              manifest: ds.DatasetManifest) -> EvalReport:
    test_rows = [r for r in rows if r["subset"] == "test"]
    report = evaluate(
        lambda x: model.predict_one(x)[0],
        [r["vector"] for r in test_rows],
        [r["class"] for r in test_rows],
        classes=model.classes,
        model={"kind": "random_forest", "n_trees": model.config.n_trees,
               "source": "awapd pipeline"},
        threads=cfg.threads,
    )
    rdir = out / "report"
    rdir.mkdir(parents=True, exist_ok=True)
    report.save(rdir / "report.json")
    render_confusion_png(report, rdir / "confusion.png")
    _class_samples_figure(manifest, out / "dataset", rdir / "class_samples.png")
    return report


def run_pipeline(cfg: PipelineConfig, out_dir: Union[str, Path]) -> EvalReport:
    """Execute every stage in order; see the module docstring for outputs."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    marker = out / ".partial"
    marker.write_text("pipeline in progress\n", encoding="utf-8")

    (out / "pipeline_config.json").write_text(
        json.dumps(cfg.to_dict(), indent=1, sort_keys=True) + "\n", encoding="utf-8"
    )
    pulse_sets = _simulate_and_detect(cfg, out)
    manifest = _build_dataset(cfg, out, pulse_sets)
    _verify(manifest, out)
    rows = _features(manifest, out)
    model = _train(cfg, out, rows)
    report = _evaluate(cfg, out, rows, model, manifest)

    if cfg.min_accuracy is not None and report.overall_accuracy < cfg.min_accuracy:
        raise PipelineError(
            "eval",
            InvalidArgument(
                f"accuracy {report.overall_accuracy:.2f}% below the "
                f"--min-accuracy gate {cfg.min_accuracy:.2f}%"
            ),
        )
    marker.unlink()
    return report
