"""Leak-free augmented image dataset construction.

Build order is fixed: render all originals with shared axis ranges,
split the originals of each class into train/val/test, then augment
strictly inside each subset.  Every augmented image therefore lives in
the same subset as its parent, which verify_integrity re-checks from the
manifest and the files on disk.

Each variant applies exactly one transform drawn from the augmentation
menu.  The horizontal flip, when drawn, is always applied: an unflipped
variant would be byte-identical to its parent and content digests are
required to be unique.
"""

from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Optional, Sequence, Union

import numpy as np
from PIL import Image, ImageFilter

from .awa import PulseFeatures, RenderConfig, auto_ranges, render_awa
from .errors import InvalidArgument
from .seeding import stream, stream_key
from .signal_model import PdClass

SUBSETS = ("train", "val", "test")

TRANSFORM_KINDS = (
    "scale",
    "gaussian_blur",
    "brightness",
    "contrast",
    "shear",
    "rotation",
    "horizontal_flip",
)


@dataclass(frozen=True)
class AugmentSpec:
    """Augmentation menu: one transform per variant, parameters per kind."""

    multiplier: int = 5  # images per original, including the original
    scale_range: tuple[float, float] = (0.9, 1.1)
    blur_sigma_range: tuple[float, float] = (0.5, 1.5)
    brightness_range: tuple[float, float] = (-0.1, 0.1)
    contrast_range: tuple[float, float] = (0.9, 1.1)
    shear_range_deg: tuple[float, float] = (-10.0, 10.0)
    rotation_range_deg: tuple[float, float] = (-15.0, 15.0)
    flip_probability: float = 0.5

    def __post_init__(self):
        if self.multiplier < 1:
            raise InvalidArgument("multiplier must be >= 1")

    def to_dict(self) -> dict:
        return {
            "multiplier": self.multiplier,
            "scale_range": list(self.scale_range),
            "blur_sigma_range": list(self.blur_sigma_range),
            "brightness_range": list(self.brightness_range),
            "contrast_range": list(self.contrast_range),
            "shear_range_deg": list(self.shear_range_deg),
            "rotation_range_deg": list(self.rotation_range_deg),
            "flip_probability": self.flip_probability,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AugmentSpec":
        return cls(
            multiplier=int(d["multiplier"]),
            scale_range=tuple(d["scale_range"]),
            blur_sigma_range=tuple(d["blur_sigma_range"]),
            brightness_range=tuple(d["brightness_range"]),
            contrast_range=tuple(d["contrast_range"]),
            shear_range_deg=tuple(d["shear_range_deg"]),
            rotation_range_deg=tuple(d["rotation_range_deg"]),
            flip_probability=float(d["flip_probability"]),
        )


def apply_transform(
    arr: np.ndarray, kind: str, params: dict, background: tuple[int, int, int] = (255, 255, 255)
) -> np.ndarray:
    """Apply one named transform; output dimensions equal input dimensions."""
    h, w = arr.shape[:2]
    bg = tuple(int(c) for c in background)
    if kind == "horizontal_flip":
        return arr[:, ::-1].copy()
    if kind == "brightness":
        f = 1.0 + params["delta"]
        return np.clip(np.rint(arr.astype(np.float64) * f), 0, 255).astype(np.uint8)
    if kind == "contrast":
        f = params["factor"]
        out = 128.0 + (arr.astype(np.float64) - 128.0) * f
        return np.clip(np.rint(out), 0, 255).astype(np.uint8)
    img = Image.fromarray(arr, mode="RGB")
    if kind == "gaussian_blur":
        out = img.filter(ImageFilter.GaussianBlur(radius=params["sigma"]))
    elif kind == "scale":
        f = params["factor"]
        cx, cy = w / 2.0, h / 2.0
        matrix = (1 / f, 0.0, cx * (1 - 1 / f), 0.0, 1 / f, cy * (1 - 1 / f))
        out = img.transform((w, h), Image.AFFINE, matrix, resample=Image.BILINEAR, fillcolor=bg)
    elif kind == "shear":
        t = math.tan(math.radians(params["angle_deg"]))
        cy = h / 2.0
        matrix = (1.0, -t, t * cy, 0.0, 1.0, 0.0)
        out = img.transform((w, h), Image.AFFINE, matrix, resample=Image.BILINEAR, fillcolor=bg)
    elif kind == "rotation":
        out = img.rotate(params["angle_deg"], resample=Image.BILINEAR, fillcolor=bg)
    else:
        raise InvalidArgument(f"unknown transform kind {kind!r}")
    return np.asarray(out)


def _draw_transform(rng: np.random.Generator, spec: AugmentSpec) -> tuple[str, dict]:
    kind = TRANSFORM_KINDS[int(rng.integers(0, len(TRANSFORM_KINDS)))]
    if kind == "scale":
        return kind, {"factor": float(rng.uniform(*spec.scale_range))}
    if kind == "gaussian_blur":
        return kind, {"sigma": float(rng.uniform(*spec.blur_sigma_range))}
    if kind == "brightness":
        return kind, {"delta": float(rng.uniform(*spec.brightness_range))}
    if kind == "contrast":
        return kind, {"factor": float(rng.uniform(*spec.contrast_range))}
    if kind == "shear":
        return kind, {"angle_deg": float(rng.uniform(*spec.shear_range_deg))}
    if kind == "rotation":
        return kind, {"angle_deg": float(rng.uniform(*spec.rotation_range_deg))}
    return kind, {}  # horizontal_flip


def augment(
    arr: np.ndarray,
    spec: AugmentSpec,
    item_seed: int,
    background: tuple[int, int, int] = (255, 255, 255),
) -> list[tuple[np.ndarray, str, dict]]:
    """The original plus (multiplier - 1) single-transform variants.

    Returns (image, transform_kind, params) triples; the original comes
    first with kind "original".  A draw landing so close to the identity
    that the variant quantizes to the same bytes as the original (or a
    sibling) is redrawn from the next substream, keeping content digests
    unique without shrinking the parameter ranges.
    """
    out = [(arr, "original", {})]
    seen = [arr]
    for k in range(1, spec.multiplier):
        for attempt in range(32):
            rng = stream(item_seed, "variant", k, attempt)
            kind, params = _draw_transform(rng, spec)
            candidate = apply_transform(arr, kind, params, background)
            if not any(np.array_equal(candidate, s) for s in seen):
                break
        else:
            raise InvalidArgument(
                "could not draw a distinct augmentation variant; the source "
                "image is probably too uniform to augment"
            )
        seen.append(candidate)
        out.append((candidate, kind, params))
    return out


def split(
    ids_per_class: Mapping[PdClass, Sequence[str]],
    ratios: Sequence[float] = (0.6, 0.2, 0.2),
    seed: int = 0,
) -> dict[str, dict[PdClass, list[str]]]:
    """Seeded per-class shuffle, then a contiguous train/val/test partition.

    Counts are floor-based on the ratios with the remainder assigned to
    train, per class.
    """
    if len(ratios) != 3 or abs(sum(ratios) - 1.0) > 1e-9:
        raise InvalidArgument("split ratios must be three values summing to 1")
    assignment: dict[str, dict[PdClass, list[str]]] = {s: {} for s in SUBSETS}
    for cls in sorted(ids_per_class, key=lambda c: c.order):
        ids = list(ids_per_class[cls])
        if len(ids) < 5:
            raise InvalidArgument(f"class {cls.value} has fewer than 5 images")
        rng = stream(seed, "split", cls.value)
        perm = [ids[i] for i in rng.permutation(len(ids))]
        n = len(ids)
        n_val = math.floor(n * ratios[1] + 1e-9)
        n_test = math.floor(n * ratios[2] + 1e-9)
        n_train = n - n_val - n_test  # floor(train) plus any remainder
        assignment["train"][cls] = perm[:n_train]
        assignment["val"][cls] = perm[n_train : n_train + n_val]
        assignment["test"][cls] = perm[n_train + n_val :]
    return assignment


@dataclass(frozen=True)
class ImageRecord:
    image_id: str
    pd_class: str
    subset: str
    parent_id: Optional[str]  # None for originals
    transform_kind: str
    transform_params: dict
    digest: str  # sha256 of the PNG bytes

    def to_dict(self) -> dict:
        return {
            "image_id": self.image_id,
            "class": self.pd_class,
            "subset": self.subset,
            "parent_id": self.parent_id,
            "transform": {"kind": self.transform_kind, "params": self.transform_params},
            "digest": self.digest,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ImageRecord":
        return cls(
            image_id=d["image_id"],
            pd_class=d["class"],
            subset=d["subset"],
            parent_id=d["parent_id"],
            transform_kind=d["transform"]["kind"],
            transform_params=d["transform"]["params"],
            digest=d["digest"],
        )


@dataclass
class DatasetManifest:
    classes: list
    split_ratios: list
    master_seed: int
    render: dict  # RenderConfig.to_dict() including the shared axis ranges
    augment: dict  # AugmentSpec.to_dict()
    images: list  # ImageRecord

    def to_json(self) -> str:
        doc = {
            "schema_version": 1,
            "classes": self.classes,
            "split_ratios": self.split_ratios,
            "master_seed": self.master_seed,
            "render": self.render,
            "augment": self.augment,
            "images": [r.to_dict() for r in self.images],
        }
        return json.dumps(doc, indent=1, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "DatasetManifest":
        doc = json.loads(text)
        if doc.get("schema_version") != 1:
            raise InvalidArgument(f"unsupported manifest version {doc.get('schema_version')!r}")
        return cls(
            classes=doc["classes"],
            split_ratios=doc["split_ratios"],
            master_seed=doc["master_seed"],
            render=doc["render"],
            augment=doc["augment"],
            images=[ImageRecord.from_dict(d) for d in doc["images"]],
        )

    def save(self, path: Union[str, Path]) -> None:
        Path(path).write_text(self.to_json() + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: Union[str, Path]) -> "DatasetManifest":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))

    def counts(self) -> dict:
        """{class: {subset: image count}} for quick arithmetic checks."""
        out: dict = {c: {s: 0 for s in SUBSETS} for c in self.classes}
        for r in self.images:
            out[r.pd_class][r.subset] += 1
        return out

    def image_path(self, out_dir: Union[str, Path], record: ImageRecord) -> Path:
        return Path(out_dir) / record.subset / record.pd_class / f"{record.image_id}.png"


def _digest(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _png_bytes(arr: np.ndarray) -> bytes:
    import io

    buf = io.BytesIO()
    Image.fromarray(arr, mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def build_dataset(
    pulse_sets: Mapping[PdClass, Sequence[Sequence[PulseFeatures]]],
    out_dir: Union[str, Path],
    augment_spec: Optional[AugmentSpec] = None,
    ratios: Sequence[float] = (0.6, 0.2, 0.2),
    seed: int = 0,
    image_size: int = 256,
    point_radius: int = 2,
    margin: int = 8,
    threads: int = 1,
) -> DatasetManifest:
    """Render, split, augment, and write a labeled image dataset.

    Output tree: <out>/<subset>/<class>/<image_id>.png plus manifest.json.
    Deterministic for fixed inputs and seed, independent of thread count.
    """
    if not pulse_sets:
        raise InvalidArgument("need at least one class of pulse sets")
    if augment_spec is None:
        augment_spec = AugmentSpec()
    out_dir = Path(out_dir)

    a_rng, r_rng, w_rng = auto_ranges(
        [pulses for sets in pulse_sets.values() for pulses in sets]
    )
    render_cfg = RenderConfig(
        image_width=image_size,
        image_height=image_size,
        amplitude_range=a_rng,
        area_range=r_rng,
        width_range=w_rng,
        point_radius=point_radius,
        margin=margin,
    )

    ids_per_class: dict[PdClass, list[str]] = {}
    source_by_id: dict[str, Sequence[PulseFeatures]] = {}
    class_of_id: dict[str, PdClass] = {}
    for cls in sorted(pulse_sets, key=lambda c: c.order):
        sets = pulse_sets[cls]
        if len(sets) < 1:
            raise InvalidArgument(f"class {cls.value} has no pulse sources")
        ids = []
        for i, pulses in enumerate(sets):
            image_id = f"{cls.value}_{i:04d}"
            ids.append(image_id)
            source_by_id[image_id] = pulses
            class_of_id[image_id] = cls
        ids_per_class[cls] = ids

    assignment = split(ids_per_class, ratios, seed)
    subset_of_id = {
        image_id: subset
        for subset, per_class in assignment.items()
        for ids in per_class.values()
        for image_id in ids
    }

    for subset in SUBSETS:
        for cls in ids_per_class:
            (out_dir / subset / cls.value).mkdir(parents=True, exist_ok=True)

    def process(image_id: str) -> list[ImageRecord]:
        cls = class_of_id[image_id]
        subset = subset_of_id[image_id]
        base = render_awa(source_by_id[image_id], render_cfg).pixels
        records = []
        variants = augment(base, augment_spec, stream_key(seed, "aug", image_id),
                           background=render_cfg.background)
        for k, (arr, kind, params) in enumerate(variants):
            vid = image_id if k == 0 else f"{image_id}_aug{k}"
            data = _png_bytes(arr)
            (out_dir / subset / cls.value / f"{vid}.png").write_bytes(data)
            records.append(
                ImageRecord(
                    image_id=vid,
                    pd_class=cls.value,
                    subset=subset,
                    parent_id=None if k == 0 else image_id,
                    transform_kind=kind,
                    transform_params=params,
                    digest=_digest(data),
                )
            )
        return records

    all_ids = [i for ids in ids_per_class.values() for i in ids]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            per_image = list(pool.map(process, all_ids))
    else:
        per_image = [process(i) for i in all_ids]

    images = [rec for records in per_image for rec in records]
    images.sort(key=lambda r: (PdClass(r.pd_class).order, r.image_id))

    digests = [r.digest for r in images]
    if len(set(digests)) != len(digests):
        raise InvalidArgument(
            "duplicate image content in the dataset; adjust the simulator "
            "config or seed so every rendered image is unique"
        )

    manifest = DatasetManifest(
        classes=[c.value for c in sorted(ids_per_class, key=lambda c: c.order)],
        split_ratios=list(ratios),
        master_seed=seed,
        render=render_cfg.to_dict(),
        augment=augment_spec.to_dict(),
        images=images,
    )
    manifest.save(out_dir / "manifest.json")
    return manifest


@dataclass
class IntegrityReport:
    cross_subset_digests: list  # {"digest", "paths"}
    cross_subset_parentage: list  # {"image_id", "subset", "parent_id", "parent_subset"}
    mismatches: list  # {"kind": missing|digest_mismatch|unlisted, "path"}

    @property
    def clean(self) -> bool:
        return not (self.cross_subset_digests or self.cross_subset_parentage or self.mismatches)

    def to_dict(self) -> dict:
        return {
            "clean": self.clean,
            "cross_subset_digests": self.cross_subset_digests,
            "cross_subset_parentage": self.cross_subset_parentage,
            "mismatches": self.mismatches,
        }


def verify_integrity(manifest: DatasetManifest, out_dir: Union[str, Path]) -> IntegrityReport:
    """Re-hash the dataset on disk and cross-check it against the manifest.

    Reports (a) any content digest appearing in more than one subset on
    disk, (b) any augmented image whose parent sits in another subset,
    (c) every manifest/disk mismatch: missing files, changed bytes, and
    image files the manifest does not know about.
    """
    out_dir = Path(out_dir)
    mismatches = []

    disk: dict[Path, str] = {}
    for path in sorted(out_dir.glob("*/*/*.png")):
        disk[path.relative_to(out_dir)] = _digest(path.read_bytes())

    expected: dict[Path, str] = {}
    subset_of: dict[str, str] = {}
    for rec in manifest.images:
        rel = Path(rec.subset) / rec.pd_class / f"{rec.image_id}.png"
        expected[rel] = rec.digest
        subset_of[rec.image_id] = rec.subset

    for rel, digest in expected.items():
        if rel not in disk:
            mismatches.append({"kind": "missing", "path": str(rel)})
        elif disk[rel] != digest:
            mismatches.append({"kind": "digest_mismatch", "path": str(rel)})
    for rel in disk:
        if rel not in expected:
            mismatches.append({"kind": "unlisted", "path": str(rel)})

    by_digest: dict[str, list[Path]] = {}
    for rel, digest in disk.items():
        by_digest.setdefault(digest, []).append(rel)
    collisions = []
    for digest, paths in sorted(by_digest.items()):
        subsets = {p.parts[0] for p in paths}
        if len(subsets) > 1:
            collisions.append({"digest": digest, "paths": [str(p) for p in paths]})

    parentage = []
    for rec in manifest.images:
        if rec.parent_id is None:
            continue
        parent_subset = subset_of.get(rec.parent_id)
        if parent_subset != rec.subset:
            parentage.append(
                {
                    "image_id": rec.image_id,
                    "subset": rec.subset,
                    "parent_id": rec.parent_id,
                    "parent_subset": parent_subset,
                }
            )

    return IntegrityReport(
        cross_subset_digests=collisions,
        cross_subset_parentage=parentage,
        mismatches=mismatches,
    )
