"""Dataset splitting, augmentation, manifest integrity, and determinism."""

import numpy as np
import pytest

from awapd.awa import PulseFeatures
from awapd.dataset import (
    AugmentSpec,
    DatasetManifest,
    TRANSFORM_KINDS,
    apply_transform,
    augment,
    build_dataset,
    split,
    verify_integrity,
)
from awapd.errors import InvalidArgument
from awapd.signal_model import CLASSES, PdClass
from awapd.simulator import desk_config, ground_truth


def make_ids(cls, n):
    return [f"{cls.value}_{i:04d}" for i in range(n)]


def pulse_sets(n_per_class, seed=1):
    """Cheap per-class pulse populations drawn straight from the simulator."""
    cfg = desk_config(master_seed=seed)
    out = {}
    for cls in CLASSES:
        out[cls] = [
            [
                PulseFeatures(amplitude=g.amplitude, width=g.width,
                              area=g.amplitude * g.width, time=g.time)
                for g in ground_truth(cls, cfg, r)
            ]
            for r in range(n_per_class)
        ]
    return out


# --- split --------------------------------------------------------------------

def test_split_250_is_150_50_50():
    ids = {PdClass.C: make_ids(PdClass.C, 250)}
    a = split(ids, (0.6, 0.2, 0.2), seed=3)
    assert len(a["train"][PdClass.C]) == 150
    assert len(a["val"][PdClass.C]) == 50
    assert len(a["test"][PdClass.C]) == 50


def test_split_exact_division():
    ids = {PdClass.I: make_ids(PdClass.I, 10)}
    a = split(ids, (0.6, 0.2, 0.2), seed=3)
    assert [len(a[s][PdClass.I]) for s in ("train", "val", "test")] == [6, 2, 2]


def test_split_remainder_goes_to_train():
    ids = {PdClass.I: make_ids(PdClass.I, 11)}
    a = split(ids, (0.6, 0.2, 0.2), seed=3)
    assert [len(a[s][PdClass.I]) for s in ("train", "val", "test")] == [7, 2, 2]


def test_split_is_a_partition():
    ids = {c: make_ids(c, 23) for c in CLASSES}
    a = split(ids, (0.6, 0.2, 0.2), seed=9)
    for c in CLASSES:
        parts = [a[s][c] for s in ("train", "val", "test")]
        joined = sum(parts, [])
        assert sorted(joined) == sorted(ids[c])
        assert len(set(joined)) == len(joined)


def test_split_deterministic_per_seed():
    ids = {PdClass.S: make_ids(PdClass.S, 40)}
    assert split(ids, seed=5) == split(ids, seed=5)
    assert split(ids, seed=5) != split(ids, seed=6)


def test_split_bad_ratios():
    ids = {PdClass.C: make_ids(PdClass.C, 10)}
    with pytest.raises(InvalidArgument):
        split(ids, (0.6, 0.2, 0.1))


def test_split_too_few_images():
    ids = {PdClass.C: make_ids(PdClass.C, 4)}
    with pytest.raises(InvalidArgument):
        split(ids)


# --- transforms and augment -----------------------------------------------------

def checker(size=128):
    arr = np.full((size, size, 3), 255, dtype=np.uint8)
    arr[8:40, 8:40] = (30, 60, 90)
    arr[80:100, 90:120] = (200, 10, 10)
    return arr


def test_transforms_preserve_shape_and_dtype():
    arr = checker()
    params = {
        "scale": {"factor": 1.08},
        "gaussian_blur": {"sigma": 1.0},
        "brightness": {"delta": -0.08},
        "contrast": {"factor": 0.93},
        "shear": {"angle_deg": 7.5},
        "rotation": {"angle_deg": -12.0},
        "horizontal_flip": {},
    }
    for kind in TRANSFORM_KINDS:
        out = apply_transform(arr, kind, params[kind])
        assert out.shape == arr.shape and out.dtype == np.uint8
        assert not np.array_equal(out, arr)  # every transform changes bytes


def test_flip_is_involution():
    arr = checker()
    once = apply_transform(arr, "horizontal_flip", {})
    twice = apply_transform(once, "horizontal_flip", {})
    assert np.array_equal(twice, arr)
    assert np.array_equal(once, arr[:, ::-1])


def test_brightness_and_contrast_math():
    arr = np.full((64, 64, 3), 100, dtype=np.uint8)
    out = apply_transform(arr, "brightness", {"delta": 0.1})
    assert (out == 110).all()
    out = apply_transform(arr, "contrast", {"factor": 0.9})
    assert (out == round(128 + (100 - 128) * 0.9)).all()


def test_geometric_fill_is_background():
    arr = np.zeros((64, 64, 3), dtype=np.uint8)  # all-black reveals the fill
    out = apply_transform(arr, "rotation", {"angle_deg": 15.0}, background=(255, 255, 255))
    assert (out == 255).all(axis=2).any()  # corners exposed and filled white


def test_augment_counts_and_determinism():
    arr = checker()
    spec = AugmentSpec(multiplier=5)
    out = augment(arr, spec, item_seed=42)
    assert len(out) == 5
    assert out[0][1] == "original"
    assert np.array_equal(out[0][0], arr)
    for img, kind, params in out[1:]:
        assert kind in TRANSFORM_KINDS
        assert img.shape == arr.shape
    again = augment(arr, spec, item_seed=42)
    for (a, k1, p1), (b, k2, p2) in zip(out, again):
        assert np.array_equal(a, b) and k1 == k2 and p1 == p2
    other = augment(arr, spec, item_seed=43)
    assert any(k1 != k2 or p1 != p2 for (_, k1, p1), (_, k2, p2) in zip(out, other))


def test_augment_multiplier_one_is_identity():
    arr = checker()
    out = augment(arr, AugmentSpec(multiplier=1), item_seed=0)
    assert len(out) == 1 and np.array_equal(out[0][0], arr)


# --- build + verify ---------------------------------------------------------------

def test_build_dataset_counts_and_integrity(tmp_path):
    sets = pulse_sets(6)
    manifest = build_dataset(
        sets, tmp_path / "ds", augment_spec=AugmentSpec(multiplier=2),
        seed=11, image_size=128, threads=1,
    )
    counts = manifest.counts()
    for cls in manifest.classes:
        assert counts[cls] == {"train": 8, "val": 2, "test": 2}  # 4/1/1 originals x2
    assert len(manifest.images) == 6 * 12
    report = verify_integrity(manifest, tmp_path / "ds")
    assert report.clean, report.to_dict()


def test_build_dataset_10_originals_multiplier_2(tmp_path):
    manifest = build_dataset(
        pulse_sets(10), tmp_path / "ds", augment_spec=AugmentSpec(multiplier=2),
        seed=21, image_size=128,
    )
    counts = manifest.counts()
    for cls in manifest.classes:
        assert counts[cls] == {"train": 12, "val": 4, "test": 4}


def test_build_dataset_leakage_freedom(tmp_path):
    manifest = build_dataset(
        pulse_sets(5), tmp_path / "ds", augment_spec=AugmentSpec(multiplier=3),
        seed=2, image_size=128,
    )
    subset_of = {r.image_id: r.subset for r in manifest.images}
    augmented = [r for r in manifest.images if r.parent_id is not None]
    assert augmented
    for r in augmented:
        assert subset_of[r.parent_id] == r.subset


def test_build_dataset_deterministic_and_thread_independent(tmp_path):
    sets = pulse_sets(5)
    m1 = build_dataset(sets, tmp_path / "a", augment_spec=AugmentSpec(multiplier=2),
                       seed=7, image_size=128, threads=1)
    m2 = build_dataset(sets, tmp_path / "b", augment_spec=AugmentSpec(multiplier=2),
                       seed=7, image_size=128, threads=4)
    assert m1.to_json() == m2.to_json()
    files_a = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*.png"))
    files_b = sorted(p.relative_to(tmp_path / "b") for p in (tmp_path / "b").rglob("*.png"))
    assert files_a == files_b
    for rel in files_a:
        assert (tmp_path / "a" / rel).read_bytes() == (tmp_path / "b" / rel).read_bytes()


def test_manifest_roundtrip(tmp_path):
    manifest = build_dataset(pulse_sets(5), tmp_path / "ds",
                             augment_spec=AugmentSpec(multiplier=2), seed=4, image_size=128)
    loaded = DatasetManifest.load(tmp_path / "ds" / "manifest.json")
    assert loaded.to_json() == manifest.to_json()


def test_verify_detects_planted_copy(tmp_path):
    manifest = build_dataset(pulse_sets(5), tmp_path / "ds",
                             augment_spec=AugmentSpec(multiplier=2), seed=8, image_size=128)
    ds = tmp_path / "ds"
    test_img = next(r for r in manifest.images if r.subset == "test")
    src = manifest.image_path(ds, test_img)
    dst = ds / "train" / test_img.pd_class / "copied.png"
    dst.write_bytes(src.read_bytes())
    report = verify_integrity(manifest, ds)
    assert len(report.cross_subset_digests) == 1
    assert any(m["kind"] == "unlisted" for m in report.mismatches)


def test_verify_detects_corrupted_file(tmp_path):
    manifest = build_dataset(pulse_sets(5), tmp_path / "ds",
                             augment_spec=AugmentSpec(multiplier=2), seed=9, image_size=128)
    ds = tmp_path / "ds"
    victim = manifest.image_path(ds, manifest.images[0])
    from awapd.awa import render_awa, RenderConfig
    other = render_awa([], RenderConfig(image_width=128, image_height=128,
                                        amplitude_range=(0, 1), area_range=(0, 1),
                                        width_range=(0, 1)))
    import io
    from PIL import Image
    buf = io.BytesIO()
    Image.fromarray(other.pixels).save(buf, format="PNG")
    victim.write_bytes(buf.getvalue())
    report = verify_integrity(manifest, ds)
    kinds = [m["kind"] for m in report.mismatches]
    assert kinds.count("digest_mismatch") == 1


def test_verify_detects_missing_file(tmp_path):
    manifest = build_dataset(pulse_sets(5), tmp_path / "ds",
                             augment_spec=AugmentSpec(multiplier=2), seed=10, image_size=128)
    ds = tmp_path / "ds"
    manifest.image_path(ds, manifest.images[3]).unlink()
    report = verify_integrity(manifest, ds)
    assert any(m["kind"] == "missing" for m in report.mismatches)
    assert not report.clean
