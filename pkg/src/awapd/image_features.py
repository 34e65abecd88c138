"""Handcrafted numeric features of an AWA pattern image.

The image is resized to 128x128, the near-white background is separated
from the colored foreground, and a fixed, ordered 74-value vector is
extracted: grayscale kurtosis, foreground fraction, bounding-box width
and height, per-channel foreground mean and standard deviation, and the
foreground occupancy of each cell of an 8x8 grid.

Foreground count and the bounding-box aspect ratio are also computed and
carried on the FeatureVector record, but both are exact functions of
vector entries (count = fraction x pixel count, ratio = width / height),
so they are not duplicated inside the numeric vector.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from PIL import Image

RESIZE_TO = 128
GRID = 8
# a pixel is foreground when any channel is more than this far from white
WHITE_DELTA = 20

FEATURE_NAMES: tuple[str, ...] = (
    "kurtosis",
    "fg_fraction",
    "bbox_width",
    "bbox_height",
    "fg_mean_r",
    "fg_mean_g",
    "fg_mean_b",
    "fg_std_r",
    "fg_std_g",
    "fg_std_b",
) + tuple(f"grid_r{r}_c{c}" for r in range(GRID) for c in range(GRID))

N_FEATURES = len(FEATURE_NAMES)  # 74


@dataclass(frozen=True)
class FeatureVector:
    kurtosis: float
    fg_count: int
    fg_fraction: float
    bbox_width: int
    bbox_height: int
    aspect_ratio: float
    rgb_stats: tuple  # (mean_r, mean_g, mean_b, std_r, std_g, std_b)
    grid_occupancy: tuple  # 64 values, row-major 8x8

    def to_array(self) -> np.ndarray:
        """The ordered 74-value numeric vector (see FEATURE_NAMES)."""
        head = (
            self.kurtosis,
            self.fg_fraction,
            float(self.bbox_width),
            float(self.bbox_height),
            *self.rgb_stats,
        )
        return np.array(head + self.grid_occupancy, dtype=np.float64)


def _as_rgb_array(image) -> np.ndarray:
    """Accept a (H, W, 3) uint8 array or a PIL image."""
    if isinstance(image, Image.Image):
        return np.asarray(image.convert("RGB"))
    arr = np.asarray(image)
    if arr.ndim != 3 or arr.shape[2] != 3 or arr.dtype != np.uint8:
        raise ValueError("expected an RGB uint8 image array")
    return arr


def _resize(arr: np.ndarray, size: int) -> np.ndarray:
    if arr.shape[0] == size and arr.shape[1] == size:
        return arr  # identity: keeps flips of already-resized images exact
    img = Image.fromarray(arr, mode="RGB").resize((size, size), Image.BILINEAR)
    return np.asarray(img)


def segment_foreground(image, resize_to: int = RESIZE_TO) -> np.ndarray:
    """Boolean mask of measurably non-white pixels at resize_to x resize_to."""
    arr = _resize(_as_rgb_array(image), resize_to)
    return (255 - arr.min(axis=2).astype(np.int32)) > WHITE_DELTA


def _kurtosis(x: np.ndarray) -> float:
    """Pearson (non-excess) kurtosis; 0 for (near-)constant input."""
    mu = x.mean()
    var = ((x - mu) ** 2).mean()
    if var < 1e-12:
        return 0.0
    m4 = ((x - mu) ** 4).mean()
    return float(m4 / var**2)


def extract(image) -> FeatureVector:
    """The full feature vector of one AWA image (pure and deterministic)."""
    arr = _resize(_as_rgb_array(image), RESIZE_TO)
    mask = (255 - arr.min(axis=2).astype(np.int32)) > WHITE_DELTA

    gray = arr.sum(axis=2, dtype=np.float64) / 3.0
    kurt = _kurtosis(gray.ravel())

    fg_count = int(mask.sum())
    fg_fraction = fg_count / mask.size

    if fg_count == 0:
        bbox_w = bbox_h = 0
        aspect = 0.0
        rgb_stats = (0.0,) * 6
    else:
        rows = np.flatnonzero(mask.any(axis=1))
        cols = np.flatnonzero(mask.any(axis=0))
        bbox_h = int(rows[-1] - rows[0] + 1)
        bbox_w = int(cols[-1] - cols[0] + 1)
        aspect = bbox_w / bbox_h
        fg_px = arr[mask].astype(np.float64)
        means = fg_px.mean(axis=0)
        stds = fg_px.std(axis=0)  # population formula
        rgb_stats = tuple(float(v) for v in np.concatenate([means, stds]))

    cell = RESIZE_TO // GRID
    occ = mask.reshape(GRID, cell, GRID, cell).mean(axis=(1, 3))
    grid = tuple(float(v) for v in occ.ravel())

    return FeatureVector(
        kurtosis=kurt,
        fg_count=fg_count,
        fg_fraction=fg_fraction,
        bbox_width=bbox_w,
        bbox_height=bbox_h,
        aspect_ratio=aspect,
        rgb_stats=rgb_stats,
        grid_occupancy=grid,
    )
