"""Shared fixtures: a tiny on-disk dataset with trivially separable classes."""

import numpy as np
import pytest
from PIL import Image

from cnn_harness.data import CLASSES


def class_image(rng, class_index, size=96):
    """A distinct blob position and color per class, plus light noise."""
    arr = np.full((size, size, 3), 255, dtype=np.uint8)
    cx = 16 + 24 * (class_index % 3)
    cy = 20 + 40 * (class_index // 3)
    color = [(40, 40, 200), (40, 200, 40), (200, 40, 40),
             (200, 200, 40), (200, 40, 200), (40, 200, 200)][class_index]
    yy, xx = np.mgrid[0:size, 0:size]
    arr[(yy - cy) ** 2 + (xx - cx) ** 2 <= 100] = color
    n = rng.integers(5, 15)
    arr[rng.integers(0, size, n), rng.integers(0, size, n)] = 0
    return arr


@pytest.fixture(scope="session")
def tiny_dataset(tmp_path_factory):
    """train/val/test layout, 6 classes, 4/2/2 images per class."""
    root = tmp_path_factory.mktemp("tinyds")
    rng = np.random.default_rng(0)
    for subset, count in (("train", 4), ("val", 2), ("test", 2)):
        for ci, cls in enumerate(CLASSES):
            d = root / subset / cls
            d.mkdir(parents=True)
            for i in range(count):
                Image.fromarray(class_image(rng, ci)).save(d / f"{cls}_{i}.png")
    return root
