"""Dataset access for the train/val/test directory layout.

Reads the layout the dataset builder writes: <root>/<subset>/<class>/*.png
with the six source classes in canonical order C, I, S, CI, CS, SI.
"""

from __future__ import annotations

from pathlib import Path

import torch
from PIL import Image
from torch.utils.data import Dataset
from torchvision import transforms

CLASSES = ("C", "I", "S", "CI", "CS", "SI")


class DatasetLayoutError(Exception):
    """The dataset directory is missing subsets or class folders."""


class InputError(Exception):
    """An image file is not an RGB image."""


def make_transform(input_size: int) -> transforms.Compose:
    return transforms.Compose(
        [
            transforms.Resize((input_size, input_size)),
            transforms.ToTensor(),
            transforms.Normalize([0.485, 0.456, 0.406], [0.229, 0.224, 0.225]),
        ]
    )


class AwaImageFolder(Dataset):
    """PNG images of one subset, labeled by canonical class index."""

    def __init__(self, root, subset: str, input_size: int, limit_per_class: int = 0):
        subset_dir = Path(root) / subset
        if not subset_dir.is_dir():
            raise DatasetLayoutError(f"missing subset directory: {subset_dir}")
        self.items: list[tuple[Path, int]] = []
        for idx, cls in enumerate(CLASSES):
            cdir = subset_dir / cls
            if not cdir.is_dir():
                raise DatasetLayoutError(f"missing class folder: {cdir}")
            files = sorted(cdir.glob("*.png"))
            if not files:
                raise DatasetLayoutError(f"no images in {cdir}")
            if limit_per_class:
                files = files[:limit_per_class]
            self.items += [(p, idx) for p in files]
        self.transform = make_transform(input_size)

    def __len__(self) -> int:
        return len(self.items)

    def __getitem__(self, i: int) -> tuple[torch.Tensor, int]:
        path, label = self.items[i]
        img = Image.open(path)
        if img.mode != "RGB":
            raise InputError(f"{path}: expected an RGB image, got mode {img.mode!r}")
        return self.transform(img), label
