"""Tile datasets read from STX1 files on disk.

The pipeline exports normalized image tiles (f32, display units in
[0, 255]) and paired ground-truth tiles (u8, {0, 1}) under mirrored
directory trees; tiles pair up by relative path. Images are rescaled to
[0, 1] for the network.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import torch
from torch.utils.data import Dataset

from .stx import read_tensor


class DatasetError(ValueError):
    """Raised when a tile dataset is empty or inconsistent."""


def _collect(root: Path) -> dict[str, Path]:
    return {str(p.relative_to(root)): p for p in sorted(root.rglob("*.stx"))}


class TilePairDataset(Dataset):
    """Paired (image, mask) tiles, matched by relative path across roots."""

    def __init__(self, image_roots: list[Path] | tuple[Path, ...],
                 mask_roots: list[Path] | tuple[Path, ...]):
        if len(image_roots) != len(mask_roots):
            raise DatasetError("image and mask root lists differ in length")
        images: list[np.ndarray] = []
        masks: list[np.ndarray] = []
        for img_root, mask_root in zip(image_roots, mask_roots):
            img_files = _collect(Path(img_root))
            mask_files = _collect(Path(mask_root))
            if set(img_files) != set(mask_files):
                missing = set(img_files) ^ set(mask_files)
                raise DatasetError(
                    f"unpaired tiles under {img_root} / {mask_root}: "
                    f"{sorted(missing)[:5]}")
            for rel in sorted(img_files):
                img = read_tensor(img_files[rel]).astype(np.float32) / 255.0
                mask = read_tensor(mask_files[rel]).astype(np.float32)
                if img.shape != mask.shape:
                    raise DatasetError(f"tile shape mismatch at {rel}")
                images.append(img)
                masks.append(mask)
        if not images:
            raise DatasetError("tile dataset is empty")
        self.images = torch.from_numpy(np.stack(images)[:, None])
        self.masks = torch.from_numpy(np.stack(masks)[:, None])

    def __len__(self) -> int:
        return self.images.shape[0]

    def __getitem__(self, idx: int) -> tuple[torch.Tensor, torch.Tensor]:
        return self.images[idx], self.masks[idx]
