"""Deterministic split of a slice into fixed-size tiles and its exact inverse.

Non-conforming sizes are padded up to a whole tile grid: edge replication
for intensity images (avoids artificial dark borders), zero fill for masks
and probability maps. ``merge`` crops the padding back off, so
``merge(split(x)) == x`` for every size.

On-disk tiles follow the naming convention
``<case>/<ir>/<z>/<row>_<col>.stx``.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ValidationError


@dataclass(frozen=True)
class TileLayout:
    src_dims: tuple[int, int]
    tile_dim: int
    grid: tuple[int, int]  # (rows, cols)
    pad: tuple[int, int]  # (bottom, right)

    @classmethod
    def for_dims(cls, ny: int, nx: int, tile_dim: int) -> "TileLayout":
        if tile_dim <= 0:
            raise ValueError(f"tile_dim must be positive, got {tile_dim}")
        if ny < 1 or nx < 1:
            raise ValidationError(f"image dims must be >= 1, got {(ny, nx)}")
        rows = -(-ny // tile_dim)
        cols = -(-nx // tile_dim)
        return cls(
            src_dims=(ny, nx),
            tile_dim=tile_dim,
            grid=(rows, cols),
            pad=(rows * tile_dim - ny, cols * tile_dim - nx),
        )

    @property
    def n_tiles(self) -> int:
        return self.grid[0] * self.grid[1]


@dataclass(frozen=True)
class TileSet:
    layout: TileLayout
    tiles: tuple[np.ndarray, ...]  # row-major, top-left first

    def __post_init__(self):
        d = self.layout.tile_dim
        if len(self.tiles) != self.layout.n_tiles:
            raise ValidationError(
                f"expected {self.layout.n_tiles} tiles, got {len(self.tiles)}"
            )
        for t in self.tiles:
            if t.shape != (d, d):
                raise ValidationError(f"tile shape {t.shape} != ({d}, {d})")


def split(img: np.ndarray, tile_dim: int, pad_mode: str = "edge") -> TileSet:
    """Partition a 2D array into row-major tile_dim x tile_dim tiles.

    pad_mode "edge" replicates border pixels, "zero" pads with zeros
    (use for masks and probability maps).
    """
    img = np.asarray(img)
    layout = TileLayout.for_dims(img.shape[0], img.shape[1], tile_dim)
    pb, pr = layout.pad
    if pb or pr:
        if pad_mode == "edge":
            img = np.pad(img, ((0, pb), (0, pr)), mode="edge")
        elif pad_mode == "zero":
            img = np.pad(img, ((0, pb), (0, pr)), mode="constant")
        else:
            raise ValueError(f"unknown pad_mode {pad_mode!r}")
    d = tile_dim
    tiles = tuple(
        img[r * d : (r + 1) * d, c * d : (c + 1) * d].copy()
        for r in range(layout.grid[0])
        for c in range(layout.grid[1])
    )
    return TileSet(layout=layout, tiles=tiles)


def merge(ts: TileSet) -> np.ndarray:
    """Reassemble tiles into the original image, cropping any padding."""
    rows, cols = ts.layout.grid
    d = ts.layout.tile_dim
    out = np.empty((rows * d, cols * d), dtype=ts.tiles[0].dtype)
    for r in range(rows):
        for c in range(cols):
            out[r * d : (r + 1) * d, c * d : (c + 1) * d] = ts.tiles[r * cols + c]
    ny, nx = ts.layout.src_dims
    return out[:ny, :nx]


def tile_path(root: str | Path, case: str, ir: int, z: int, row: int, col: int) -> Path:
    """Canonical on-disk location for one tile tensor."""
    return Path(root) / case / str(ir) / str(z) / f"{row}_{col}.stx"
