"""Per-scale mask assembly and cross-scale fusion.

Per scale: binarize tile probability maps, merge the tile grid back into
the interpolated slice, nearest-down-sample by the interpolation ratio,
and stack slices into a 3D mask. Across scales: voxelwise union of the
per-scale masks followed by a single largest-connected-component
extraction.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from . import resample, tiler
from .errors import InputError, ValidationError
from .tiler import TileLayout, TileSet, tile_path
from .volgrid import Mask3D, ProbMap, ScaleSpec

STRATEGIES = ("ir1", "ir1+ir2", "ir1+ir2+ir4", "ir1+ir2+ir4+ir8")


@dataclass(frozen=True)
class EnsembleConfig:
    threshold: float = 0.5
    connectivity: int = 26
    scales: ScaleSpec = field(default_factory=ScaleSpec)
    binarize_first: bool = True  # binarize tile maps before downsampling

    def __post_init__(self):
        if not 0.0 < self.threshold < 1.0:
            raise ValidationError(f"threshold must be in (0, 1), got {self.threshold}")
        if self.connectivity not in (6, 18, 26):
            raise ValidationError(f"connectivity must be 6, 18 or 26, got {self.connectivity}")


def parse_strategy(token: str) -> tuple[int, ...]:
    """Turn a strategy name like "ir1+ir2+ir4" into its ratio tuple."""
    try:
        ratios = tuple(sorted(int(part[2:]) for part in token.replace(" ", "").split("+")))
        if not ratios or any(r < 1 for r in ratios):
            raise ValueError
        if not all(part.startswith("ir") for part in token.replace(" ", "").split("+")):
            raise ValueError
    except ValueError:
        raise ValidationError(f"unknown strategy {token!r}") from None
    return ratios


def binarize(pm: ProbMap | np.ndarray, threshold: float = 0.5) -> np.ndarray:
    """Threshold a probability map; ties (p == threshold) count as airway."""
    arr = pm.data if isinstance(pm, ProbMap) else np.asarray(pm)
    return (arr >= threshold).astype(np.uint8)


def assemble_slice(prob_tiles: list[np.ndarray], layout: TileLayout, ir: int,
                   threshold: float = 0.5, binarize_first: bool = True) -> np.ndarray:
    """Binarize + merge + nearest-downsample one slice's tile maps.

    With ``binarize_first`` False the probabilities are merged and
    down-sampled first, then thresholded (the alternative ordering for
    threshold-vs-ratio studies).
    """
    if binarize_first:
        ts = TileSet(layout, tuple(binarize(t, threshold) for t in prob_tiles))
        plane = tiler.merge(ts)
        return resample.downsample_nearest(plane, ir)
    ts = TileSet(layout, tuple(np.asarray(t, dtype=np.float32) for t in prob_tiles))
    plane = resample.downsample_nearest(tiler.merge(ts), ir)
    return binarize(plane, threshold)


def assemble_scale_mask(maps_root: str | Path, case: str, ir: int, nz: int,
                        slice_dims: tuple[int, int], tile_dim: int,
                        config: EnsembleConfig | None = None) -> Mask3D:
    """Assemble the per-scale 3D mask from on-disk tile probability maps.

    Tiles are expected at ``<maps_root>/<case>/<ir>/<z>/<row>_<col>.stx``
    for every slice and grid position.
    """
    from .volgrid import read_tensor

    config = config or EnsembleConfig()
    ny, nx = slice_dims
    layout = TileLayout.for_dims(ny * ir, nx * ir, tile_dim)
    planes = []
    for z in range(nz):
        tiles = []
        for row in range(layout.grid[0]):
            for col in range(layout.grid[1]):
                path = tile_path(maps_root, case, ir, z, row, col)
                if not path.exists():
                    raise InputError(f"missing tile map {path}")
                tiles.append(read_tensor(path))
        planes.append(
            assemble_slice(tiles, layout, ir, config.threshold, config.binarize_first)
        )
    return Mask3D(np.stack(planes, axis=0))


def union_masks(masks: list[Mask3D]) -> Mask3D:
    """Voxelwise OR of equally shaped masks."""
    if not masks:
        raise ValidationError("union of zero masks")
    dims = masks[0].dims
    for m in masks[1:]:
        if m.dims != dims:
            raise ValidationError(f"mask dims differ: {m.dims} vs {dims}")
    out = masks[0].data.copy()
    for m in masks[1:]:
        np.logical_or(out, m.data, out=out.view(bool))
    return Mask3D(out)


def largest_connected_component(m: Mask3D, connectivity: int = 26) -> Mask3D:
    """Keep only the largest connected component of a 3D mask.

    Equal-size ties keep the component whose first voxel in (z, y, x)
    raster order comes first, which is the lexicographically smallest.
    """
    rank = {6: 1, 18: 2, 26: 3}
    if connectivity not in rank:
        raise ValidationError(f"connectivity must be 6, 18 or 26, got {connectivity}")
    structure = ndimage.generate_binary_structure(3, rank[connectivity])
    labels, n = ndimage.label(m.data, structure=structure)
    if n == 0:
        return Mask3D(np.zeros_like(m.data))
    counts = np.bincount(labels.ravel())[1:]
    best = counts.max()
    candidates = np.flatnonzero(counts == best) + 1
    if len(candidates) == 1:
        keep = candidates[0]
    else:
        flat = labels.ravel()
        first = np.flatnonzero(np.isin(flat, candidates))[0]
        keep = flat[first]
    return Mask3D((labels == keep).astype(np.uint8))


def run_strategy(scale_masks: dict[int, Mask3D], strategy: tuple[int, ...] | str,
                 config: EnsembleConfig | None = None) -> Mask3D:
    """Union the per-scale masks of a strategy, then extract the LCC."""
    config = config or EnsembleConfig()
    ratios = parse_strategy(strategy) if isinstance(strategy, str) else tuple(strategy)
    missing = [ir for ir in ratios if ir not in scale_masks]
    if missing:
        raise ValidationError(f"strategy needs per-scale masks for ir {missing}")
    combined = union_masks([scale_masks[ir] for ir in ratios])
    return largest_connected_component(combined, config.connectivity)
