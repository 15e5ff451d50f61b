"""Segmenter backends: anything that maps a normalized tile to a probability map.

Three built-in kinds exist for testing and reference (intensity threshold,
region growing, and mask-serving oracles); the real trained model plugs in
through a batch file-exchange protocol: the pipeline writes input tiles as
STX1 tensors into a directory, invokes the backend command once per
(case, ir) with ``{in_dir}``/``{out_dir}`` substituted, and reads the
probability maps back from matching filenames.
"""

from __future__ import annotations

import shlex
import subprocess
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import BackendError, ValidationError
from .volgrid import Mask3D, ProbMap, SliceImage, Volume

_KINDS = ("external", "threshold", "region_grow", "oracle_phantom")

_REQUIRED_PARAMS = {
    "external": ("command",),
    "threshold": ("t",),
    "region_grow": ("seed", "hu_max"),
    "oracle_phantom": ("mask",),
}


@dataclass(frozen=True)
class BackendSpec:
    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValidationError(f"unknown backend kind {self.kind!r}")
        missing = [p for p in _REQUIRED_PARAMS[self.kind] if p not in self.params]
        if missing:
            raise ValidationError(f"backend {self.kind!r} missing params {missing}")


@dataclass(frozen=True)
class PredictJob:
    case: str
    ir: int
    z: int
    row: int
    col: int
    in_path: Path | None = None
    out_path: Path | None = None


class ThresholdBackend:
    """Marks dark pixels as airway: p = 1 where intensity <= t, else 0."""

    def __init__(self, t: float):
        self.t = float(t)

    def predict_tile(self, tile: np.ndarray, job: PredictJob | None = None) -> np.ndarray:
        return (np.asarray(tile) <= self.t).astype(np.float32)


class MaskOracleBackend:
    """Serves tiles of a known reference mask as probabilities.

    Requires job context to locate the tile within the mask volume: the
    reference slice is nearest-up-sampled by ir, zero-padded to the tile
    grid, and the (row, col) tile is returned.
    """

    def __init__(self, mask: Mask3D, tile_dim: int):
        self.mask = mask
        self.tile_dim = tile_dim

    def predict_tile(self, tile: np.ndarray, job: PredictJob) -> np.ndarray:
        from . import resample, tiler

        if job is None:
            raise ValidationError("mask oracle backend needs job context")
        plane = resample.upsample_nearest(self.mask.data[job.z], job.ir)
        ts = tiler.split(plane, self.tile_dim, pad_mode="zero")
        cols = ts.layout.grid[1]
        return ts.tiles[job.row * cols + job.col].astype(np.float32)


def make_backend(spec: BackendSpec, tile_dim: int = 512):
    """Instantiate a built-in backend object; external kinds have no
    in-process form (see run_external)."""
    if spec.kind == "threshold":
        return ThresholdBackend(spec.params["t"])
    if spec.kind == "oracle_phantom":
        return MaskOracleBackend(spec.params["mask"], tile_dim)
    raise ValidationError(f"backend kind {spec.kind!r} has no in-process form")


def predict_tile(backend, tile: SliceImage | np.ndarray, job: PredictJob | None = None) -> ProbMap:
    """Run one tile through a backend object, validating the output contract."""
    arr = tile.data if isinstance(tile, SliceImage) else np.asarray(tile)
    out = backend.predict_tile(arr, job)
    if out.shape != arr.shape:
        raise BackendError(f"backend returned shape {out.shape} for input {arr.shape}")
    return ProbMap(out)


def run_external(command_template: str, in_dir: Path, out_dir: Path,
                 expected: list[str], timeout: float | None = None) -> None:
    """Invoke an external backend once over a directory of input tiles.

    ``expected`` lists the relative output filenames that must exist in
    out_dir afterwards. Nonzero exit status or missing outputs raise
    BackendError.
    """
    out_dir.mkdir(parents=True, exist_ok=True)
    cmd = [
        tok.replace("{in_dir}", str(in_dir)).replace("{out_dir}", str(out_dir))
        for tok in shlex.split(command_template)
    ]
    try:
        proc = subprocess.run(cmd, capture_output=True, text=True, timeout=timeout)
    except (subprocess.TimeoutExpired, OSError) as e:
        raise BackendError(f"backend command failed to run: {e}") from e
    if proc.returncode != 0:
        raise BackendError(
            f"backend exited with status {proc.returncode}: {proc.stderr.strip()[:500]}"
        )
    missing = [name for name in expected if not (out_dir / name).exists()]
    if missing:
        raise BackendError(f"backend produced no output for {missing[:5]} "
                           f"({len(missing)} missing of {len(expected)})")


def region_grow(vol: Volume, seed: tuple[int, int, int], hu_max: int,
                connectivity: int = 6) -> Mask3D:
    """Grow a connected region of voxels with HU <= hu_max from a seed.

    Returns the maximal connected region containing the seed under the
    given connectivity (6 face-adjacency by default, 26 optional).
    """
    z, y, x = seed
    nz, ny, nx = vol.dims
    if not (0 <= z < nz and 0 <= y < ny and 0 <= x < nx):
        raise ValidationError(f"seed {seed} outside volume dims {vol.dims}")
    if vol.data[z, y, x] > hu_max:
        raise ValidationError(
            f"seed voxel HU {vol.data[z, y, x]} exceeds threshold {hu_max}"
        )
    if connectivity not in (6, 26):
        raise ValidationError(f"region growing supports 6 or 26 connectivity, got {connectivity}")
    below = vol.data <= hu_max
    structure = ndimage.generate_binary_structure(3, 1 if connectivity == 6 else 3)
    labels, _ = ndimage.label(below, structure=structure)
    return Mask3D((labels == labels[z, y, x]).astype(np.uint8))
