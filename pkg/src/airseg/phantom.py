"""Synthetic branching-tube phantoms with known ground truth.

A phantom is a binary tree of straight cylinders (trunk along +z,
children tilted by a fixed angle, split plane alternating 90 degrees per
generation) rasterized into a voxel grid, plus a CT-like rendering:
lumen at -1000 HU, a thin wall shell at -200 HU, noisy parenchyma
background at -850 HU. Scale-limited oracle backends predict only the
branches above a radius threshold, giving nested per-scale masks for
desk-scale end-to-end checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import ValidationError
from .segmenter import MaskOracleBackend
from .volgrid import Mask3D, Volume


@dataclass(frozen=True)
class TreeSpec:
    depth: int = 3  # generations below the trunk
    trunk_radius: float = 6.0
    radius_ratio: float = 0.79
    branch_angle: float = 35.0  # degrees off the parent axis
    trunk_length: float = 18.0
    length_ratio: float = 0.8
    rng_seed: int = 0
    noise_sigma: float = 30.0
    wall_thickness: int = 2

    def __post_init__(self):
        if self.depth < 0 or self.trunk_radius < 1:
            raise ValidationError("depth must be >= 0 and trunk_radius >= 1")
        if not 0 < self.radius_ratio < 1:
            raise ValidationError(f"radius_ratio must be in (0, 1), got {self.radius_ratio}")
        if not 0 < self.length_ratio <= 1:
            raise ValidationError(f"length_ratio must be in (0, 1], got {self.length_ratio}")


@dataclass(frozen=True)
class Branch:
    generation: int
    radius: float
    start: tuple[float, float, float]  # (z, y, x)
    end: tuple[float, float, float]


@dataclass(frozen=True)
class PhantomCase:
    volume: Volume
    gt: Mask3D
    branches: tuple[Branch, ...]


def rasterize_branches(branches, dims: tuple[int, int, int],
                       min_radius: float = 0.0) -> np.ndarray:
    """Union of capsule fills for every branch with radius >= min_radius."""
    nz, ny, nx = dims
    mask = np.zeros(dims, dtype=np.uint8)
    for b in branches:
        if b.radius < min_radius:
            continue
        p0 = np.array(b.start)
        p1 = np.array(b.end)
        r = b.radius
        lo = np.maximum(np.floor(np.minimum(p0, p1) - r).astype(int), 0)
        hi = np.minimum(np.ceil(np.maximum(p0, p1) + r).astype(int) + 1, dims)
        if np.any(lo >= hi):
            continue
        zz, yy, xx = np.meshgrid(
            np.arange(lo[0], hi[0]), np.arange(lo[1], hi[1]), np.arange(lo[2], hi[2]),
            indexing="ij",
        )
        q = np.stack([zz, yy, xx], axis=-1).astype(np.float64)
        v = p1 - p0
        vv = float(np.dot(v, v))
        # finite cylinder, no end caps: axial projection within the segment
        # and perpendicular distance within the radius
        t = np.tensordot(q - p0, v, axes=([-1], [0])) / max(vv, 1e-12)
        axis_point = p0 + t[..., None] * v
        d2 = np.sum((q - axis_point) ** 2, axis=-1)
        inside = (t >= 0.0) & (t <= 1.0) & (d2 <= r * r)
        mask[lo[0]:hi[0], lo[1]:hi[1], lo[2]:hi[2]] |= inside.astype(np.uint8)
    return mask


def generate_tree(spec: TreeSpec, dims: tuple[int, int, int]) -> PhantomCase:
    """Build a deterministic phantom: branch list, ground truth, CT rendering."""
    nz, ny, nx = dims
    root = np.array([2.0, ny / 2.0, nx / 2.0])
    branches = _grow_from(spec, root)
    for b in branches:
        for p in (b.start, b.end):
            if not all(0 <= p[i] <= dims[i] - 1 for i in range(3)):
                raise ValidationError(f"branch centreline at {p} leaves volume {dims}")
    gt = rasterize_branches(branches, dims)
    if gt.sum() == 0:
        raise ValidationError("phantom ground truth is empty")

    rng = np.random.default_rng(spec.rng_seed)
    hu = np.full(dims, -850.0)
    hu += rng.normal(0.0, spec.noise_sigma, size=dims)
    if spec.wall_thickness > 0:
        shell = ndimage.binary_dilation(gt, iterations=spec.wall_thickness) & ~gt.astype(bool)
        hu[shell] = -200.0
    hu[gt.astype(bool)] = -1000.0
    vol = Volume(np.clip(hu, -1024, 3071).astype(np.int16))
    return PhantomCase(volume=vol, gt=Mask3D(gt), branches=tuple(branches))


def _grow_from(spec: TreeSpec, root: np.ndarray) -> list[Branch]:
    branches: list[Branch] = []
    stack = [(root, np.array([1.0, 0.0, 0.0]), 0)]
    while stack:
        p0, direction, gen = stack.pop()
        radius = spec.trunk_radius * spec.radius_ratio ** gen
        length = spec.trunk_length * spec.length_ratio ** gen
        p1 = p0 + direction * length
        branches.append(Branch(gen, radius, tuple(p0), tuple(p1)))
        if gen >= spec.depth:
            continue
        axis = np.array([0.0, 1.0, 0.0]) if gen % 2 == 0 else np.array([0.0, 0.0, 1.0])
        perp = axis - np.dot(axis, direction) * direction
        norm = np.linalg.norm(perp)
        if norm < 1e-9:
            axis = np.array([0.0, 0.0, 1.0]) if gen % 2 == 0 else np.array([0.0, 1.0, 0.0])
            perp = axis - np.dot(axis, direction) * direction
            norm = np.linalg.norm(perp)
        perp /= norm
        a = math.radians(spec.branch_angle)
        for sign in (+1.0, -1.0):
            child = math.cos(a) * direction + sign * math.sin(a) * perp
            stack.append((p1, child / np.linalg.norm(child), gen + 1))
    branches.sort(key=lambda b: (b.generation, b.start))
    return branches


def limited_mask(case: PhantomCase, min_radius: float) -> Mask3D:
    """Ground truth restricted to branches at least min_radius thick."""
    return Mask3D(rasterize_branches(case.branches, case.gt.dims, min_radius))


def scale_limited_oracle(case: PhantomCase, ir: int, min_radius_at_ir1: float,
                         tile_dim: int = 512) -> MaskOracleBackend:
    """Backend that predicts only branches resolvable at this scale.

    The radius cut-off shrinks as min_radius_at_ir1 / ir, so higher ratios
    unlock thinner branches and the per-scale masks are nested subsets of
    the ground truth.
    """
    if ir < 1:
        raise ValueError(f"interpolation ratio must be >= 1, got {ir}")
    return MaskOracleBackend(limited_mask(case, min_radius_at_ir1 / ir), tile_dim)


def write_branch_manifest(case: PhantomCase, path: str | Path) -> None:
    """One line per branch: generation, radius, then start/end (z y x)."""
    lines = []
    for b in case.branches:
        coords = " ".join(f"{v:.3f}" for v in (*b.start, *b.end))
        lines.append(f"{b.generation} {b.radius:.3f} {coords}")
    Path(path).write_text("\n".join(lines) + "\n")
