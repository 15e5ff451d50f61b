"""Integer-ratio resampling of slices and mask planes.

Images are up-sampled bilinearly under the pixel-center mapping
``src = (dst + 0.5) / ir - 0.5`` with edge clamping; masks use nearest
neighbour in both directions. The nearest up/down pair is an exact
round trip for every integer ratio.
"""

from __future__ import annotations

import numpy as np

from .errors import ValidationError


def _check_ratio(ir: int) -> int:
    ir = int(ir)
    if ir < 1:
        raise ValueError(f"interpolation ratio must be >= 1, got {ir}")
    return ir


def upsample_bilinear(img: np.ndarray, ir: int, boundary: str = "clamp") -> np.ndarray:
    """Scale a 2D image up by an integer factor with bilinear interpolation."""
    ir = _check_ratio(ir)
    img = np.asarray(img, dtype=np.float64)
    if ir == 1:
        return img.copy()
    ny, nx = img.shape

    def src_coords(n_dst: int, n_src: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        s = (np.arange(n_dst, dtype=np.float64) + 0.5) / ir - 0.5
        if boundary == "reflect":
            s = np.abs(s)
            s = np.minimum(s, 2 * (n_src - 1) - s)
        s = np.clip(s, 0.0, n_src - 1)
        i0 = np.floor(s).astype(np.intp)
        i1 = np.minimum(i0 + 1, n_src - 1)
        return i0, i1, s - i0

    y0, y1, fy = src_coords(ny * ir, ny)
    x0, x1, fx = src_coords(nx * ir, nx)
    fy = fy[:, None]
    fx = fx[None, :]
    top = img[y0][:, x0] * (1 - fx) + img[y0][:, x1] * fx
    bot = img[y1][:, x0] * (1 - fx) + img[y1][:, x1] * fx
    return top * (1 - fy) + bot * fy


def upsample_nearest(mask2d: np.ndarray, ir: int) -> np.ndarray:
    """Replicate each pixel into an ir x ir block."""
    ir = _check_ratio(ir)
    mask2d = np.asarray(mask2d)
    if ir == 1:
        return mask2d.copy()
    return np.repeat(np.repeat(mask2d, ir, axis=0), ir, axis=1)


def downsample_nearest(mask2d: np.ndarray, ir: int) -> np.ndarray:
    """Keep the top-left sample of each ir x ir block; dims must divide."""
    ir = _check_ratio(ir)
    mask2d = np.asarray(mask2d)
    ny, nx = mask2d.shape
    if ny % ir or nx % ir:
        raise ValidationError(f"dims {(ny, nx)} not divisible by ratio {ir}")
    return mask2d[::ir, ::ir].copy()
