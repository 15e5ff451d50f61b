"""Volumetric data model, HU windowing and file I/O.

A Volume is a 3D grid of Hounsfield units with voxel spacing metadata,
stored (nz, ny, nx) with x fastest. Slices are normalized into [0, 255]
display units through a width/level window before prediction.

Two on-disk formats live here:

* the volume format: a text header (``NDims``/``DimSize``/``ElementSpacing``/
  ``ElementType``/``ElementDataFile``) next to a raw little-endian payload;
* "STX1", a minimal tensor exchange format (8-byte magic, one header line,
  raw payload) used on both sides of the segmenter boundary.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import FormatError, ValidationError

HU_MIN = -32768
HU_MAX = 32767

STX1_MAGIC = b"STX1\0\0\0\0"

_ELEMENT_TYPES = {
    "INT16": np.dtype("<i2"),
    "UINT8": np.dtype("<u1"),
}


@dataclass(frozen=True)
class WindowSpec:
    """HU display window: width around a level, spanning [L - W/2, L + W/2]."""

    width_hu: float = 1500.0
    level_hu: float = -500.0

    def __post_init__(self):
        if self.width_hu <= 0:
            raise ValidationError(f"window width must be positive, got {self.width_hu}")

    @property
    def low(self) -> float:
        return self.level_hu - self.width_hu / 2.0

    @property
    def high(self) -> float:
        return self.level_hu + self.width_hu / 2.0


@dataclass(frozen=True)
class Volume:
    """3D HU grid, shape (nz, ny, nx), int16, plus spacing (dz, dy, dx) in mm."""

    data: np.ndarray
    spacing: tuple[float, float, float] = (1.0, 1.0, 1.0)

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim != 3 or min(arr.shape) < 1:
            raise ValidationError(f"volume must be 3D with all dims >= 1, got shape {arr.shape}")
        if arr.dtype != np.int16:
            if np.any(arr < HU_MIN) or np.any(arr > HU_MAX):
                raise ValidationError("HU values outside int16 range")
            arr = arr.astype(np.int16)
        object.__setattr__(self, "data", arr)

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.data.shape

    @property
    def nz(self) -> int:
        return self.data.shape[0]


@dataclass(frozen=True)
class SliceImage:
    """2D image in normalized display units, every value in [0, 255]."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float32)
        if arr.ndim != 2:
            raise ValidationError(f"slice image must be 2D, got shape {arr.shape}")
        if arr.size and (arr.min() < 0.0 or arr.max() > 255.0):
            raise ValidationError("slice image values must lie in [0, 255]")
        object.__setattr__(self, "data", arr)

    @property
    def dims(self) -> tuple[int, int]:
        return self.data.shape


@dataclass(frozen=True)
class ProbMap:
    """2D per-pixel probability map, every value in [0, 1]."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float32)
        if arr.ndim != 2:
            raise ValidationError(f"probability map must be 2D, got shape {arr.shape}")
        if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
            raise ValidationError("probabilities must lie in [0, 1]")
        object.__setattr__(self, "data", arr)

    @property
    def dims(self) -> tuple[int, int]:
        return self.data.shape


@dataclass(frozen=True)
class Mask3D:
    """Binary 3D occupancy mask, shape (nz, ny, nx), values in {0, 1}."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim != 3:
            raise ValidationError(f"mask must be 3D, got shape {arr.shape}")
        if arr.dtype != np.uint8:
            arr = arr.astype(np.uint8)
        if arr.size and arr.max() > 1:
            raise ValidationError("mask values must be 0 or 1")
        object.__setattr__(self, "data", arr)

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.data.shape

    def count(self) -> int:
        return int(self.data.sum())


@dataclass(frozen=True)
class ScaleSpec:
    """The set of interpolation ratios in play plus the fixed tile size."""

    ratios: tuple[int, ...] = (1, 2, 4, 8)
    tile_dim: int = 512

    def __post_init__(self):
        r = tuple(int(x) for x in self.ratios)
        if not r:
            raise ValidationError("scale set must be non-empty")
        if any(x < 1 for x in r) or list(r) != sorted(set(r)):
            raise ValidationError(f"ratios must be strictly increasing positive integers, got {r}")
        if self.tile_dim < 8:
            raise ValidationError(f"tile_dim must be >= 8, got {self.tile_dim}")
        object.__setattr__(self, "ratios", r)


def window_normalize(vol: Volume, win: WindowSpec, z: int, quantize: bool = False) -> SliceImage:
    """Map one axial slice from HU to [0, 255] via the linear window.

    Values at or below L - W/2 map to 0, at or above L + W/2 to 255.
    With ``quantize`` the result is rounded to integer levels.
    """
    if not 0 <= z < vol.nz:
        raise IndexError(f"slice index {z} out of range [0, {vol.nz})")
    hu = vol.data[z].astype(np.float32)
    out = np.clip((hu - win.low) / win.width_hu, 0.0, 1.0) * 255.0
    if quantize:
        out = np.rint(out)
    return SliceImage(out)


# ---------------------------------------------------------------------------
# Volume format: text header + raw payload


def write_volume(vol: Volume | Mask3D, header_path: str | Path) -> None:
    """Write a volume or mask as header + raw file (same stem, .raw suffix)."""
    header_path = Path(header_path)
    if isinstance(vol, Mask3D):
        data = vol.data.astype("<u1")
        etype = "UINT8"
        spacing = (1.0, 1.0, 1.0)
    else:
        data = vol.data.astype("<i2")
        etype = "INT16"
        spacing = vol.spacing
    raw_name = header_path.stem + ".raw"
    nz, ny, nx = data.shape
    dz, dy, dx = spacing
    lines = [
        "NDims = 3",
        f"DimSize = {nx} {ny} {nz}",
        f"ElementSpacing = {dx} {dy} {dz}",
        f"ElementType = {etype}",
        f"ElementDataFile = {raw_name}",
    ]
    header_path.write_text("\n".join(lines) + "\n")
    data.tofile(header_path.parent / raw_name)


def _parse_header(header_path: Path) -> dict:
    fields = {}
    try:
        text = header_path.read_text()
    except OSError as e:
        raise FormatError(f"cannot read header {header_path}: {e}") from e
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        if "=" not in line:
            raise FormatError(f"malformed header line in {header_path}: {line!r}")
        key, _, value = line.partition("=")
        fields[key.strip()] = value.strip()
    return fields


def read_volume(header_path: str | Path) -> Volume:
    """Read a header + raw volume; masks read as 0/1-valued int16 HU grids."""
    vol, _ = _read_raw(Path(header_path))
    return vol


def read_mask(header_path: str | Path) -> Mask3D:
    """Read a UINT8 header + raw file as a binary mask."""
    vol, etype = _read_raw(Path(header_path))
    if etype != "UINT8":
        raise FormatError(f"expected UINT8 mask, got {etype} in {header_path}")
    return Mask3D(vol.data.astype(np.uint8))


def _read_raw(header_path: Path) -> tuple[Volume, str]:
    fields = _parse_header(header_path)
    for key in ("NDims", "DimSize", "ElementType", "ElementDataFile"):
        if key not in fields:
            raise FormatError(f"header {header_path} missing field {key}")
    if fields["NDims"] != "3":
        raise FormatError(f"unsupported NDims {fields['NDims']!r}")
    try:
        nx, ny, nz = (int(v) for v in fields["DimSize"].split())
    except ValueError as e:
        raise FormatError(f"bad DimSize in {header_path}: {fields['DimSize']!r}") from e
    spacing = (1.0, 1.0, 1.0)
    if "ElementSpacing" in fields:
        try:
            dx, dy, dz = (float(v) for v in fields["ElementSpacing"].split())
        except ValueError as e:
            raise FormatError(f"bad ElementSpacing: {fields['ElementSpacing']!r}") from e
        spacing = (dz, dy, dx)
    etype = fields["ElementType"]
    if etype not in _ELEMENT_TYPES:
        raise FormatError(f"unsupported ElementType {etype!r}")
    dtype = _ELEMENT_TYPES[etype]
    raw_path = header_path.parent / fields["ElementDataFile"]
    try:
        payload = np.fromfile(raw_path, dtype=dtype)
    except OSError as e:
        raise FormatError(f"cannot read payload {raw_path}: {e}") from e
    expected = nx * ny * nz
    if payload.size != expected:
        raise FormatError(
            f"payload {raw_path} holds {payload.size} elements, header declares {expected}"
        )
    data = payload.reshape(nz, ny, nx).astype(np.int16)
    return Volume(data, spacing), etype


# ---------------------------------------------------------------------------
# STX1 tensor exchange format

_STX_DTYPES = {"f32": np.dtype("<f4"), "u8": np.dtype("<u1")}


def write_tensor(data: np.ndarray | SliceImage | ProbMap, path: str | Path) -> None:
    """Write an array as an STX1 file (f32 for floats, u8 for integers)."""
    if isinstance(data, (SliceImage, ProbMap)):
        data = data.data
    arr = np.ascontiguousarray(data)
    if arr.dtype == np.uint8:
        tag, arr = "u8", arr.astype("<u1")
    else:
        tag, arr = "f32", arr.astype("<f4")
    shape = ",".join(str(d) for d in arr.shape)
    header = f"dtype={tag} shape={shape} order=C\n".encode("ascii")
    with open(path, "wb") as f:
        f.write(STX1_MAGIC)
        f.write(header)
        f.write(arr.tobytes())


def read_tensor(path: str | Path) -> np.ndarray:
    """Read an STX1 file back into a numpy array."""
    with open(path, "rb") as f:
        magic = f.read(8)
        if magic != STX1_MAGIC:
            raise FormatError(f"bad STX1 magic in {path}")
        header = bytearray()
        while True:
            c = f.read(1)
            if not c:
                raise FormatError(f"truncated STX1 header in {path}")
            if c == b"\n":
                break
            header += c
        fields = dict(tok.split("=", 1) for tok in header.decode("ascii").split())
        if fields.get("order", "C") != "C":
            raise FormatError(f"unsupported STX1 order {fields.get('order')!r}")
        if fields.get("dtype") not in _STX_DTYPES:
            raise FormatError(f"unsupported STX1 dtype {fields.get('dtype')!r}")
        dtype = _STX_DTYPES[fields["dtype"]]
        try:
            shape = tuple(int(v) for v in fields["shape"].split(",") if v)
        except (KeyError, ValueError) as e:
            raise FormatError(f"bad STX1 shape in {path}") from e
        expected = int(np.prod(shape)) if shape else 1
        payload = f.read()
    arr = np.frombuffer(payload, dtype=dtype)
    if arr.size != expected:
        raise FormatError(
            f"STX1 payload in {path} holds {arr.size} elements, header declares {expected}"
        )
    return arr.reshape(shape).copy()
