"""Minimal STX1 tensor codec.

STX1 is the exchange format spoken on both sides of the tile boundary:
an 8-byte magic ``STX1\\0\\0\\0\\0``, one ASCII header line
``dtype=<f32|u8> shape=<d0,d1,...> order=C``, then the raw
little-endian payload. This module is intentionally self-contained so
the trainer has no import dependency on the pipeline package.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

MAGIC = b"STX1\0\0\0\0"

_DTYPES = {"f32": np.dtype("<f4"), "u8": np.dtype("<u1")}


class StxFormatError(ValueError):
    """Raised when an STX1 file is malformed or truncated."""


def write_tensor(data: np.ndarray, path: str | Path) -> None:
    """Write an array as STX1 (f32 for floats, u8 for uint8)."""
    arr = np.ascontiguousarray(data)
    if arr.dtype == np.uint8:
        tag, arr = "u8", arr.astype("<u1")
    else:
        tag, arr = "f32", arr.astype("<f4")
    shape = ",".join(str(d) for d in arr.shape)
    header = f"dtype={tag} shape={shape} order=C\n".encode("ascii")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(header)
        f.write(arr.tobytes())


def read_tensor(path: str | Path) -> np.ndarray:
    """Read an STX1 file back into a numpy array."""
    with open(path, "rb") as f:
        if f.read(8) != MAGIC:
            raise StxFormatError(f"bad STX1 magic in {path}")
        header = bytearray()
        while True:
            c = f.read(1)
            if not c:
                raise StxFormatError(f"truncated STX1 header in {path}")
            if c == b"\n":
                break
            header += c
        fields = dict(tok.split("=", 1) for tok in header.decode("ascii").split())
        if fields.get("order", "C") != "C":
            raise StxFormatError(f"unsupported STX1 order {fields.get('order')!r}")
        if fields.get("dtype") not in _DTYPES:
            raise StxFormatError(f"unsupported STX1 dtype {fields.get('dtype')!r}")
        dtype = _DTYPES[fields["dtype"]]
        try:
            shape = tuple(int(v) for v in fields["shape"].split(",") if v)
        except (KeyError, ValueError) as e:
            raise StxFormatError(f"bad STX1 shape in {path}") from e
        payload = f.read()
    arr = np.frombuffer(payload, dtype=dtype)
    expected = int(np.prod(shape)) if shape else 1
    if arr.size != expected:
        raise StxFormatError(
            f"STX1 payload in {path} holds {arr.size} elements, header declares {expected}"
        )
    return arr.reshape(shape).copy()
