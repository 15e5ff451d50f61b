"""Multi-scale tile-ensemble airway segmentation pipeline."""

from .volgrid import (  # noqa: F401
    Mask3D,
    ProbMap,
    ScaleSpec,
    SliceImage,
    Volume,
    WindowSpec,
)

__version__ = "0.1.0"
