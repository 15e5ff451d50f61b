"""Dilated U-Net training and STX1 tile inference.

This package trains a toy-scale dilated U-Net on tile datasets exported
by the segmentation pipeline and serves predictions back through the
pipeline's file-exchange backend protocol. The only coupling to the
pipeline is the STX1 tensor format and the ``{in_dir}/{out_dir}``
command contract.
"""

from .losses import bce_loss, combined_loss, focal_loss, soft_dice
from .model import DilatedUNet, ModelSpec
from .schedule import EarlyStopping, PlateauScheduler
from .train import TrainConfig

__version__ = "0.1.0"

__all__ = [
    "DilatedUNet",
    "EarlyStopping",
    "ModelSpec",
    "PlateauScheduler",
    "TrainConfig",
    "bce_loss",
    "combined_loss",
    "focal_loss",
    "soft_dice",
]
