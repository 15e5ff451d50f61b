"""Training loop: Adam plus plateau LR schedule and early stopping.

The schedule is driven by the pure state machines in ``schedule`` (LR
x0.1 after 3 non-improving epochs, floored at 1e-5; halt 10 epochs past
the best), so the loop here only has to copy the returned LR into the
optimizer. Checkpoints are written atomically; per-epoch train and
validation losses are logged to a CSV loss curve.
"""

from __future__ import annotations

import math
import os
import tempfile
from dataclasses import asdict, dataclass
from pathlib import Path

import torch
from torch.utils.data import DataLoader, Subset

from .data import TilePairDataset
from .losses import combined_loss, focal_loss
from .model import DilatedUNet, ModelSpec
from .schedule import EarlyStopping, PlateauScheduler


class TrainingError(RuntimeError):
    """Raised when training cannot proceed (empty data, NaN loss)."""


@dataclass(frozen=True)
class TrainConfig:
    lr_init: float = 1e-3
    epochs: int = 200
    plateau_factor: float = 0.1
    plateau_patience: int = 3
    min_lr: float = 1e-5
    stop_patience: int = 10
    loss: str = "combined"  # or "focal"
    focal_alpha: float = 0.25
    focal_gamma: float = 2.0
    batch_size: int = 16
    val_fraction: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.plateau_factor < 1.0:
            raise ValueError(f"plateau factor must be in (0, 1), got {self.plateau_factor}")
        if self.min_lr >= self.lr_init:
            raise ValueError(f"min_lr {self.min_lr} must be below lr_init {self.lr_init}")
        if not 1 <= self.epochs <= 200:
            raise ValueError(f"epochs must be in [1, 200], got {self.epochs}")
        if self.loss not in ("combined", "focal"):
            raise ValueError(f"unknown loss {self.loss!r}")
        if not 0.0 < self.val_fraction < 1.0:
            raise ValueError(f"val_fraction must be in (0, 1), got {self.val_fraction}")

    def loss_fn(self):
        if self.loss == "focal":
            return lambda p, t: focal_loss(p, t, self.focal_alpha, self.focal_gamma)
        return combined_loss


def split_dataset(dataset: TilePairDataset, config: TrainConfig):
    """Deterministic train/validation split; validation is never empty."""
    n = len(dataset)
    if n < 2:
        raise TrainingError(f"need at least 2 tiles to split, got {n}")
    n_val = max(1, int(round(n * config.val_fraction)))
    perm = torch.randperm(n, generator=torch.Generator().manual_seed(config.seed))
    return Subset(dataset, perm[n_val:].tolist()), Subset(dataset, perm[:n_val].tolist())


def save_checkpoint(model: DilatedUNet, path: str | Path) -> None:
    """Write model spec + weights atomically (tmp file then rename)."""
    path = Path(path)
    payload = {"spec": asdict(model.spec), "state_dict": model.state_dict()}
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            torch.save(payload, f)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_checkpoint(path: str | Path) -> DilatedUNet:
    payload = torch.load(Path(path), map_location="cpu", weights_only=True)
    spec = payload["spec"]
    spec["dilations"] = tuple(spec["dilations"])
    model = DilatedUNet(ModelSpec(**spec))
    model.load_state_dict(payload["state_dict"])
    model.eval()
    return model


def _epoch_loss(model, loader, loss_fn, optimizer=None) -> float:
    total, count = 0.0, 0
    for images, masks in loader:
        probs = model(images)
        loss = loss_fn(probs, masks)
        if optimizer is not None:
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
        total += float(loss.detach()) * images.shape[0]
        count += images.shape[0]
    return total / count


def train(dataset: TilePairDataset, config: TrainConfig,
          checkpoint_path: str | Path, curves_path: str | Path | None = None,
          spec: ModelSpec | None = None) -> list[dict]:
    """Train a dilated U-Net; keep the best-validation checkpoint on disk.

    Returns the per-epoch history (epoch, lr, train and validation loss).
    """
    torch.manual_seed(config.seed)
    model = DilatedUNet(spec or ModelSpec())
    train_set, val_set = split_dataset(dataset, config)
    train_loader = DataLoader(train_set, batch_size=config.batch_size, shuffle=True,
                              generator=torch.Generator().manual_seed(config.seed))
    val_loader = DataLoader(val_set, batch_size=config.batch_size)
    optimizer = torch.optim.Adam(model.parameters(), lr=config.lr_init)
    scheduler = PlateauScheduler(config.lr_init, config.plateau_factor,
                                 config.plateau_patience, config.min_lr)
    stopper = EarlyStopping(config.stop_patience)
    loss_fn = config.loss_fn()

    history: list[dict] = []
    best_val = math.inf
    for epoch in range(1, config.epochs + 1):
        model.train()
        train_loss = _epoch_loss(model, train_loader, loss_fn, optimizer)
        model.eval()
        with torch.no_grad():
            val_loss = _epoch_loss(model, val_loader, loss_fn)
        if not (math.isfinite(train_loss) and math.isfinite(val_loss)):
            raise TrainingError(
                f"non-finite loss at epoch {epoch}: train={train_loss} val={val_loss}; "
                f"lr={optimizer.param_groups[0]['lr']}")
        lr_used = optimizer.param_groups[0]["lr"]
        history.append({"epoch": epoch, "lr": lr_used,
                        "train_loss": train_loss, "val_loss": val_loss})
        if val_loss < best_val:
            best_val = val_loss
            save_checkpoint(model, checkpoint_path)
        next_lr = scheduler.step(val_loss)
        for group in optimizer.param_groups:
            group["lr"] = next_lr
        if stopper.step(val_loss):
            break

    if curves_path is not None:
        lines = ["epoch,lr,train_loss,val_loss"]
        lines += [f"{h['epoch']},{h['lr']:.8g},{h['train_loss']:.6f},{h['val_loss']:.6f}"
                  for h in history]
        Path(curves_path).write_text("\n".join(lines) + "\n")
    return history
