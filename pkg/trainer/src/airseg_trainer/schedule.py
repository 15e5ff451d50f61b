"""Pure state machines for LR scheduling and early stopping.

These are deliberately torch-free so the training schedule can be
verified exactly against scripted loss sequences. The training loop
feeds the validation loss after every epoch and copies the returned
learning rate into the optimizer.
"""

from __future__ import annotations


class PlateauScheduler:
    """Multiply the LR by ``factor`` after ``patience`` non-improving epochs.

    The first observed loss becomes the incumbent best. Each subsequent
    epoch whose loss is not strictly below the best counts against the
    patience; once ``patience`` such epochs accumulate, the LR is
    reduced (floored at ``min_lr``) and the counter resets. An
    improvement resets the counter and updates the best.
    """

    def __init__(self, lr_init: float = 1e-3, factor: float = 0.1,
                 patience: int = 3, min_lr: float = 1e-5):
        if not 0.0 < factor < 1.0:
            raise ValueError(f"factor must be in (0, 1), got {factor}")
        if min_lr >= lr_init:
            raise ValueError(f"min_lr {min_lr} must be below lr_init {lr_init}")
        if patience < 1:
            raise ValueError(f"patience must be >= 1, got {patience}")
        self.lr = lr_init
        self.factor = factor
        self.patience = patience
        self.min_lr = min_lr
        self.best: float | None = None
        self.bad_epochs = 0

    def step(self, val_loss: float) -> float:
        """Record one epoch's validation loss; return the LR to use next."""
        if self.best is None or val_loss < self.best:
            self.best = val_loss
            self.bad_epochs = 0
        else:
            self.bad_epochs += 1
            if self.bad_epochs >= self.patience:
                self.lr = max(self.lr * self.factor, self.min_lr)
                self.bad_epochs = 0
        return self.lr


class EarlyStopping:
    """Stop after ``patience`` epochs without a new best validation loss."""

    def __init__(self, patience: int = 10):
        if patience < 1:
            raise ValueError(f"patience must be >= 1, got {patience}")
        self.patience = patience
        self.best: float | None = None
        self.best_epoch = 0
        self.epoch = 0

    def step(self, val_loss: float) -> bool:
        """Record one epoch's validation loss; return True to halt training."""
        self.epoch += 1
        if self.best is None or val_loss < self.best:
            self.best = val_loss
            self.best_epoch = self.epoch
            return False
        return self.epoch - self.best_epoch >= self.patience
