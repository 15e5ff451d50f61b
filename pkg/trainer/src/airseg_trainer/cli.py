"""Command-line interface: train a model, or serve tile inference.

``infer`` satisfies the pipeline's external-backend contract: invoked
with an input directory of STX1 image tiles and an output directory, it
writes one STX1 probability map per input tile at the same relative
path.
"""

from __future__ import annotations

import sys
from pathlib import Path

import click
import numpy as np
import torch

from .data import DatasetError, TilePairDataset
from .model import ModelSpec
from .stx import StxFormatError, read_tensor, write_tensor
from .train import TrainConfig, TrainingError, load_checkpoint, train


@click.group()
def main():
    """Dilated U-Net training and STX1 tile inference."""


@main.command(name="train")
@click.option("--tiles", "tile_roots", multiple=True, required=True,
              type=click.Path(exists=True, path_type=Path),
              help="Image-tile root; repeatable.")
@click.option("--gt-tiles", "gt_roots", multiple=True, required=True,
              type=click.Path(exists=True, path_type=Path),
              help="Ground-truth tile root, paired with --tiles by position.")
@click.option("--checkpoint", type=click.Path(path_type=Path), required=True)
@click.option("--curves", type=click.Path(path_type=Path), default=None,
              help="Loss-curve CSV output path.")
@click.option("--epochs", type=int, default=200, show_default=True)
@click.option("--lr-init", type=float, default=1e-3, show_default=True)
@click.option("--batch-size", type=int, default=16, show_default=True)
@click.option("--loss", type=click.Choice(["combined", "focal"]), default="combined",
              show_default=True)
@click.option("--base-channels", type=int, default=16, show_default=True)
@click.option("--depth", type=int, default=4, show_default=True)
@click.option("--dropout", type=float, default=0.1, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
def train_cmd(tile_roots, gt_roots, checkpoint, curves, epochs, lr_init,
              batch_size, loss, base_channels, depth, dropout, seed):
    """Train on paired tile directories; keep the best checkpoint."""
    try:
        dataset = TilePairDataset(tile_roots, gt_roots)
        config = TrainConfig(lr_init=lr_init, epochs=epochs, loss=loss,
                             batch_size=batch_size, seed=seed)
        spec = ModelSpec(depth=depth, base_channels=base_channels, dropout=dropout)
        checkpoint.parent.mkdir(parents=True, exist_ok=True)
        history = train(dataset, config, checkpoint, curves, spec)
    except (DatasetError, StxFormatError, ValueError) as e:
        click.echo(f"validation error: {e}", err=True)
        sys.exit(3)
    except (TrainingError, OSError) as e:
        click.echo(f"training error: {e}", err=True)
        sys.exit(4)
    best = min(h["val_loss"] for h in history)
    click.echo(f"trained {len(history)} epoch(s), best val loss {best:.4f}, "
               f"checkpoint {checkpoint}")


@main.command(name="infer")
@click.option("--checkpoint", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--batch-size", type=int, default=32, show_default=True)
@click.argument("in_dir", type=click.Path(exists=True, path_type=Path))
@click.argument("out_dir", type=click.Path(path_type=Path))
def infer_cmd(checkpoint, batch_size, in_dir, out_dir):
    """Predict probability maps for every STX1 tile under IN_DIR."""
    try:
        model = load_checkpoint(checkpoint)
    except (OSError, KeyError, RuntimeError) as e:
        click.echo(f"cannot load checkpoint: {e}", err=True)
        sys.exit(4)
    paths = sorted(in_dir.rglob("*.stx"))
    if not paths:
        click.echo(f"no STX1 tiles under {in_dir}", err=True)
        sys.exit(3)
    with torch.no_grad():
        for start in range(0, len(paths), batch_size):
            chunk = paths[start:start + batch_size]
            tiles = [read_tensor(p).astype(np.float32) / 255.0 for p in chunk]
            batch = torch.from_numpy(np.stack(tiles)[:, None])
            probs = model(batch).squeeze(1).clamp(0.0, 1.0).numpy()
            for p, prob in zip(chunk, probs):
                out = out_dir / p.relative_to(in_dir)
                out.parent.mkdir(parents=True, exist_ok=True)
                write_tensor(prob.astype(np.float32), out)
    click.echo(f"wrote {len(paths)} probability map(s) to {out_dir}")


if __name__ == "__main__":
    main()
