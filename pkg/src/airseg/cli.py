"""Command-line entry points for the segmentation pipeline.

Exit codes: 0 success, 2 input error, 3 validation error, 4 backend error.
"""

from __future__ import annotations

import functools
import sys
from pathlib import Path

import click
import numpy as np

from . import ensemble as ensemble_mod
from . import metrics, phantom as phantom_mod, pipeline, resample, tiler, volgrid
from .errors import BackendError, InputError, ValidationError
from .pipeline import PipelineConfig, _parse_backend_string
from .volgrid import Mask3D, ScaleSpec, WindowSpec


def _exit_codes(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (InputError, FileNotFoundError, OSError) as e:
            click.echo(f"input error: {e}", err=True)
            sys.exit(2)
        except (ValidationError, ValueError, IndexError) as e:
            click.echo(f"validation error: {e}", err=True)
            sys.exit(3)
        except BackendError as e:
            click.echo(f"backend error: {e}", err=True)
            sys.exit(4)

    return wrapper


@click.group()
def main():
    """Multi-scale tile-ensemble airway segmentation pipeline."""


def _window_options(fn):
    fn = click.option("--window-width", type=float, default=1500.0, show_default=True,
                      help="HU window width.")(fn)
    fn = click.option("--window-level", type=float, default=-500.0, show_default=True,
                      help="HU window level.")(fn)
    return fn


@main.command()
@click.argument("volume", type=click.Path(exists=True, path_type=Path))
@click.argument("out_dir", type=click.Path(path_type=Path))
@_window_options
@click.option("--quantize", is_flag=True, help="Round normalized values to integers.")
@click.option("--ir", type=int, default=1, show_default=True,
              help="Also up-sample and split at this ratio.")
@click.option("--tile-dim", type=int, default=512, show_default=True)
@click.option("--sharpen", "sharpen_amount", type=float, default=0.0, show_default=True)
@click.option("--mask", type=click.Path(exists=True, path_type=Path), default=None,
              help="Ground-truth mask header; emits paired mask tiles.")
@_exit_codes
def preprocess(volume, out_dir, window_width, window_level, quantize, ir,
               tile_dim, sharpen_amount, mask):
    """Normalize a volume into per-slice STX1 images (and optional tiles)."""
    vol = volgrid.read_volume(volume)
    config = PipelineConfig(
        scales=ScaleSpec(ratios=(ir,) if ir > 1 else (1,), tile_dim=tile_dim),
        window=WindowSpec(width_hu=window_width, level_hu=window_level),
        quantize=quantize,
        sharpen_amount=sharpen_amount,
    )
    out_dir.mkdir(parents=True, exist_ok=True)
    gt = volgrid.read_mask(mask) if mask else None
    for z in range(vol.nz):
        img = pipeline.normalized_slice(vol, z, 1, config)
        volgrid.write_tensor(img, out_dir / f"slice_{z:04d}.stx")
    if ir >= 1 and (mask or ir > 1):
        for z in range(vol.nz):
            img = pipeline.normalized_slice(vol, z, ir, config)
            ts = tiler.split(img, tile_dim, pad_mode="edge")
            cols = ts.layout.grid[1]
            for idx, tile in enumerate(ts.tiles):
                p = tiler.tile_path(out_dir / "tiles", "case", ir, z, idx // cols, idx % cols)
                p.parent.mkdir(parents=True, exist_ok=True)
                volgrid.write_tensor(tile, p)
            if gt is not None:
                plane = resample.upsample_nearest(gt.data[z], ir)
                mts = tiler.split(plane, tile_dim, pad_mode="zero")
                for idx, tile in enumerate(mts.tiles):
                    p = tiler.tile_path(out_dir / "gt_tiles", "case", ir, z,
                                        idx // cols, idx % cols)
                    p.parent.mkdir(parents=True, exist_ok=True)
                    volgrid.write_tensor(tile.astype(np.uint8), p)
    click.echo(f"wrote {vol.nz} slices to {out_dir}")


@main.command()
@click.option("--volume", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--ir", type=int, required=True)
@click.option("--backend", "backend_str", required=True,
              help="threshold:<t> | external:<cmd with {in_dir} {out_dir}> | "
                   "oracle:<mask.hdr> | region_grow:<z,y,x,hu_max>")
@click.option("--out", type=click.Path(path_type=Path), required=True,
              help="Output mask header path.")
@click.option("--threshold", type=float, default=0.5, show_default=True)
@click.option("--tile-dim", type=int, default=512, show_default=True)
@click.option("--sharpen", "sharpen_amount", type=float, default=0.0, show_default=True)
@click.option("--workdir", type=click.Path(path_type=Path), default=None,
              help="Tile-exchange directory (required for external backends).")
@click.option("--case", default="case", show_default=True)
@click.option("--jobs", type=int, default=1, show_default=True)
@_window_options
@_exit_codes
def predict(volume, ir, backend_str, out, threshold, tile_dim, sharpen_amount,
            workdir, case, jobs, window_width, window_level):
    """Predict one interpolation ratio's 3D mask for a volume."""
    vol = volgrid.read_volume(volume)
    spec = _parse_backend_string(backend_str)
    config = PipelineConfig(
        scales=ScaleSpec(ratios=(ir,) if ir > 1 else (1,), tile_dim=tile_dim),
        window=WindowSpec(width_hu=window_width, level_hu=window_level),
        thresholds={ir: threshold},
        backends={ir: spec},
        sharpen_amount=sharpen_amount,
        jobs=jobs,
    )
    mask = pipeline.predict_case(vol, ir, spec, config, case=case, workdir=workdir)
    out.parent.mkdir(parents=True, exist_ok=True)
    volgrid.write_volume(mask, out)
    click.echo(f"wrote {out} ({mask.count()} voxels)")


@main.command()
@click.option("--mask", "mask_args", multiple=True, required=True,
              help="Per-scale mask as <ir>=<header path>; repeatable.")
@click.option("--strategy", default="ir1+ir2+ir4+ir8", show_default=True)
@click.option("--connectivity", type=click.Choice(["6", "18", "26"]), default="26",
              show_default=True)
@click.option("--out", type=click.Path(path_type=Path), required=True)
@_exit_codes
def ensemble(mask_args, strategy, connectivity, out):
    """Fuse per-scale masks by union and extract the largest component."""
    scale_masks = {}
    for arg in mask_args:
        ir_str, _, path = arg.partition("=")
        scale_masks[int(ir_str)] = volgrid.read_mask(path)
    econf = ensemble_mod.EnsembleConfig(connectivity=int(connectivity))
    final = ensemble_mod.run_strategy(scale_masks, strategy, econf)
    out.parent.mkdir(parents=True, exist_ok=True)
    volgrid.write_volume(final, out)
    click.echo(f"wrote {out} ({final.count()} voxels)")


@main.command(name="eval")
@click.option("--pred", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--gt", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--out", type=click.Path(path_type=Path), default=None,
              help="Report directory; omit for stdout only.")
@click.option("--per-slice", is_flag=True, help="Average DSC over slices instead.")
@_exit_codes
def eval_cmd(pred, gt, out, per_slice):
    """Score a predicted mask against ground truth."""
    p = volgrid.read_mask(pred)
    g = volgrid.read_mask(gt)
    d = metrics.dsc_per_slice(p, g) if per_slice else metrics.dsc(p, g)
    t = metrics.tpr(p, g) if g.count() else float("nan")
    f = metrics.fpr(p, g)
    click.echo(f"DSC {d:.2f}  TPR {t:.2f}  FPR {f:.4f}")
    if out:
        metrics.emit_report({"pred": [d]}, None, out, cases=["case"])


@main.command()
@click.option("--out", type=click.Path(path_type=Path), required=True)
@click.option("--cases", type=int, default=1, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--dims", default="48,64,64", show_default=True, help="nz,ny,nx")
@click.option("--depth", type=int, default=3, show_default=True)
@click.option("--trunk-radius", type=float, default=6.0, show_default=True)
@click.option("--trunk-length", type=float, default=18.0, show_default=True)
@click.option("--radius-ratio", type=float, default=0.79, show_default=True)
@click.option("--noise-sigma", type=float, default=30.0, show_default=True)
@_exit_codes
def phantom(out, cases, seed, dims, depth, trunk_radius, trunk_length,
            radius_ratio, noise_sigma):
    """Generate synthetic airway-tree phantom cases with ground truth."""
    nz, ny, nx = (int(v) for v in dims.split(","))
    for i in range(cases):
        spec = phantom_mod.TreeSpec(depth=depth, trunk_radius=trunk_radius,
                                    trunk_length=trunk_length,
                                    radius_ratio=radius_ratio, rng_seed=seed + i,
                                    noise_sigma=noise_sigma)
        case = phantom_mod.generate_tree(spec, (nz, ny, nx))
        case_dir = out / f"case_{i:03d}"
        case_dir.mkdir(parents=True, exist_ok=True)
        volgrid.write_volume(case.volume, case_dir / "volume.hdr")
        volgrid.write_volume(case.gt, case_dir / "gt.hdr")
        phantom_mod.write_branch_manifest(case, case_dir / "branches.txt")
    click.echo(f"wrote {cases} phantom case(s) to {out}")


@main.command(name="pipeline")
@click.option("--volume", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--gt", type=click.Path(exists=True, path_type=Path), default=None)
@click.option("--config", "config_path", type=click.Path(exists=True, path_type=Path),
              required=True)
@click.option("--out", type=click.Path(path_type=Path), required=True)
@click.option("--case", default="case", show_default=True)
@_exit_codes
def pipeline_cmd(volume, gt, config_path, out, case):
    """Run all stages: per-scale prediction, ensemble strategies, scoring."""
    vol = volgrid.read_volume(volume)
    config = pipeline.load_config(config_path)
    out.mkdir(parents=True, exist_ok=True)
    scale_masks = {}
    for ir in config.scales.ratios:
        spec = config.backend_for(ir)
        mask = pipeline.predict_case(vol, ir, spec, config, case=case,
                                     workdir=out / "exchange")
        scale_masks[ir] = mask
        volgrid.write_volume(mask, out / f"mask_ir{ir}.hdr")
    finals = {}
    for strategy in config.strategies:
        final = pipeline.run_ensemble(scale_masks, strategy, config)
        finals[strategy] = final
        volgrid.write_volume(final, out / f"mask_{strategy.replace('+', '_')}.hdr")
    if gt:
        g = volgrid.read_mask(gt)
        scores = {s: [metrics.dsc(m, g)] for s, m in finals.items()}
        baseline = config.strategies[0]
        gains = metrics.gain_table(scores, cases=[case], baseline=baseline)
        metrics.emit_report(scores, gains, out / "report", cases=[case])
        for s, v in scores.items():
            click.echo(f"{s}: DSC {v[0]:.2f}")
    click.echo(f"pipeline outputs in {out}")


if __name__ == "__main__":
    main()
