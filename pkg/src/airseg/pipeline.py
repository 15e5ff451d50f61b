"""End-to-end orchestration of the multi-scale prediction workflow.

Per scale and slice: window-normalize, bilinear up-sample by the
interpolation ratio, optionally sharpen, split into fixed tiles, run the
segmenter backend, binarize, merge, nearest-down-sample, and stack into a
3D mask. Per case: union the per-scale masks of a strategy and extract
the largest connected component.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import ensemble, resample, segmenter, sharpen as sharpen_mod, tiler, volgrid
from .ensemble import EnsembleConfig
from .errors import InputError, ValidationError
from .segmenter import BackendSpec, PredictJob
from .tiler import TileLayout, tile_path
from .volgrid import Mask3D, ScaleSpec, Volume, WindowSpec


@dataclass(frozen=True)
class PipelineConfig:
    scales: ScaleSpec = field(default_factory=ScaleSpec)
    window: WindowSpec = field(default_factory=WindowSpec)
    thresholds: dict[int, float] = field(default_factory=dict)  # per-ir override
    backends: dict[int, BackendSpec] = field(default_factory=dict)
    strategies: tuple[str, ...] = ensemble.STRATEGIES
    sharpen_amount: float = 0.0
    connectivity: int = 26
    quantize: bool = False
    binarize_first: bool = True
    jobs: int = 1

    def __post_init__(self):
        for t in self.thresholds.values():
            if not 0.0 < t < 1.0:
                raise ValidationError(f"threshold must be in (0, 1), got {t}")

    def threshold_for(self, ir: int) -> float:
        return self.thresholds.get(ir, 0.5)

    def backend_for(self, ir: int) -> BackendSpec:
        if ir not in self.backends:
            raise ValidationError(f"no backend configured for ir {ir}")
        return self.backends[ir]


def normalized_slice(vol: Volume, z: int, ir: int, config: PipelineConfig) -> np.ndarray:
    """Windowed, up-sampled and optionally sharpened slice at one scale."""
    img = volgrid.window_normalize(vol, config.window, z, quantize=config.quantize).data
    if ir > 1:
        img = resample.upsample_bilinear(img, ir)
    if config.sharpen_amount > 0:
        img = sharpen_mod.sharpen(img, config.sharpen_amount)
    return img


def predict_scale(vol: Volume, ir: int, backend, config: PipelineConfig) -> Mask3D:
    """Run one interpolation ratio with an in-process backend object."""
    nz, ny, nx = vol.dims
    d = config.scales.tile_dim
    threshold = config.threshold_for(ir)

    def one_slice(z: int) -> np.ndarray:
        ts = tiler.split(normalized_slice(vol, z, ir, config), d, pad_mode="edge")
        cols = ts.layout.grid[1]
        probs = []
        for idx, tile in enumerate(ts.tiles):
            job = PredictJob(case="", ir=ir, z=z, row=idx // cols, col=idx % cols)
            probs.append(segmenter.predict_tile(backend, tile, job).data)
        return ensemble.assemble_slice(probs, ts.layout, ir, threshold, config.binarize_first)

    if config.jobs > 1:
        with ThreadPoolExecutor(max_workers=config.jobs) as pool:
            planes = list(pool.map(one_slice, range(nz)))
    else:
        planes = [one_slice(z) for z in range(nz)]
    return Mask3D(np.stack(planes, axis=0))


def write_input_tiles(vol: Volume, ir: int, config: PipelineConfig, case: str,
                      tiles_root: Path) -> TileLayout:
    """Persist all normalized input tiles for one (case, ir) as STX1."""
    nz, ny, nx = vol.dims
    layout = TileLayout.for_dims(ny * ir, nx * ir, config.scales.tile_dim)
    for z in range(nz):
        ts = tiler.split(normalized_slice(vol, z, ir, config),
                         config.scales.tile_dim, pad_mode="edge")
        cols = ts.layout.grid[1]
        for idx, tile in enumerate(ts.tiles):
            path = tile_path(tiles_root, case, ir, z, idx // cols, idx % cols)
            path.parent.mkdir(parents=True, exist_ok=True)
            volgrid.write_tensor(tile, path)
    return layout


def predict_scale_external(vol: Volume, ir: int, spec: BackendSpec,
                           config: PipelineConfig, case: str, workdir: Path) -> Mask3D:
    """Run one ratio through the file-exchange backend protocol."""
    tiles_root = workdir / "tiles"
    maps_root = workdir / "maps"
    layout = write_input_tiles(vol, ir, config, case, tiles_root)
    nz, ny, nx = vol.dims
    expected = [
        f"{z}/{r}_{c}.stx"
        for z in range(nz)
        for r in range(layout.grid[0])
        for c in range(layout.grid[1])
    ]
    in_dir = tiles_root / case / str(ir)
    out_dir = maps_root / case / str(ir)
    segmenter.run_external(spec.params["command"], in_dir, out_dir, expected,
                           timeout=spec.params.get("timeout"))
    econf = EnsembleConfig(threshold=config.threshold_for(ir),
                           connectivity=config.connectivity,
                           scales=config.scales,
                           binarize_first=config.binarize_first)
    return ensemble.assemble_scale_mask(maps_root, case, ir, nz, (ny, nx),
                                        config.scales.tile_dim, econf)


def predict_case(vol: Volume, ir: int, spec: BackendSpec, config: PipelineConfig,
                 case: str = "case", workdir: Path | None = None) -> Mask3D:
    """Dispatch one (case, ir) prediction to the configured backend kind."""
    if spec.kind == "external":
        if workdir is None:
            raise ValidationError("external backend needs a workdir for tile exchange")
        return predict_scale_external(vol, ir, spec, config, case, workdir)
    if spec.kind == "region_grow":
        mask = segmenter.region_grow(vol, tuple(spec.params["seed"]),
                                     spec.params["hu_max"],
                                     spec.params.get("connectivity", 6))
        backend = segmenter.MaskOracleBackend(mask, config.scales.tile_dim)
        return predict_scale(vol, ir, backend, config)
    backend = segmenter.make_backend(spec, config.scales.tile_dim)
    return predict_scale(vol, ir, backend, config)


def run_ensemble(scale_masks: dict[int, Mask3D], strategy: str,
                 config: PipelineConfig) -> Mask3D:
    econf = EnsembleConfig(connectivity=config.connectivity, scales=config.scales)
    return ensemble.run_strategy(scale_masks, strategy, econf)


# ---------------------------------------------------------------------------
# Declarative configuration file (JSON)


def _parse_backend_string(text: str) -> BackendSpec:
    kind, _, rest = text.partition(":")
    if kind == "threshold":
        return BackendSpec("threshold", {"t": float(rest)})
    if kind == "external":
        if not rest:
            raise ValidationError("external backend needs a command template")
        return BackendSpec("external", {"command": rest})
    if kind == "oracle":
        return BackendSpec("oracle_phantom", {"mask": volgrid.read_mask(rest)})
    if kind == "region_grow":
        try:
            z, y, x, hu_max = (int(v) for v in rest.split(","))
        except ValueError:
            raise ValidationError(
                f"region_grow backend expects z,y,x,hu_max, got {rest!r}") from None
        return BackendSpec("region_grow", {"seed": (z, y, x), "hu_max": hu_max})
    raise ValidationError(f"unknown backend string {text!r}")


def load_config(path: str | Path) -> PipelineConfig:
    """Read the declarative pipeline configuration file."""
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as e:
        raise InputError(f"cannot read config {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise InputError(f"malformed config {path}: {e}") from e
    scales = ScaleSpec(
        ratios=tuple(raw.get("scales", {}).get("ratios", (1, 2, 4, 8))),
        tile_dim=raw.get("scales", {}).get("tile_dim", 512),
    )
    window = WindowSpec(
        width_hu=raw.get("window", {}).get("width_hu", 1500.0),
        level_hu=raw.get("window", {}).get("level_hu", -500.0),
    )
    thresholds = {int(k): float(v) for k, v in raw.get("thresholds", {}).items()}
    backends = {int(k): _parse_backend_string(v) for k, v in raw.get("backends", {}).items()}
    for ir in scales.ratios:
        if backends and ir not in backends:
            raise ValidationError(f"config declares no backend for ir {ir}")
    return PipelineConfig(
        scales=scales,
        window=window,
        thresholds=thresholds,
        backends=backends,
        strategies=tuple(raw.get("strategies", ensemble.STRATEGIES)),
        sharpen_amount=float(raw.get("sharpen", 0.0)),
        connectivity=int(raw.get("connectivity", 26)),
        quantize=bool(raw.get("quantize", False)),
        binarize_first=bool(raw.get("binarize_first", True)),
        jobs=int(raw.get("jobs", 1)),
    )
