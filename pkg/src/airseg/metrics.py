"""Segmentation scoring and per-strategy gain tables.

Scores are kept at full precision internally and rounded to two decimals
only for display; gain rows report mean and sample standard deviation
(n - 1 denominator) against the single-scale baseline.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .volgrid import Mask3D


def _counts(pred: Mask3D | np.ndarray, gt: Mask3D | np.ndarray):
    p = pred.data if isinstance(pred, Mask3D) else np.asarray(pred)
    g = gt.data if isinstance(gt, Mask3D) else np.asarray(gt)
    if p.shape != g.shape:
        raise ValidationError(f"mask shapes differ: {p.shape} vs {g.shape}")
    p = p.astype(bool)
    g = g.astype(bool)
    tp = int(np.count_nonzero(p & g))
    return p, g, tp


def dsc(pred, gt) -> float:
    """Dice similarity coefficient as a percentage; 100 for two empty masks."""
    p, g, tp = _counts(pred, gt)
    denom = int(np.count_nonzero(p)) + int(np.count_nonzero(g))
    if denom == 0:
        return 100.0
    return 100.0 * 2.0 * tp / denom


def tpr(pred, gt) -> float:
    """Fraction of ground-truth voxels recovered, as a percentage."""
    p, g, tp = _counts(pred, gt)
    n_gt = int(np.count_nonzero(g))
    if n_gt == 0:
        raise ValidationError("TPR undefined for empty ground truth")
    return 100.0 * tp / n_gt


def fpr(pred, gt) -> float:
    """Fraction of background voxels falsely labelled, as a percentage."""
    p, g, tp = _counts(pred, gt)
    n_bg = int(np.count_nonzero(~g))
    if n_bg == 0:
        return 0.0
    fp = int(np.count_nonzero(p & ~g))
    return 100.0 * fp / n_bg


def dsc_per_slice(pred: Mask3D, gt: Mask3D) -> float:
    """Mean of per-slice DSC over z (alternative to whole-volume DSC)."""
    p, g, _ = _counts(pred, gt)
    return float(np.mean([dsc(p[z], g[z]) for z in range(p.shape[0])]))


@dataclass(frozen=True)
class CaseScores:
    case: str
    dsc: dict[str, float]  # strategy -> percent
    tpr: dict[str, float] = field(default_factory=dict)
    fpr: dict[str, float] = field(default_factory=dict)


@dataclass(frozen=True)
class GainTable:
    baseline: str
    cases: tuple[str, ...]
    gains: dict[str, tuple[float, ...]]  # strategy -> per-case gain (pp)
    means: dict[str, float]
    sds: dict[str, float]


def _sample_sd(values) -> float:
    n = len(values)
    if n < 2:
        return 0.0
    mean = sum(values) / n
    return math.sqrt(sum((v - mean) ** 2 for v in values) / (n - 1))


def gain_table(scores: dict[str, list[float]], cases: list[str] | None = None,
               baseline: str = "ir1") -> GainTable:
    """Per-case DSC gains of each strategy over the baseline strategy.

    ``scores`` maps strategy name to per-case DSC percentages, all in the
    same case order.
    """
    if baseline not in scores:
        raise ValidationError(f"baseline strategy {baseline!r} missing from scores")
    n = len(scores[baseline])
    for strat, vals in scores.items():
        if len(vals) != n:
            raise ValidationError(f"strategy {strat!r} has {len(vals)} cases, expected {n}")
    if cases is None:
        cases = [f"case{i + 1}" for i in range(n)]
    elif len(cases) != n:
        raise ValidationError(f"{len(cases)} case ids for {n} cases")
    base = scores[baseline]
    gains, means, sds = {}, {}, {}
    for strat, vals in scores.items():
        if strat == baseline:
            continue
        g = tuple(v - b for v, b in zip(vals, base))
        gains[strat] = g
        means[strat] = sum(g) / n if n else 0.0
        sds[strat] = _sample_sd(g)
    return GainTable(baseline=baseline, cases=tuple(cases), gains=gains, means=means, sds=sds)


def _write_table(path: Path, header: list[str], rows: list[list[str]]) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        writer.writerows(rows)


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def emit_report(scores: dict[str, list[float]], gains: GainTable | None,
                out_dir: str | Path, cases: list[str] | None = None) -> list[Path]:
    """Write DSC and gain tables as CSV plus an aligned text rendering.

    Layout mirrors the score tables: strategies as rows, cases as columns,
    then "Average" and "SD" columns; fixed 2-decimal formatting so repeated
    runs are byte-identical.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    strategies = list(scores)
    n = len(scores[strategies[0]]) if strategies else 0
    if cases is None:
        cases = [f"case{i + 1}" for i in range(n)]
    written = []

    header = ["Strategy", *cases, "Average", "SD"]
    rows = []
    for strat in strategies:
        vals = scores[strat]
        rows.append([strat, *(_fmt(v) for v in vals),
                     _fmt(sum(vals) / n) if n else "", _fmt(_sample_sd(vals)) if n else ""])
    dsc_csv = out_dir / "dsc.csv"
    _write_table(dsc_csv, header, rows)
    written.append(dsc_csv)

    if gains is not None:
        rows = []
        for strat, g in gains.gains.items():
            rows.append([strat, *(_fmt(v) for v in g),
                         _fmt(gains.means[strat]), _fmt(gains.sds[strat])])
        gain_csv = out_dir / "gain.csv"
        _write_table(gain_csv, ["Strategy", *gains.cases, "Average", "SD"], rows)
        written.append(gain_csv)

    txt = out_dir / "report.txt"
    with open(txt, "w") as f:
        for path in written:
            with open(path, newline="") as src:
                table = list(csv.reader(src))
            widths = [max(len(row[i]) for row in table) for i in range(len(table[0]))]
            f.write(f"# {path.name}\n")
            for row in table:
                f.write("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip() + "\n")
            f.write("\n")
    written.append(txt)
    return written
