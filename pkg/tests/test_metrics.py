import numpy as np
import pytest

from airseg.errors import ValidationError
from airseg.metrics import (
    GainTable,
    dsc,
    dsc_per_slice,
    emit_report,
    fpr,
    gain_table,
    tpr,
)
from airseg.volgrid import Mask3D

# Published five-case DSC fixtures used to pin the gain-table arithmetic.
# The published cells are pre-rounded upstream, so allow float slop on +/-0.01.
CELL_TOL = 0.01 + 1e-9

TABLE5 = {
    "ir1": [85.27, 81.56, 78.99, 83.20, 79.71],
    "ir1+ir2": [85.93, 82.12, 80.34, 85.51, 83.38],
    "ir1+ir2+ir4": [86.06, 82.27, 80.80, 86.75, 84.67],
    "ir1+ir2+ir4+ir8": [86.10, 81.81, 81.40, 86.75, 85.21],
}
TABLE7 = {
    "ir1+ir2": ([0.66, 0.56, 1.35, 2.31, 3.67], 1.71, 1.30),
    "ir1+ir2+ir4": ([0.79, 0.72, 1.81, 3.55, 4.96], 2.37, 1.85),
    "ir1+ir2+ir4+ir8": ([0.84, 0.26, 2.41, 3.56, 5.50], 2.51, 2.12),
}
TABLE6 = {
    "ir1": [82.02, 77.67, 77.51, 81.51, 77.55],
    "ir1+ir2": [82.71, 78.08, 78.07, 82.73, 78.24],
    "ir1+ir2+ir4": [82.88, 78.28, 78.27, 83.75, 82.02],
    "ir1+ir2+ir4+ir8": [82.93, 78.29, 78.49, 84.13, 82.03],
}
TABLE8 = {
    "ir1+ir2": ([0.68, 0.41, 0.55, 1.22, 0.69], 0.71, 0.31),
    "ir1+ir2+ir4": ([0.85, 0.61, 0.75, 2.24, 4.47], 1.79, 1.64),
    "ir1+ir2+ir4+ir8": ([0.90, 0.62, 0.97, 2.62, 4.47], 1.92, 1.63),
}


def mask_of(coords, dims=(2, 3, 3)):
    m = np.zeros(dims, dtype=np.uint8)
    for c in coords:
        m[c] = 1
    return Mask3D(m)


class TestDSC:
    def test_identical_nonempty_is_100(self):
        m = mask_of([(0, 0, 0), (1, 2, 2)])
        assert dsc(m, m) == 100.0

    def test_disjoint_is_zero(self):
        assert dsc(mask_of([(0, 0, 0)]), mask_of([(1, 1, 1)])) == 0.0

    def test_half_overlap(self):
        p = mask_of([(0, 0, 0), (0, 0, 1)])
        g = mask_of([(0, 0, 0), (0, 1, 0)])
        assert dsc(p, g) == 50.0

    def test_both_empty_is_100(self):
        assert dsc(mask_of([]), mask_of([])) == 100.0

    def test_symmetric_and_bounded(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            p = Mask3D((rng.random((4, 4, 4)) > 0.5).astype(np.uint8))
            g = Mask3D((rng.random((4, 4, 4)) > 0.5).astype(np.uint8))
            a, b = dsc(p, g), dsc(g, p)
            assert a == b
            assert 0.0 <= a <= 100.0

    def test_nested_subsets_monotone(self):
        rng = np.random.default_rng(1)
        for _ in range(30):
            g = (rng.random((6, 6, 6)) > 0.5).astype(np.uint8)
            b = (g & (rng.random(g.shape) > 0.3)).astype(np.uint8)
            a = (b & (rng.random(g.shape) > 0.3)).astype(np.uint8)
            assert dsc(Mask3D(a), Mask3D(g)) <= dsc(Mask3D(b), Mask3D(g)) + 1e-12

    def test_matches_set_computation(self):
        rng = np.random.default_rng(2)
        for _ in range(500):
            p = (rng.random((8, 8, 8)) > 0.5).astype(np.uint8)
            g = (rng.random((8, 8, 8)) > 0.5).astype(np.uint8)
            inter = sum(
                1
                for z in range(8)
                for y in range(8)
                for x in range(8)
                if p[z, y, x] and g[z, y, x]
            )
            expected = 100.0 if (p.sum() + g.sum()) == 0 else 200.0 * inter / (p.sum() + g.sum())
            assert dsc(Mask3D(p), Mask3D(g)) == pytest.approx(expected, abs=1e-12)

    def test_shape_mismatch(self):
        with pytest.raises(ValidationError):
            dsc(mask_of([]), mask_of([], dims=(1, 3, 3)))


class TestTprFpr:
    def test_superset_pred_has_full_tpr(self):
        g = mask_of([(0, 0, 0)])
        p = mask_of([(0, 0, 0), (1, 1, 1)])
        assert tpr(p, g) == 100.0

    def test_empty_pred(self):
        g = mask_of([(0, 0, 0)])
        assert tpr(mask_of([]), g) == 0.0
        assert fpr(mask_of([]), g) == 0.0

    def test_three_of_four(self):
        g = mask_of([(0, 0, 0), (0, 0, 1), (0, 0, 2), (0, 1, 0)])
        p = mask_of([(0, 0, 0), (0, 0, 1), (0, 0, 2)])
        assert tpr(p, g) == 75.0

    def test_empty_gt_tpr_undefined(self):
        with pytest.raises(ValidationError):
            tpr(mask_of([]), mask_of([]))

    def test_fpr_counts_background_errors(self):
        g = mask_of([(0, 0, 0)])  # 17 background voxels in 2x3x3
        p = mask_of([(0, 0, 0), (1, 1, 1)])
        assert fpr(p, g) == pytest.approx(100.0 / 17)


class TestGainTable:
    def test_reproduces_combined_loss_gains(self):
        gt = gain_table(TABLE5)
        for strat, (gains, mean, sd) in TABLE7.items():
            for got, want in zip(gt.gains[strat], gains):
                assert abs(got - want) <= CELL_TOL
            assert abs(gt.means[strat] - mean) <= CELL_TOL
            assert abs(gt.sds[strat] - sd) <= CELL_TOL

    def test_reproduces_focal_loss_gains(self):
        gt = gain_table(TABLE6)
        for strat, (gains, mean, sd) in TABLE8.items():
            for got, want in zip(gt.gains[strat], gains):
                assert abs(got - want) <= CELL_TOL
            assert abs(gt.means[strat] - mean) <= CELL_TOL
            assert abs(gt.sds[strat] - sd) <= CELL_TOL

    def test_identical_rows_give_zero_gain(self):
        scores = {"ir1": [80.0, 81.0], "ir1+ir2": [80.0, 81.0]}
        gt = gain_table(scores)
        assert gt.gains["ir1+ir2"] == (0.0, 0.0)
        assert gt.means["ir1+ir2"] == 0.0
        assert gt.sds["ir1+ir2"] == 0.0

    def test_missing_baseline(self):
        with pytest.raises(ValidationError):
            gain_table({"ir1+ir2": [1.0]})

    def test_mismatched_case_counts(self):
        with pytest.raises(ValidationError):
            gain_table({"ir1": [1.0, 2.0], "ir1+ir2": [1.0]})


class TestReport:
    def test_deterministic_output(self, tmp_path):
        gt = gain_table(TABLE5, cases=["s1", "s2", "p1", "p2", "p3"])
        files1 = emit_report(TABLE5, gt, tmp_path / "a", cases=["s1", "s2", "p1", "p2", "p3"])
        files2 = emit_report(TABLE5, gt, tmp_path / "b", cases=["s1", "s2", "p1", "p2", "p3"])
        for f1, f2 in zip(files1, files2):
            assert f1.read_bytes() == f2.read_bytes()

    def test_header_only_for_empty_case_list(self, tmp_path):
        files = emit_report({}, None, tmp_path)
        text = files[0].read_text().strip().splitlines()
        assert text == ["Strategy,Average,SD"]

    def test_single_cell_table(self, tmp_path):
        files = emit_report({"ir1": [85.0]}, None, tmp_path, cases=["only"])
        rows = files[0].read_text().strip().splitlines()
        assert rows[0] == "Strategy,only,Average,SD"
        assert rows[1] == "ir1,85.00,85.00,0.00"

    def test_layout_has_average_and_sd_columns(self, tmp_path):
        gt = gain_table(TABLE5)
        files = emit_report(TABLE5, gt, tmp_path)
        header = files[1].read_text().splitlines()[0]
        assert header.endswith("Average,SD")


def test_per_slice_dsc_mode():
    rng = np.random.default_rng(5)
    p = Mask3D((rng.random((3, 4, 4)) > 0.5).astype(np.uint8))
    g = Mask3D((rng.random((3, 4, 4)) > 0.5).astype(np.uint8))
    expected = np.mean([dsc(Mask3D(p.data[z : z + 1]), Mask3D(g.data[z : z + 1]))
                        for z in range(3)])
    assert dsc_per_slice(p, g) == pytest.approx(expected)
