import dataclasses
import math

import numpy as np
import pytest
from scipy import ndimage

from airseg.errors import ValidationError
from airseg.phantom import (
    PhantomCase,
    TreeSpec,
    generate_tree,
    limited_mask,
    scale_limited_oracle,
    write_branch_manifest,
)

DIMS = (40, 48, 48)
SPEC = TreeSpec(trunk_radius=5.0, trunk_length=12.0, radius_ratio=0.6, depth=3)


@pytest.fixture(scope="module")
def case():
    return generate_tree(SPEC, DIMS)


def n_components(mask, connectivity=26):
    structure = ndimage.generate_binary_structure(3, 3 if connectivity == 26 else 1)
    _, n = ndimage.label(mask, structure=structure)
    return n


class TestGeneration:
    def test_deterministic_for_fixed_seed(self):
        a = generate_tree(SPEC, DIMS)
        b = generate_tree(SPEC, DIMS)
        assert np.array_equal(a.volume.data, b.volume.data)
        assert np.array_equal(a.gt.data, b.gt.data)
        assert a.branches == b.branches

    def test_different_seed_changes_noise_not_gt(self):
        a = generate_tree(SPEC, DIMS)
        b = generate_tree(dataclasses.replace(SPEC, rng_seed=1), DIMS)
        assert np.array_equal(a.gt.data, b.gt.data)
        assert not np.array_equal(a.volume.data, b.volume.data)

    def test_depth0_cylinder_volume(self):
        spec = TreeSpec(depth=0, trunk_radius=5.0, trunk_length=20.0)
        c = generate_tree(spec, (32, 32, 32))
        analytic = math.pi * 5.0**2 * 20.0
        assert abs(c.gt.count() - analytic) / analytic < 0.10

    def test_radius_recursion(self, case):
        deepest = [b for b in case.branches if b.generation == 3]
        assert deepest
        for b in deepest:
            assert b.radius == pytest.approx(5.0 * 0.6**3)

    def test_branch_count_is_binary_tree(self, case):
        assert len(case.branches) == 2**4 - 1

    def test_gt_single_connected_component(self, case):
        assert case.gt.count() > 0
        assert n_components(case.gt.data) == 1

    def test_hu_rendering_bands(self, case):
        gt = case.gt.data.astype(bool)
        assert np.all(case.volume.data[gt] == -1000)
        shell = ndimage.binary_dilation(gt, iterations=2) & ~gt
        assert np.all(case.volume.data[shell] == -200)

    def test_out_of_bounds_tree_rejected(self):
        with pytest.raises(ValidationError, match="bounds|leaves"):
            generate_tree(TreeSpec(trunk_length=100.0), (32, 48, 48))


class TestScaleLimitedOracle:
    def test_high_cutoff_gives_empty_prediction(self, case):
        assert limited_mask(case, SPEC.trunk_radius + 1).count() == 0

    def test_low_cutoff_recovers_full_gt(self, case):
        assert np.array_equal(limited_mask(case, 0.0).data, case.gt.data)

    def test_masks_nested_in_ir(self, case):
        prev = None
        for ir in (1, 2, 4, 8):
            m = limited_mask(case, 4.0 / ir).data
            assert np.all(m <= case.gt.data)
            if prev is not None:
                assert np.all(prev <= m)
            prev = m

    def test_oracle_backend_serves_limited_mask(self, case):
        backend = scale_limited_oracle(case, 1, 4.0, tile_dim=48)
        assert np.array_equal(backend.mask.data, limited_mask(case, 4.0).data)

    def test_bad_ratio_rejected(self, case):
        with pytest.raises(ValueError):
            scale_limited_oracle(case, 0, 4.0)


def test_branch_manifest(tmp_path, case):
    write_branch_manifest(case, tmp_path / "branches.txt")
    lines = (tmp_path / "branches.txt").read_text().strip().splitlines()
    assert len(lines) == len(case.branches)
    gen, radius, *coords = lines[0].split()
    assert int(gen) == 0
    assert float(radius) == pytest.approx(5.0)
    assert len(coords) == 6
