import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from airseg.errors import ValidationError
from airseg.tiler import TileLayout, TileSet, merge, split, tile_path


class TestSplit:
    def test_1024_splits_into_four(self):
        ts = split(np.zeros((1024, 1024)), 512)
        assert ts.layout.grid == (2, 2)
        assert len(ts.tiles) == 4

    def test_single_tile_equals_input(self):
        img = np.random.default_rng(0).random((512, 512))
        ts = split(img, 512)
        assert len(ts.tiles) == 1
        assert np.array_equal(ts.tiles[0], img)

    def test_ir8_grid_has_64_tiles(self):
        layout = TileLayout.for_dims(4096, 4096, 512)
        assert layout.n_tiles == 64

    def test_dataset_scaling_by_ir_squared(self):
        # 7552 slices of 512x512 at ir=2 -> 4 tiles each
        layout = TileLayout.for_dims(1024, 1024, 512)
        assert 7552 * layout.n_tiles == 30208

    def test_edge_padding_replicates_border(self):
        img = np.arange(12.0).reshape(3, 4)
        ts = split(img, 4)
        assert ts.layout.pad == (1, 0)
        assert np.array_equal(ts.tiles[0][3], img[2])  # replicated last row

    def test_zero_padding_for_masks(self):
        m = np.ones((3, 3), dtype=np.uint8)
        ts = split(m, 4, pad_mode="zero")
        assert ts.tiles[0][3].sum() == 0
        assert ts.tiles[0][:, 3].sum() == 0

    def test_zero_tile_dim_rejected(self):
        with pytest.raises(ValueError):
            split(np.zeros((4, 4)), 0)


class TestMerge:
    def test_round_trip_1024(self):
        img = np.random.default_rng(1).random((1024, 1024)).astype(np.float32)
        assert np.array_equal(merge(split(img, 512)), img)

    def test_round_trip_64_tiles(self):
        img = np.random.default_rng(2).random((4096, 4096)).astype(np.float32)
        assert np.array_equal(merge(split(img, 512)), img)

    def test_constant_tiles_merge_to_constant(self):
        ts = split(np.zeros((100, 70)), 32)
        replaced = TileSet(ts.layout, tuple(np.full_like(t, 9.0) for t in ts.tiles))
        out = merge(replaced)
        assert out.shape == (100, 70)
        assert np.all(out == 9.0)

    def test_wrong_tile_count_rejected(self):
        ts = split(np.zeros((64, 64)), 32)
        with pytest.raises(ValidationError):
            TileSet(ts.layout, ts.tiles[:-1])

    def test_wrong_tile_shape_rejected(self):
        ts = split(np.zeros((64, 64)), 32)
        bad = (np.zeros((16, 16)),) + ts.tiles[1:]
        with pytest.raises(ValidationError):
            TileSet(ts.layout, bad)

    @settings(max_examples=60, deadline=None)
    @given(
        st.integers(1, 300),
        st.integers(1, 300),
        st.sampled_from([8, 32, 100, 512]),
        st.integers(0, 2**31 - 1),
    )
    def test_split_merge_bijection(self, ny, nx, tile_dim, seed):
        img = np.random.default_rng(seed).random((ny, nx)).astype(np.float32)
        assert np.array_equal(merge(split(img, tile_dim)), img)

    def test_layout_invariants(self):
        layout = TileLayout.for_dims(1000, 700, 512)
        rows, cols = layout.grid
        assert rows * 512 == 1000 + layout.pad[0]
        assert cols * 512 == 700 + layout.pad[1]
        assert 0 <= layout.pad[0] < 512 and 0 <= layout.pad[1] < 512


def test_tile_path_convention(tmp_path):
    p = tile_path(tmp_path, "caseA", 2, 13, 1, 3)
    assert p == tmp_path / "caseA" / "2" / "13" / "1_3.stx"
