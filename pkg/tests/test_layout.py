"""Patch-major tiling: index arithmetic, padding, and roundtrip."""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from corrvol.layout import (
    from_patch_major,
    padded_extent,
    pm_index,
    to_patch_major,
)
from corrvol.types import FeatureMap
from oracles import naive_pm_order


def _fmap(h, w, d=3, seed=0):
    rng = np.random.default_rng(seed)
    return FeatureMap(values=rng.standard_normal((h, w, d)).astype(np.float32))


def test_padded_extent():
    assert padded_extent(8, 4) == 8
    assert padded_extent(9, 4) == 12
    assert padded_extent(1, 8) == 8
    assert padded_extent(5, 1) == 5


def test_pm_index_matches_enumeration_oracle():
    """pm_index agrees with an explicit tile-by-tile enumeration."""
    block, ph, pw = 3, 6, 9
    order = naive_pm_order(ph, pw, block)
    for linear, (y, x) in enumerate(order):
        assert pm_index(y, x, block, pw, ph) == linear


def test_pm_index_block1_is_row_major():
    for y in range(3):
        for x in range(5):
            assert pm_index(y, x, 1, 5, 3) == y * 5 + x


def test_pm_index_rejects_out_of_range():
    with pytest.raises(ValueError):
        pm_index(4, 0, 2, 4, 4)
    with pytest.raises(ValueError):
        pm_index(0, -1, 2, 4, 4)


def test_tile_interior_is_contiguous():
    """All B^2 cells of one tile occupy one contiguous index range."""
    block, pw, ph = 4, 8, 8
    idx = [pm_index(y, x, block, pw, ph) for y in range(4, 8) for x in range(0, 4)]
    base = min(idx)
    assert sorted(i - base for i in idx) == list(range(block * block))


@given(
    st.integers(1, 9),
    st.integers(1, 9),
    st.sampled_from([1, 2, 3, 4, 8]),
    st.integers(0, 2 ** 31 - 1),
)
def test_roundtrip_recovers_original(h, w, block, seed):
    fm = _fmap(h, w, d=2, seed=seed)
    back = from_patch_major(to_patch_major(fm, block))
    assert np.array_equal(back.values, fm.values)


def test_padding_cells_are_zero_vectors():
    fm = _fmap(5, 6, d=3)
    p = to_patch_major(fm, 4)
    assert (p.padded_height, p.padded_width) == (8, 8)
    for y in range(8):
        for x in range(8):
            vec = p.values[pm_index(y, x, 4, 8, 8)]
            if y < 5 and x < 6:
                assert np.array_equal(vec, fm.values[y, x])
            else:
                assert np.array_equal(vec, np.zeros(3, dtype=np.float32))


def test_tiles_view_shape_and_content():
    fm = _fmap(4, 6, d=2)
    p = to_patch_major(fm, 2)
    tiles = p.tiles()
    assert tiles.shape == (p.n_tiles, 4, 2)
    assert p.tiles_y == 2 and p.tiles_x == 3
    # Tile (1, 2) holds pixels y in {2,3}, x in {4,5} interior row-major.
    t = tiles[1 * 3 + 2]
    expect = fm.values[2:4, 4:6].reshape(4, 2)
    assert np.array_equal(t, expect)


def test_to_patch_major_rejects_bad_block():
    with pytest.raises(ValueError):
        to_patch_major(_fmap(2, 2), 0)
