"""Counter-based stream addressing: purity, splitting, and distribution."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dltlab.streams import Stream


def test_same_address_same_values():
    a = Stream(42).child("orbit").uniform_items(0, 64, 4)
    b = Stream(42).child("orbit").uniform_items(0, 64, 4)
    np.testing.assert_array_equal(a, b)


def test_distinct_children_decorrelate():
    s = Stream(42)
    a = s.child("alpha").uniform_items(0, 256, 1)
    b = s.child("beta").uniform_items(0, 256, 1)
    assert not np.array_equal(a, b)
    # crude independence proxy: small empirical correlation
    assert abs(np.corrcoef(a[:, 0], b[:, 0])[0, 1]) < 0.2


def test_distinct_seeds_decorrelate():
    a = Stream(1).child("x").uniform_items(0, 256, 1)
    b = Stream(2).child("x").uniform_items(0, 256, 1)
    assert not np.array_equal(a, b)


def test_child_path_order_matters():
    s = Stream(9)
    ab = s.child("a").child("b").uniform_items(0, 16, 1)
    ba = s.child("b").child("a").uniform_items(0, 16, 1)
    assert not np.array_equal(ab, ba)


def test_words_are_pure_and_positional():
    s = Stream(7).child("one").child("two")
    whole = s.words(0, 32)
    np.testing.assert_array_equal(whole[10:], s.words(10, 22))
    assert whole.dtype == np.uint64


@given(
    splits=st.lists(st.integers(min_value=1, max_value=63), min_size=0, max_size=6),
)
@settings(max_examples=40, deadline=None)
def test_chunked_reads_are_pure(splits):
    """Reading [0, 64) in any partition gives the same values item by item."""
    whole = Stream(1234).child("chunks").uniform_items(0, 64, 4)
    cuts = sorted(set(splits)) + [64]
    first = 0
    parts = []
    for cut in cuts:
        if cut > first:
            parts.append(Stream(1234).child("chunks").uniform_items(first, cut - first, 4))
            first = cut
    np.testing.assert_array_equal(whole, np.concatenate(parts, axis=0))


def test_offset_reads_are_pure():
    s = Stream(77).child("off")
    whole = s.gaussian_items(0, 100, 2)
    tail = s.gaussian_items(60, 40, 2)
    np.testing.assert_array_equal(whole[60:], tail)


def test_uniform_range_and_moments():
    u = Stream(5).child("u").uniform_items(0, 20000, 1)[:, 0]
    assert np.all(u >= 0.0) and np.all(u < 1.0)
    assert abs(u.mean() - 0.5) < 0.01
    assert abs(u.var() - 1.0 / 12.0) < 0.005


def test_gaussian_moments():
    g = Stream(5).child("g").gaussian_items(0, 20000, 1)[:, 0]
    assert abs(g.mean()) < 0.03
    assert abs(g.var() - 1.0) < 0.05
    assert abs((g**3).mean()) < 0.1


def test_raw_items_are_uint64():
    r = Stream(5).child("r").raw_items(0, 8, 2)
    assert r.dtype == np.uint64
    assert r.shape == (8, 2)


def test_stride_reserves_lanes():
    """A wider stride must not change the values of the leading lanes."""
    s = Stream(11).child("lanes")
    narrow = s.uniform_items(0, 32, 2, stride=4)
    again = s.uniform_items(0, 32, 2, stride=4)
    np.testing.assert_array_equal(narrow, again)


def test_item_position_checked():
    with pytest.raises(ValueError):
        Stream(3).uniform_items(-1, 4, 1)


def test_seed_range_checked():
    with pytest.raises(ValueError):
        Stream(-1)
    with pytest.raises(ValueError):
        Stream(1 << 64)
