import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pllay.complexes import cubical_sublevel, dtm_filtration, rips
from pllay.data import GridFunction, PointCloud
from pllay.datasets import synth_digit8
from pllay.dtm import DtmParams
from pllay.persistence import compute_persistence


def test_path_complex():
    cx = cubical_sublevel(np.array([[3.0, 1.0, 2.0, 0.0, 4.0]]))
    assert np.sum(cx.dims == 0) == 5
    edges = sorted((c.vertex_set, c.filtration_value) for c in cx.cells if c.dim == 1)
    assert [v for _, v in edges] == [3, 2, 2, 4]


def test_constant_2x2():
    cx = cubical_sublevel(np.zeros((2, 2)))
    assert list(np.bincount(cx.dims)) == [4, 4, 1]
    assert np.all(cx.values == 0)


def test_ring_3x3():
    arr = np.ones((3, 3))
    arr[1, 1] = 0
    cx = cubical_sublevel(arr)
    assert np.all(cx.values[cx.dims == 1] == 1)
    ring = [c for c in cx.cells if c.dim == 1 and 4 not in c.vertex_set]
    assert len(ring) == 8


@pytest.mark.parametrize("w,h", [(2, 2), (3, 5), (6, 4)])
def test_cell_counts(w, h, rng):
    cx = cubical_sublevel(GridFunction(w, h, rng.random(w * h)))
    counts = np.bincount(cx.dims, minlength=3)
    assert counts[0] == w * h
    assert counts[1] == w * (h - 1) + h * (w - 1)
    assert counts[2] == (w - 1) * (h - 1)


def test_cell_invariants(rng):
    arr = rng.integers(0, 3, (4, 5)).astype(float)  # many ties
    cx = cubical_sublevel(arr)
    f = arr.ravel()
    cx.check_filtration()
    for c in cx.cells:
        nb = len(c.boundary)
        assert nb == {0: 0, 1: 2, 2: 4}[c.dim]
        vs = np.array(c.vertex_set)
        assert c.filtration_value == f[vs].max()
        # argmax tie-break: smallest maximising vertex
        assert c.argmax_vertex == vs[f[vs] == f[vs].max()].min()


def test_sort_key(rng):
    cx = cubical_sublevel(rng.integers(0, 2, (4, 4)).astype(float))
    key = list(zip(cx.values, cx.dims, cx.ids))
    assert key == sorted(key)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 6), st.integers(2, 6), st.integers(0, 2**32 - 1))
def test_fuzz_monotone(w, h, seed):
    rng = np.random.default_rng(seed)
    cubical_sublevel(rng.random((h, w))).check_filtration()
    n = int(rng.integers(1, 9))
    rips(PointCloud(rng.random((n, 2))), 2).check_filtration()
    dtm_filtration(PointCloud(rng.random((n, 2))), DtmParams(0.3), grid=(w, h)).check_filtration()


def test_rips_unit_square():
    cx = rips(PointCloud([[0, 0], [1, 0], [1, 1], [0, 1]]), 2)
    d = compute_persistence(cx).pairs(1)
    np.testing.assert_allclose(d, [[0.5, np.sqrt(2) / 2]])


def test_rips_small():
    cx = rips(PointCloud([[0.0, 0.0], [2.0, 0.0]]), 2)
    assert list(cx.values[cx.dims == 1]) == [1.0]
    cx = rips(PointCloud([[0.3, 0.1]]), 2)
    assert len(cx) == 1 and cx.values[0] == 0


def test_rips_nesting(rng):
    pc = PointCloud(rng.random((7, 2)))
    full = rips(pc, 2)
    for r in (0.1, 0.3, 0.5):
        small = {c.vertex_set for c in rips(pc, 2, r).cells}
        big = {c.vertex_set for c in rips(pc, 2, r + 0.2).cells}
        assert small <= big
        assert small == {c.vertex_set for c in full.cells if c.filtration_value <= r}
    with pytest.raises(ValueError):
        rips(pc, 2, 0.0)


def test_annulus_single_dominant_loop():
    rng = np.random.default_rng(4)
    theta = rng.uniform(0, 2 * np.pi, 200)
    rad = rng.uniform(0.8, 1.0, 200)
    pc = PointCloud(np.column_stack([rad * np.cos(theta), rad * np.sin(theta)]))
    cx = dtm_filtration(pc, DtmParams(0.01), grid=(40, 40))
    p = compute_persistence(cx, keep_pairing=False).pairs(1, finite=True)
    pers = np.sort(p[:, 1] - p[:, 0])[::-1]
    assert pers[0] > 3 * pers[1]


def test_constant_weights_grid():
    g = GridFunction(10, 10, np.ones(100))
    cx = dtm_filtration(g, DtmParams(0.05))
    d = compute_persistence(cx)
    assert np.sum((d.dims == 0) & ~np.isfinite(d.deaths)) == 1
    # the field is symmetric under the grid's mirror symmetry
    f = cx.provenance.values.reshape(10, 10)
    np.testing.assert_allclose(f, f[:, ::-1], atol=1e-12)


def test_digit8_two_loops():
    cx = dtm_filtration(synth_digit8(), DtmParams(0.05))
    p = compute_persistence(cx).pairs(1, finite=True)
    pers = np.sort(p[:, 1] - p[:, 0])[::-1]
    assert len(pers) >= 2
    assert pers[1] > 0 and (len(pers) == 2 or pers[1] >= 3 * pers[2])


def test_vertex_function_matches_dtm(rng):
    g = GridFunction(5, 4, rng.random(20))
    cx = dtm_filtration(g, DtmParams(0.2))
    v = np.empty(20)
    v[cx.argmax[cx.dims == 0]] = cx.values[cx.dims == 0]
    np.testing.assert_array_equal(v, cx.provenance.values)


def test_dump_format(rng):
    cx = cubical_sublevel(np.array([[0.0, 1.0], [2.0, 3.0]]))
    lines = cx.dump().splitlines()
    assert len(lines) == 9
    assert lines[0] == "0 0.0 0"
    assert lines[-1].startswith("2 3.0 0 1 2 3")
