import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pllay.complexes import FilteredComplex, cubical_sublevel, rips
from pllay.data import PointCloud
from pllay.experiments import persistence_oracle_report, random_complex
from pllay.persistence import INF, PersistenceDiagram, compute_persistence, diagram_betti, persistent_betti
from pllay.reduction import reduce_compiled, reduce_python

PATH = np.array([[3.0, 1.0, 2.0, 0.0, 4.0]])


def as_set(d, dim):
    return sorted(map(tuple, d.pairs(dim)))


def test_path_diagram():
    d = compute_persistence(cubical_sublevel(PATH))
    assert as_set(d, 0) == [(0.0, INF), (1.0, 2.0)]
    assert as_set(d, 1) == []


def test_unit_square_rips():
    d = compute_persistence(rips(PointCloud([[0, 0], [1, 0], [1, 1], [0, 1]]), 2))
    np.testing.assert_allclose(d.pairs(1), [[0.5, 0.7071067811865476]])
    assert as_set(d, 0)[0] == (0.0, 0.5)


def test_constant_grid():
    d = compute_persistence(cubical_sublevel(np.zeros((2, 2))))
    assert as_set(d, 0) == [(0.0, INF)] and as_set(d, 1) == []


def test_grid_loop_is_essential_free():
    arr = np.ones((3, 3))
    arr[1, 1] = 0
    d = compute_persistence(cubical_sublevel(arr))
    # the ring at value 1 is filled by the squares at value 1: no lasting loop
    assert as_set(d, 1) == []
    arr[1, 1] = 5
    d = compute_persistence(cubical_sublevel(arr))
    assert as_set(d, 1) == [(1.0, 5.0)]


def test_persistent_betti_examples():
    cx = cubical_sublevel(PATH)
    assert persistent_betti(cx, 1.5, 1.9, 0) == 2
    assert persistent_betti(cx, 1.5, 2.0, 0) == 1
    assert persistent_betti(cx, 10, 10, 0) == 1
    cx = rips(PointCloud([[0, 0], [5, 0], [10, 10]]), 1, 1.0)
    assert persistent_betti(cx, 10, 10, 0) == 3
    with pytest.raises(ValueError):
        persistent_betti(cx, 2, 1, 0)


def test_oracle_equivalence_small():
    rep = persistence_oracle_report(n_complexes=60, seed=99)
    assert rep["mismatches"] == []


def test_no_zero_persistence_and_valid_pairs(rng):
    for _ in range(30):
        cx = random_complex(rng)
        d = compute_persistence(cx)
        fin = np.isfinite(d.deaths)
        assert np.all(d.deaths[fin] > d.births[fin])
        assert set(np.unique(d.dims)) <= {0, 1}
        np.testing.assert_array_equal(cx.values[d.pairing[:, 0]], d.births)
        np.testing.assert_array_equal(cx.values[d.pairing[fin, 1]], d.deaths[fin])
        assert np.all(d.pairing[~fin, 1] == -1)
        assert np.all(cx.dims[d.pairing[fin, 1]] == d.dims[fin] + 1)


def test_pairing_is_lowest_one(rng):
    """Reducing the death column by earlier columns alone ends with its birth cell as pivot."""
    for _ in range(10):
        cx = random_complex(rng)
        d = compute_persistence(cx)
        low = {}
        cols = []
        for j in range(len(cx)):
            col = set(cx.boundary(j).tolist())
            while col and max(col) in low:
                col ^= cols[low[max(col)]]
            cols.append(col)
            if col:
                low[max(col)] = j
        for b, dd in d.pairing[np.isfinite(d.deaths)]:
            assert max(cols[dd]) == b


def test_relabel_invariance(rng):
    pts = rng.random((7, 2))
    a = compute_persistence(rips(PointCloud(pts), 2))
    b = compute_persistence(rips(PointCloud(pts[rng.permutation(7)]), 2))
    for dim in (0, 1):
        np.testing.assert_allclose(sorted(map(tuple, a.pairs(dim))), sorted(map(tuple, b.pairs(dim))))
    arr = rng.random((4, 6))
    a = compute_persistence(cubical_sublevel(arr))
    b = compute_persistence(cubical_sublevel(arr.T))
    for dim in (0, 1):
        assert as_set(a, dim) == as_set(b, dim)


def test_non_monotone_rejected():
    cx = cubical_sublevel(np.array([[0.0, 1.0], [2.0, 3.0]]))
    vals = cx.values.copy()
    vals[cx.dims == 2] = -1.0
    bad = FilteredComplex(cx.dims, vals, cx.ids, cx.argmax, cx.verts, cx.indptr, cx.indices, cx.vertex_count, 2)
    with pytest.raises(ValueError):
        compute_persistence(bad)


@pytest.mark.skipif(reduce_compiled is None, reason="compiled kernel not built")
@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.booleans())
def test_backends_agree(seed, clearing):
    rng = np.random.default_rng(seed)
    cx = random_complex(rng) if seed % 3 else cubical_sublevel(rng.random((12, 9)))
    a = reduce_python(cx.indptr, cx.indices, cx.dims, clearing)
    b = reduce_compiled(cx.indptr, cx.indices, cx.dims, clearing)
    np.testing.assert_array_equal(a, b)
    c = reduce_python(cx.indptr, cx.indices, cx.dims, not clearing)
    np.testing.assert_array_equal(a, c)


def test_python_backend_diagram(rng):
    cx = cubical_sublevel(rng.random((7, 7)))
    a = compute_persistence(cx)
    b = compute_persistence(cx, backend=reduce_python)
    np.testing.assert_array_equal(a.pairing, b.pairing)


def test_json_round_trip(rng):
    d = compute_persistence(cubical_sublevel(rng.random((4, 4))))
    js = d.to_json()
    assert len(js["pairing"]) == len(js["pairs"])
    e = PersistenceDiagram.from_json(js)
    np.testing.assert_array_equal(e.births, d.births)
    np.testing.assert_array_equal(e.deaths, d.deaths)
    ids = d.complex.ids
    assert js["pairing"][0][0] == ids[d.pairing[0, 0]]


def test_from_pairs_validation():
    with pytest.raises(ValueError):
        PersistenceDiagram.from_pairs([[1.0, 1.0]])
    d = PersistenceDiagram.from_pairs(np.zeros((0, 2)))
    assert len(d) == 0


def test_diagram_betti_half_open():
    d = PersistenceDiagram.from_pairs([[1.0, 2.0]], dim=0)
    assert diagram_betti(d, 1.0, 1.5, 0) == 1
    assert diagram_betti(d, 1.0, 2.0, 0) == 0
    assert diagram_betti(d, 0.5, 1.5, 0) == 0


def test_pure_python_env_switch():
    import os
    import subprocess
    import sys
    env = dict(os.environ, PLLAY_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "import pllay; print(pllay.BACKEND)"], env=env,
                         capture_output=True, text=True, check=True).stdout.strip()
    assert out == "python"
