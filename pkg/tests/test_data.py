import numpy as np
import pytest

from pllay.data import (GridFunction, ParseError, PointCloud, grid_points, grid_vertices, load_grid,
                        load_point_cloud, save_grid, save_point_cloud)


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_cloud_default_weights(tmp_path):
    pc = load_point_cloud(write(tmp_path, "a.csv", "0,0\n1,0\n0,1\n"))
    assert len(pc) == 3 and pc.dim == 2
    np.testing.assert_array_equal(pc.weights, [1, 1, 1])
    np.testing.assert_array_equal(pc.points, [[0, 0], [1, 0], [0, 1]])


def test_cloud_weight_column(tmp_path):
    pc = load_point_cloud(write(tmp_path, "a.csv", "x,y,weight\n0,0,2\n1,1,3\n"))
    assert len(pc) == 2
    np.testing.assert_array_equal(pc.weights, [2, 3])


def test_cloud_malformed_field_names_line(tmp_path):
    with pytest.raises(ParseError, match="line 1"):
        load_point_cloud(write(tmp_path, "a.csv", "0,abc\n"))


@pytest.mark.parametrize("text,msg", [("0,0\n1\n", "line 2"), ("x,weight\n0,1\n1,0\n", "line 3"), ("", "empty")])
def test_cloud_errors(tmp_path, text, msg):
    with pytest.raises(ParseError, match=msg):
        load_point_cloud(write(tmp_path, "a.csv", text))


def test_grid_shape_and_order(tmp_path):
    g = load_grid(write(tmp_path, "g.csv", "0,1\n2,3\n"))
    assert (g.width, g.height) == (2, 2)
    np.testing.assert_array_equal(g.values, [0, 1, 2, 3])
    assert g.domain == ((-1.0, -1.0), (1.0, 1.0))


def test_grid_28(tmp_path, rng):
    arr = rng.random((28, 28))
    p = tmp_path / "g.csv"
    np.savetxt(p, arr, delimiter=",")
    g = load_grid(p)
    assert (g.width, g.height) == (28, 28)


def test_grid_height_one_rejected(tmp_path):
    with pytest.raises(ValueError):
        load_grid(write(tmp_path, "g.csv", "1,2,3,4,5\n"))


def test_grid_errors(tmp_path):
    with pytest.raises(ParseError, match="line 2"):
        load_grid(write(tmp_path, "g.csv", "1,2\n3\n"))
    with pytest.raises(ParseError, match="empty"):
        load_grid(write(tmp_path, "e.csv", ""))


def test_grid_sidecar_domain(tmp_path):
    write(tmp_path, "g.json", '{"domain": [[0, 0], [2, 4]]}')
    g = load_grid(write(tmp_path, "g.csv", "0,1\n2,3\n"))
    assert g.domain == ((0, 0), (2, 4))
    np.testing.assert_allclose(grid_vertices(g)[-1], [2, 4])


def test_grid_vertices_examples():
    g = GridFunction(2, 2, np.zeros(4), ((0, 0), (1, 1)))
    np.testing.assert_array_equal(grid_vertices(g), [[0, 0], [1, 0], [0, 1], [1, 1]])
    g3 = GridFunction(3, 3, np.zeros(9), ((0, 0), (1, 1)))
    np.testing.assert_allclose(grid_vertices(g3)[4], [0.5, 0.5])
    v = grid_points(28, 28)
    np.testing.assert_allclose(np.diff(v[:28, 0]), 2 / 27)
    np.testing.assert_allclose(v[28, 1] - v[0, 1], 2 / 27)


def test_vertex_alignment(rng):
    arr = rng.random((4, 6))
    g = GridFunction.from_array(arr, ((0, 0), (5, 3)))
    v = grid_vertices(g)
    for i in range(g.width * g.height):
        r, c = divmod(i, g.width)
        assert g.values[i] == arr[r, c]
        np.testing.assert_allclose(v[i], [c, r])


def test_invariants():
    with pytest.raises(ValueError):
        GridFunction(2, 2, [0, 1, 2])
    with pytest.raises(ValueError):
        GridFunction(2, 2, [0, 1, 2, np.nan])
    with pytest.raises(ValueError):
        PointCloud([[0.0, 0.0]], [0.0])
    with pytest.raises(ValueError):
        PointCloud(np.zeros((0, 2)))


def test_round_trip_bit_exact(tmp_path, rng):
    g = GridFunction(5, 3, rng.normal(size=15) * 1e3, ((0.1, -2.0), (3.3, 7.0)))
    save_grid(g, tmp_path / "g.csv")
    h = load_grid(tmp_path / "g.csv")
    assert h.domain == g.domain
    np.testing.assert_array_equal(h.values, g.values)
    pc = PointCloud(rng.normal(size=(7, 3)), rng.random(7) + 0.1)
    save_point_cloud(pc, tmp_path / "p.csv")
    q = load_point_cloud(tmp_path / "p.csv")
    np.testing.assert_array_equal(q.points, pc.points)
    np.testing.assert_array_equal(q.weights, pc.weights)


def test_immutable(rng):
    g = GridFunction(2, 2, rng.random(4))
    with pytest.raises(ValueError):
        g.values[0] = 1.0
