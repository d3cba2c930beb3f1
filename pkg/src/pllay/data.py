"""Grid functions and weighted point clouds, plus their CSV/JSON ingestion.

Vertex order is row-major everywhere: index ``i = row * width + col`` with
``x`` growing along columns and ``y`` along rows.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

IMAGE_DOMAIN = ((-1.0, -1.0), (1.0, 1.0))
ORBIT_DOMAIN = ((0.0125, 0.0125), (0.9875, 0.9875))


class ParseError(ValueError):
    """Malformed input file; the message names the offending line."""


def _freeze(a):
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class GridFunction:
    width: int
    height: int
    values: np.ndarray
    domain: tuple = IMAGE_DOMAIN

    def __post_init__(self):
        vals = np.array(self.values, dtype=float).ravel()
        if self.width < 2 or self.height < 2:
            raise ValueError(f"grid must be at least 2x2, got {self.width}x{self.height}")
        if vals.size != self.width * self.height:
            raise ValueError(f"expected {self.width * self.height} values, got {vals.size}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("grid values must be finite")
        (x0, y0), (x1, y1) = self.domain
        if not (x1 > x0 and y1 > y0):
            raise ValueError(f"degenerate domain {self.domain}")
        object.__setattr__(self, "values", _freeze(vals))
        object.__setattr__(self, "domain", ((float(x0), float(y0)), (float(x1), float(y1))))

    @classmethod
    def from_array(cls, arr, domain=IMAGE_DOMAIN) -> "GridFunction":
        arr = np.asarray(arr, dtype=float)
        if arr.ndim != 2:
            raise ValueError("expected a 2-D array (height x width)")
        return cls(arr.shape[1], arr.shape[0], arr.ravel(), domain)

    def as_array(self) -> np.ndarray:
        return self.values.reshape(self.height, self.width)

    def with_values(self, values) -> "GridFunction":
        return GridFunction(self.width, self.height, values, self.domain)


@dataclass(frozen=True)
class PointCloud:
    points: np.ndarray
    weights: np.ndarray = field(default=None)

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise ValueError("a point cloud needs at least one point of dimension >= 1")
        if self.weights is None:
            w = np.ones(pts.shape[0])
        else:
            w = np.array(self.weights, dtype=float).ravel()
        if w.shape[0] != pts.shape[0]:
            raise ValueError("one weight per point is required")
        if not np.all(w > 0):
            raise ValueError("weights must be positive")
        if not (np.all(np.isfinite(pts)) and np.all(np.isfinite(w))):
            raise ValueError("points and weights must be finite")
        object.__setattr__(self, "points", _freeze(pts))
        object.__setattr__(self, "weights", _freeze(w))

    def __len__(self):
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]


def grid_vertices(g: GridFunction) -> np.ndarray:
    """Coordinates of the grid vertices, aligned with ``g.values``."""
    return grid_points(g.width, g.height, g.domain)


def grid_points(width: int, height: int, domain=IMAGE_DOMAIN) -> np.ndarray:
    (x0, y0), (x1, y1) = domain
    xs = np.linspace(x0, x1, width)
    ys = np.linspace(y0, y1, height)
    gx, gy = np.meshgrid(xs, ys)
    return np.column_stack([gx.ravel(), gy.ravel()])


def _is_number(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def _read_rows(path):
    with open(path, newline="") as fh:
        return [(i + 1, [c.strip() for c in row]) for i, row in enumerate(csv.reader(fh)) if row and any(c.strip() for c in row)]


def load_point_cloud(path, format: str = "csv") -> PointCloud:
    """Read a point cloud from CSV.

    A first line made only of non-numeric fields is a header; a header whose
    last field is ``weight`` declares the last column as point weights.
    """
    if format != "csv":
        raise ValueError(f"unsupported format {format!r}")
    rows = _read_rows(path)
    if not rows:
        raise ParseError(f"{path}: empty file")
    has_weight = False
    if not any(_is_number(c) for c in rows[0][1]):
        has_weight = rows[0][1][-1].lower() == "weight"
        rows = rows[1:]
    if not rows:
        raise ParseError(f"{path}: no data rows")
    width = len(rows[0][1])
    data = []
    for lineno, row in rows:
        if len(row) != width:
            raise ParseError(f"{path}: line {lineno}: expected {width} fields, got {len(row)}")
        try:
            data.append([float(c) for c in row])
        except ValueError:
            raise ParseError(f"{path}: line {lineno}: non-numeric field") from None
        if has_weight and not data[-1][-1] > 0:
            raise ParseError(f"{path}: line {lineno}: weight must be positive")
    arr = np.array(data)
    if has_weight:
        if arr.shape[1] < 2:
            raise ParseError(f"{path}: weight column without coordinates")
        return PointCloud(arr[:, :-1], arr[:, -1])
    return PointCloud(arr)


def _sidecar(path) -> Path:
    return Path(path).with_suffix(".json")


def load_grid(path, domain=None) -> GridFunction:
    """Read a height x width CSV of reals.

    The domain comes from ``domain`` if given, else from a ``.json`` sidecar
    next to the file, else defaults to [-1, 1]^2.
    """
    rows = _read_rows(path)
    if not rows:
        raise ParseError(f"{path}: empty file")
    width = len(rows[0][1])
    vals = []
    for lineno, row in rows:
        if len(row) != width:
            raise ParseError(f"{path}: line {lineno}: expected {width} fields, got {len(row)}")
        try:
            vals.append([float(c) for c in row])
        except ValueError:
            raise ParseError(f"{path}: line {lineno}: non-numeric field") from None
    if domain is None:
        side = _sidecar(path)
        if side.exists():
            domain = tuple(tuple(c) for c in json.loads(side.read_text())["domain"])
        else:
            domain = IMAGE_DOMAIN
    return GridFunction.from_array(np.array(vals), domain)


def save_grid(g: GridFunction, path, sidecar: bool = True) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        for row in g.as_array():
            w.writerow([repr(float(v)) for v in row])
    if sidecar:
        _sidecar(path).write_text(json.dumps({"domain": [list(g.domain[0]), list(g.domain[1])]}))


def save_point_cloud(pc: PointCloud, path, with_weights: bool | None = None) -> None:
    if with_weights is None:
        with_weights = not np.all(pc.weights == 1.0)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        if with_weights:
            w.writerow([f"x{i}" for i in range(pc.dim)] + ["weight"])
        for p, wt in zip(pc.points, pc.weights):
            row = [repr(float(v)) for v in p]
            if with_weights:
                row.append(repr(float(wt)))
            w.writerow(row)
