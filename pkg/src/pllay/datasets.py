"""Synthetic inputs: ORBIT point clouds, a digit-8 grid fixture, and the
corruption / noise processes applied to grids and clouds."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import IMAGE_DOMAIN, GridFunction, PointCloud
from .rng import XorShift64Star, derive_seed

ORBIT_RS = (2.5, 3.5, 4.0, 4.1, 4.3)


@dataclass(frozen=True)
class OrbitSpec:
    r: float
    n_points: int = 1000
    seed: int = 0

    def __post_init__(self):
        if self.n_points < 1:
            raise ValueError("n_points must be >= 1")


def orbit(spec: OrbitSpec, x1: float, y1: float) -> PointCloud:
    """Iterate the linked twist map; the initial point is the first of the cloud."""
    if not (0.0 <= x1 <= 1.0 and 0.0 <= y1 <= 1.0):
        raise ValueError("initial point must lie in [0, 1]^2")
    r = spec.r
    pts = np.empty((spec.n_points, 2))
    x, y = float(x1) % 1.0, float(y1) % 1.0
    for i in range(spec.n_points):
        pts[i] = x, y
        x = (x + r * y * (1.0 - y)) % 1.0
        y = (y + r * x * (1.0 - x)) % 1.0
    return PointCloud(pts)


def random_orbit(spec: OrbitSpec) -> PointCloud:
    g = XorShift64Star(spec.seed)
    return orbit(spec, g.random(), g.random())


def gen_orbit_dataset(per_class: int, n_points: int, seed: int):
    """Balanced labelled list ``[(cloud, label), ...]`` with label = index into ``ORBIT_RS``.

    Item ``i`` of class ``c`` draws its initial point from
    ``derive_seed(seed, c, i)``.
    """
    out = []
    for c, r in enumerate(ORBIT_RS):
        for i in range(per_class):
            out.append((random_orbit(OrbitSpec(r, n_points, derive_seed(seed, c, i))), c))
    return out


def corrupt(x, prob: float, seed: int):
    """Zero each pixel (grid) or drop each point (cloud) independently with ``prob``."""
    if not 0.0 <= prob <= 1.0:
        raise ValueError("prob must lie in [0, 1]")
    g = XorShift64Star(seed)
    if isinstance(x, GridFunction):
        u = g.random_array(x.values.size)
        return x.with_values(np.where(u < prob, 0.0, x.values))
    if isinstance(x, PointCloud):
        keep = g.random_array(len(x)) >= prob
        if not keep.any():
            raise ValueError("corruption removed every point")
        return PointCloud(x.points[keep], x.weights[keep])
    raise TypeError(f"unsupported input {type(x).__name__}")


def add_noise(x, prob: float, seed: int, max_value: float | None = None):
    """Add uniform noise.

    Grid: each pixel, with probability ``prob``, gets ``U(0, max_value)``
    added and is clamped to ``max_value`` (default: the grid maximum).
    Cloud: ``ceil(prob * n)`` uniform points over the bounding box are appended.
    """
    if not 0.0 <= prob <= 1.0:
        raise ValueError("prob must lie in [0, 1]")
    g = XorShift64Star(seed)
    if isinstance(x, GridFunction):
        top = float(x.values.max()) if max_value is None else float(max_value)
        if top <= 0:
            top = 1.0
        hit = g.random_array(x.values.size) < prob
        amount = g.random_array(x.values.size) * top
        return x.with_values(np.minimum(np.where(hit, x.values + amount, x.values), top))
    if isinstance(x, PointCloud):
        k = math.ceil(prob * len(x) - 1e-12)
        if k == 0:
            return x
        lo, hi = x.points.min(axis=0), x.points.max(axis=0)
        extra = lo + (hi - lo) * g.random_array(k * x.dim).reshape(k, x.dim)
        return PointCloud(np.vstack([x.points, extra]), np.concatenate([x.weights, np.ones(k)]))
    raise TypeError(f"unsupported input {type(x).__name__}")


def synth_digit8(width: int = 28, height: int = 28, domain=IMAGE_DOMAIN) -> GridFunction:
    """Two vertically stacked tangent rings rasterised as a soft [0, 1] mask."""
    (x0, y0), (x1, y1) = domain
    # centred index coordinates keep the mask exactly mirror-symmetric
    cols, rows = np.meshgrid(np.arange(width), np.arange(height))
    u = np.abs(cols - (width - 1) / 2.0).ravel() * (x1 - x0) / (width - 1)
    v = (rows - (height - 1) / 2.0).ravel() * (y1 - y0) / (height - 1)
    span = min(x1 - x0, y1 - y0)
    radius = 0.2 * span
    half = 0.06 * span
    vals = np.zeros(width * height)
    for sign in (-1.0, 1.0):
        d = np.hypot(u, v - sign * radius)
        vals = np.maximum(vals, np.clip(1.0 - np.abs(d - radius) / half, 0.0, 1.0))
    return GridFunction(width, height, vals, domain)
