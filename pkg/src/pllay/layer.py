"""The persistence-landscape topological layer.

A layer holds ``n_h`` structure elements. Each one maps a diagram to a scalar
``g_theta(omega . lambda(t_1..t_m))``, with ``omega = softmax(logits)`` and
``g_theta`` either affine or a Gaussian-like ``exp(-sigma |v - mu|)``. All
elements share one diagram per input.

Gradients w.r.t. the input follow the birth and death cells of every pair to
the vertex that attains their filtration value, and from there through the
DTM (or directly, for the raw-function binding).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .complexes import FilteredComplex, cubical_sublevel, dtm_filtration
from .data import ORBIT_DOMAIN, GridFunction, PointCloud
from .dtm import DtmParams, points_grad_from_field, weights_grad_from_field
from .landscape import ASCENDING, DESCENDING, LandscapeMatrix, LandscapeParams, landscape
from .persistence import PersistenceDiagram, compute_persistence

AFFINE, LOG = "affine", "log"


@dataclass
class GTheta:
    kind: str
    sigma: np.ndarray
    mu: np.ndarray

    def __post_init__(self):
        if self.kind not in (AFFINE, LOG):
            raise ValueError(f"unknown g kind {self.kind!r}")
        self.sigma = np.asarray(self.sigma, dtype=float)
        self.mu = np.asarray(self.mu, dtype=float)
        if self.kind == LOG and not float(self.sigma) > 0:
            raise ValueError("logarithmic sigma must be positive")
        if self.kind == AFFINE and self.sigma.shape != self.mu.shape:
            raise ValueError("affine sigma and mu must have the same length")


def g_eval(g: GTheta, v) -> float:
    v = np.asarray(v, dtype=float)
    if g.kind == AFFINE:
        return float(g.sigma @ (v - g.mu))
    return float(np.exp(-float(g.sigma) * np.linalg.norm(v - g.mu)))


def lipschitz_bound(g: GTheta) -> float:
    """Sup-norm Lipschitz constant of ``g``."""
    if g.kind == AFFINE:
        return float(np.abs(g.sigma).sum())
    return float(g.sigma) * float(np.sqrt(g.mu.shape[0]))


def _g_batch(kind, sigma, mu, v):
    """Values and gradients of all elements at once.

    Returns ``(s, dv, dsigma, dmu, flagged)`` with ``v`` of shape (n_h, m).
    """
    diff = v - mu
    if kind == AFFINE:
        s = (sigma * diff).sum(1)
        return s, sigma.copy(), diff, -sigma, np.zeros(len(s), dtype=bool)
    nrm = np.linalg.norm(diff, axis=1)
    s = np.exp(-sigma * nrm)
    flagged = nrm == 0.0
    safe = np.where(flagged, 1.0, nrm)
    dv = np.where(flagged[:, None], 0.0, -(sigma * s / safe)[:, None] * diff)
    dsig = -nrm * s
    return s, dv, dsig, -dv, flagged


def softmax(z):
    z = np.asarray(z, dtype=float)
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


@dataclass
class Filtration:
    """How an input becomes a filtered cubical complex."""
    kind: str = "dtm-weights"          # dtm-weights | dtm-points | raw
    m0: float = 0.05
    r: float = 2.0
    grid: tuple = (40, 40)
    domain: tuple | None = ORBIT_DOMAIN

    def params(self) -> DtmParams:
        return DtmParams(self.m0, self.r)

    def build(self, x, tie_tol=1e-9) -> FilteredComplex:
        if self.kind == "dtm-weights":
            if not isinstance(x, GridFunction):
                raise TypeError("dtm-weights filtration expects a GridFunction")
            return dtm_filtration(x, self.params(), "weights", tie_tol=tie_tol)
        if self.kind == "dtm-points":
            if not isinstance(x, PointCloud):
                raise TypeError("dtm-points filtration expects a PointCloud")
            return dtm_filtration(x, self.params(), "points", grid=(*self.grid, self.domain), tie_tol=tie_tol)
        if self.kind == "raw":
            arr = x.as_array() if isinstance(x, GridFunction) else np.asarray(x, dtype=float)
            return cubical_sublevel(arr)
        raise ValueError(f"unknown filtration kind {self.kind!r}")

    def to_json(self) -> dict:
        out = {"kind": self.kind}
        if self.kind != "raw":
            out.update(m0=self.m0, r=self.r)
        if self.kind == "dtm-points":
            out.update(grid=list(self.grid), domain=None if self.domain is None else [list(c) for c in self.domain])
        return out

    @classmethod
    def from_json(cls, obj) -> "Filtration":
        obj = dict(obj)
        dom = obj.get("domain", ORBIT_DOMAIN)
        return cls(obj.get("kind", "dtm-weights"), float(obj.get("m0", 0.05)), float(obj.get("r", 2.0)),
                   tuple(obj.get("grid", (40, 40))), None if dom is None else tuple(tuple(c) for c in dom))


@dataclass
class LayerCache:
    """Everything the backward pass needs from one forward pass."""
    x: object
    complex: FilteredComplex
    diagram: PersistenceDiagram
    lm: LandscapeMatrix
    jb: np.ndarray      # (k_max, m, n_pairs) per-landscape derivative w.r.t. births
    jd: np.ndarray
    omega: np.ndarray = None
    v: np.ndarray = None
    out: np.ndarray = None
    g_flags: np.ndarray = None
    flags: dict = field(default_factory=dict)

    @property
    def n_flagged(self) -> int:
        return int(sum(self.flags.values()))


@dataclass
class GradientTape:
    dx: np.ndarray          # (n_h, *input_shape)
    dsigma: np.ndarray
    dmu: np.ndarray
    dlogits: np.ndarray
    n_flagged: int = 0


class PLLayLayer:
    """``n_h`` structure elements sharing a landscape window and a filtration."""

    def __init__(self, n_h: int, landscape_params: LandscapeParams, dim: int = 1, g: str = AFFINE,
                 filtration: Filtration | None = None, seed: int = 0, sigma_scale: float = 1.0,
                 cap_inf: bool = False):
        if n_h < 1:
            raise ValueError("n_h must be >= 1")
        if g not in (AFFINE, LOG):
            raise ValueError(f"unknown g kind {g!r}")
        self.n_h = n_h
        self.lp = landscape_params
        self.dim = dim
        self.g = g
        self.filtration = filtration or Filtration()
        self.cap_inf = cap_inf
        self.sigma_scale = sigma_scale
        self.seed = seed
        m, K = landscape_params.m, landscape_params.k_max
        rng = np.random.default_rng(seed)
        self.logits = np.zeros((n_h, K))
        if g == AFFINE:
            self.sigma = rng.uniform(-1.0 / m, 1.0 / m, size=(n_h, m)) * sigma_scale
            self.mu = np.zeros((n_h, m))
        else:
            self.sigma = np.ones(n_h)
            self.mu = np.full((n_h, m), 0.01)

    # -- parameters -----------------------------------------------------------
    @property
    def omega(self) -> np.ndarray:
        return softmax(self.logits)

    def element(self, i: int) -> GTheta:
        return GTheta(self.g, self.sigma[i], self.mu[i])

    def set_params(self, sigma=None, mu=None, logits=None):
        if sigma is not None:
            self.sigma = np.array(sigma, dtype=float).reshape(self.sigma.shape)
        if mu is not None:
            self.mu = np.array(mu, dtype=float).reshape(self.mu.shape)
        if logits is not None:
            self.logits = np.array(logits, dtype=float).reshape(self.logits.shape)

    def config(self) -> dict:
        return {"n_h": self.n_h, "g": self.g, "k_max": self.lp.k_max, "t_min": self.lp.t_min,
                "t_max": self.lp.t_max, "m": self.lp.m, "dim": self.dim,
                "filtration": self.filtration.to_json(), "seed": self.seed, "sigma_scale": self.sigma_scale}

    @classmethod
    def from_config(cls, cfg) -> "PLLayLayer":
        if isinstance(cfg, str):
            cfg = json.loads(cfg)
        g = cfg.get("g", AFFINE)
        g = LOG if g in ("log", "logarithmic") else g
        lp = LandscapeParams(int(cfg["k_max"]), float(cfg["t_min"]), float(cfg["t_max"]), int(cfg["m"]))
        return cls(int(cfg["n_h"]), lp, int(cfg.get("dim", 1)), g,
                   Filtration.from_json(cfg.get("filtration", {})), int(cfg.get("seed", 0)),
                   float(cfg.get("sigma_scale", 1.0)))

    # -- forward ----------------------------------------------------------------
    def prepare(self, x, tie_tol: float = 1e-9, kink_tol: float = 1e-9) -> LayerCache:
        """Parameter-independent part of the forward pass: input -> landscapes."""
        cx = self.filtration.build(x, tie_tol)
        dg = compute_persistence(cx, keep_pairing=True)
        lm = landscape(dg, self.lp, self.dim, self.cap_inf, kink_tol)
        jb, jd = _basis_jacobians(lm)
        cache = LayerCache(x, cx, dg, lm, jb, jd)
        cache.flags = _input_flags(self, cache, tie_tol)
        return cache

    def landscape_of(self, x, tie_tol: float = 1e-9) -> np.ndarray:
        """Only the (k_max, m) landscape samples of ``x``; no gradient bookkeeping kept."""
        cx = self.filtration.build(x, tie_tol)
        dg = compute_persistence(cx, keep_pairing=False)
        return landscape(dg, self.lp, self.dim, self.cap_inf).values

    def featurize(self, inputs, threads: int = 1) -> np.ndarray:
        """Stacked landscapes (N, k_max, m) for many inputs, optionally over worker processes."""
        inputs = list(inputs)
        if threads > 1 and len(inputs) > 1:
            from concurrent.futures import ProcessPoolExecutor
            with ProcessPoolExecutor(threads) as ex:
                rows = list(ex.map(self.landscape_of, inputs, chunksize=max(1, len(inputs) // (4 * threads))))
        else:
            rows = [self.landscape_of(x) for x in inputs]
        if not rows:
            return np.zeros((0, self.lp.k_max, self.lp.m))
        return np.stack(rows)

    def forward_cached(self, cache: LayerCache) -> np.ndarray:
        omega = self.omega
        v = omega @ cache.lm.values
        s, dv, dsig, dmu, gf = _g_batch(self.g, self.sigma, self.mu, v)
        cache.omega, cache.v, cache.out, cache.g_flags = omega, v, s, gf
        cache._g = (dv, dsig, dmu)
        return s

    def forward(self, x, tie_tol: float = 1e-9, kink_tol: float = 1e-9):
        """Layer output of shape (n_h,) and the cache for :meth:`backward`."""
        cache = self.prepare(x, tie_tol, kink_tol)
        return self.forward_cached(cache), cache

    def forward_diagram(self, d: PersistenceDiagram) -> np.ndarray:
        lm = landscape(d, self.lp, self.dim, self.cap_inf)
        v = self.omega @ lm.values
        return _g_batch(self.g, self.sigma, self.mu, v)[0]

    __call__ = forward_diagram

    # -- backward ---------------------------------------------------------------
    def param_grads(self, cache: LayerCache, grad_out=None):
        """Gradients of ``sum_i grad_out_i * S_i`` w.r.t. sigma, mu and logits."""
        dv, dsig, dmu = cache._g
        go = np.ones(self.n_h) if grad_out is None else np.asarray(grad_out, dtype=float)
        if self.g == AFFINE:
            gs = go[:, None] * dsig
        else:
            gs = go * dsig
        gm = go[:, None] * dmu
        a = cache.lm.values @ (go[:, None] * dv).T     # (K, n_h): dS/domega_k
        a = a.T
        om = cache.omega
        gl = om * (a - (om * a).sum(1, keepdims=True))
        return gs, gm, gl

    def backward(self, cache: LayerCache, grad_out=None, input_grad: bool = True) -> GradientTape:
        """Analytic gradients for one forward pass.

        With ``grad_out=None`` the input gradient is returned per element
        (shape ``(n_h, *input_shape)``); otherwise it is contracted with
        ``grad_out`` to shape ``(1, *input_shape)``.
        """
        gs, gm, gl = self.param_grads(cache, grad_out)
        n_flag = cache.n_flagged + int(np.sum(cache.g_flags))
        dx = self.input_grad(cache, grad_out) if input_grad else None
        return GradientTape(dx, gs, gm, gl, n_flag)

    def input_grad(self, cache: LayerCache, grad_out=None) -> np.ndarray:
        dv = cache._g[0]
        # dS/db_p = sum_k omega_k sum_l dg/dv_l * dlambda_k(t_l)/db_p, likewise for deaths
        if grad_out is None:
            db = np.einsum("ik,il,klp->ip", cache.omega, dv, cache.jb)
            dd = np.einsum("ik,il,klp->ip", cache.omega, dv, cache.jd)
        else:
            dvf = np.asarray(grad_out, dtype=float)[:, None] * dv
            db = np.einsum("ik,il,klp->p", cache.omega, dvf, cache.jb)[None]
            dd = np.einsum("ik,il,klp->p", cache.omega, dvf, cache.jd)[None]
        rows = db.shape[0]
        cx, dg = cache.complex, cache.diagram
        nv = cx.vertex_count
        coeff = np.zeros((rows, nv))
        if dg.pairing is not None and len(dg):
            bpos, dpos = dg.pairing[:, 0], dg.pairing[:, 1]
            bv = cx.argmax[bpos]
            np.add.at(coeff.T, bv, db.T)
            fin = dpos >= 0
            dvtx = cx.argmax[dpos[fin]]
            np.add.at(coeff.T, dvtx, dd[:, fin].T)
        return _route_to_input(self.filtration, cache, coeff)


def _basis_jacobians(lm: LandscapeMatrix):
    K, m = lm.values.shape
    jb = np.zeros((K, m, lm.n_pairs))
    jd = np.zeros((K, m, lm.n_pairs))
    kk, ll = np.nonzero(lm.branch == ASCENDING)
    jb[kk, ll, lm.pair[kk, ll]] = -1.0
    kk, ll = np.nonzero(lm.branch == DESCENDING)
    jd[kk, ll, lm.pair[kk, ll]] = 1.0
    return jb, jd


def _route_to_input(filt: Filtration, cache: LayerCache, coeff: np.ndarray) -> np.ndarray:
    """Contract per-vertex coefficients with d f(vertex) / d input."""
    x = cache.x
    active = np.flatnonzero(np.any(coeff != 0, axis=0))
    if filt.kind == "raw":
        return coeff.reshape((coeff.shape[0],) + (coeff.shape[1:] if isinstance(x, GridFunction) else np.shape(x)))
    field_ = cache.complex.provenance
    if filt.kind == "dtm-weights":
        out = np.zeros((coeff.shape[0], x.values.shape[0]))
        for v in active:
            out += coeff[:, v, None] * weights_grad_from_field(field_, v).grad[None, :]
        return out
    out = np.zeros((coeff.shape[0],) + x.points.shape)
    for v in active:
        out += coeff[:, v, None, None] * points_grad_from_field(field_, v, x.points, x.weights).grad[None]
    return out


def _input_flags(layer: PLLayLayer, cache: LayerCache, tol: float) -> dict:
    """Count the ways the current input sits on a non-differentiable configuration.

    Only pairs that reach the landscape window matter; for those we check the
    DTM cut at the critical vertices, near-ties of vertex values that could
    swap the pairing, and samples sitting on a landscape kink.
    """
    cx, dg, lm = cache.complex, cache.diagram, cache.lm
    used = np.unique(lm.pair[lm.pair >= 0])
    flags = {"dtm": 0, "vertex_tie": 0, "landscape_kink": int(np.sum(lm.near_kink))}
    if used.size == 0 or dg.pairing is None:
        return flags
    bpos, dpos = dg.pairing[used, 0], dg.pairing[used, 1]
    crit = np.unique(np.concatenate([cx.argmax[bpos], cx.argmax[dpos[dpos >= 0]]]))
    f = np.empty(cx.vertex_count)
    f[cx.argmax[cx.dims == 0]] = cx.values[cx.dims == 0]
    field_ = cx.provenance
    if field_ is not None:
        flags["dtm"] = int(np.sum(field_.flags[crit]))
    scale = max(float(np.ptp(f)), 1e-300)
    srt = np.sort(f)
    for v in crit:
        fv = f[v]
        lo = np.searchsorted(srt, fv - tol * scale, side="left")
        hi = np.searchsorted(srt, fv + tol * scale, side="right")
        close = hi - lo - 1
        if close > 0:
            # exact ties at a DTM value of zero are locally constant and harmless
            if field_ is not None and fv == 0.0 and np.all(srt[lo:hi] == 0.0):
                continue
            flags["vertex_tie"] += 1
    return flags


def stack_landscapes(caches) -> np.ndarray:
    """(N, k_max, m) array of the landscape samples of many prepared inputs."""
    return np.stack([c.lm.values for c in caches])


def forward_batch(layer: PLLayLayer, lms: np.ndarray):
    """Outputs (N, n_h) for stacked landscapes plus the context for :func:`backward_batch`."""
    omega = layer.omega
    v = np.einsum("ik,nkm->nim", omega, lms)
    diff = v - layer.mu[None]
    if layer.g == AFFINE:
        s = (layer.sigma[None] * diff).sum(-1)
        nrm = None
    else:
        nrm = np.linalg.norm(diff, axis=-1)
        s = np.exp(-layer.sigma[None] * nrm)
    return s, (lms, omega, diff, nrm, s)


def backward_batch(layer: PLLayLayer, ctx, ds: np.ndarray):
    """Parameter gradients ``(dsigma, dmu, dlogits)`` given dLoss/dS of shape (N, n_h)."""
    lms, omega, diff, nrm, s = ctx
    if layer.g == AFFINE:
        dsig = np.einsum("ni,nim->im", ds, diff)
        dv = ds[..., None] * layer.sigma[None]
    else:
        safe = np.where(nrm == 0.0, 1.0, nrm)
        coef = np.where(nrm == 0.0, 0.0, -layer.sigma[None] * s / safe)
        dv = (ds * coef)[..., None] * diff
        dsig = (ds * (-nrm * s)).sum(0)
    dmu = -dv.sum(0)
    domega = np.einsum("nim,nkm->ik", dv, lms)
    dlog = omega * (domega - (omega * domega).sum(1, keepdims=True))
    return dsig, dmu, dlog
