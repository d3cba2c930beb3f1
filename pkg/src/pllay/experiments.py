"""Verification harnesses and the scaled ORBIT experiment.

Each function returns a plain dict (JSON-ready) so the CLI and the
acceptance tests share one implementation.
"""
from __future__ import annotations

import time
from dataclasses import asdict, dataclass

import numpy as np

from .complexes import cubical_sublevel, dtm_filtration, rips
from .data import ORBIT_DOMAIN, GridFunction, PointCloud, grid_points
from .datasets import ORBIT_RS, add_noise, corrupt, gen_orbit_dataset, synth_digit8
from .dtm import DtmParams, dtm_points, dtm_points_grad, dtm_weights, dtm_weights_grad
from .landscape import LandscapeParams, landscape
from .layer import AFFINE, LOG, Filtration, GTheta, PLLayLayer, g_eval, lipschitz_bound
from .metrics import bottleneck, hausdorff, w2_empirical, wasserstein
from .nn import MlpSpec, train, train_with_pllay
from .persistence import PersistenceDiagram, compute_persistence, diagram_betti, persistent_betti

# Absolute slack for floating-point rounding in inequality checks.
ROUND_TOL = 1e-12


def rel_err(a, b) -> float:
    """``max|a - b| / max|b|`` (0 when both vanish)."""
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    num = float(np.abs(a - b).max()) if a.size else 0.0
    den = float(np.abs(b).max()) if b.size else 0.0
    if den == 0.0:
        return num
    return num / den


# -- persistence oracle ------------------------------------------------------------

def random_complex(rng):
    """A small cubical (grid <= 6x6, often with ties) or Rips (<= 8 points) filtration."""
    if rng.random() < 0.5:
        w, h = int(rng.integers(2, 7)), int(rng.integers(2, 7))
        vals = rng.random((h, w))
        if rng.random() < 0.5:
            vals = np.round(vals * 4) / 4
        return cubical_sublevel(vals)
    return rips(PointCloud(rng.random((int(rng.integers(1, 9)), 2))), 2)


def persistence_oracle_report(n_complexes: int = 200, seed: int = 0, n_thresh: int = 5) -> dict:
    """Diagram interval counts against brute-force persistent Betti numbers."""
    rng = np.random.default_rng(seed)
    mismatches, checks = [], 0
    for i in range(n_complexes):
        cx = random_complex(rng)
        d = compute_persistence(cx, keep_pairing=False)
        lo, hi = float(cx.values.min()), float(cx.values.max())
        span = hi - lo if hi > lo else 1.0
        grid = np.linspace(lo - 0.1 * span, hi + 0.1 * span, n_thresh)
        for a in grid:
            for b in grid[grid >= a]:
                for dim in (0, 1):
                    checks += 1
                    want = persistent_betti(cx, a, b, dim)
                    got = diagram_betti(d, a, b, dim)
                    if want != got:
                        mismatches.append({"complex": i, "a": a, "b": b, "dim": dim, "oracle": want, "diagram": got})
    return {"pass": not mismatches, "complexes": n_complexes, "checks": checks, "mismatches": mismatches}


# -- gradient check ----------------------------------------------------------------

@dataclass
class GradcheckConfig:
    n_inputs: int = 10
    size: int = 8
    kind: str = "dtm-weights"
    m0: float = 0.1
    gs: tuple = (AFFINE, LOG)
    dims: tuple = (0, 1)
    n_h: int = 3
    k_max: int = 3
    m: int = 15
    step: float = 1e-5
    tol: float = 1e-4
    dtm_tol: float = 1e-5
    flag_tol: float = 3e-5           # a few FD steps: kinks closer than this are flagged
    seed: int = 0
    fixture: str = "random"        # random | symmetric
    break_sign: bool = False       # test hook: negate the analytic gradient


def symmetric_fixture(size: int = 8) -> GridFunction:
    """Mirror-symmetric grid whose two loops tie exactly, a non-generic input."""
    g = synth_digit8(size, size)
    return g.with_values(g.values + 0.05)


def _inputs(cfg: GradcheckConfig, rng):
    if cfg.fixture == "symmetric":
        return [symmetric_fixture(cfg.size)]
    out = []
    for _ in range(cfg.n_inputs):
        if cfg.kind == "dtm-points":
            out.append(PointCloud(rng.random((3 * cfg.size, 2))))
        else:
            out.append(GridFunction.from_array(rng.random((cfg.size, cfg.size))))
    return out


def _perturbed(x, idx, h):
    if isinstance(x, PointCloud):
        p = x.points.copy()
        p[idx] += h
        return PointCloud(p, x.weights)
    v = x.values.copy()
    v[idx] += h
    return x.with_values(v)


def _window(filt: Filtration, x, dim: int):
    """Landscape window spanning the finite pairs of ``dim``, slightly inset."""
    probe = PLLayLayer(1, LandscapeParams(1, 0.0, 1.0, 2), dim, filtration=filt)
    d = probe.prepare(x).diagram.restrict(dim, finite=True)
    if len(d) == 0:
        return None
    lo, hi = float(d.births.min()), float(d.deaths.max())
    return lo + 0.0123 * (hi - lo), hi - 0.0177 * (hi - lo)


def full_chain_case(x, filt: Filtration, dim: int, g: str, cfg: GradcheckConfig, rng) -> dict:
    win = _window(filt, x, dim)
    if win is None:
        return {"dim": dim, "g": g, "status": "empty"}
    layer = PLLayLayer(cfg.n_h, LandscapeParams(cfg.k_max, win[0], win[1], cfg.m), dim, g, filt,
                       seed=int(rng.integers(2**31)))
    if g == LOG:
        layer.set_params(mu=rng.random(layer.mu.shape) * 0.1, sigma=1.0 + rng.random(cfg.n_h) * 2)
    layer.set_params(logits=rng.normal(size=layer.logits.shape))
    _, cache = layer.forward(x, tie_tol=cfg.flag_tol, kink_tol=cfg.flag_tol)
    if cache.n_flagged or np.any(cache.g_flags):
        return {"dim": dim, "g": g, "status": "flagged", "flags": cache.flags}
    dx = layer.backward(cache).dx
    if cfg.break_sign:
        dx = -dx
    base = x.points if isinstance(x, PointCloud) else x.values
    fd = np.zeros((cfg.n_h,) + base.shape)
    for idx in np.ndindex(base.shape):
        sp, _ = layer.forward(_perturbed(x, idx, cfg.step))
        sm, _ = layer.forward(_perturbed(x, idx, -cfg.step))
        fd[(slice(None),) + idx] = (sp - sm) / (2 * cfg.step)
    return {"dim": dim, "g": g, "status": "checked", "rel_err": rel_err(dx, fd),
            "max_abs_grad": float(np.abs(fd).max())}


def dtm_gradcheck(n_inputs: int = 10, seed: int = 0, step: float = 1e-6, m0s=(0.1, 0.3)) -> dict:
    """DTM-only gradients against central differences, both bindings."""
    rng = np.random.default_rng(seed)
    worst, checked, flagged = 0.0, 0, 0
    for i in range(n_inputs):
        m0 = m0s[i % len(m0s)]
        prm = DtmParams(m0)
        # points as data
        pts = rng.random((20, 2))
        y = rng.random(2)
        g = dtm_points_grad(PointCloud(pts), y, prm)
        if g.flagged:
            flagged += 1
        else:
            fd = np.zeros_like(pts)
            for idx in np.ndindex(pts.shape):
                p = pts.copy(); p[idx] += step
                a = dtm_points(PointCloud(p), y[None], prm).values[0]
                p[idx] -= 2 * step
                b = dtm_points(PointCloud(p), y[None], prm).values[0]
                fd[idx] = (a - b) / (2 * step)
            worst = max(worst, rel_err(g.grad, fd))
            checked += 1
        # points as weights
        gp = grid_points(6, 6)
        w = rng.random(36) + 0.05
        y = rng.uniform(-1, 1, 2)
        g = dtm_weights_grad(gp, w, y, prm)
        if g.flagged:
            flagged += 1
            continue
        fd = np.zeros(36)
        for j in range(36):
            ww = w.copy(); ww[j] += step
            a = dtm_weights(gp, ww, y[None], prm).values[0]
            ww[j] -= 2 * step
            b = dtm_weights(gp, ww, y[None], prm).values[0]
            fd[j] = (a - b) / (2 * step)
        worst = max(worst, rel_err(g.grad, fd))
        checked += 1
    return {"max_rel_err": worst, "checked": checked, "flagged": flagged}


def gradcheck(cfg: GradcheckConfig | None = None) -> dict:
    """Full-chain analytic input gradients vs central differences."""
    cfg = cfg or GradcheckConfig()
    rng = np.random.default_rng(cfg.seed)
    filt = Filtration(cfg.kind, m0=cfg.m0, grid=(cfg.size, cfg.size),
                      domain=((0.0, 0.0), (1.0, 1.0)) if cfg.kind == "dtm-points" else ORBIT_DOMAIN)
    cases = []
    t0 = time.perf_counter()
    for i, x in enumerate(_inputs(cfg, rng)):
        for dim in cfg.dims:
            for g in cfg.gs:
                c = full_chain_case(x, filt, dim, g, cfg, rng)
                c["input"] = i
                cases.append(c)
    errs = [c["rel_err"] for c in cases if c["status"] == "checked"]
    dtm_rep = dtm_gradcheck(cfg.n_inputs, cfg.seed) if cfg.fixture == "random" else None
    worst = max(errs) if errs else 0.0
    n_flagged = sum(c["status"] == "flagged" for c in cases)
    # an all-flagged run has nothing to violate, but a run that checked nothing at all fails
    ok = bool(errs or n_flagged) and worst <= cfg.tol
    if dtm_rep is not None:
        ok = ok and dtm_rep["max_rel_err"] <= cfg.dtm_tol
    return {"pass": ok, "max_rel_err": worst, "tol": cfg.tol, "checked": len(errs),
            "flagged": n_flagged,
            "empty": sum(c["status"] == "empty" for c in cases),
            "dtm": dtm_rep, "cases": cases, "seconds": time.perf_counter() - t0,
            "config": {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(cfg).items()}}


# -- layer stability ---------------------------------------------------------------

def random_diagram(rng, n: int, lo: float = 0.0, hi: float = 1.0) -> PersistenceDiagram:
    b = rng.uniform(lo, hi, n)
    d = b + rng.uniform(0.01, 0.5, n) * (hi - lo)
    return PersistenceDiagram.from_pairs(np.column_stack([b, d]), dim=1)


def perturb_diagram(d: PersistenceDiagram, rng, scale: float) -> PersistenceDiagram:
    """Jitter every pair, then drop one pair and add a short one at random."""
    pts = d.pairs(finite=True)
    pts = pts + rng.uniform(-scale, scale, pts.shape)
    pts[:, 1] = np.maximum(pts[:, 1], pts[:, 0] + 1e-6)
    if len(pts) > 1 and rng.random() < 0.5:
        pts = np.delete(pts, rng.integers(len(pts)), axis=0)
    if rng.random() < 0.5:
        b = rng.uniform(0, 1)
        pts = np.vstack([pts, [b, b + rng.uniform(0.001, 2 * scale + 0.002)]])
    return PersistenceDiagram.from_pairs(pts, dim=1)


def random_gtheta(rng, m: int) -> GTheta:
    if rng.random() < 0.5:
        return GTheta(AFFINE, rng.uniform(-1, 1, m), rng.uniform(0, 0.2, m))
    return GTheta(LOG, float(rng.uniform(0.1, 5.0)), rng.uniform(0, 0.2, m))


def stability_report(n_trials: int = 100, seed: int = 0, k_max: int = 3, m: int = 25) -> dict:
    """|S(D) - S(D')| <= L_g d_B, landscape sup-gap <= d_B and d_B <= W_1."""
    rng = np.random.default_rng(seed)
    lp = LandscapeParams(k_max, 0.0, 1.5, m)
    ratios = []
    viol = {"layer": 0, "landscape": 0, "metric": 0}
    excluded = 0
    for trial in range(n_trials):
        d1 = random_diagram(rng, int(rng.integers(1, 12)))
        if trial % 10 == 0:
            d2 = d1  # identical pair: 0/0 ratio, excluded
        else:
            d2 = perturb_diagram(d1, rng, float(rng.uniform(0.001, 0.2)))
        db = bottleneck(d1, d2)
        w1 = wasserstein(d1, d2, 1)
        if db > w1 + ROUND_TOL:
            viol["metric"] += 1
        l1, l2 = landscape(d1, lp).values, landscape(d2, lp).values
        if np.abs(l1 - l2).max() > db + ROUND_TOL:
            viol["landscape"] += 1
        omega = rng.dirichlet(np.ones(k_max))
        g = random_gtheta(rng, m)
        ds = abs(g_eval(g, omega @ l1) - g_eval(g, omega @ l2))
        bound = lipschitz_bound(g) * db
        if ds > bound + ROUND_TOL * max(1.0, bound):
            viol["layer"] += 1
        if db == 0.0:
            excluded += 1
            continue
        ratios.append(ds / bound)
    return {"pass": not any(viol.values()), "trials": n_trials, "excluded": excluded,
            "max_ratio": max(ratios) if ratios else 0.0, "violations": viol}


# -- DTM and Rips stability -------------------------------------------------------

def dtm_stability_report(n_pairs: int = 50, seed: int = 0, m0s=(0.1, 0.3), grid: int = 25) -> dict:
    """sup_y |d_P(y) - d_Q(y)| <= m0^(-1/2) W_2(P, Q) for equal-size unit-weight clouds."""
    rng = np.random.default_rng(seed)
    qs = grid_points(grid, grid, ((-0.5, -0.5), (1.5, 1.5)))
    viol, worst = 0, 0.0
    for i in range(n_pairs):
        n = int(rng.integers(5, 61))
        p = rng.random((n, 2))
        q = p + rng.normal(scale=rng.uniform(0.01, 0.3), size=p.shape) if i % 2 else rng.random((n, 2))
        w2 = w2_empirical(p, q)
        for m0 in m0s:
            prm = DtmParams(m0, 2)
            gap = np.abs(dtm_points(PointCloud(p), qs, prm).values - dtm_points(PointCloud(q), qs, prm).values).max()
            bound = w2 / np.sqrt(m0)
            if gap > bound + ROUND_TOL:
                viol += 1
            if bound > 0:
                worst = max(worst, gap / bound)
    return {"pass": viol == 0, "pairs": n_pairs, "violations": viol, "max_ratio": worst}


def mesh_pair(n: int = 120):
    """A unit circle and a slightly squashed, shifted ellipse, finely sampled."""
    t = np.linspace(0, 2 * np.pi, n, endpoint=False)
    a = np.column_stack([np.cos(t), np.sin(t)])
    b = np.column_stack([1.1 * np.cos(t) + 0.05, 0.9 * np.sin(t)])
    return a, b


def rips_stability_report(n_pairs: int = 20, seed: int = 0, sub: int = 24, n_h: int = 4) -> dict:
    """Layer outputs on Rips diagrams of subsamples: |dS| <= 2 L_g (d_H(X, Y) + 2 eps)."""
    rng = np.random.default_rng(seed)
    mx, my = mesh_pair()
    dh = hausdorff(mx, my)
    lp = LandscapeParams(2, 0.0, 1.2, 25)
    viol, worst = 0, 0.0
    for _ in range(n_pairs):
        xs = mx[np.sort(rng.choice(len(mx), sub, replace=False))]
        ys = my[np.sort(rng.choice(len(my), sub, replace=False))]
        eps = max(hausdorff(xs, mx), hausdorff(ys, my))
        dx = compute_persistence(rips(PointCloud(xs), 2), keep_pairing=False)
        dy = compute_persistence(rips(PointCloud(ys), 2), keep_pairing=False)
        lx, ly = landscape(dx, lp, dim=1).values, landscape(dy, lp, dim=1).values
        omega = rng.dirichlet(np.ones(2))
        for _ in range(n_h):
            g = random_gtheta(rng, lp.m)
            ds = abs(g_eval(g, omega @ lx) - g_eval(g, omega @ ly))
            bound = 2 * lipschitz_bound(g) * (dh + 2 * eps)
            if ds > bound + ROUND_TOL:
                viol += 1
            worst = max(worst, ds / bound)
    return {"pass": viol == 0, "pairs": n_pairs, "violations": viol, "max_ratio": worst,
            "mesh_hausdorff": dh}


# -- Wasserstein / bottleneck ratio ------------------------------------------------

def ratio_bound_report(n_pairs: int = 10, seed: int = 0, qs=(1, 2)) -> dict:
    """W_q/d_B >= (1 + (2t/d_B)^q (n_t - 1))^(1/q) on diagrams with a known n_t.

    Each pair is n far-apart, long-lived points moved by L_inf shifts larger
    than 2t, so any t-perturbations still differ in all n points: n_t = n.
    """
    rng = np.random.default_rng(seed)
    viol, rows = 0, []
    for _ in range(n_pairs):
        n = int(rng.integers(2, 9))
        births = np.arange(n) * 10.0
        d1 = np.column_stack([births, births + 5.0])
        shift = rng.uniform(0.1, 0.5, n)
        direction = rng.choice([-1.0, 1.0], size=(n, 2))
        axis = rng.integers(2, size=n)
        delta = np.zeros((n, 2))
        delta[np.arange(n), axis] = shift * direction[np.arange(n), axis]
        other = 1 - axis
        delta[np.arange(n), other] = rng.uniform(-1, 1, n) * shift
        d2 = d1 + delta
        t = 0.999 * shift.min() / 2
        db = bottleneck(d1, d2)
        for q in qs:
            wq = wasserstein(d1, d2, q)
            rhs = (1 + (2 * t / db) ** q * (n - 1)) ** (1.0 / q)
            ok = wq / db >= rhs - ROUND_TOL
            viol += not ok
            rows.append({"n_t": n, "t": t, "q": q, "ratio": wq / db, "bound": rhs})
    return {"pass": viol == 0, "pairs": n_pairs, "violations": viol, "rows": rows}


# -- robustness --------------------------------------------------------------------

def dominant_pair(d: PersistenceDiagram, dim: int = 1) -> np.ndarray:
    p = d.pairs(dim, finite=True)
    if len(p) == 0:
        return np.zeros((0, 2))
    return p[[int(np.argmax(p[:, 1] - p[:, 0]))]]


def robustness_report(n_seeds: int = 20, low: float = 0.05, high: float = 0.25, m0: float = 0.05,
                      seed: int = 0) -> dict:
    """Bottleneck displacement of the dominant loop of the digit-8 fixture under noise."""
    base = synth_digit8()
    prm = DtmParams(m0)
    ref = dominant_pair(compute_persistence(dtm_filtration(base, prm), keep_pairing=False))
    disp = {low: [], high: []}
    for s in range(n_seeds):
        for p in (low, high):
            x = add_noise(corrupt(base, p, seed * 1000 + 2 * s), p, seed * 1000 + 2 * s + 1, max_value=1.0)
            dp = dominant_pair(compute_persistence(dtm_filtration(x, prm), keep_pairing=False))
            disp[p].append(bottleneck(ref, dp))
    med_lo, med_hi = float(np.median(disp[low])), float(np.median(disp[high]))
    return {"pass": med_lo < 0.5 * med_hi, "median_low": med_lo, "median_high": med_hi,
            "low": low, "high": high, "m0": m0, "seeds": n_seeds}


# -- scaled ORBIT ------------------------------------------------------------------

@dataclass
class OrbitConfig:
    per_class: int = 200
    n_points: int = 300
    grid: int = 40
    m0: float = 0.01
    k_max: int = 2
    t_min: float = 0.03
    t_max: float = 0.1
    m: int = 17
    n_h: int = 64
    hidden: int = 32
    dim: int = 1
    epochs: int = 200
    lr: float = 1e-3
    batch_size: int = 16
    train_frac: float = 0.7
    seeds: tuple = (0, 1, 2)
    mode: str = "end-to-end"
    threads: int = 1

    def plan(self) -> dict:
        out = {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(self).items()}
        out["classes"] = list(ORBIT_RS)
        out["clouds_per_seed"] = self.per_class * len(ORBIT_RS)
        return out


def _split(n, frac, seed):
    perm = np.random.default_rng(seed).permutation(n)
    k = int(round(frac * n))
    return perm[:k], perm[k:]


def per_class_accuracy(pred, y, n_classes):
    rows = []
    for c in range(n_classes):
        mask = y == c
        rows.append({"class": c, "count": int(mask.sum()), "correct": int((pred[mask] == c).sum())})
    return rows


def orbit_experiment(cfg: OrbitConfig | None = None, log=None) -> dict:
    """Raw-coordinate MLP vs PLLay+MLP on ORBIT point clouds, one row per seed."""
    cfg = cfg or OrbitConfig()
    lp = LandscapeParams(cfg.k_max, cfg.t_min, cfg.t_max, cfg.m)
    filt = Filtration("dtm-points", m0=cfg.m0, grid=(cfg.grid, cfg.grid), domain=ORBIT_DOMAIN)
    rows, per_class = [], []
    t0 = time.perf_counter()
    for seed in cfg.seeds:
        data = gen_orbit_dataset(cfg.per_class, cfg.n_points, seed)
        y = np.array([lab for _, lab in data])
        raw = np.stack([pc.points.ravel() for pc, _ in data])
        tr, te = _split(len(y), cfg.train_frac, seed)
        spec = MlpSpec([raw.shape[1], cfg.hidden, len(ORBIT_RS)], "adam", cfg.lr, cfg.batch_size, cfg.epochs, seed)
        mlp, raw_log = train(spec, raw[tr], y[tr], (raw[te], y[te]))
        layer = PLLayLayer(cfg.n_h, lp, cfg.dim, AFFINE, filt, seed=seed)
        lms = layer.featurize([pc for pc, _ in data], cfg.threads)
        model, p_log = train_with_pllay(layer, spec, None, y[tr], cfg.mode, test=(None, y[te]),
                                        landscapes=lms[tr], test_landscapes=lms[te])
        pred = model.predict_landscapes(lms[te])
        row = {"seed": seed, "raw_mlp_test_acc": raw_log.last["test_acc"],
               "pllay_mlp_test_acc": float(np.mean(pred == y[te])),
               "raw_mlp_train_acc": raw_log.last["train_acc"], "pllay_mlp_train_acc": p_log.last["train_acc"]}
        rows.append(row)
        for r in per_class_accuracy(pred, y[te], len(ORBIT_RS)):
            per_class.append({"seed": seed, "model": "pllay", **r})
        for r in per_class_accuracy(mlp.predict(raw[te]), y[te], len(ORBIT_RS)):
            per_class.append({"seed": seed, "model": "raw", **r})
        if log is not None:
            log(row)
    raw_acc = [r["raw_mlp_test_acc"] for r in rows]
    pl_acc = [r["pllay_mlp_test_acc"] for r in rows]
    ok = all(0.12 <= a <= 0.30 for a in raw_acc) and min(pl_acc) >= 0.55 and float(np.mean(pl_acc)) >= 0.65
    return {"pass": bool(ok), "rows": rows, "per_class": per_class, "raw_mean": float(np.mean(raw_acc)),
            "pllay_mean": float(np.mean(pl_acc)), "seconds": time.perf_counter() - t0, "plan": cfg.plan()}
