"""Acceptance criteria, each run at full size and stated tolerance.

Every test prints one ``PASS``/``FAIL`` line (also repeated in the pytest
terminal summary). Criterion 5 takes several minutes on one core.
"""
import time

import pytest

from conftest import ACCEPTANCE_LINES
from pllay.experiments import (GradcheckConfig, OrbitConfig, dtm_gradcheck, dtm_stability_report, gradcheck,
                               orbit_experiment, persistence_oracle_report, ratio_bound_report,
                               rips_stability_report, robustness_report, stability_report)
from pllay.layer import AFFINE, LOG


def report(n, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    return ok


def test_criterion_1_persistence_oracle():
    t0 = time.perf_counter()
    rep = persistence_oracle_report(n_complexes=200, seed=0, n_thresh=5)
    dt = time.perf_counter() - t0
    ok = not rep["mismatches"] and rep["complexes"] == 200 and dt < 120
    assert report(1, ok, f"{rep['checks']} rank checks, {len(rep['mismatches'])} mismatches, {dt:.1f}s")


def test_criterion_2_gradient_fidelity():
    t0 = time.perf_counter()
    cfg = GradcheckConfig(n_inputs=10, size=8, gs=(AFFINE, LOG), dims=(0, 1), tol=1e-4, dtm_tol=1e-5)
    rep = gradcheck(cfg)
    dtm = dtm_gradcheck(n_inputs=10, seed=0)
    dt = time.perf_counter() - t0
    ok = (rep["pass"] and rep["checked"] > 0 and rep["max_rel_err"] <= 1e-4
          and dtm["checked"] > 0 and dtm["max_rel_err"] <= 1e-5 and dt < 300)
    assert report(2, ok, f"full chain max rel err {rep['max_rel_err']:.3g} over {rep['checked']} cases "
                         f"({rep['flagged']} flagged, {rep['empty']} empty); DTM max rel err "
                         f"{dtm['max_rel_err']:.3g}; {dt:.1f}s")


def test_criterion_3_stability():
    rep = stability_report(n_trials=100, seed=0)
    v = rep["violations"]
    ok = rep["trials"] == 100 and not any(v.values())
    assert report(3, ok, f"violations layer={v['layer']} landscape={v['landscape']} dB<=W1={v['metric']}, "
                         f"max |dS|/(L dB) {rep['max_ratio']:.3g}")


def test_criterion_4_dtm_and_rips_stability():
    a = dtm_stability_report(n_pairs=50, seed=0, m0s=(0.1, 0.3))
    b = rips_stability_report(n_pairs=20, seed=0)
    ok = a["violations"] == 0 and b["violations"] == 0
    assert report(4, ok, f"DTM vs W2 violations {a['violations']} (max ratio {a['max_ratio']:.3g}); "
                         f"Hausdorff form violations {b['violations']} (max ratio {b['max_ratio']:.3g})")


def test_criterion_5_orbit():
    cfg = OrbitConfig()
    assert (cfg.per_class, cfg.n_points, cfg.grid, cfg.m0, cfg.k_max) == (200, 300, 40, 0.01, 2)
    assert (cfg.t_min, cfg.t_max, cfg.m, cfg.n_h, cfg.hidden, cfg.batch_size) == (0.03, 0.1, 17, 64, 32, 16)
    assert cfg.train_frac == 0.7 and len(cfg.seeds) == 3
    t0 = time.perf_counter()
    rep = orbit_experiment(cfg)
    dt = time.perf_counter() - t0
    raw = [r["raw_mlp_test_acc"] for r in rep["rows"]]
    pl = [r["pllay_mlp_test_acc"] for r in rep["rows"]]
    ok = (all(0.12 <= a <= 0.30 for a in raw) and min(pl) >= 0.55 and sum(pl) / len(pl) >= 0.65
          and dt < 1800)
    assert report(5, ok, "raw " + ", ".join(f"{a:.3f}" for a in raw) + "; PLLay " +
                  ", ".join(f"{a:.3f}" for a in pl) + f" (mean {sum(pl) / len(pl):.3f}); {dt:.0f}s")


def test_criterion_6_robustness():
    rep = robustness_report(n_seeds=20, low=0.05, high=0.25)
    ok = rep["median_low"] < 0.5 * rep["median_high"]
    assert report(6, ok, f"median displacement 5% {rep['median_low']:.4f} vs 25% {rep['median_high']:.4f}")


def test_criterion_7_ratio_bound():
    rep = ratio_bound_report(n_pairs=10, seed=0, qs=(1, 2))
    assert report(7, rep["violations"] == 0 and rep["pairs"] == 10,
                  f"{rep['violations']} violations over {rep['pairs']} pairs x q in {{1, 2}}")
