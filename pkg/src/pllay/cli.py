"""Command line interface: ``pllay <subcommand> ...``.

All numbers are written with 17 significant digits. Check commands
(``gradcheck``, ``stability``, ``orbit-exp``) exit with status 1 when the
check fails; any error exits with status 2 and a message on stderr.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from .complexes import cubical_sublevel, dtm_filtration, rips
from .data import ParseError, _read_rows, load_grid, load_point_cloud, save_point_cloud
from .datasets import ORBIT_RS, gen_orbit_dataset
from .dtm import DtmParams
from .experiments import GradcheckConfig, OrbitConfig, gradcheck, orbit_experiment, stability_report
from .landscape import LandscapeParams, landscape
from .layer import PLLayLayer
from .metrics import bottleneck, wasserstein
from .nn import MlpSpec, train
from .persistence import PersistenceDiagram, compute_persistence


class CliError(Exception):
    pass


# -- output -------------------------------------------------------------------------

def fmt(x: float) -> str:
    return format(float(x), ".17g")


def dumps(obj, indent: int | None = None) -> str:
    """JSON text with every float written to 17 significant digits; inf/nan become strings."""
    pad = "" if indent is None else "\n"

    def enc(o, level):
        nl = pad + " " * ((level + 1) * (indent or 0))
        end = pad + " " * (level * (indent or 0))
        if o is None or isinstance(o, (bool, np.bool_)):
            return json.dumps(None if o is None else bool(o))
        if isinstance(o, (int, np.integer)):
            return str(int(o))
        if isinstance(o, (float, np.floating)):
            f = float(o)
            if math.isfinite(f):
                return fmt(f)
            return json.dumps("nan" if math.isnan(f) else ("inf" if f > 0 else "-inf"))
        if isinstance(o, str):
            return json.dumps(o)
        if isinstance(o, np.ndarray):
            o = o.tolist()
        if isinstance(o, dict):
            if not o:
                return "{}"
            items = [nl + json.dumps(str(k)) + ": " + enc(v, level + 1) for k, v in o.items()]
            return "{" + ",".join(items) + end + "}"
        if isinstance(o, (list, tuple)):
            if not o:
                return "[]"
            return "[" + ",".join(nl + enc(v, level + 1) for v in o) + end + "]"
        raise TypeError(f"cannot serialise {type(o).__name__}")

    return enc(obj, 0)


def _write(text: str, out: str | None):
    if out is None or out == "-":
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    else:
        Path(out).write_text(text if text.endswith("\n") else text + "\n")


def _threads(args) -> int:
    if getattr(args, "threads", None):
        return max(1, int(args.threads))
    env = os.environ.get("PLLAY_THREADS")
    return max(1, int(env)) if env else 1


# -- input --------------------------------------------------------------------------

def _domain(vals):
    if vals is None:
        return None
    x0, y0, x1, y1 = vals
    return ((x0, y0), (x1, y1))


def guess_kind(path) -> str:
    """``grid`` or ``cloud`` for a CSV file.

    A ``.json`` sidecar means grid; a header line means cloud; otherwise files
    with at most 3 columns and more rows than columns are clouds.
    """
    p = Path(path)
    if p.with_suffix(".json").exists():
        return "grid"
    rows = _read_rows(p)
    if not rows:
        raise ParseError(f"{path}: empty file")
    first = rows[0][1]
    if not any(_num(c) for c in first):
        return "cloud"
    return "cloud" if len(first) <= 3 and len(rows) > len(first) else "grid"


def _num(s):
    try:
        float(s)
        return True
    except ValueError:
        return False


def _load_input(args):
    path = args.input
    if not Path(path).exists():
        raise CliError(f"no such file: {path}")
    kind = args.kind if args.kind != "auto" else guess_kind(path)
    if kind == "grid":
        return load_grid(path, _domain(args.domain))
    return load_point_cloud(path)


def _complex(args, x):
    filt = args.filtration
    if filt == "raw":
        if not hasattr(x, "width"):
            raise CliError("raw filtration needs a grid input")
        return cubical_sublevel(x)
    if filt == "rips":
        if hasattr(x, "width"):
            raise CliError("rips filtration needs a point-cloud input")
        return rips(x, 2 if args.max_dim is None else args.max_dim)
    prm = DtmParams(args.m0, args.r)
    if hasattr(x, "width"):
        return dtm_filtration(x, prm, "weights")
    w, h = args.grid
    return dtm_filtration(x, prm, "points", grid=(w, h, _domain(args.domain)))


def _load_diagram(path) -> PersistenceDiagram:
    if not Path(path).exists():
        raise CliError(f"no such file: {path}")
    try:
        return PersistenceDiagram.from_json(Path(path).read_text())
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
        raise CliError(f"{path}: not a diagram JSON ({e})") from None


def _landscape_params(args) -> LandscapeParams:
    return LandscapeParams(args.k_max, args.t_min, args.t_max, args.m)


# -- commands -----------------------------------------------------------------------

def cmd_diagram(args):
    x = _load_input(args)
    cx = _complex(args, x)
    d = compute_persistence(cx, keep_pairing=True)
    if args.finite:
        d = d.restrict(None, finite=True)
    out = d.to_json()
    if args.with_provenance and cx.provenance is not None:
        out["dtm"] = cx.provenance.to_json(with_provenance=True)
    _write(dumps(out), args.out)
    return 0


def cmd_landscape(args):
    d = _load_diagram(args.diagram)
    lm = landscape(d, _landscape_params(args), args.dim, args.cap_inf)
    _write(lm.to_csv(), args.out)
    return 0


def cmd_distance(args):
    d1, d2 = _load_diagram(args.d1), _load_diagram(args.d2)
    if args.dim is not None:
        d1, d2 = d1.restrict(args.dim, finite=False), d2.restrict(args.dim, finite=False)
    out = {"bottleneck": bottleneck(d1, d2), "w": {fmt_q(q): wasserstein(d1, d2, q) for q in args.q}}
    _write(dumps(out), args.out)
    return 0


def fmt_q(q: float) -> str:
    return str(int(q)) if float(q).is_integer() else repr(float(q))


def cmd_pllay_forward(args):
    if not Path(args.layer).exists():
        raise CliError(f"no such file: {args.layer}")
    cfg = json.loads(Path(args.layer).read_text())
    layer = PLLayLayer.from_config(cfg)
    if "params" in cfg:
        layer.set_params(**cfg["params"])
    x = _load_input(args)
    s, cache = layer.forward(x)
    out = {"output": s, "flags": cache.flags}
    if args.backward:
        tape = layer.backward(cache)
        out["input_grad"] = tape.dx
    _write(dumps(out), args.out)
    return 0


def cmd_gradcheck(args):
    cfg = GradcheckConfig(n_inputs=args.n_inputs, size=args.size, kind=args.filtration_kind, m0=args.m0,
                          seed=args.seed, fixture=args.fixture, break_sign=args.break_sign, tol=args.tol)
    rep = gradcheck(cfg)
    if not args.verbose:
        rep.pop("cases")
    _write(dumps(rep, indent=1), args.out)
    print(("PASS" if rep["pass"] else "FAIL") + f" max_rel_err={fmt(rep['max_rel_err'])} flagged={rep['flagged']}",
          file=sys.stderr)
    return 0 if rep["pass"] else 1


def cmd_stability(args):
    rep = stability_report(args.trials, args.seed)
    _write(dumps(rep, indent=1), args.out)
    return 0 if rep["pass"] else 1


def cmd_orbit_gen(args):
    out = Path(args.directory)
    out.mkdir(parents=True, exist_ok=True)
    data = gen_orbit_dataset(args.per_class, args.n_points, args.seed)
    manifest = []
    for i, (pc, label) in enumerate(data):
        name = f"orbit_{i:05d}.csv"
        save_point_cloud(pc, out / name)
        manifest.append({"file": name, "label": int(label), "r": ORBIT_RS[label]})
    (out / "labels.json").write_text(dumps({"seed": args.seed, "rs": list(ORBIT_RS), "clouds": manifest}, indent=1))
    return 0


def _orbit_config(args) -> OrbitConfig:
    return OrbitConfig(per_class=args.per_class, n_points=args.n_points, grid=args.grid_size, m0=args.m0,
                       k_max=args.k_max, t_min=args.t_min, t_max=args.t_max, m=args.m, n_h=args.n_h,
                       hidden=args.hidden, dim=args.dim, epochs=args.epochs, lr=args.lr,
                       batch_size=args.batch_size, seeds=tuple(args.seeds), mode=args.mode, threads=_threads(args))


def cmd_orbit_exp(args):
    cfg = _orbit_config(args)
    if args.dry_run:
        _write(dumps(cfg.plan(), indent=1), None)
        return 0
    rep = orbit_experiment(cfg, log=lambda row: print(dumps(row), file=sys.stderr))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["seed", "raw_mlp_test_acc", "pllay_mlp_test_acc", "raw_mlp_train_acc", "pllay_mlp_train_acc"])
    for r in rep["rows"]:
        w.writerow([r["seed"]] + [fmt(r[k]) for k in ("raw_mlp_test_acc", "pllay_mlp_test_acc",
                                                      "raw_mlp_train_acc", "pllay_mlp_train_acc")])
    _write(buf.getvalue(), args.out)
    if args.per_class_out:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["seed", "model", "class", "count", "correct", "accuracy"])
        for r in rep["per_class"]:
            acc = r["correct"] / r["count"] if r["count"] else 0.0
            w.writerow([r["seed"], r["model"], r["class"], r["count"], r["correct"], fmt(acc)])
        Path(args.per_class_out).write_text(buf.getvalue())
    print(("PASS" if rep["pass"] else "FAIL") + f" raw_mean={fmt(rep['raw_mean'])} pllay_mean={fmt(rep['pllay_mean'])}",
          file=sys.stderr)
    return 0 if rep["pass"] else 1


def _read_matrix(path):
    if not Path(path).exists():
        raise CliError(f"no such file: {path}")
    rows = _read_rows(path)
    if rows and not any(_num(c) for c in rows[0][1]):
        rows = rows[1:]
    try:
        return np.array([[float(c) for c in r] for _, r in rows])
    except ValueError as e:
        raise CliError(f"{path}: {e}") from None


def cmd_train(args):
    x = _read_matrix(args.features)
    y = _read_matrix(args.labels).reshape(-1).astype(np.int64)
    if len(x) != len(y):
        raise CliError(f"{len(x)} feature rows but {len(y)} labels")
    n_classes = int(y.max()) + 1
    test = None
    if args.holdout > 0:
        perm = np.random.default_rng(args.seed).permutation(len(y))
        k = len(y) - int(round(args.holdout * len(y)))
        tr, te = perm[:k], perm[k:]
        test = (x[te], y[te])
        x, y = x[tr], y[tr]
    spec = MlpSpec([x.shape[1], *args.hidden, n_classes], args.optimizer, args.lr, args.batch_size, args.epochs,
                   args.seed)
    model, log = train(spec, x, y, test)
    if args.checkpoint:
        Path(args.checkpoint).write_text(dumps(model.to_json()))
    _write(log.to_csv(), args.out)
    return 0


# -- parser -------------------------------------------------------------------------

def _add_input(p):
    p.add_argument("input", help="CSV grid or point cloud")
    p.add_argument("--kind", choices=["auto", "grid", "cloud"], default="auto")
    p.add_argument("--domain", type=float, nargs=4, metavar=("XMIN", "YMIN", "XMAX", "YMAX"), default=None)


def _add_landscape(p, k_max=3, t_min=0.0, t_max=1.0, m=50):
    p.add_argument("--k-max", type=int, default=k_max)
    p.add_argument("--t-min", type=float, default=t_min)
    p.add_argument("--t-max", type=float, default=t_max)
    p.add_argument("--m", type=int, default=m)


def build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(prog="pllay", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--threads", type=int, default=None, help="worker cap (default $PLLAY_THREADS or 1)")
    common.add_argument("--config", default=None, help="JSON file of option defaults; flags override it")
    common.add_argument("-o", "--out", default=None, help="output file (default stdout)")
    sub = top.add_subparsers(dest="command", required=True)

    p = sub.add_parser("diagram", parents=[common], help="persistence diagram of a grid or point cloud")
    _add_input(p)
    p.add_argument("--filtration", choices=["dtm", "raw", "rips"], default="dtm")
    p.add_argument("--m0", type=float, default=0.05)
    p.add_argument("--r", type=float, default=2.0)
    p.add_argument("--grid", type=int, nargs=2, metavar=("W", "H"), default=(40, 40),
                   help="evaluation grid for point clouds")
    p.add_argument("--max-dim", type=int, default=None, help="rips: top simplex dimension (default 2)")
    p.add_argument("--finite", action="store_true", help="drop essential (infinite) classes")
    p.add_argument("--with-provenance", action="store_true", help="include the DTM field and neighbour lists")
    p.set_defaults(func=cmd_diagram)

    p = sub.add_parser("landscape", parents=[common], help="landscape CSV of a diagram JSON")
    p.add_argument("diagram")
    p.add_argument("--dim", type=int, default=None)
    p.add_argument("--cap-inf", action="store_true", help="cap essential classes at t-max instead of dropping")
    _add_landscape(p)
    p.set_defaults(func=cmd_landscape)

    p = sub.add_parser("distance", parents=[common], help="bottleneck and Wasserstein distances")
    p.add_argument("d1")
    p.add_argument("d2")
    p.add_argument("--q", type=float, nargs="+", default=[1.0])
    p.add_argument("--dim", type=int, default=None)
    p.set_defaults(func=cmd_distance)

    p = sub.add_parser("pllay-forward", parents=[common], help="evaluate a layer on one input")
    _add_input(p)
    p.add_argument("--layer", required=True, help="layer config JSON (optionally with a params block)")
    p.add_argument("--backward", action="store_true", help="also report d output / d input")
    p.set_defaults(func=cmd_pllay_forward)

    p = sub.add_parser("gradcheck", parents=[common], help="analytic vs finite-difference gradients")
    p.add_argument("--n-inputs", type=int, default=10)
    p.add_argument("--size", type=int, default=8)
    p.add_argument("--filtration-kind", choices=["dtm-weights", "dtm-points", "raw"], default="dtm-weights")
    p.add_argument("--m0", type=float, default=0.1)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--fixture", choices=["random", "symmetric"], default="random")
    p.add_argument("--break-sign", action="store_true", help=argparse.SUPPRESS)
    p.add_argument("--verbose", action="store_true", help="include per-case rows")
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("stability", parents=[common], help="layer stability against bottleneck distance")
    p.add_argument("--trials", type=int, default=100)
    p.set_defaults(func=cmd_stability)

    p = sub.add_parser("orbit-gen", parents=[common], help="write ORBIT point clouds and a labels manifest")
    p.add_argument("--per-class", type=int, default=200)
    p.add_argument("--n-points", type=int, default=300)
    p.add_argument("directory", help="output directory")
    p.set_defaults(func=cmd_orbit_gen)

    p = sub.add_parser("orbit-exp", parents=[common], help="scaled ORBIT classification experiment")
    d = OrbitConfig()
    p.add_argument("--per-class", type=int, default=d.per_class)
    p.add_argument("--n-points", type=int, default=d.n_points)
    p.add_argument("--grid-size", type=int, default=d.grid)
    p.add_argument("--m0", type=float, default=d.m0)
    _add_landscape(p, d.k_max, d.t_min, d.t_max, d.m)
    p.add_argument("--n-h", type=int, default=d.n_h)
    p.add_argument("--hidden", type=int, default=d.hidden)
    p.add_argument("--dim", type=int, default=d.dim)
    p.add_argument("--epochs", type=int, default=d.epochs)
    p.add_argument("--lr", type=float, default=d.lr)
    p.add_argument("--batch-size", type=int, default=d.batch_size)
    p.add_argument("--seeds", type=int, nargs="+", default=list(d.seeds))
    p.add_argument("--mode", choices=["end-to-end", "frozen-precompute"], default=d.mode)
    p.add_argument("--per-class-out", default=None, help="CSV of per-class test accuracy")
    p.add_argument("--dry-run", action="store_true", help="print the plan and exit")
    p.set_defaults(func=cmd_orbit_exp)

    p = sub.add_parser("train", parents=[common], help="train an MLP on a feature CSV")
    p.add_argument("features")
    p.add_argument("--labels", required=True)
    p.add_argument("--hidden", type=int, nargs="*", default=[32])
    p.add_argument("--optimizer", choices=["adam", "sgd"], default="adam")
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--holdout", type=float, default=0.3)
    p.add_argument("--checkpoint", default=None)
    p.set_defaults(func=cmd_train)
    return top


def parse_args(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        # config values become defaults, so explicit flags still win
        try:
            cfg = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise CliError(f"cannot read config {args.config}: {e}") from None
        sub = parser._subparsers._group_actions[0].choices[args.command]
        cfg = {k.replace("-", "_"): v for k, v in cfg.items()}
        known = {a.dest for a in sub._actions}
        unknown = set(cfg) - known
        if unknown:
            raise CliError(f"unknown config keys: {sorted(unknown)}")
        sub.set_defaults(**cfg)
        args = parser.parse_args(argv)
    return args


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
        return args.func(args)
    except (CliError, ParseError, ValueError, TypeError, OSError, FloatingPointError) as e:
        print(f"pllay: error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
