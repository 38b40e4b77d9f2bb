"""Command-line front end.

Every subcommand takes its parameters from flags, from a JSON ``--config``
file with the same keys (flag names with dashes turned into underscores), or
both; flags win. ``DRFD_SEED`` overrides every seed. Exit codes: 0 success,
2 usage or I/O error, 3 solver failure or infeasible design, 4 internal
invariant violation.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys

import numpy as np

from . import bounds, design as dsg, sysmodel, verify
from .ambiguity import AmbiguitySet, SupportSet, check_alpha, from_samples
from .conic import dump_problems
from .errors import DesignFailed, DrfdError, InvalidConfig, InvalidInput, InvariantViolation
from .io import dumps, read_dataset_csv, read_json, read_matrix_csv, write_dataset_csv, write_json
from .svg import write_line_chart

logger = logging.getLogger("drfd")

SCHEMES = {"dr-u": "DR-U", "dr-u-a": "DR-U-a", "dr-b": "DR-B", "dr-b-a": "DR-B-a"}
ALL_SCHEMES = list(SCHEMES)

_AMBIGUITY = {"ambiguity": None, "S0": None, "gamma2": 1.0, "alpha": "inf", "support": None}

DEFAULTS = {
    "bound": {
        **_AMBIGUITY,
        "M": None,
        "tau0": None,
        "method": "auto",
        "sweep": None,
        "alphas": "1:1024",
        "out": None,
        "svg": None,
    },
    "design": {
        **_AMBIGUITY,
        "W": None,
        "V": None,
        "epsilon": 0.05,
        "scheme": ["dr-u-a"],
        "metric": ["rho1"],
        "grid": dsg.DEFAULT_GRID,
        "sweep": None,
        "epsilons": "0.01,0.02,0.05,0.1,0.2",
        "out": None,
        "svg": None,
    },
    "threshold": {
        **_AMBIGUITY,
        "M": None,
        "P": None,
        "W": None,
        "epsilon": 0.05,
        "tau0": None,
        "out": None,
    },
    "simulate": {
        **{k: v for k, v in sysmodel.DEFAULT_CONFIG.items()},
        "out_dir": ".",
    },
    "eval": {
        "train": None,
        "test": None,
        "model": None,
        "epsilon": 0.05,
        "alpha": None,
        "inflate": 1.2,
        "confidence": 0.95,
        "bootstrap": 1000,
        "seed": 0,
        "metric": "rho1",
        "scheme": ALL_SCHEMES,
        "grid": dsg.DEFAULT_GRID,
        "out": None,
    },
    "sweep": {
        "train": None,
        "model": None,
        "seed": 0,
        "alpha": None,
        "inflate": 1.2,
        "confidence": 0.95,
        "bootstrap": 1000,
        "epsilons": "0.01,0.02,0.05,0.1,0.2",
        "metric": ["rho1", "rho2"],
        "grid": dsg.DEFAULT_GRID,
        "out": None,
        "svg": None,
    },
}


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _ambiguity_flags(p):
    p.add_argument("--ambiguity", help="ambiguity set JSON (S0, gamma2, alpha, support)")
    p.add_argument("--S0", help="second-moment matrix CSV")
    p.add_argument("--gamma2", type=float, help="moment inflation (default 1)")
    p.add_argument("--alpha", help="unimodality index, a positive number or 'inf' (default inf)")
    p.add_argument("--support", help="support JSON: list of {a, Theta} ellipsoids")


def build_parser():
    top = argparse.ArgumentParser(prog="drfd", description="Distributionally robust fault detection.")
    top.add_argument("--config", help="JSON file with parameters for the subcommand")
    top.add_argument("-v", "--verbose", action="store_true")
    top.add_argument("--dump-sdp", dest="dump_sdp", metavar="PATH", help="write every SDP solved to PATH as text")
    sub = top.add_subparsers(dest="command", required=True)

    def command(name, help_):
        return sub.add_parser(name, help=help_, argument_default=argparse.SUPPRESS)

    p = command("bound", "worst-case false-alarm bound of an ellipsoidal acceptance region")
    _ambiguity_flags(p)
    p.add_argument("--M", help="region matrix CSV (alarm when xi'M xi > 1)")
    p.add_argument("--tau0", type=float, help="linearization radius for tau0-based methods")
    p.add_argument("--method", choices=["auto", "gauss", "chebyshev", "gauss-tau", "bounded-gauss", "bounded-chebyshev"])
    p.add_argument("--sweep", choices=["alpha"], help="tabulate c_alpha (and the bound) over alphas")
    p.add_argument("--alphas", help="'a:b' doubling from a to b, or a comma list")
    p.add_argument("--out", help="output file (stdout if omitted)")
    p.add_argument("--svg", help="SVG chart of the sweep")

    p = command("design", "residual-generator design with a certified false-alarm rate")
    _ambiguity_flags(p)
    p.add_argument("--W", help="disturbance map CSV")
    p.add_argument("--V", help="fault map CSV")
    p.add_argument("--epsilon", type=float)
    p.add_argument("--scheme", nargs="+", choices=ALL_SCHEMES)
    p.add_argument("--metric", nargs="+", choices=list(dsg.METRICS))
    p.add_argument("--grid", type=int, help="number of tau0 grid points")
    p.add_argument("--sweep", choices=["epsilon"], help="objective-vs-epsilon table for all applicable schemes")
    p.add_argument("--epsilons", help="comma list for --sweep epsilon")
    p.add_argument("--out")
    p.add_argument("--svg")

    p = command("threshold", "safe alarm threshold for a given index")
    _ambiguity_flags(p)
    p.add_argument("--M", help="index matrix CSV (statistic xi'M xi)")
    p.add_argument("--P", help="residual weighting CSV; with --W gives M = W'P'PW")
    p.add_argument("--W")
    p.add_argument("--epsilon", type=float)
    p.add_argument("--tau0", type=float)
    p.add_argument("--out")

    p = command("simulate", "generate the synthetic three-tank benchmark")
    p.add_argument("--seed", type=int)
    p.add_argument("--N-train", dest="N_train", type=int)
    p.add_argument("--N-test", dest="N_test", type=int)
    p.add_argument("--fault-onset", dest="fault_onset", type=int)
    p.add_argument("--fault-magnitude", dest="fault_magnitude", type=float)
    p.add_argument("--disturbance-family", dest="disturbance_family", choices=list(sysmodel.FAMILIES))
    p.add_argument("--s", type=int, help="parity order")
    p.add_argument("--n-r", dest="n_r", type=int, help="reduced residual dimension")
    p.add_argument("--order", choices=list(sysmodel.ORDERINGS))
    p.add_argument("--dt", type=float)
    p.add_argument("--out-dir", dest="out_dir")

    for name, help_ in (("eval", "FAR/FDR table of all schemes on a labelled dataset"),
                        ("sweep", "objective-vs-epsilon sweep on benchmark data")):
        p = command(name, help_)
        p.add_argument("--train", help="fault-free training dataset CSV")
        p.add_argument("--model", help="model JSON written by 'simulate'")
        if name == "eval":
            p.add_argument("--test", help="labelled test dataset CSV")
            p.add_argument("--epsilon", type=float)
            p.add_argument("--metric", choices=list(dsg.METRICS))
            p.add_argument("--scheme", nargs="+", choices=ALL_SCHEMES)
        else:
            p.add_argument("--epsilons")
            p.add_argument("--metric", nargs="+", choices=list(dsg.METRICS))
            p.add_argument("--svg")
        p.add_argument("--seed", type=int, help="bootstrap seed (and benchmark seed when generating)")
        p.add_argument("--alpha", help="unimodality index (default: residual dimension)")
        p.add_argument("--inflate", type=float, help="box support inflation")
        p.add_argument("--confidence", type=float)
        p.add_argument("--bootstrap", type=int, help="bootstrap resamples")
        p.add_argument("--grid", type=int)
        p.add_argument("--out")
    return top


def resolve(args):
    """Merge defaults, the config file and explicit flags; reject unknown keys."""
    cmd = args.command
    given = {k: v for k, v in vars(args).items() if k not in ("command", "config", "verbose", "dump_sdp")}
    cfg = {}
    if getattr(args, "config", None):
        cfg = read_json(args.config)
        if not isinstance(cfg, dict):
            raise InvalidConfig("config file must hold a JSON object")
    unknown = set(cfg) - set(DEFAULTS[cmd])
    if unknown:
        raise InvalidConfig(f"unknown keys for '{cmd}': {sorted(unknown)}")
    out = dict(DEFAULTS[cmd])
    out.update(cfg)
    out.update(given)
    if "seed" in out and os.environ.get("DRFD_SEED"):
        try:
            out["seed"] = int(os.environ["DRFD_SEED"])
        except ValueError:
            raise InvalidConfig("DRFD_SEED must be an integer") from None
    return out


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def _need(cfg, key):
    if cfg.get(key) is None:
        raise UsageError(f"missing required parameter '{key}'")
    return cfg[key]


def _ambiguity(cfg):
    if cfg.get("ambiguity"):
        amb = AmbiguitySet.from_dict(read_json(cfg["ambiguity"]))
        changes = {}
        if cfg.get("support"):
            changes["support"] = SupportSet.from_list(read_json(cfg["support"]))
        return amb.replace(**changes) if changes else amb
    S0 = read_matrix_csv(_need(cfg, "S0"))
    support = SupportSet.from_list(read_json(cfg["support"])) if cfg.get("support") else SupportSet()
    return AmbiguitySet(S0=S0, gamma2=float(cfg["gamma2"]), alpha=check_alpha(cfg["alpha"]), support=support)


def parse_alphas(text):
    """``"a:b"`` doubles from ``a`` up to ``b``; otherwise a comma list."""
    text = str(text).strip()
    if ":" in text:
        a, b = (float(t) for t in text.split(":", 1))
        if not (0 < a <= b):
            raise UsageError("alpha range must satisfy 0 < a <= b")
        out = []
        v = a
        while v <= b * (1 + 1e-12):
            out.append(v)
            v *= 2.0
        return out
    return [float(t) for t in text.split(",") if t.strip()]


def _floats(text):
    if isinstance(text, (list, tuple)):
        return [float(t) for t in text]
    return [float(t) for t in str(text).split(",") if t.strip()]


def _listify(v):
    return list(v) if isinstance(v, (list, tuple)) else [v]


def _emit(text, path):
    if path:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow(["" if v is None else (repr(float(v)) if isinstance(v, (float, np.floating)) else v) for v in r])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def _bound_value(M, amb, method, tau0):
    if method == "auto":
        if amb.bounded:
            method = "bounded-gauss" if amb.unimodal else "bounded-chebyshev"
        else:
            method = "gauss" if amb.unimodal else "chebyshev"
    if method == "gauss":
        return bounds.gauss_bound(M, amb)
    if method == "chebyshev":
        return bounds.chebyshev_bound(M, amb)
    if method == "gauss-tau":
        if tau0 is None:
            raise UsageError("gauss-tau needs --tau0")
        return bounds.gauss_bound_tau(M, amb, tau0)
    if method == "bounded-gauss":
        return bounds.bounded_gauss_bound(M, amb, tau0=tau0)
    if method == "bounded-chebyshev":
        return bounds.bounded_chebyshev_bound(M, amb)
    raise UsageError(f"unknown method {method!r}")


def cmd_bound(cfg):
    if cfg.get("sweep") == "alpha":
        alphas = parse_alphas(cfg["alphas"])
        have_M = cfg.get("M") is not None
        if have_M:
            M = read_matrix_csv(cfg["M"])
            amb = _ambiguity(cfg)
        rows = []
        for a in alphas:
            val = None
            if have_M:
                val = _bound_value(M, amb.replace(alpha=a), cfg["method"], cfg.get("tau0")).value
            rows.append((a, bounds.improvement_factor(a), val))
        _emit(_csv_text(["alpha", "c_alpha", "bound"], rows), cfg.get("out"))
        if cfg.get("svg"):
            series = {"c_alpha": [r[1] for r in rows]}
            if have_M:
                series["bound"] = [r[2] for r in rows]
            write_line_chart(cfg["svg"], alphas, series, title="Improvement factor", xlabel="alpha", logx=True)
        return 0
    M = read_matrix_csv(_need(cfg, "M"))
    amb = _ambiguity(cfg)
    res = _bound_value(M, amb, cfg["method"], cfg.get("tau0"))
    _emit(dumps(res.to_dict()), cfg.get("out"))
    return 0


def _schemes_for(amb):
    out = ["dr-u"]
    if amb.unimodal:
        out.append("dr-u-a")
    if amb.bounded:
        out.append("dr-b")
        if amb.unimodal:
            out.append("dr-b-a")
    return out


def _sweep_rows(W, V, amb, epsilons, metrics, schemes, grid):
    rows = []
    for metric in metrics:
        for eps in epsilons:
            row = [metric, eps]
            for sc in schemes:
                kw = {"n_grid": grid} if sc == "dr-b-a" else {}
                row.append(dsg.design_for_scheme(W, V, amb, eps, SCHEMES[sc], metric, **kw).objective)
            rows.append(row)
    return rows


def _write_sweep(cfg, schemes, rows):
    header = ["metric", "epsilon"] + [SCHEMES[s] for s in schemes]
    _emit(_csv_text(header, rows), cfg.get("out"))
    if cfg.get("svg"):
        base = cfg["svg"]
        metrics = sorted({r[0] for r in rows})
        for metric in metrics:
            sel = [r for r in rows if r[0] == metric]
            path = base if len(metrics) == 1 else base.replace(".svg", "") + f"-{metric}.svg"
            series = {SCHEMES[s]: [r[2 + k] for r in sel] for k, s in enumerate(schemes)}
            write_line_chart(path, [r[1] for r in sel], series, title=f"Optimal {metric}", xlabel="epsilon", logx=True)


def cmd_design(cfg):
    W = read_matrix_csv(_need(cfg, "W"))
    V = read_matrix_csv(_need(cfg, "V"))
    amb = _ambiguity(cfg)
    metrics = _listify(cfg["metric"])
    if cfg.get("sweep") == "epsilon":
        schemes = _schemes_for(amb)
        rows = _sweep_rows(W, V, amb, _floats(cfg["epsilons"]), metrics, schemes, int(cfg["grid"]))
        _write_sweep(cfg, schemes, rows)
        return 0
    results = []
    for sc in _listify(cfg["scheme"]):
        if sc not in SCHEMES:
            raise UsageError(f"unknown scheme {sc!r}; choose from {ALL_SCHEMES}")
        for metric in metrics:
            kw = {"n_grid": int(cfg["grid"])} if sc == "dr-b-a" else {}
            results.append(dsg.design_for_scheme(W, V, amb, float(cfg["epsilon"]), SCHEMES[sc], metric, **kw).to_dict())
    _emit(dumps(results), cfg.get("out"))
    return 0


def cmd_threshold(cfg):
    amb = _ambiguity(cfg)
    if cfg.get("M") is not None:
        M = read_matrix_csv(cfg["M"])
    else:
        P = read_matrix_csv(_need(cfg, "P"))
        W = read_matrix_csv(_need(cfg, "W"))
        M = W.T @ P.T @ P @ W
    J, cert = dsg.safe_threshold(M, amb, float(cfg["epsilon"]), tau0=cfg.get("tau0"))
    _emit(dumps({"J_th": J, "epsilon": float(cfg["epsilon"]), "certificate": cert.to_dict()}), cfg.get("out"))
    return 0


def model_to_dict(bench):
    sysm, model = bench["system"], bench["model"]
    return {
        "W": model.W,
        "V": model.V,
        "N": model.N,
        "s": model.s,
        "n_r": model.n_r,
        "info": model.info,
        "system": {k: getattr(sysm, k) for k in ("A", "B", "Bd", "Bf", "C", "D", "Dd", "Df", "dt")},
        "config": bench["config"],
    }


def cmd_simulate(cfg):
    out_dir = cfg.pop("out_dir")
    bench = sysmodel.three_tank_benchmark(cfg)
    os.makedirs(out_dir, exist_ok=True)
    write_dataset_csv(os.path.join(out_dir, "train.csv"), bench["train"], np.zeros(len(bench["train"]), dtype=int))
    write_dataset_csv(os.path.join(out_dir, "test.csv"), bench["test"], bench["labels"])
    write_json(os.path.join(out_dir, "model.json"), model_to_dict(bench))
    return 0


def _benchmark_inputs(cfg):
    """Training residuals and fault map, from files or a fresh benchmark run."""
    if cfg.get("train") is not None:
        _, X, _ = read_dataset_csv(cfg["train"])
        model = read_json(_need(cfg, "model"))
        V = np.asarray(model["V"], dtype=float)
    else:
        bench = sysmodel.three_tank_benchmark({"seed": int(cfg["seed"])})
        X, V = bench["train"], bench["model"].V
    if V.shape[0] != X.shape[1]:
        raise InvalidInput("model V and training data disagree in dimension")
    alpha = float(X.shape[1]) if cfg.get("alpha") is None else check_alpha(cfg["alpha"])
    amb, mu = from_samples(X, alpha=alpha, confidence=float(cfg["confidence"]), B=int(cfg["bootstrap"]),
                           seed=int(cfg["seed"]), inflate=float(cfg["inflate"]))
    return X, V, amb, mu


def cmd_eval(cfg):
    _, V, amb, mu = _benchmark_inputs({**cfg, "train": _need(cfg, "train")})
    _, T, labels = read_dataset_csv(_need(cfg, "test"))
    if labels is None:
        raise InvalidInput("test dataset needs a label column")
    T = T - mu
    W = np.eye(V.shape[0])
    eps = float(cfg["epsilon"])
    cols, far, fdr = [], [], []
    for sc in _listify(cfg["scheme"]):
        kw = {"n_grid": int(cfg["grid"])} if sc == "dr-b-a" else {}
        res = dsg.design_for_scheme(W, V, amb, eps, SCHEMES[sc], cfg["metric"], **kw)
        r = verify.evaluate_far_fdr(res.P, T, labels)
        cols.append(SCHEMES[sc])
        far.append(r["FAR"])
        fdr.append(r["FDR"])
    P, J = verify.chi2_glrt_detector(W, V, amb.S0, eps)
    r = verify.evaluate_far_fdr(P, T, labels, J)
    cols.append("GLRT-chi2")
    far.append(r["FAR"])
    fdr.append(r["FDR"])
    _emit(_csv_text(["rate"] + cols, [["FAR"] + far, ["FDR"] + fdr]), cfg.get("out"))
    return 0


def cmd_sweep(cfg):
    _, V, amb, _ = _benchmark_inputs(cfg)
    W = np.eye(V.shape[0])
    schemes = _schemes_for(amb)
    rows = _sweep_rows(W, V, amb, _floats(cfg["epsilons"]), _listify(cfg["metric"]), schemes, int(cfg["grid"]))
    _write_sweep(cfg, schemes, rows)
    return 0


COMMANDS = {
    "bound": cmd_bound,
    "design": cmd_design,
    "threshold": cmd_threshold,
    "simulate": cmd_simulate,
    "eval": cmd_eval,
    "sweep": cmd_sweep,
}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = resolve(args)
        if args.dump_sdp:
            with dump_problems(args.dump_sdp):
                return COMMANDS[args.command](cfg)
        return COMMANDS[args.command](cfg)
    except InvariantViolation as exc:
        print(f"drfd: invariant violated: {exc}", file=sys.stderr)
        return 4
    except DesignFailed as exc:
        print(f"drfd: design failed: {exc}", file=sys.stderr)
        print(dumps(exc.diagnostics), file=sys.stderr)
        return 3
    except (UsageError, InvalidInput, OSError, json.JSONDecodeError, KeyError, ValueError) as exc:
        print(f"drfd: {exc}", file=sys.stderr)
        return 2
    except DrfdError as exc:
        print(f"drfd: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
