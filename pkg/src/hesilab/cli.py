"""Command-line front end.

Exit codes: 0 analysis finished, 2 analysis finished with a "not
stabilizable" verdict (only with ``--verdict``), 1 error.
"""
from __future__ import annotations

import argparse
import itertools
import json
import math
import os
import re
import sys
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import reports
from .core import load_system
from .hautus import (DEFAULT_THRESHOLD, SearchConfig, SearchNotConverged, Variant,
                     hesi_constant, hsf_test)
from .models import (DelayParams, PeriodicGrid, SingularResolvent, ThickSetSpec,
                     delay_heat_system, delay_hesi_bound, delay_instability_scan,
                     dissipativity_defect, fractional_heat_system, ginzburg_landau_system,
                     omega_from_intervals, pointwise_criterion, quarter_cells, verify_thickness)
from .models.pointwise import critical_index
from .observability import PENCIL_RTOL, weak_obs_decay_profile, weak_obs_min_C
from .synthesis import (NotStabilizable, RiccatiError, modal_rapid_feedback, rapid_feedback,
                        stabilizing_feedback)
from .verify import equivalence_study, pointwise_case, pointwise_study, riccati_audit, smoke_suite

EXIT_OK, EXIT_ERROR, EXIT_NOT_STABILIZABLE = 0, 1, 2
MAX_RUNS = 10_000


class ConfigError(ValueError):
    pass


# --- configuration ----------------------------------------------------------

MODEL_KEYS = {
    "gl": {"a": 1.0, "b": 0.0, "beta": 1.0, "alpha": None, "kmax": None},
    "frac": {"s": 0.5, "beta": 1.0, "alpha": None, "kmax": None},
    "pointwise": {"c": None, "x0": None, "n_modes": None, "beta": 1.0, "T": None,
                  "delta": 0.5},
    "delay": {"tau": 1.0, "M_rho": 64, "kmax": 16, "gamma0": 0.5, "alpha": 0.1,
              "j_max": 100},
}
COMMON_KEYS = {"model", "grid", "omega", "seed"}
GRID_KEYS = {"N_dim", "L", "points"}
OMEGA_KEYS = {"pattern", "epsilon", "L_cube", "axes"}


def tolerances(args) -> dict:
    return {
        "pencil_rtol": args.tol_pencil, "hesi_threshold": args.tol_threshold,
        "search_conv_rtol": args.tol_conv, "search_tail_rtol": args.tol_tail,
        "hsf_tol": args.tol_hsf, "riccati_residual_rtol": 1e-8,
    }


def search_config(args) -> SearchConfig:
    return SearchConfig(conv_rtol=args.tol_conv, tail_rtol=args.tol_tail, jobs=args.jobs)


def expand_sweep(cfg: dict, fixed=("grid", "omega", "model")) -> list[dict]:
    """Cartesian product over list-valued keys (capped at ``MAX_RUNS``)."""
    keys = sorted(k for k, v in cfg.items() if isinstance(v, list) and k not in fixed)
    total = 1
    for k in keys:
        if not cfg[k]:
            raise ConfigError(f"sweep list for {k!r} is empty")
        total *= len(cfg[k])
    if total > MAX_RUNS:
        raise ConfigError(f"sweep expands to {total} runs (limit {MAX_RUNS})")
    out = []
    for combo in itertools.product(*(cfg[k] for k in keys)):
        out.append({**cfg, **dict(zip(keys, combo))})
    return out


def load_model_config(path) -> dict:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        cfg = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a mapping")
    return validate_model_config(cfg)


def validate_model_config(cfg: dict) -> dict:
    model = cfg.get("model")
    if model not in MODEL_KEYS:
        raise ConfigError(f"model must be one of {sorted(MODEL_KEYS)}, got {model!r}")
    allowed = COMMON_KEYS | set(MODEL_KEYS[model])
    unknown = set(cfg) - allowed
    if unknown:
        raise ConfigError(f"unknown keys for model {model!r}: {sorted(unknown)}")
    for sub, keys in (("grid", GRID_KEYS), ("omega", OMEGA_KEYS)):
        if sub in cfg:
            if not isinstance(cfg[sub], dict):
                raise ConfigError(f"{sub} must be a mapping")
            bad = set(cfg[sub]) - keys
            if bad:
                raise ConfigError(f"unknown {sub} keys: {sorted(bad)}")
    out = {k: v for k, v in MODEL_KEYS[model].items()}
    out.update(cfg)
    if model == "pointwise":
        for k in ("c", "x0"):
            if out.get(k) is None:
                raise ConfigError(f"pointwise model needs {k!r}")
    return out


def build_grid(cfg: dict) -> PeriodicGrid:
    g = cfg.get("grid", {})
    return PeriodicGrid(int(g.get("N_dim", 1)), float(g.get("L", 8.0)), int(g.get("points", 128)))


def build_omega(cfg: dict, grid: PeriodicGrid) -> ThickSetSpec:
    """``omega`` is ``{"pattern": "quarter-cells"}`` or run-length interval lists.

    Interval form: ``{"axes": [[period, [[a, b], ...]], ...], "epsilon": e, "L_cube": l}``.
    """
    o = cfg.get("omega", {"pattern": "quarter-cells"})
    if "axes" in o:
        ind = omega_from_intervals(grid, [(float(p), [tuple(map(float, iv)) for iv in ivals])
                                          for p, ivals in o["axes"]])
        spec = ThickSetSpec(ind, float(o.get("epsilon", 0.25 ** grid.N_dim)),
                            float(o.get("L_cube", 1.0)))
    elif o.get("pattern", "quarter-cells") == "quarter-cells":
        spec = quarter_cells(grid, o.get("epsilon"), float(o.get("L_cube", 1.0)))
    else:
        raise ConfigError(f"unknown omega pattern {o.get('pattern')!r}")
    return spec


def _modes(grid, kmax):
    return None if kmax is None else grid.low_modes(int(kmax))


# --- runners ------------------------------------------------------------------

def run_spectral_model(cfg: dict, args) -> dict:
    grid = build_grid(cfg)
    spec = build_omega(cfg, grid)
    thick, anchor, frac = verify_thickness(spec, grid)
    modes = _modes(grid, cfg.get("kmax"))
    if cfg["model"] == "gl":
        sysm = ginzburg_landau_system(float(cfg["a"]), float(cfg["b"]), grid, spec, modes)
    else:
        sysm = fractional_heat_system(float(cfg["s"]), grid, spec, modes)
    beta = float(cfg["beta"])
    rep = hesi_constant(sysm, beta, Variant.FLAT, search_config(args))
    holds = rep.finite and rep.constant <= args.tol_threshold
    row = {"beta": beta, "constant": rep.constant, "witness_re": rep.witness_lambda.real,
           "witness_im": rep.witness_lambda.imag, "converged": rep.converged,
           "thick": thick, "thickness_fraction": frac, "n": sysm.n, "hesi_holds": holds}
    if cfg.get("alpha") is not None:
        fb = rapid_feedback(sysm, float(cfg["alpha"]))
        row.update(alpha=float(cfg["alpha"]), closed_loop_decay=fb.alpha, certified=fb.certified)
        holds = holds and fb.certified
    row["stabilizable"] = bool(holds)
    return row


def run_pointwise(cfg: dict, args) -> dict:
    x0 = cfg["x0"]
    if not isinstance(x0, str) or not re.fullmatch(r"\s*\d+\s*/\s*\d+\s*", x0):
        raise ConfigError(f"x0 must be an exact rational written p/q, got {x0!r}")
    fr = Fraction(x0.replace(" ", ""))
    c = float(cfg["c"])
    horizons = (0.05, 0.1, 0.2) if cfg.get("T") is None else (float(cfg["T"]),)
    row = pointwise_case(c, fr, n_modes=cfg.get("n_modes"), beta=float(cfg["beta"]),
                         horizons=horizons, delta=float(cfg["delta"]),
                         search=search_config(args), pencil_rtol=args.tol_pencil,
                         threshold=args.tol_threshold)
    row["critical_index"] = critical_index(c)
    row["stabilizable"] = bool(pointwise_criterion(c, fr))
    return row


def run_delay(cfg: dict, args) -> dict:
    grid = build_grid(cfg)
    spec = build_omega(cfg, grid)
    p = DelayParams(float(cfg["tau"]), grid, spec, modes=_modes(grid, cfg["kmax"]),
                    M_rho=int(cfg["M_rho"]))
    scan = delay_instability_scan(p, int(cfg["j_max"]))
    hb = delay_hesi_bound(p, float(cfg["gamma0"]), search=search_config(args))
    fb = modal_rapid_feedback(delay_heat_system(p), float(cfg["alpha"]))
    return {
        "tau": p.tau, "M_rho": p.M_rho, "modes": len(p.modes), "dim": p.dim,
        "dissipativity_defect": dissipativity_defect(p),
        "scan_last_bound": scan[-1].bound, "scan_last_matrix_norm": scan[-1].matrix_norm,
        "gamma0": hb["gamma0"], "numeric_C": hb["numeric_C"], "analytic_C": hb["analytic_C"],
        "hesi_bound_holds": hb["holds"], "alpha": fb.alpha_target,
        "closed_loop_decay": fb.alpha, "certified": fb.certified,
        "stabilizable": bool(hb["holds"] and math.isfinite(hb["numeric_C"]) and fb.certified),
        "_scan": [{"j": r.j, "lambda_j": r.lam, "bound": r.bound,
                   "matrix_norm": r.matrix_norm} for r in scan],
    }


RUNNERS = {"gl": run_spectral_model, "frac": run_spectral_model,
           "pointwise": run_pointwise, "delay": run_delay}


def _parallel_map(fn, items, jobs):
    if jobs > 1 and len(items) > 1:
        with ThreadPoolExecutor(jobs) as ex:
            return list(ex.map(fn, items))
    return [fn(x) for x in items]


# --- commands -------------------------------------------------------------------

def _load(args):
    if not args.system:
        raise ConfigError("--system is required")
    if not Path(args.system).is_file():
        raise ConfigError(f"system file not found: {args.system}")
    return load_system(args.system)


def _betas(args):
    betas = args.beta or [1.0]
    if any(not b > 0 for b in betas):
        raise ConfigError("beta must be positive")
    return betas


def cmd_hesi(args):
    sysm = _load(args)
    cfg = search_config(args)
    rows = []
    for b in _betas(args):
        rep = hesi_constant(sysm, b, Variant(args.variant), cfg)
        if not rep.converged and rep.finite and rep.upper_bound > args.tol_threshold >= rep.constant:
            raise SearchNotConverged(rep)
        rows.append({"beta": b, "constant": rep.constant, "witness_re": rep.witness_lambda.real,
                     "witness_im": rep.witness_lambda.imag, "converged": rep.converged,
                     "upper_bound": rep.upper_bound,
                     "holds": rep.finite and rep.constant <= args.tol_threshold})
    cols = ["beta", "constant", "witness_re", "witness_im", "converged", "upper_bound", "holds"]
    return rows, cols, all(r["holds"] for r in rows), {"variant": args.variant}


def cmd_obs(args):
    sysm = _load(args)
    T = args.T or 5.0
    delta = 0.5 if args.delta is None else args.delta
    C = weak_obs_min_C(sysm, T, delta, rtol=args.tol_pencil)
    hsf = hsf_test(sysm, args.tol_hsf).holds
    rows = [{"T": T, "delta": delta, "C_min": C, "finite": math.isfinite(C), "hsf": hsf}]
    return rows, ["T", "delta", "C_min", "finite", "hsf"], math.isfinite(C), {}


def cmd_synth(args):
    sysm = _load(args)
    try:
        rep = rapid_feedback(sysm, args.alpha) if args.alpha else stabilizing_feedback(sysm)
    except NotStabilizable as exc:
        row = {"alpha_target": args.alpha or 0.0, "certified": False, "reason": str(exc)}
        return [row], ["alpha_target", "certified", "reason"], False, {}
    row = {"alpha_target": rep.alpha_target, "closed_loop_decay": rep.alpha, "C1": rep.C1,
           "C2": rep.C2, "certified": rep.certified, "riccati_residual": rep.riccati.residual,
           "riccati_residual_bound": rep.riccati.residual_bound}
    extra = {"K": [[[z.real, z.imag] for z in r] for r in rep.K]}
    return [row], list(row), rep.certified, extra


def cmd_decay(args):
    sysm = _load(args)
    alpha = args.alpha or 1.0
    T = args.T or 10.0
    prof = weak_obs_decay_profile(sysm, alpha, np.linspace(0.0, T, 41)[1:])
    rows = [{"t": t, "C_min": c} for t, c in prof]
    try:
        ok = rapid_feedback(sysm, alpha).certified
    except NotStabilizable:
        ok = False
    return rows, ["t", "C_min"], ok, {"alpha": alpha, "rapid_feedback_certified": ok}


def cmd_model(args):
    if args.model:
        cfg = load_model_config(args.model)
    else:
        if not args.kind:
            raise ConfigError("give a model kind or --model CONFIG")
        raw = {"model": args.kind}
        for k in ("c", "x0", "a", "b", "s", "tau"):
            v = getattr(args, k, None)
            if v is not None:
                raw[k] = v
        if args.beta:
            raw["beta"] = args.beta if len(args.beta) > 1 else args.beta[0]
        if args.alpha is not None:
            raw["alpha"] = args.alpha
        if args.T is not None and args.kind == "pointwise":
            raw["T"] = args.T
        if args.delta is not None and args.kind == "pointwise":
            raw["delta"] = args.delta
        cfg = validate_model_config(raw)
    runs = expand_sweep(cfg)
    runner = RUNNERS[cfg["model"]]
    rows = _parallel_map(lambda c: runner(c, args), runs, args.jobs)
    extra = {}
    scans = [[{"run": i, **row} for row in r.pop("_scan")] for i, r in enumerate(rows) if "_scan" in r]
    if scans:
        extra["scan"] = [row for s in scans for row in s]
    for r in rows:
        for k in [k for k in r if isinstance(r[k], (list, dict))]:
            r[k] = json.dumps(reports.to_plain(r[k]), sort_keys=True)
    cols = sorted({k for r in rows for k in r})
    extra["config"] = cfg
    return rows, cols, all(r["stabilizable"] for r in rows), extra


def cmd_verify(args):
    seed = args.seed
    out = {"smoke": smoke_suite(seed)}
    rows = [{"suite": "smoke", "holds": out["smoke"]["holds"]}]
    if args.all:
        eq = equivalence_study(seed, count=200, pencil_rtol=args.tol_pencil)
        pw = pointwise_study(pencil_rtol=args.tol_pencil)
        aud = riccati_audit(eq["rows"] + pw["rows"])
        out.update(equivalence={k: v for k, v in eq.items() if k != "rows"},
                   pointwise=pw, riccati=aud)
        rows += [{"suite": "equivalence", "holds": eq["holds"]},
                 {"suite": "pointwise", "holds": pw["holds"]},
                 {"suite": "riccati", "holds": aud["holds"]}]
    ok = all(r["holds"] for r in rows)
    if not ok:
        raise RuntimeError("verification suite failed: "
                           + ", ".join(r["suite"] for r in rows if not r["holds"]))
    return rows, ["suite", "holds"], True, {"details": out}


COMMANDS = {"hesi": cmd_hesi, "obs": cmd_obs, "synth": cmd_synth, "decay": cmd_decay,
            "model": cmd_model, "verify": cmd_verify}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--system", help="system JSON file (A, B as [re, im] pairs)")
    common.add_argument("--model", help="model config file (JSON); list values sweep")
    common.add_argument("--beta", type=float, action="append", help="repeatable")
    common.add_argument("--alpha", type=float)
    common.add_argument("--T", type=float)
    common.add_argument("--delta", type=float)
    common.add_argument("--out", default="hesilab-out", help="report directory")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--jobs", type=int, default=1)
    common.add_argument("--verdict", action="store_true",
                        help="exit 2 when the verdict is 'not stabilizable'")
    common.add_argument("--variant", choices=[v.value for v in Variant], default="FLAT")
    common.add_argument("--tol-pencil", type=float, default=PENCIL_RTOL)
    common.add_argument("--tol-threshold", type=float, default=DEFAULT_THRESHOLD)
    common.add_argument("--tol-conv", type=float, default=1e-2)
    common.add_argument("--tol-tail", type=float, default=1e-2)
    common.add_argument("--tol-hsf", type=float, default=None)

    ap = argparse.ArgumentParser(prog="hesilab", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("hesi", "obs", "synth", "decay"):
        sub.add_parser(name, parents=[common])
    m = sub.add_parser("model", parents=[common])
    m.add_argument("kind", nargs="?", choices=sorted(MODEL_KEYS))
    m.add_argument("--c", type=float)
    m.add_argument("--x0", help="exact rational p/q")
    m.add_argument("--a", type=float)
    m.add_argument("--b", type=float)
    m.add_argument("--s", type=float)
    m.add_argument("--tau", type=float)
    v = sub.add_parser("verify", parents=[common])
    v.add_argument("--all", action="store_true", help="run the full cross-module suites")
    return ap


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    env_jobs = os.environ.get("HESILAB_JOBS")
    try:
        if env_jobs:
            args.jobs = int(env_jobs)
        if args.jobs < 1:
            raise ConfigError("jobs must be at least 1")
        rows, cols, verdict, extra = COMMANDS[args.command](args)
        out = Path(args.out)
        doc = {"command": args.command, "seed": args.seed, "tolerances": tolerances(args),
               "verdict": "stabilizable" if verdict else "not stabilizable",
               "rows": rows, **extra}
        reports.write_json(out / f"{args.command}.json", doc)
        reports.write_csv(out / f"{args.command}.csv", cols, rows)
        if "scan" in extra:
            reports.write_csv(out / "delay_scan.csv",
                              ["run", "j", "lambda_j", "bound", "matrix_norm"], extra["scan"])
    except (ConfigError, ValueError, TypeError, KeyError) as exc:
        print(f"error: invalid input: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except SearchNotConverged as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (RiccatiError, SingularResolvent, np.linalg.LinAlgError) as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except OSError as exc:
        print(f"error: cannot write reports: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except RuntimeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    print(f"{args.command}: {doc['verdict']} (reports in {out})")
    if args.verdict and not verdict:
        return EXIT_NOT_STABILIZABLE
    return EXIT_OK


def main() -> None:
    sys.exit(run())
