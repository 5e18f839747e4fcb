"""Seeded cross-module checks shared by the CLI and the test-suite.

Every function returns plain dictionaries (no timings) so reports written from
them are reproducible byte for byte.
"""
from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
from scipy import linalg

from .core import ControlSystem, expm_t
from .hautus import SearchConfig, SearchNotConverged, Variant, hesi_constant, hesi_holds, hsf_test
from .observability import PENCIL_RTOL, weak_obs_min_C
from .synthesis import NotStabilizable, RiccatiError, stabilizing_feedback
from .models.pointwise import critical_index, pointwise_criterion, pointwise_heat_system

POINTWISE_CASES = (
    (45.0, "1/2"), (45.0, "2/4"), (45.0, "1/3"), (45.0, "2/5"), (45.0, "3/7"),
    (100.0, "1/2"), (100.0, "1/3"), (100.0, "2/3"), (100.0, "2/5"),
)


def random_unitary(rng, n: int) -> np.ndarray:
    Z = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    Q, R = np.linalg.qr(Z)
    return Q * (np.diag(R) / np.abs(np.diag(R)))


def _cplx(rng, *shape):
    return rng.normal(size=shape) + 1j * rng.normal(size=shape)


def _uncontrollable_block(rng, k: int, unstable: bool, horizon: float = 5.0,
                          delta: float = 0.5) -> np.ndarray:
    """Upper-triangular block; stable ones satisfy ``||e^{A3 T}||^2 < delta / 2``."""
    for _ in range(1000):
        d = -rng.uniform(0.3, 2.0, k) + 1j * rng.uniform(-2.0, 2.0, k)
        if unstable:
            d[rng.integers(k)] = rng.uniform(0.1, 1.0) + 1j * rng.uniform(-2.0, 2.0)
        A3 = np.diag(d) + np.triu(0.3 * _cplx(rng, k, k), 1)
        if unstable or linalg.norm(expm_t(A3, horizon), 2) ** 2 < 0.5 * delta:
            return A3
    raise RuntimeError("could not draw a well-separated stable block")


def random_kalman_system(rng, n_max: int = 6, m_max: int = 2) -> tuple[ControlSystem, dict]:
    """Random complex pair built in Kalman form with a unitary change of basis.

    The kind is one of ``controllable``, ``stable`` (stable uncontrollable
    part) or ``unstable`` (uncontrollable part with a mode at ``Re >= 0.1``).
    """
    n = int(rng.integers(1, n_max + 1))
    m = int(rng.integers(1, m_max + 1))
    kind = str(rng.choice(["controllable", "stable", "unstable"]))
    nc = n if kind == "controllable" else int(rng.integers(0, n))
    A1 = 0.6 * _cplx(rng, nc, nc) / math.sqrt(max(nc, 1)) - 0.3 * np.eye(nc)
    B1 = _cplx(rng, nc, m)
    T = np.zeros((n, n), dtype=complex)
    T[:nc, :nc] = A1
    if nc < n:
        T[:nc, nc:] = 0.5 * _cplx(rng, nc, n - nc)
        T[nc:, nc:] = _uncontrollable_block(rng, n - nc, kind == "unstable")
    Bt = np.zeros((n, m), dtype=complex)
    Bt[:nc] = B1
    P = random_unitary(rng, n)
    sys = ControlSystem(P @ T @ P.conj().T, P @ Bt, f"random {kind} n={n} m={m}")
    return sys, {"n": n, "m": m, "kind": kind, "nc": nc}


def equivalence_case(sys: ControlSystem, T: float = 5.0, delta: float = 0.5,
                     pencil_rtol: float = PENCIL_RTOL) -> dict:
    """Kernel test, weak observability and Riccati synthesis on one pair."""
    hsf = hsf_test(sys).holds
    C = weak_obs_min_C(sys, T, delta, rtol=pencil_rtol)
    row = {"hsf": hsf, "weak_obs_C": C, "weak_obs_finite": math.isfinite(C)}
    try:
        rep = stabilizing_feedback(sys)
        row.update(riccati=rep.certified, alpha=rep.alpha,
                   riccati_residual=rep.riccati.residual,
                   riccati_residual_bound=rep.riccati.residual_bound)
    except (NotStabilizable, RiccatiError):
        row.update(riccati=False, alpha=math.nan, riccati_residual=math.nan,
                   riccati_residual_bound=math.nan)
    row["agree"] = hsf == row["weak_obs_finite"] == row["riccati"]
    return row


def equivalence_study(seed: int = 0, count: int = 200, T: float = 5.0, delta: float = 0.5,
                      pencil_rtol: float = PENCIL_RTOL) -> dict:
    rng = np.random.default_rng(seed)
    rows = []
    for k in range(count):
        sys, meta = random_kalman_system(rng)
        row = {"index": k, **meta, **equivalence_case(sys, T, delta, pencil_rtol)}
        row["expected"] = meta["kind"] != "unstable"
        rows.append(row)
    bad = [r["index"] for r in rows if not r["agree"] or r["hsf"] != r["expected"]]
    return {"seed": seed, "count": count, "T": T, "delta": delta, "pencil_rtol": pencil_rtol,
            "disagreements": bad, "holds": not bad, "rows": rows}


def pointwise_case(c: float, x0, n_modes: int | None = None, beta: float = 1.0,
                   horizons=(0.05, 0.1, 0.2), delta: float = 0.5,
                   search: SearchConfig | None = None, pencil_rtol: float = PENCIL_RTOL,
                   threshold: float = 1e12) -> dict:
    """All four stabilizability tests on the pointwise-control heat truncation."""
    fr = Fraction(x0) if not isinstance(x0, Fraction) else x0
    n_modes = n_modes or critical_index(c) + 10
    sys = pointwise_heat_system(c, fr, n_modes)
    crit = pointwise_criterion(c, fr)
    hsf = hsf_test(sys).holds
    try:
        hesi = hesi_holds(sys, beta, Variant.FLAT, threshold=threshold, search=search)
    except SearchNotConverged:
        hesi = None
    hrep = hesi_constant(sys, beta, Variant.FLAT, search)
    Cs = [weak_obs_min_C(sys, T, delta, rtol=pencil_rtol) for T in horizons]
    wo = any(math.isfinite(C) for C in Cs)
    try:
        rep = stabilizing_feedback(sys)
        ric, res, bound = rep.certified, rep.riccati.residual, rep.riccati.residual_bound
    except (NotStabilizable, RiccatiError):
        ric, res, bound = False, math.nan, math.nan
    return {
        "c": c, "x0": f"{fr.numerator}/{fr.denominator}", "x0_input": str(x0), "n_modes": n_modes,
        "criterion": crit, "hsf": hsf, "hesi_holds": hesi, "hesi_constant": hrep.constant,
        "beta": beta, "weak_obs_C": Cs, "horizons": list(horizons), "delta": delta,
        "weak_obs_finite": wo, "riccati": ric, "riccati_residual": res,
        "riccati_residual_bound": bound,
        "agree": crit == hsf == hesi == wo == ric,
    }


def pointwise_study(cases=POINTWISE_CASES, **kw) -> dict:
    rows = [pointwise_case(c, x0, **kw) for c, x0 in cases]
    return {"rows": rows, "holds": all(r["agree"] for r in rows)}


def riccati_audit(rows) -> dict:
    """Residual versus ``1e-8 (1 + ||P||^2)`` over rows carrying both numbers."""
    checked = [r for r in rows if not math.isnan(r.get("riccati_residual", math.nan))]
    worst = max((r["riccati_residual"] / r["riccati_residual_bound"] for r in checked), default=0.0)
    return {"checked": len(checked), "worst_ratio": worst, "holds": worst <= 1.0}


def smoke_suite(seed: int = 0) -> dict:
    """Quick property checks across modules (used by ``hesilab verify``)."""
    rng = np.random.default_rng(seed)
    out = {}
    # shift identity on a random normal system
    n = 4
    U = random_unitary(rng, n)
    d = -rng.uniform(0.2, 2.0, n) + 1j * rng.uniform(-2, 2, n)
    sys = ControlSystem(U @ np.diag(d) @ U.conj().T, _cplx(rng, n, 1))
    a, b = 1.0, 0.5
    h1 = hesi_constant(sys.shifted(a), b)
    h2 = hesi_constant(sys, b + a)
    gap = 2 * max(h1.lipschitz_gap, h2.lipschitz_gap, 0.0)
    out["shift_identity"] = {"lhs": h1.constant, "rhs": h2.constant, "allowed": gap,
                             "holds": abs(h1.constant - h2.constant) <= gap + 1e-9 * h2.constant}
    eq = equivalence_study(seed, count=20)
    out["equivalence"] = {k: v for k, v in eq.items() if k != "rows"}
    pw = pointwise_study(cases=((45.0, "1/2"), (45.0, "1/3")))
    out["pointwise"] = {"holds": pw["holds"], "cases": [(r["c"], r["x0"], r["criterion"]) for r in pw["rows"]]}
    out["holds"] = all(v["holds"] for v in out.values())
    return out
