"""Acceptance suite; one summary line per criterion is printed at the end of the run."""
import math
import time

import numpy as np
from scipy import linalg

from conftest import normal_system, random_pair, record
from hesilab import ControlSystem, Variant, hesi_constant, hesi_holds
from hesilab import reports
from hesilab.cli import run as cli_run
from hesilab.core import growth_bound_estimate
from hesilab.hautus import hesi_equivalence_check
from hesilab.models import (DelayParams, PeriodicGrid, delay_heat_system, delay_hesi_bound,
                            delay_instability_scan, dissipativity_defect, fractional_heat_system,
                            ginzburg_landau_system, quarter_cells, sampled_dissipativity,
                            spectral_inequality_constant)
from hesilab.models.grid import band_modes, restriction_matrix
from hesilab.synthesis import (laplace_identity_check, modal_rapid_feedback, optimal_decay_rate,
                               rapid_feedback, stabilizing_feedback, trajectory_decay_rate)
from hesilab.verify import (equivalence_study, pointwise_study, random_kalman_system,
                            random_unitary)

EQ_SEED = 2024


def kalman_pair(A1, A3, B1, rng=None):
    n1, n3 = len(A1), len(A3)
    T = np.zeros((n1 + n3, n1 + n3), dtype=complex)
    T[:n1, :n1] = A1
    T[n1:, n1:] = A3
    B = np.zeros((n1 + n3, B1.shape[1]), dtype=complex)
    B[:n1] = B1
    if rng is None:
        return ControlSystem(T, B)
    P = random_unitary(rng, n1 + n3)
    return ControlSystem(P @ T @ P.conj().T, P @ B)


def diagonalizable_case():
    return kalman_pair(np.diag([1.0, -0.5]), np.diag([-2.0, -2.0]), np.array([[1.0], [1.0]]),
                       np.random.default_rng(5))


def jordan_case():
    return kalman_pair(np.diag([1.0, -0.5]), np.array([[-2.0, 1.0], [0.0, -2.0]]),
                       np.array([[1.0], [1.0]]))


# --- 1 ------------------------------------------------------------------------

def test_criterion_01_pointwise_dichotomy():
    t = time.perf_counter()
    study = pointwise_study()
    dt = time.perf_counter() - t
    verdict = {(r["c"], r["x0_input"]): r["criterion"] for r in study["rows"]}
    expected = {(45.0, "1/2"): False, (45.0, "2/4"): False, (45.0, "1/3"): True,
                (45.0, "2/5"): True, (45.0, "3/7"): True, (100.0, "1/2"): False,
                (100.0, "1/3"): False, (100.0, "2/3"): False, (100.0, "2/5"): True}
    ok = study["holds"] and verdict == expected and dt < 5.0
    record(1, ok, f"9 cases, all four tests agree={study['holds']}, {dt:.2f} s")
    assert verdict == expected
    assert study["holds"], [r for r in study["rows"] if not r["agree"]]
    assert dt < 5.0


# --- 2 ------------------------------------------------------------------------

def test_criterion_02_three_way_equivalence():
    t = time.perf_counter()
    study = equivalence_study(EQ_SEED, count=200, T=5.0, delta=0.5, pencil_rtol=1e-10)
    dt = time.perf_counter() - t
    kinds = {r["kind"] for r in study["rows"]}
    ok = study["holds"] and dt < 60 and kinds == {"controllable", "stable", "unstable"}
    record(2, ok, f"200 systems, disagreements={len(study['disagreements'])}, {dt:.1f} s")
    assert not study["disagreements"]
    assert kinds == {"controllable", "stable", "unstable"}
    assert dt < 60


# --- 3 ------------------------------------------------------------------------

def test_criterion_03_shift_identity():
    rng = np.random.default_rng(31)
    worst = 0.0
    fails = []
    for k in range(20):
        sys = normal_system(rng)
        for a in (0.5, 1.0, 2.0):
            h1 = hesi_constant(sys.shifted(a), 0.5)
            h2 = hesi_constant(sys, 0.5 + a)
            gap = 2 * max(h1.lipschitz_gap, h2.lipschitz_gap)
            diff = abs(h1.constant - h2.constant)
            worst = max(worst, diff / gap if gap > 0 else (0.0 if diff == 0 else math.inf))
            if diff > gap:
                fails.append((k, a, h1.constant, h2.constant, gap))
    record(3, not fails, f"60 pairs, worst |diff|/allowed={worst:.3g}")
    assert not fails


# --- 4 ------------------------------------------------------------------------

def test_criterion_04_weighted_flat_chain():
    rng = np.random.default_rng(41)
    fails = []
    for k in range(50):
        sys = normal_system(rng)
        bounds = growth_bound_estimate(sys, np.linspace(0.1, 10.0, 50))
        r = hesi_equivalence_check(sys, 1.0, bounds)
        if not r["holds"]:
            fails.append((k, r["weighted"], r["weighted_bound"], r["flat_beta1"],
                          r["flat_beta1_bound"]))
    record(4, not fails, f"50 normal systems, violations={len(fails)}")
    assert not fails


# --- 5 ------------------------------------------------------------------------

def test_criterion_05_optimal_decay():
    diag, jord = diagonalizable_case(), jordan_case()
    s_d, reach_d = optimal_decay_rate(diag)
    s_j, reach_j = optimal_decay_rate(jord)
    fb = rapid_feedback(diag, 2 - 1e-3)
    f1 = hesi_constant(jord, 2 - 1e-2, Variant.FLAT).constant
    f2 = hesi_constant(jord, 2 - 1e-3, Variant.FLAT).constant
    w1 = hesi_constant(diag, 2 - 1e-2, Variant.WEIGHTED).constant
    w2 = hesi_constant(diag, 2 - 1e-3, Variant.WEIGHTED).constant
    ok = (abs(s_d - 2) < 1e-9 and reach_d and abs(s_j - 2) < 1e-6 and not reach_j
          and fb.certified and f2 >= 10 * f1 and w2 < 2 * w1)
    record(5, ok, f"flat growth x{f2 / f1:.3g}, weighted growth x{w2 / w1:.3g}")
    assert abs(s_d - 2) < 1e-9 and reach_d
    assert abs(s_j - 2) < 1e-6 and not reach_j
    assert fb.certified and fb.alpha >= 2 - 1e-3 - 1e-8
    assert f2 >= 10 * f1
    assert w2 < 2 * w1


# --- 6 ------------------------------------------------------------------------

def _cost_matrix(sys, K):
    Acl = sys.A + sys.B @ K
    Q = np.eye(sys.n) + K.conj().T @ K
    return linalg.solve_continuous_lyapunov(Acl.conj().T, -Q)


def test_criterion_06_riccati_residuals_and_cost():
    rows = pointwise_study()["rows"] + equivalence_study(EQ_SEED, count=200)["rows"]
    ratios = [r["riccati_residual"] / r["riccati_residual_bound"] for r in rows
              if not math.isnan(r["riccati_residual"])]
    for sys in (diagonalizable_case(), jordan_case()):
        for alpha in (None, 1.0, 2 - 1e-3):
            fb = stabilizing_feedback(sys) if alpha is None else rapid_feedback(sys, alpha)
            ratios.append(fb.riccati.residual / fb.riccati.residual_bound)
    # closed-loop cost against x* P x on the stabilizable random systems
    rng = np.random.default_rng(EQ_SEED)
    cost_err = 0.0
    for _ in range(200):
        sys, meta = random_kalman_system(rng)
        if meta["kind"] == "unstable":
            continue
        fb = stabilizing_feedback(sys)
        Y = _cost_matrix(sys, fb.K)
        x0 = np.ones(sys.n) / math.sqrt(sys.n)
        J, xPx = (x0.conj() @ Y @ x0).real, (x0.conj() @ fb.riccati.P @ x0).real
        cost_err = max(cost_err, abs(J - xPx) / max(abs(xPx), 1e-300))
    worst = max(ratios)
    ok = worst <= 1.0 and cost_err <= 1e-6
    record(6, ok, f"{len(ratios)} solves, worst residual/bound={worst:.2g}, cost rel err={cost_err:.2g}")
    assert worst <= 1.0
    assert cost_err <= 1e-6


# --- 7 ------------------------------------------------------------------------

def test_criterion_07_laplace_witness():
    rng = np.random.default_rng(71)
    worst_res, worst_quad = 0.0, 0.0
    for _ in range(20):
        sys = random_pair(rng)
        fb = rapid_feedback(sys, 1.0)
        y0 = rng.normal(size=sys.n) + 1j * rng.normal(size=sys.n)
        out = laplace_identity_check(sys, fb, y0, beta=0.5, quad_points=3)
        worst_res = max(worst_res, out["max_relative_residual"])
        worst_quad = max(worst_quad, max(e for _, e in out["quadrature"]))
        assert out["grid_size"] == 225 and len(out["quadrature"]) == 3
    ok = worst_res <= 1e-9 and worst_quad <= 1e-6
    record(7, ok, f"worst identity residual={worst_res:.2g}, worst quadrature err={worst_quad:.2g}")
    assert worst_res <= 1e-9
    assert worst_quad <= 1e-6


# --- 8 ------------------------------------------------------------------------

def test_criterion_08_thick_set_models():
    t = time.perf_counter()
    grid = PeriodicGrid(1, 8.0, 128)
    spec = quarter_cells(grid)
    models = {"ginzburg-landau": ginzburg_landau_system(1.0, 2.0, grid, spec),
              "fractional": fractional_heat_system(0.5, grid, spec)}
    holds, decay, measured = {}, {}, {}
    y0 = np.random.default_rng(8).normal(size=128)
    for name, sys in models.items():
        assert sys.n == 128
        holds[name] = all(hesi_holds(sys, b) for b in (0.5, 1.0, 2.0))
        fb = rapid_feedback(sys, 1.0)
        decay[name] = fb.alpha if fb.certified else -math.inf
        measured[name] = trajectory_decay_rate(fb.closed_loop(sys), y0, 2.0, 10.0)
    dt = time.perf_counter() - t
    ok = (all(holds.values()) and min(decay.values()) >= 1.0
          and min(measured.values()) >= 1.0 and dt < 120)
    record(8, ok, f"decay {', '.join(f'{k}={v:.3f}' for k, v in measured.items())}, {dt:.0f} s")
    assert all(holds.values()), holds
    assert min(decay.values()) >= 1.0
    assert min(measured.values()) >= 1.0
    assert dt < 120


# --- 9 ------------------------------------------------------------------------

def test_criterion_09_spectral_inequality():
    grid = PeriodicGrid(1, 8.0, 128)
    spec = quarter_cells(grid)
    step = 2 * math.pi / grid.L
    Cs = [spectral_inequality_constant(grid, spec, k * step) for k in range(1, 6)]
    mono = all(b >= a * (1 - 1e-12) for a, b in zip(Cs, Cs[1:]))
    R = 5 * step
    C, modes, v = spectral_inequality_constant(grid, spec, R, return_vector=True)
    S = grid.synthesis_matrix(modes)
    Rm = restriction_matrix(grid, spec, modes)
    rng = np.random.default_rng(9)
    F = rng.normal(size=(len(modes), 99)) + 1j * rng.normal(size=(len(modes), 99))
    F = np.column_stack([F, v])
    ratio = np.linalg.norm(S @ F, axis=0) / (C * np.linalg.norm(Rm @ F, axis=0))
    ok = mono and bool(np.all(ratio <= 1 + 1e-12)) and abs(np.max(ratio) - 1) <= 1e-6
    record(9, ok, f"C(R)={[round(float(c), 4) for c in Cs]}, max ratio={np.max(ratio):.9f}")
    assert len(band_modes(grid, R)) == 11
    assert mono
    assert np.all(ratio <= 1 + 1e-12)
    assert abs(np.max(ratio) - 1) <= 1e-6


# --- 10 -----------------------------------------------------------------------

def test_criterion_10_delay_heat():
    t = time.perf_counter()
    grid = PeriodicGrid(1, 8.0, 128)
    p = DelayParams(1.0, grid, quarter_cells(grid), modes=grid.low_modes(16), M_rho=64)
    assert len(p.modes) == 33
    # (i) lower-bound sequence and the discretised resolvent
    rows = delay_instability_scan(p, 100)
    bounds = np.array([r.bound for r in rows])
    inc = bool(np.all(np.diff(bounds) > 0))
    last = rows[-1].bound
    dominated = all(r.matrix_norm ** 2 >= r.bound * (1 - 1.0 / p.M_rho) for r in rows)
    plancherel = all(r.phi1_sq >= r.bound_squared_base * (1 - 1e-12) for r in rows)
    ok_i = inc and abs(last - 33.4) < 0.05 and dominated and plancherel
    # (ii) discrete dissipativity
    defect = max(dissipativity_defect(p), sampled_dissipativity(p))
    ok_ii = defect <= 1e-8
    # (iii) composite constant against the closed-form one
    hb = delay_hesi_bound(p, 0.5)
    ok_iii = math.isfinite(hb["numeric_C"]) and hb["holds"]
    # (iv) truncated feedback
    sys = delay_heat_system(p)
    fb = modal_rapid_feedback(sys, 0.1)
    y0 = np.random.default_rng(10).normal(size=sys.n)
    measured = trajectory_decay_rate(fb.closed_loop(sys), y0, 5.0, 15.0)
    ok_iv = fb.certified and fb.alpha >= 0.1 and measured >= 0.1
    dt = time.perf_counter() - t
    ok = ok_i and ok_ii and ok_iii and ok_iv and dt < 300
    record(10, ok, f"bound(100)={last:.2f}, defect={defect:.1e}, "
                   f"C={hb['numeric_C']:.3g}<={hb['analytic_C']:.3g}, decay={measured:.3f}, {dt:.0f} s")
    assert ok_i and ok_ii and ok_iii and ok_iv
    assert dt < 300


# --- 11 -----------------------------------------------------------------------

def test_criterion_11_determinism(tmp_path):
    texts = []
    for _ in range(2):
        pw = pointwise_study()
        eq = equivalence_study(EQ_SEED, count=200)
        cols = sorted(eq["rows"][0])
        texts.append((reports.json_text(pw), reports.json_text(eq),
                      reports.csv_text(cols, eq["rows"])))
    outs = []
    for i in range(2):
        out = tmp_path / f"run{i}"
        assert cli_run(["verify", "--all", "--seed", "7", "--out", str(out)]) == 0
        assert cli_run(["model", "pointwise", "--c", "45", "--x0", "1/2", "--out", str(out)]) == 0
        outs.append({f.name: f.read_bytes() for f in sorted(out.iterdir())})
    ok = texts[0] == texts[1] and outs[0] == outs[1]
    record(11, ok, f"{len(outs[0])} CLI report files and 3 in-memory reports byte-identical")
    assert texts[0] == texts[1]
    assert outs[0] == outs[1]
