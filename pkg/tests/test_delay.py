import math

import numpy as np
import pytest
from scipy import linalg

from hesilab.models.delay import (DelayParams, SingularResolvent, analytic_delay_constants,
                                  block_weights, characteristic, delay_heat_system,
                                  delay_hesi_bound, delay_instability_scan, delay_resolvent_solve,
                                  discrete_resolvent_norm, dissipativity_defect,
                                  matrix_resolvent_solve, raw_block, sampled_dissipativity)
from hesilab.models.grid import PeriodicGrid, full_domain, quarter_cells


def _params(M=32, tau=1.0, P=8, L=8.0, modes=None, spec=None):
    g = PeriodicGrid(1, L, P)
    return DelayParams(tau, g, spec or quarter_cells(g), modes, M)


def test_scalar_resolvent_value():
    p = _params(modes=[[0]])
    phi1, phi2 = delay_resolvent_solve(p, 1.0, [1.0])
    assert math.isclose(phi1[0].real, 1 / (2 - math.exp(-1)), rel_tol=1e-14)
    assert abs(phi1[0] - 0.61269984) < 1e-8
    np.testing.assert_allclose(phi2[:, 0], np.exp(-p.rho) * phi1[0], rtol=1e-14)
    big = 1e6
    phi1, _ = delay_resolvent_solve(p, big, [1.0])
    assert math.isclose(phi1[0].real * big, 1.0, rel_tol=1e-5)


def test_singular_resolvent():
    p = _params(modes=[[0], [1]])
    assert characteristic(p, 0.0)[0] == 0
    with pytest.raises(SingularResolvent):
        delay_resolvent_solve(p, 0.0, [1.0, 1.0])


def test_matrix_resolvent_converges_first_order():
    errs = []
    for M in (16, 32, 64, 128):
        p = _params(M=M, modes=[[0], [1], [2]])
        f1 = np.array([1.0, 0.5, -0.25])
        ex, _ = delay_resolvent_solve(p, 0.7 + 0.4j, f1)
        mat, _ = matrix_resolvent_solve(p, 0.7 + 0.4j, f1)
        errs.append(np.linalg.norm(ex - mat))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders >= 0.9)


def test_resolvent_with_history_data():
    f2 = lambda s: np.array([math.cos(3 * s), 1.0 + s])  # noqa: E731
    errs = []
    for M in (32, 64, 128):
        p = _params(M=M, modes=[[0], [1]])
        ex1, ex2 = delay_resolvent_solve(p, 0.5, [1.0, 0.0], f2)
        nodes = np.array([f2(r) for r in p.rho])
        m1, m2 = matrix_resolvent_solve(p, 0.5, [1.0, 0.0], nodes)
        errs.append(np.linalg.norm(ex1 - m1) + np.max(np.abs(ex2 - m2)))
    assert errs[0] > errs[1] > errs[2]
    assert errs[-1] < 2e-2


def test_smooth_history_trajectory():
    # y' = -y + y(t - 1), history e^s: y(1) = 1/2 + (1 - e^{-1}/2) e^{-1}
    exact = 0.5 + (1 - math.exp(-1) / 2) * math.exp(-1)
    errs = []
    for M in (16, 32, 64, 128):
        p = DelayParams(1.0, PeriodicGrid(1, 8.0, 32), full_domain(PeriodicGrid(1, 8.0, 32)), [[0]], M)
        sysd = delay_heat_system(p)
        x0 = block_weights(p) * np.concatenate([[1.0], np.exp(-p.rho)])
        y1 = (linalg.expm(sysd.A) @ x0)[0]
        errs.append(abs(y1.real - exact))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders > 0.8)
    assert errs[-1] < 3e-3


def test_dissipativity():
    p = _params(M=16)
    assert dissipativity_defect(p) <= 1e-12
    assert sampled_dissipativity(p) <= 1e-12
    w = block_weights(p)
    for q in p.xi2():
        Ab = (w[:, None] * raw_block(p, q)) / w[None, :]
        S = 0.5 * (Ab + Ab.T)
        S[0, 0] += q
        assert linalg.eigvalsh(S)[-1] <= 1e-12


def test_control_sees_current_state_only():
    p = _params(M=8)
    sysd = delay_heat_system(p)
    nz = np.nonzero(np.any(sysd.B != 0, axis=1))[0]
    assert set(nz) <= set(sysd.port_indices().tolist())
    assert sysd.n == p.dim == 8 * 9


def test_instability_scan():
    p = _params(M=16, P=32, L=64.0)
    rows = delay_instability_scan(p, j_max=6)
    for r in rows:
        lam = r.lam
        sel = p.xi2() <= lam * (1 + 1e-12)
        chi = lam + 1 - math.exp(-lam) + p.xi2()[sel]
        assert math.isclose(r.phi1_sq, float(np.mean(np.abs(1 / chi) ** 2)), rel_tol=1e-12)
        assert math.isclose(r.bound, 1 / (2 * lam + 1 - math.exp(-lam)), rel_tol=1e-14)
        assert r.matrix_norm >= 0.9 * math.sqrt(r.phi1_sq)
        assert r.extra["modes_in_band"] == int(sel.sum())
    assert rows[-1].matrix_norm > rows[0].matrix_norm
    with pytest.raises(ValueError):
        delay_instability_scan(p, j_max=1)
    with pytest.raises(ValueError):
        delay_instability_scan(_params(M=8, L=2 * math.pi, modes=[[1]]), j_max=3)


def test_discrete_resolvent_norm_matches_svd():
    p = _params(M=8, P=4)
    sysd = delay_heat_system(p)
    lam = 0.3 + 0.2j
    ref = 1 / linalg.svdvals(lam * np.eye(sysd.n) - sysd.A)[-1]
    assert math.isclose(discrete_resolvent_norm(p, lam), ref, rel_tol=1e-10)


def test_analytic_constants():
    c = analytic_delay_constants(1e-12, 0.5, 2.0)
    assert math.isclose(c["flat"], 8.0, rel_tol=1e-9)
    assert math.isclose(c["C"], 8.0, rel_tol=1e-9)
    c = analytic_delay_constants(1.0, 0.5, 1.0)
    e = math.e
    assert math.isclose(c["C"], 4 * (1 + e) ** 2 + 2 * e)
    assert c["flat"] == max(c["C"], c["D"], c["D_tau"])


def test_delay_hesi_bound_small():
    g = PeriodicGrid(1, 2 * math.pi, 4)
    p = DelayParams(1.0, g, full_domain(g), None, 8)
    out = delay_hesi_bound(p, 0.5)
    assert out["holds"] and math.isfinite(out["numeric_C"])
    assert math.isclose(out["gamma_heat"], 0.5 + math.exp(0.5) - 1)
    with pytest.raises(ValueError):
        DelayParams(0.0, g, full_domain(g))
