import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import optimize

from conftest import normal_system
from hesilab.core import BlockSystem, ControlSystem, SpectralSystem
from hesilab.hautus import (MarginEvaluator, SearchConfig, Variant, hesi_constant,
                            hesi_holds, hesi_offset_trend, hsf_test, stacked_min_singular)
from hesilab.verify import _cplx


def test_scalar_margin_closed_form():
    s = ControlSystem([[1 + 2j]], [[0.5j]])
    lam = 0.3 - 1.1j
    expect = math.sqrt(abs(lam - (1 - 2j)) ** 2 + 0.25)
    assert math.isclose(stacked_min_singular(s, lam), expect, rel_tol=1e-14)


def _block_system(rng, nb=3, s=4):
    A = np.zeros((nb * s, nb * s), dtype=complex)
    B = np.zeros((nb * s, 2), dtype=complex)
    blocks = []
    for k in range(nb):
        sl = slice(k * s, (k + 1) * s)
        A[sl, sl] = _cplx(rng, s, s) - 2 * np.eye(s)
        B[k * s] = _cplx(rng, 2)
        blocks.append(range(k * s, (k + 1) * s))
    return BlockSystem(A, B, "", tuple(blocks), (0,) * nb)


def _shared_block_system(rng, nb=4, s=5):
    # blocks differ only in their port column, as in the delay model
    base = _cplx(rng, s, s) - 2 * np.eye(s)
    A = np.zeros((nb * s, nb * s), dtype=complex)
    B = np.zeros((nb * s, 3), dtype=complex)
    blocks = []
    for k in range(nb):
        blk = base.copy()
        blk[0, 0] -= k
        sl = slice(k * s, (k + 1) * s)
        A[sl, sl] = blk
        B[k * s] = _cplx(rng, 3)
        blocks.append(range(k * s, (k + 1) * s))
    return BlockSystem(A, B, "", tuple(blocks), (0,) * nb)


@pytest.mark.parametrize("kind", ["svd", "gram-diag", "gram", "block", "block-shared"])
def test_margin_paths_match_svd(kind):
    rng = np.random.default_rng(7)
    if kind == "svd":
        sys = ControlSystem(_cplx(rng, 5, 5), _cplx(rng, 5, 2))
    elif kind == "gram-diag":
        sys = SpectralSystem(np.diag(_cplx(rng, 60)), _cplx(rng, 60, 2))
    elif kind == "gram":
        sys = ControlSystem(_cplx(rng, 60, 60), _cplx(rng, 60, 2))
    elif kind == "block":
        sys = _block_system(rng)
    else:
        sys = _shared_block_system(rng)
    ev = MarginEvaluator(sys)
    assert ev.path == kind.split("-shared")[0] or (kind == "block-shared" and ev.shared_rest)
    lams = _cplx(rng, 12) * 2
    got = ev(lams)
    ref = np.array([stacked_min_singular(sys, l) for l in lams])
    np.testing.assert_allclose(got, ref, rtol=1e-7, atol=1e-9)


def test_weighted_asymptote_without_input():
    rep = hesi_constant(ControlSystem([[-1.0]], np.zeros((1, 0))), 0.5, Variant.WEIGHTED)
    assert rep.constant == 1.0 and rep.asymptotic


def test_flat_scalar_examples():
    rep = hesi_constant(ControlSystem([[0.0]], [[1.0]]), 1.0, Variant.FLAT)
    assert math.isclose(rep.constant, 1.0, rel_tol=1e-12)
    assert abs(rep.witness_lambda) < 1e-12
    beta = 0.5
    rep = hesi_constant(ControlSystem([[-1.0]], np.zeros((1, 0))), beta, Variant.FLAT)
    ofs = 1e-6 * (1 + beta)
    assert math.isclose(rep.constant, 1.0 / (1 - beta + ofs) ** 2, rel_tol=1e-12)


def test_weighted_scalar_against_line_search():
    # (x + 1)^2 / ((x - 1)^2 + 1) peaks on the real axis
    res = optimize.minimize_scalar(lambda x: -(x + 1) ** 2 / ((x - 1) ** 2 + 1),
                                   bounds=(-1, 50), method="bounded", options={"xatol": 1e-12})
    rep = hesi_constant(ControlSystem([[1.0]], [[1.0]]), 1.0, Variant.WEIGHTED)
    assert math.isclose(-res.fun, 5.0, rel_tol=1e-9)
    assert math.isclose(rep.constant, 5.0, rel_tol=1e-6)
    assert abs(rep.witness_lambda - 1.5) < 1e-2


def test_unstable_uncontrollable_is_infinite():
    sys = ControlSystem(np.diag([1.0, -1.0]), [[0.0], [1.0]])
    rep = hesi_constant(sys, 1.0)
    assert math.isinf(rep.constant)
    assert abs(rep.witness_lambda - 1.0) < 1e-9
    assert not hesi_holds(sys, 1.0)


def test_jordan_boundary_value():
    A = np.zeros((4, 4))
    A[:2, :2] = np.diag([1.0, -0.5])
    A[2:, 2:] = [[-2.0, 1.0], [0.0, -2.0]]
    B = np.array([[1.0], [1.0], [0.0], [0.0]])
    sys = ControlSystem(A, B)
    for eps in (1e-2, 1e-3):
        beta = 2 - eps
        d = 2 - beta + 1e-6 * (1 + beta)
        smin = np.linalg.svd(np.array([[d, 0.0], [-1.0, d]]), compute_uv=False)[-1]
        rep = hesi_constant(sys, beta)
        assert math.isclose(rep.constant, smin ** -2, rel_tol=1e-8)
    trend = hesi_offset_trend(sys, 1.99, offsets=(1e-2, 1e-3, 1e-4))
    vals = [v for _, v in trend]
    assert vals[0] < vals[1] < vals[2]


def _brute_force(sys, beta, variant, rep, n=500):
    x_lo, X, ylo, yhi = rep.rectangle
    xs = np.linspace(x_lo, min(X, x_lo + 12), n)
    ys = np.linspace(max(ylo, -12), min(yhi, 12), n)
    L = (xs[:, None] + 1j * ys[None, :]).ravel()
    m = MarginEvaluator(sys)(L)
    w = (L.real + beta) ** 2 if variant is Variant.WEIGHTED else 1.0
    return float(np.max(w / m ** 2))


@given(st.integers(0, 10_000), st.sampled_from([Variant.FLAT, Variant.WEIGHTED]),
       st.sampled_from([0.5, 1.0, 2.0]))
def test_search_dominates_brute_force(seed, variant, beta):
    sys = normal_system(np.random.default_rng(seed), n_hi=4)
    rep = hesi_constant(sys, beta, variant)
    if math.isinf(rep.constant):
        assert not hsf_test(sys) or rep.witness_margin <= 1e-9
        return
    bf = _brute_force(sys, beta, variant, rep)
    assert rep.constant >= bf * (1 - 1e-2)
    assert rep.upper_bound >= rep.constant


@given(st.integers(0, 10_000), st.sampled_from([0.5, 1.0, 2.0]))
def test_shift_invariance_property(seed, alpha):
    sys = normal_system(np.random.default_rng(seed), n_hi=4)
    a = hesi_constant(sys.shifted(alpha), 0.5)
    b = hesi_constant(sys, 0.5 + alpha)
    if math.isinf(a.constant) or math.isinf(b.constant):
        assert math.isinf(a.constant) and math.isinf(b.constant)
        return
    assert abs(a.constant - b.constant) <= 2 * max(a.lipschitz_gap, b.lipschitz_gap)


def test_report_fields_and_config():
    sys = ControlSystem(np.diag([-1.0, 0.5]), [[1.0], [1.0]])
    rep = hesi_constant(sys, 1.0, "FLAT", SearchConfig(grid=32, refine_rounds=2))
    d = rep.as_dict()
    assert d["variant"] == "FLAT" and d["truncation_dim"] == 2
    assert d["converged"] and d["evaluations"] > 0
    assert math.isclose(d["boundary_offset"], 2e-6)
    with pytest.raises(ValueError):
        hesi_constant(sys, 0.0)


def test_hsf_examples():
    assert not hsf_test(ControlSystem(np.diag([1.0, -1.0]), [[0.0], [1.0]]))
    assert hsf_test(ControlSystem(np.diag([1.0, -1.0]), [[1.0], [0.0]]))
    # repeated unstable eigenvalue needs two independent inputs
    res = hsf_test(ControlSystem(np.eye(2), [[1.0], [0.0]]))
    assert not res and abs(res.offenders[0][0] - 1) < 1e-12
    assert hsf_test(ControlSystem(np.eye(2), np.eye(2)))
    # Jordan block controlled from the end of the chain
    assert hsf_test(ControlSystem([[1.0, 1.0], [0.0, 1.0]], [[0.0], [1.0]]))
    assert not hsf_test(ControlSystem([[1.0, 1.0], [0.0, 1.0]], [[1.0], [0.0]]))
    assert not hsf_test(ControlSystem([[0.0]], np.zeros((1, 0))))


@given(st.integers(0, 10_000))
def test_hsf_offender_is_annihilated(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 5))
    d = rng.uniform(-1, 1, n) + 1j * rng.uniform(-1, 1, n)
    B = _cplx(rng, n, 1)
    B[0] = 0
    d[0] = abs(d[0].real) + 0.1
    res = hsf_test(ControlSystem(np.diag(d), B))
    assert not res
    for lam, phi in res.offenders:
        assert np.linalg.norm(B.conj().T @ phi) <= 1e-8
        assert np.linalg.norm((np.diag(d).conj().T - lam * np.eye(n)) @ phi) <= 1e-6
