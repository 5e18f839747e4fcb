"""Feedback synthesis: LQ Riccati gains, decay constants and Laplace witnesses."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg
from scipy.sparse.linalg import expm_multiply

from .core import BlockSystem, ControlSystem, expm_t, kalman_decompose
from .hautus import hsf_test

IMAG_AXIS_TOL = 1e-10
RESIDUAL_RTOL = 1e-8


class NotStabilizable(RuntimeError):
    """No stabilizing feedback at the requested tolerance or rate."""


class RiccatiError(RuntimeError):
    """The Hamiltonian solve produced an unusable solution."""


@dataclass(frozen=True, eq=False)
class RiccatiSolution:
    P: np.ndarray
    residual: float
    Q: np.ndarray
    refined: bool = False
    closed_loop_abscissa: float = math.nan

    @property
    def residual_bound(self) -> float:
        return RESIDUAL_RTOL * (1.0 + float(linalg.norm(self.P, 2)) ** 2)


@dataclass(eq=False)
class FeedbackReport:
    K: np.ndarray
    alpha: float
    C1: float
    C2: float
    certified: bool
    alpha_target: float = 0.0
    riccati: RiccatiSolution | None = None
    details: dict = field(default_factory=dict)

    def closed_loop(self, sys: ControlSystem) -> np.ndarray:
        return sys.A + sys.B @ self.K

    def as_dict(self) -> dict:
        d = {"alpha": self.alpha, "alpha_target": self.alpha_target, "C1": self.C1,
             "C2": self.C2, "certified": self.certified,
             "K_shape": list(self.K.shape)}
        if self.riccati is not None:
            d["riccati_residual"] = self.riccati.residual
            d["riccati_residual_bound"] = self.riccati.residual_bound
            d["riccati_refined"] = self.riccati.refined
        d.update(self.details)
        return d


@dataclass(frozen=True)
class LaplaceWitness:
    lam: complex
    xi: np.ndarray
    eta: np.ndarray
    residual: float


def _herm(M):
    return 0.5 * (M + M.conj().T)


def riccati_residual(A, B, Q, P) -> float:
    return float(linalg.norm(A.conj().T @ P + P @ A - P @ B @ B.conj().T @ P + Q, "fro"))


def solve_lq_riccati(sys: ControlSystem, Q=None, check_hsf: bool = True) -> RiccatiSolution:
    """Stabilizing solution of ``A*P + PA - P BB* P + Q = 0``.

    The stable invariant subspace of the Hamiltonian
    ``[[A, -BB*], [-Q, -A*]]`` is taken from an ordered complex Schur form and
    ``P = U2 U1^{-1}``.  A single Newton correction is applied if the raw
    residual misses ``1e-8 (1 + ||P||^2)``.

    Raises
    ------
    NotStabilizable
        If the kernel test fails or the Hamiltonian has spectrum within
        ``1e-10`` of the imaginary axis.
    RiccatiError
        If the residual or closed-loop stability check fails.
    """
    A, B, n = sys.A, sys.B, sys.n
    Q = np.eye(n, dtype=complex) if Q is None else np.asarray(Q, dtype=complex)
    if check_hsf:
        h = hsf_test(sys)
        if not h:
            lams = ", ".join(f"{l:.6g}" for l, _ in h.offenders)
            raise NotStabilizable(f"uncontrollable modes in the closed right half-plane: {lams}")
    BBh = B @ B.conj().T
    H = np.block([[A, -BBh], [-Q, -A.conj().T]])
    T, Z, sdim = linalg.schur(H, output="complex", sort="lhp")
    ev = np.diag(T)
    tol = IMAG_AXIS_TOL * max(1.0, float(linalg.norm(H, 1)))
    if np.min(np.abs(ev.real)) <= tol or sdim != n:
        raise NotStabilizable("Hamiltonian has eigenvalues on the imaginary axis: "
                              "marginal, not stabilizable at this tolerance")
    U1, U2 = Z[:n, :n], Z[n:, :n]
    try:
        P = linalg.solve(U1.conj().T, U2.conj().T).conj().T
    except linalg.LinAlgError as exc:
        raise RiccatiError("singular U1 block in the Hamiltonian basis") from exc
    P = _herm(P)
    res = riccati_residual(A, B, Q, P)
    refined = False
    if res > RESIDUAL_RTOL * (1 + linalg.norm(P, 2) ** 2):
        Acl = A - BBh @ P
        R = A.conj().T @ P + P @ A - P @ BBh @ P + Q
        X = linalg.solve_continuous_lyapunov(Acl.conj().T, -R)
        P = _herm(P + X)
        res = riccati_residual(A, B, Q, P)
        refined = True
    if res > RESIDUAL_RTOL * (1 + linalg.norm(P, 2) ** 2):
        raise RiccatiError(f"Riccati residual {res:.3g} above tolerance")
    absc = float(np.max(linalg.eigvals(A - BBh @ P).real))
    if absc >= 0:
        raise RiccatiError("closed loop A - BB*P is not stable")
    return RiccatiSolution(P=P, residual=res, Q=Q, refined=refined,
                           closed_loop_abscissa=absc)


def _default_t_grid(alpha: float) -> np.ndarray:
    horizon = min(20.0 / max(alpha, 1e-3), 1e3)
    return np.linspace(0.0, horizon, 201)[1:]


def semigroup_constant(Acl, rate: float, t_grid) -> float:
    """Sampled ``max_t ||exp(Acl t)|| exp(rate t)`` (at least 1)."""
    t_grid = np.asarray(t_grid, dtype=float)
    dt = np.diff(np.concatenate([[0.0], t_grid]))
    if np.allclose(dt, dt[0]):
        E1 = expm_t(Acl, dt[0])
        E = np.eye(Acl.shape[0], dtype=complex)
        vals = []
        for t in t_grid:
            E = E @ E1
            vals.append(linalg.norm(E, 2) * math.exp(rate * t))
    else:
        vals = [linalg.norm(expm_t(Acl, t), 2) * math.exp(rate * t) for t in t_grid]
    return max(1.0, float(np.max(vals)))


def decay_profile_growth(Acl, rate: float, t_grid) -> tuple[float, float]:
    """Sampled ``||exp(Acl t)|| e^{rate t}`` maxima on the first and second half of the grid."""
    t_grid = np.asarray(t_grid, dtype=float)
    h = len(t_grid) // 2
    return (semigroup_constant(Acl, rate, t_grid[:h]),
            semigroup_constant(Acl, rate, t_grid))


def trajectory_decay_rate(Acl, y0, t0: float, t1: float, samples: int = 9) -> float:
    """Least-squares slope of ``-log ||e^{Acl t} y0||`` over ``[t0, t1]``.

    Only products with ``Acl`` are formed (``expm_multiply``), so this stays
    cheap for large truncations.
    """
    if not 0 <= t0 < t1:
        raise ValueError("need 0 <= t0 < t1")
    ts = np.linspace(t0, t1, samples)
    Y = expm_multiply(np.asarray(Acl, dtype=complex), np.asarray(y0, dtype=complex),
                      start=t0, stop=t1, num=samples, endpoint=True)
    logs = np.log(np.maximum(np.linalg.norm(Y, axis=1), 1e-300))
    slope = np.polyfit(ts, logs, 1)[0]
    return float(-slope)


def _energy_constant(Acl, K) -> float:
    if K.size == 0 or not np.any(K):
        return 0.0
    Y = linalg.solve_continuous_lyapunov(Acl.conj().T, -(K.conj().T @ K))
    return math.sqrt(max(float(linalg.eigvalsh(_herm(Y))[-1]), 0.0))


def _closed_loop_report(sys, K, rate_target, riccati, t_grid, details=None) -> FeedbackReport:
    Acl = sys.A + sys.B @ K
    alpha = -float(np.max(linalg.eigvals(Acl).real))
    rate = rate_target if rate_target > 0 else alpha
    if t_grid is None:
        t_grid = _default_t_grid(alpha)
    C1 = semigroup_constant(Acl, rate, t_grid) if alpha > 0 else math.inf
    C2 = _energy_constant(Acl, K) if alpha > 0 else math.inf
    certified = alpha > 0 and alpha >= rate_target - 1e-8
    return FeedbackReport(K=K, alpha=alpha, C1=C1, C2=C2, certified=bool(certified),
                          alpha_target=float(rate_target), riccati=riccati,
                          details=dict(details or {}))


def stabilizing_feedback(sys: ControlSystem, t_grid=None) -> FeedbackReport:
    """LQ feedback ``K = -B*P`` with decay rate and the two closed-loop constants.

    ``C1`` is the sampled ``max_t ||e^{(A+BK)t}|| e^{alpha t}``; ``C2`` is the
    square root of the top eigenvalue of the closed-loop observability Gramian
    of ``K*K``.
    """
    sol = solve_lq_riccati(sys)
    K = -sys.B.conj().T @ sol.P
    return _closed_loop_report(sys, K, 0.0, sol, t_grid)


def rapid_feedback(sys: ControlSystem, alpha_target: float, t_grid=None) -> FeedbackReport:
    """Feedback achieving decay ``alpha_target`` via the shifted pair ``(A + alpha I, B)``."""
    if not alpha_target > 0:
        raise ValueError("alpha_target must be positive")
    shifted = sys.shifted(alpha_target)
    try:
        sol = solve_lq_riccati(shifted)
    except NotStabilizable as exc:
        raise NotStabilizable(f"not stabilizable at rate {alpha_target:g}: {exc}") from exc
    K = -sys.B.conj().T @ sol.P
    return _closed_loop_report(sys, K, alpha_target, sol, t_grid)


def optimal_decay_rate(sys: ControlSystem, cluster_rtol: float = 1e-6) -> tuple[float, bool]:
    """Optimal decay rate and whether it is attained.

    Returns ``(inf, True)`` for controllable pairs.  Otherwise the rate is
    minus the spectral abscissa of the uncontrollable block, attained iff
    every eigenvalue on that vertical line is semisimple.
    """
    kd = kalman_decompose(sys)
    if kd.nc == sys.n:
        return math.inf, True
    A3 = kd.A3
    ev = linalg.eigvals(A3)
    scale = max(1.0, float(linalg.norm(A3, 2)))
    tol = cluster_rtol * scale
    top = float(np.max(ev.real))
    if top >= -1e-10:
        raise NotStabilizable("uncontrollable part is not stable")
    lead = ev[ev.real >= top - math.sqrt(tol)]
    reachable = True
    done = []
    for lam in lead:
        if any(abs(lam - d) <= math.sqrt(tol) for d in done):
            continue
        grp = ev[np.abs(ev - lam) <= math.sqrt(tol)]
        done.append(lam)
        c = complex(np.mean(grp))
        s = linalg.svd(A3 - c * np.eye(A3.shape[0]), compute_uv=False)
        geo = int(np.sum(s <= tol))
        if geo < len(grp):
            reachable = False
    return -top, reachable


def optimal_rate_feedback(sys: ControlSystem, t_grid=None, margin: float = 1.0) -> FeedbackReport:
    """Feedback aiming at the optimal rate itself.

    The controllable block is pushed left of ``-(sigma + margin)`` by a
    shifted Riccati gain; the uncontrollable block is untouched.  The report
    is certified when the sampled ``||e^{(A+BK)t}|| e^{sigma t}`` stays flat
    over the second half of the grid, which fails for defective leading
    eigenvalues.
    """
    sigma, _ = optimal_decay_rate(sys)
    if not math.isfinite(sigma):
        raise ValueError("controllable pair: every rate is attainable")
    kd = kalman_decompose(sys)
    nc = kd.nc
    if nc:
        sub = ControlSystem(kd.A1, kd.B1)
        K1 = rapid_feedback(sub, sigma + margin).K
        K = np.hstack([K1, np.zeros((sys.m, sys.n - nc))]) @ kd.P
    else:
        K = np.zeros((sys.m, sys.n), dtype=complex)
    if t_grid is None:
        t_grid = np.linspace(0.0, 40.0 / sigma, 401)[1:]
    Acl = sys.A + sys.B @ K
    first, full = decay_profile_growth(Acl, sigma, t_grid)
    rep = _closed_loop_report(sys, K, 0.0, None, t_grid)
    rep.alpha_target = sigma
    rep.C1 = full
    rep.certified = bool(full <= first * (1 + 1e-3))
    rep.details.update({"sigma_sharp": sigma, "C1_first_half": first, "C1_full": full})
    return rep


# --- modal feedback on the slow invariant subspace ---------------------------------------

def slow_left_subspace(sys: ControlSystem, cut: float) -> np.ndarray:
    """Orthonormal basis ``W`` of the ``A*``-invariant subspace for ``Re > cut``."""
    sel = lambda z: z.real > cut  # noqa: E731
    if isinstance(sys, BlockSystem):
        cols = []
        for idx, Ab in zip(sys.blocks, sys.block_matrices()):
            T, Z, k = linalg.schur(Ab.conj().T, output="complex", sort=sel)
            if k:
                W = np.zeros((sys.n, k), dtype=complex)
                W[idx] = Z[:, :k]
                cols.append(W)
        return np.hstack(cols) if cols else np.zeros((sys.n, 0), dtype=complex)
    T, Z, k = linalg.schur(sys.A.conj().T, output="complex", sort=sel)
    return Z[:, :k]


def modal_rapid_feedback(sys: ControlSystem, alpha_target: float, cut: float | None = None,
                         verify_max_n: int = 3000) -> FeedbackReport:
    """Rapid feedback acting only through the slow left-invariant subspace.

    With ``W`` spanning the ``A*``-invariant subspace of eigenvalues with real
    part above ``cut`` (default ``-(alpha_target + 1)``), the coordinates
    ``z = W* x`` obey ``z' = (W* A W) z + W* B u`` exactly.  A shifted Riccati
    gain ``K_r`` for this reduced pair gives ``K = K_r W*``; the closed-loop
    spectrum is that of the reduced loop together with the untouched
    eigenvalues below ``cut``.  The full closed-loop spectrum is recomputed
    when ``n <= verify_max_n``.
    """
    cut = -(alpha_target + 1.0) if cut is None else cut
    if cut >= -alpha_target:
        raise ValueError("cut must lie left of -alpha_target")
    W = slow_left_subspace(sys, cut)
    r = W.shape[1]
    Ar = W.conj().T @ sys.A @ W
    Br = W.conj().T @ sys.B
    if r:
        red = rapid_feedback(ControlSystem(Ar, Br), alpha_target)
        K = red.K @ W.conj().T
        red_alpha = red.alpha
        ric = red.riccati
    else:
        K = np.zeros((sys.m, sys.n), dtype=complex)
        red_alpha, ric = math.inf, None
    details = {"reduced_dim": r, "cut": cut, "reduced_alpha": red_alpha}
    if sys.n <= verify_max_n:
        Acl = sys.A + sys.B @ K
        alpha = -float(np.max(linalg.eigvals(Acl).real))
        details["verified_full_spectrum"] = True
    else:
        alpha = min(red_alpha, -cut)
        details["verified_full_spectrum"] = False
    return FeedbackReport(K=K, alpha=alpha, C1=math.nan, C2=math.nan,
                          certified=bool(alpha >= alpha_target - 1e-8),
                          alpha_target=alpha_target, riccati=ric, details=details)


# --- Laplace witness ------------------------------------------------------------------

def default_lambda_grid(beta: float, n_re: int = 15, n_im: int = 15) -> np.ndarray:
    re = -beta + np.logspace(np.log10(0.01), np.log10(10.0 + beta), n_re)
    im = np.linspace(-20.0, 20.0, n_im)
    return (re[:, None] + 1j * im[None, :]).ravel()


def laplace_quadrature(Acl, y0, lam: complex, rate: float, order: int = 16) -> np.ndarray:
    """``int_0^inf e^{-lam t} e^{Acl t} y0 dt`` by panelled Gauss-Legendre quadrature."""
    decay = lam.real + rate
    T = 40.0 / decay
    nrm = float(linalg.norm(Acl, 2))
    panels = int(max(64, math.ceil(T * (abs(lam) + nrm) / 2.0)))
    h = T / panels
    x, w = np.polynomial.legendre.leggauss(order)
    nodes = 0.5 * h * (x + 1)
    Eh = expm_t(Acl, h)
    En = np.stack([expm_t(Acl, t) @ y0 for t in nodes], axis=1)
    ph = np.exp(-lam * nodes)
    step = np.exp(-lam * h)
    acc = np.zeros(Acl.shape[0], dtype=complex)
    y = np.eye(Acl.shape[0], dtype=complex)
    fac = 1.0 + 0j
    for _ in range(panels):
        acc += fac * (y @ (En @ (0.5 * h * w * ph)))
        y = Eh @ y
        fac *= step
    return acc


def laplace_identity_check(sys: ControlSystem, report: FeedbackReport, y0, lambda_grid=None,
                           beta: float = 0.5, quad_points: int = 3) -> dict:
    """Resolvent witnesses ``(xi, eta)`` over a frequency grid in ``Re lam > -beta``.

    Returns a dict with the witnesses, the fitted constants ``C`` and ``D``
    (``||xi|| <= C ||y0|| / (Re lam + beta)``, ``||eta|| <= D ||y0|| / sqrt(Re lam + beta)``),
    the worst identity residual and the quadrature cross-check errors.
    """
    if not beta < report.alpha:
        raise ValueError("beta must be smaller than the closed-loop decay rate")
    y0 = np.asarray(y0, dtype=complex).ravel()
    lams = default_lambda_grid(beta) if lambda_grid is None else np.asarray(lambda_grid, complex).ravel()
    if np.any(lams.real <= -beta):
        raise ValueError("lambda grid must lie in Re lam > -beta")
    K = report.K
    Acl = sys.A + sys.B @ K
    n = sys.n
    ny = float(linalg.norm(y0))
    wit = []
    C = D = 0.0
    worst = 0.0
    for lam in lams:
        xi = linalg.solve(lam * np.eye(n) - Acl, y0)
        eta = -K @ xi
        res = float(linalg.norm((lam * np.eye(n) - sys.A) @ xi + sys.B @ eta - y0))
        wit.append(LaplaceWitness(complex(lam), xi, eta, res))
        if ny > 0:
            s = lam.real + beta
            C = max(C, float(linalg.norm(xi)) * s / ny)
            D = max(D, float(linalg.norm(eta)) * math.sqrt(s) / ny)
            worst = max(worst, res / ny)
    quad = []
    if ny > 0 and quad_points:
        picks = np.linspace(0, len(lams) - 1, quad_points).round().astype(int)
        for i in picks:
            q = laplace_quadrature(Acl, y0, complex(lams[i]), report.alpha)
            x = wit[i].xi
            quad.append((complex(lams[i]), float(linalg.norm(q - x) / max(linalg.norm(x), 1e-300))))
    return {"witnesses": wit, "C": C, "D": D, "max_relative_residual": worst,
            "quadrature": quad, "beta": beta, "grid_size": len(lams)}
