"""Hautus margins, HESI constants and the finite-dimensional kernel test.

The margin at a frequency ``lam`` is the smallest singular value of the
stacked matrix ``[(lam I - A*); B*]``.  HESI constants are suprema of

* ``WEIGHTED``: ``(Re lam + beta)^2 / margin(lam)^2``
* ``FLAT``:     ``1 / margin(lam)^2``

over the half-plane ``Re lam > -beta``.  The search evaluates a coarse grid
on a rectangle outside of which a tail bound caps the objective, then refines
locally around the largest values.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy import linalg, optimize

from .core import (BlockSystem, ControlSystem, SemigroupBounds, SpectralSystem,
                   is_diagonal, spectrum, system_is_normal)

UNSTABLE_TOL = 1e-10
DEFAULT_THRESHOLD = 1e12


class Variant(str, Enum):
    WEIGHTED = "WEIGHTED"
    FLAT = "FLAT"


class SearchNotConverged(RuntimeError):
    def __init__(self, report):
        super().__init__(f"HESI search did not converge (bracket {report.constant:.6g}"
                         f" .. {report.upper_bound:.6g})")
        self.report = report


@dataclass(frozen=True)
class SearchConfig:
    """Tuning knobs of the HESI maximisation.

    ``offset=None`` means ``1e-6 * (1 + beta)``.
    """

    grid: int = 64
    refine_rounds: int = 4
    refine_top: int = 5
    refine_points: int = 9
    offset: float | None = None
    tail_rtol: float = 1e-2
    conv_rtol: float = 1e-2
    max_evals: int = 200_000
    max_seeds: int = 256
    jobs: int = 1

    def boundary_offset(self, beta: float) -> float:
        return 1e-6 * (1.0 + beta) if self.offset is None else float(self.offset)


@dataclass
class HesiReport:
    beta: float
    variant: Variant
    constant: float
    witness_lambda: complex
    search_trace: list = field(default_factory=list)
    truncation_dim: int = 0
    converged: bool = True
    boundary_offset: float = 0.0
    rectangle: tuple = ()
    tail_bound: float = 0.0
    upper_bound: float = math.inf
    lipschitz_gap: float = 0.0
    asymptotic: bool = False
    witness_margin: float = math.nan
    evaluations: int = 0

    @property
    def finite(self) -> bool:
        return math.isfinite(self.constant)

    def as_dict(self) -> dict:
        return {
            "beta": self.beta, "variant": self.variant.value,
            "constant": self.constant,
            "witness": [self.witness_lambda.real, self.witness_lambda.imag],
            "witness_margin": self.witness_margin,
            "converged": self.converged, "asymptotic": self.asymptotic,
            "boundary_offset": self.boundary_offset,
            "rectangle": list(self.rectangle), "tail_bound": self.tail_bound,
            "upper_bound": self.upper_bound, "lipschitz_gap": self.lipschitz_gap,
            "truncation_dim": self.truncation_dim, "evaluations": self.evaluations,
            "search_trace": [{"rectangle": list(r), "local_max": v}
                             for r, v in self.search_trace],
        }


# --- margins ----------------------------------------------------------------

def stacked_min_singular(sys: ControlSystem, lam: complex) -> float:
    """Smallest singular value of ``[(lam I - A*); B*]`` by a dense SVD."""
    n = sys.n
    S = np.vstack([lam * np.eye(n) - sys.A.conj().T, sys.B.conj().T])
    return float(linalg.svd(S, compute_uv=False)[-1])


class MarginEvaluator:
    """Vectorised ``lam -> margin(lam)`` exploiting diagonal or block structure.

    Gram-matrix paths lose accuracy below roughly ``sqrt(eps) * ||A||``; such
    values are recomputed by a dense SVD when the dimension allows it.
    """

    SVD_MAX_N = 48
    RECHECK_MAX_N = 700

    def __init__(self, sys: ControlSystem):
        self.sys = sys
        self.n = sys.n
        self.As = np.ascontiguousarray(sys.A.conj().T)
        self.Bs = np.ascontiguousarray(sys.B.conj().T)
        self.BBh = sys.B @ sys.B.conj().T
        self.normA = self._norm_A()
        self.scale = max(self.normA, float(linalg.norm(sys.B, 2)) if sys.m else 0.0, 1.0)
        self.zero_tol = 1e-12 * max(self.normA, 1.0)
        self.diag = isinstance(sys, SpectralSystem) or is_diagonal(sys.A)
        self.block = isinstance(sys, BlockSystem) and not self.diag
        if self.diag:
            self.d = np.diag(self.As).copy()
            self.path = "svd" if self.n <= self.SVD_MAX_N else "gram-diag"
        elif self.block:
            self._prep_blocks()
            self.path = "block"
        else:
            self.AAh = sys.A @ sys.A.conj().T
            self.path = "svd" if self.n <= self.SVD_MAX_N else "gram"
        self.gram_floor = 0.0 if self.path == "svd" else 3e-8 * self.scale

    def _norm_A(self) -> float:
        sys = self.sys
        if isinstance(sys, SpectralSystem) or is_diagonal(sys.A):
            return float(np.max(np.abs(np.diag(sys.A))))
        if isinstance(sys, BlockSystem):
            return max(float(linalg.norm(a, 2)) for a in sys.block_matrices())
        return float(linalg.norm(sys.A, 2))

    def _prep_blocks(self):
        sys = self.sys
        self.bl = [np.ascontiguousarray(a.conj().T) for a in sys.block_matrices()]
        sizes = {len(b) for b in sys.blocks}
        self.uniform = len(sizes) == 1 and len(set(sys.ports)) == 1
        self.shared_rest = False
        if self.uniform:
            # blocks that differ only in the port column share the eigenbasis
            # of the non-port Gram block
            p = sys.ports[0]
            s = len(sys.blocks[0])
            rest = np.r_[0:p, p + 1:s]
            R0 = self.bl[0][:, rest]
            self.shared_rest = all(np.array_equal(b[:, rest], R0) for b in self.bl[1:])
        ports = sys.port_indices()
        Bp = sys.B[ports]
        self.Cport = Bp @ Bp.conj().T

    def __call__(self, lams) -> np.ndarray:
        lams = np.atleast_1d(np.asarray(lams, dtype=complex))
        if self.path == "block":
            out = np.array([self._block_margin(l) for l in lams])
        else:
            out = np.empty(len(lams))
            per = max(1, int(4e6 // ((self.n + self.sys.m) * self.n)))
            for s in range(0, len(lams), per):
                out[s:s + per] = self._dense_chunk(lams[s:s + per])
        if self.gram_floor > 0 and self.n <= self.RECHECK_MAX_N:
            low = np.nonzero(out < self.gram_floor)[0]
            for i in low:
                out[i] = stacked_min_singular(self.sys, lams[i])
        return out

    def _dense_chunk(self, lams):
        n = self.n
        if self.path == "svd":
            k = len(lams)
            S = np.empty((k, n + self.sys.m, n), dtype=complex)
            S[:, :n, :] = -self.As
            idx = np.arange(n)
            if self.diag:
                S[:, :n, :] = 0
                S[:, idx, idx] = lams[:, None] - self.d[None, :]
            else:
                S[:, idx, idx] += lams[:, None]
            S[:, n:, :] = self.Bs
            return np.linalg.svd(S, compute_uv=False)[:, -1]
        if self.path == "gram-diag":
            G = np.broadcast_to(self.BBh, (len(lams), n, n)).copy()
            idx = np.arange(n)
            G[:, idx, idx] += np.abs(lams[:, None] - self.d[None, :]) ** 2
        else:
            # (lam - A*)^H (lam - A*) = |lam|^2 - conj(lam) A* - lam A + A A*
            G = (self.AAh + self.BBh)[None, :, :] \
                - np.conj(lams)[:, None, None] * self.As[None] \
                - lams[:, None, None] * self.sys.A[None]
            idx = np.arange(n)
            G[:, idx, idx] += (np.abs(lams) ** 2)[:, None]
        w = np.linalg.eigvalsh(G)[:, 0]
        return np.sqrt(np.maximum(w, 0.0))

    def _block_margin(self, lam: complex) -> float:
        sys = self.sys
        a_list, c_list, d_list = [], [], []
        if self.uniform:
            As = np.stack(self.bl)
            s = As.shape[1]
            M = -As
            M[:, np.arange(s), np.arange(s)] += lam
            G = np.conj(np.swapaxes(M, 1, 2)) @ M
            p = sys.ports[0]
            rest = np.r_[0:p, p + 1:s]
            a = G[:, p, p].real
            c = G[:, rest, p]
            if self.shared_rest:
                w, V = np.linalg.eigh(G[0][np.ix_(rest, rest)])
                ct = c @ V.conj()
                w = np.broadcast_to(w, ct.shape)
            else:
                w, V = np.linalg.eigh(G[:, rest][:, :, rest])
                ct = np.einsum("kji,kj->ki", V.conj(), c)
            a_list, c_list, d_list = a, np.abs(ct) ** 2, w
        else:
            for Ab, p in zip(self.bl, sys.ports):
                s = Ab.shape[0]
                M = lam * np.eye(s) - Ab
                G = M.conj().T @ M
                rest = np.r_[0:p, p + 1:s]
                w, V = np.linalg.eigh(G[np.ix_(rest, rest)])
                a_list.append(G[p, p].real)
                c_list.append(np.abs(V.conj().T @ G[rest, p]) ** 2)
                d_list.append(w)
            a_list = np.array(a_list)
        upper = min(float(np.min(d)) if len(d) else math.inf for d in d_list)
        C = self.Cport
        if self.uniform:
            def schur(mu):
                return a_list - mu - np.sum(c_list / (d_list - mu), axis=1)
        else:
            def schur(mu):
                return np.array([a - mu - np.sum(c / (d - mu))
                                 for a, c, d in zip(a_list, c_list, d_list)])

        def f(mu):
            return float(np.linalg.eigvalsh(C + np.diag(schur(mu)))[0])

        hi = upper * (1 - 1e-13) if math.isfinite(upper) else None
        if hi is None:
            vals = np.linalg.eigvalsh(C + np.diag(a_list))
            return math.sqrt(max(vals[0], 0.0))
        if f(hi) >= 0:
            return math.sqrt(max(upper, 0.0))
        f0 = f(0.0)
        if f0 <= 0:
            return 0.0
        mu = optimize.brentq(f, 0.0, hi, xtol=1e-15 * max(upper, 1.0), rtol=1e-14)
        return math.sqrt(max(mu, 0.0))


# --- HESI search --------------------------------------------------------------

def _axis(lo, hi, core_lo, core_hi, n):
    """Grid axis: linear in the core, geometric towards far edges."""
    core_lo, core_hi = max(lo, core_lo), min(hi, core_hi)
    width = hi - lo
    if width <= 0:
        return np.array([lo])
    core = core_hi - core_lo
    if core <= 0 or width <= 4 * core:
        return np.linspace(lo, hi, n)
    left, right = core_lo - lo, hi - core_hi
    n_tail = n // 2
    nl = int(round(n_tail * left / (left + right))) if left + right > 0 else 0
    nr = n_tail - nl
    nc = n - n_tail
    pts = [np.linspace(core_lo, core_hi, nc)]
    step = core / max(nc - 1, 1)
    if nl > 0 and left > 0:
        pts.append(core_lo - np.geomspace(min(step, left), left, nl))
    if nr > 0 and right > 0:
        pts.append(core_hi + np.geomspace(min(step, right), right, nr))
    return np.unique(np.concatenate(pts))


def _local_steps(axis, values):
    idx = np.searchsorted(axis, values)
    idx = np.clip(idx, 1, len(axis) - 1) if len(axis) > 1 else idx
    if len(axis) == 1:
        return np.full(len(values), 1.0)
    lo = axis[np.clip(idx - 1, 0, len(axis) - 1)]
    hi = axis[np.clip(idx, 0, len(axis) - 1)]
    nxt = axis[np.clip(idx + 1, 0, len(axis) - 1)]
    return np.maximum(np.maximum(hi - lo, nxt - hi), 1e-300)


def _dist_to(lams, mu, chunk=2048):
    out = np.empty(len(lams))
    for s in range(0, len(lams), chunk):
        out[s:s + chunk] = np.min(np.abs(lams[s:s + chunk, None] - mu[None, :]), axis=1)
    return out


def _objective(variant, lams, margins, beta):
    with np.errstate(divide="ignore"):
        if variant is Variant.WEIGHTED:
            return (lams.real + beta) ** 2 / margins ** 2
        return 1.0 / margins ** 2


def _tail_box(mu, normal, normA, beta, x_lo, variant, M, tail_rtol, cap_scale):
    """Rectangle outside of which the objective stays below ``M (1 + tail_rtol)``.

    Returns ``(X, ylo, yhi, tail_bound, core)`` where ``core`` is the
    rectangle holding the relevant spectrum.
    """
    Mp = M * (1.0 + tail_rtol)
    if normal:
        if variant is Variant.FLAT:
            d = 1.0 / math.sqrt(Mp)
            rel = mu[mu.real >= x_lo - d]
        else:
            rel = mu[mu.real >= -beta]
    else:
        rel = np.array([complex(normA, normA), complex(-normA, -normA)])
        d = 1.0 / math.sqrt(Mp)
    if len(rel) == 0:
        return None
    p_hi = float(np.max(rel.real))
    q_lo, q_hi = float(np.min(rel.imag)), float(np.max(rel.imag))
    core = (x_lo, max(x_lo, p_hi), q_lo, q_hi)
    if variant is Variant.FLAT:
        X = max(x_lo, p_hi) + d
        return X, q_lo - d, q_hi + d, M, core
    k = math.sqrt(Mp)
    cap = max(x_lo, p_hi) + cap_scale
    if k > 1:
        X = min(max((beta + k * p_hi) / (k - 1), p_hi + 1.0), cap)
    else:
        X = cap
    X = max(X, x_lo + 1.0)
    Y = (X + beta) / k
    tail = max(((X + beta) / (X - p_hi)) ** 2 if X > p_hi else math.inf, k * k)
    return X, q_lo - Y, q_hi + Y, tail, core


def hesi_constant(sys: ControlSystem, beta: float, variant=Variant.FLAT,
                  search: SearchConfig | None = None,
                  evaluator: MarginEvaluator | None = None) -> HesiReport:
    """Estimate the HESI constant of ``sys`` on ``Re lam > -beta``.

    Parameters
    ----------
    sys : ControlSystem
    beta : float
        Half-plane parameter, ``beta > 0``.
    variant : Variant or str
        ``WEIGHTED`` or ``FLAT``.
    search : SearchConfig, optional

    Returns
    -------
    HesiReport
        ``constant`` is ``inf`` when the margin vanishes (to ``1e-12 ||A||``)
        at a searched frequency.  For ``WEIGHTED`` the supremum is at least 1,
        the limit of the objective as ``Re lam -> inf``; when that limit wins
        the witness is placed on the far edge and ``asymptotic`` is set.
    """
    if not beta > 0:
        raise ValueError("beta must be positive")
    variant = Variant(variant)
    search = search or SearchConfig()
    ev = evaluator or MarginEvaluator(sys)
    ofs = search.boundary_offset(beta)
    x_lo = -beta + ofs
    mu = np.conj(spectrum(sys))
    normal = system_is_normal(sys)
    report = HesiReport(beta=float(beta), variant=variant, constant=0.0,
                        witness_lambda=complex(x_lo), truncation_dim=sys.n,
                        boundary_offset=ofs)

    pts, vals, marg, steps = [], [], [], []
    # for normal A, margin >= dist(lam, spectrum) caps the objective cheaply
    prune = normal and len(mu) > 0

    def exact(lams):
        if search.jobs > 1 and len(lams) > 64:
            chunks = np.array_split(lams, search.jobs * 4)
            with ThreadPoolExecutor(search.jobs) as ex:
                return np.concatenate(list(ex.map(ev, chunks)))
        return ev(lams)

    def evaluate(lams, hx, hy, floor=None):
        lams = np.asarray(lams, dtype=complex)
        if len(lams) == 0:
            return np.zeros(0)
        if prune and floor is not None:
            lb = _dist_to(lams, mu)
            with np.errstate(divide="ignore"):
                ub = _objective(variant, lams, lb, beta)
            need = ub > floor
            m = lb.copy()
            if np.any(need):
                m[need] = exact(lams[need])
            v = _objective(variant, lams, m, beta)
            v[~need] = -math.inf
        else:
            m = exact(lams)
            v = _objective(variant, lams, m, beta)
        v[m <= ev.zero_tol] = math.inf
        pts.append(lams)
        vals.append(v)
        marg.append(m)
        steps.append(np.column_stack([np.broadcast_to(hx, len(lams)),
                                      np.broadcast_to(hy, len(lams))]))
        report.evaluations += len(lams)
        return v

    def finish_infinite():
        P = np.concatenate(pts)
        V = np.concatenate(vals)
        i = int(np.argmax(V))
        report.constant = math.inf
        report.upper_bound = math.inf
        report.witness_lambda = complex(P[i])
        report.witness_margin = float(np.concatenate(marg)[i])
        return report

    # seeds: spectrum inside the region and its projection onto the boundary
    inside = mu[mu.real >= x_lo]
    outside = mu[mu.real < x_lo]
    if len(outside) > search.max_seeds:
        outside = outside[np.argsort(x_lo - outside.real)[:search.max_seeds]]
    if len(inside) > search.max_seeds:
        inside = inside[np.argsort(inside.real)[:search.max_seeds]]
    seeds = np.unique(np.concatenate([[complex(x_lo)], inside,
                                      x_lo + 1j * outside.imag]))
    sv = evaluate(seeds, 0.0, 0.0)
    if np.any(np.isposinf(sv)):
        return finish_infinite()
    M0 = float(np.max(sv))
    if variant is Variant.WEIGHTED:
        M0 = max(M0, 1.0)

    scale = max(1.0, beta, ev.normA if not normal else 0.0)
    box = _tail_box(mu, normal, ev.normA, beta, x_lo, variant, M0,
                    search.tail_rtol, cap_scale=1e3 * scale)
    if box is None:
        X, ylo, yhi, tail = x_lo + scale, -scale, scale, (1.0 if variant is Variant.WEIGHTED else M0)
        core = (x_lo, x_lo, 0.0, 0.0)
    else:
        X, ylo, yhi, tail, core = box
    report.rectangle = (x_lo, X, ylo, yhi)
    report.tail_bound = float(tail)

    G = search.grid
    cs = max(scale, core[1] - core[0], core[3] - core[2]) * 0.25
    xs = _axis(x_lo, X, core[0], core[1] + cs, G)
    ys = _axis(ylo, yhi, core[2] - cs, core[3] + cs, G)
    XX, YY = np.meshgrid(xs, ys, indexing="ij")
    lam_grid = (XX + 1j * YY).ravel()
    hx = np.repeat(_local_steps(xs, xs), len(ys))
    hy = np.tile(_local_steps(ys, ys), len(xs))
    gv = evaluate(lam_grid, hx, hy, floor=M0 if variant is Variant.FLAT else float(np.max(sv)))
    report.search_trace.append(((x_lo, X, ylo, yhi), float(np.max(gv))))
    if np.any(np.isposinf(gv)):
        return finish_infinite()

    # coarse-grid Lipschitz certificate: margin >= m(c) - r on each cell
    mg = marg[-1]
    r = 0.5 * np.hypot(hx, hy)
    lower_m = np.maximum(mg - r, 0.0)
    with np.errstate(divide="ignore"):
        wmax = (lam_grid.real + r + beta) ** 2 if variant is Variant.WEIGHTED else 1.0
        cert = np.max(np.where(lower_m > 0, wmax / lower_m ** 2, math.inf))

    # local refinement
    k = search.refine_points
    refined = set()
    prev_best = float(max(np.max(gv), M0 if variant is Variant.FLAT else np.max(sv)))
    best = prev_best
    converged = True
    for rnd in range(search.refine_rounds):
        P = np.concatenate(pts)
        V = np.concatenate(vals)
        H = np.concatenate(steps)
        order = np.argsort(-V, kind="stable")
        picked = []
        for i in order:
            key = (round(P[i].real, 14), round(P[i].imag, 14), round(H[i, 0], 16))
            if key in refined:
                continue
            refined.add(key)
            picked.append(i)
            if len(picked) >= search.refine_top:
                break
        new_best = best
        for i in picked:
            h_x, h_y = H[i]
            if h_x == 0.0:
                h_x = h_y = float(np.min(hx))
            xl = np.linspace(max(P[i].real - h_x, x_lo), min(P[i].real + h_x, X), k)
            yl = np.linspace(P[i].imag - h_y, P[i].imag + h_y, k)
            LX, LY = np.meshgrid(xl, yl, indexing="ij")
            loc = (LX + 1j * LY).ravel()
            lv = evaluate(loc, 2 * h_x / (k - 1), 2 * h_y / (k - 1), floor=new_best)
            if np.any(np.isposinf(lv)):
                return finish_infinite()
            report.search_trace.append(((xl[0], xl[-1], yl[0], yl[-1]), float(np.max(lv))))
            new_best = max(new_best, float(np.max(lv)))
        prev_best, best = best, new_best
        if report.evaluations > search.max_evals:
            converged = False
            break
    if best > 0 and (best - prev_best) > search.conv_rtol * best:
        converged = False

    P = np.concatenate(pts)
    V = np.concatenate(vals)
    Mg = np.concatenate(marg)
    H = np.concatenate(steps)
    i = int(np.argmax(V))
    report.constant = float(V[i])
    report.witness_lambda = complex(P[i])
    report.witness_margin = float(Mg[i])
    h = float(np.hypot(*H[i])) / 2 if H[i, 0] > 0 else float(np.min(r))
    m_lo = max(Mg[i] - h, 0.0)
    w_hi = (P[i].real + h + beta) ** 2 if variant is Variant.WEIGHTED else 1.0
    report.lipschitz_gap = float(w_hi / m_lo ** 2 - report.constant) if m_lo > 0 else math.inf
    if variant is Variant.WEIGHTED and report.constant < 1.0:
        report.constant = 1.0
        report.asymptotic = True
        report.witness_lambda = complex(X, 0.5 * (ylo + yhi))
        report.lipschitz_gap = 0.0
    tail_ok = report.tail_bound <= report.constant * (1.0 + search.tail_rtol) * (1 + 1e-12)
    report.converged = bool(converged and tail_ok)
    report.upper_bound = float(max(cert, report.tail_bound, report.constant))
    return report


def hesi_offset_trend(sys, beta, variant=Variant.FLAT, offsets=(1e-2, 1e-3, 1e-4, 1e-5, 1e-6),
                      search: SearchConfig | None = None) -> list[tuple[float, float]]:
    """Constants for a decreasing sequence of boundary offsets."""
    base = search or SearchConfig()
    ev = MarginEvaluator(sys)
    out = []
    for o in offsets:
        cfg = SearchConfig(**{**base.__dict__, "offset": float(o)})
        out.append((float(o), hesi_constant(sys, beta, variant, cfg, evaluator=ev).constant))
    return out


def hesi_holds(sys, beta, variant=Variant.FLAT, threshold: float = DEFAULT_THRESHOLD,
               search: SearchConfig | None = None) -> bool:
    """True iff the searched constant is finite and at most ``threshold``.

    Raises
    ------
    SearchNotConverged
        When the search did not converge and its bracket straddles the
        threshold.
    """
    rep = hesi_constant(sys, beta, variant, search)
    if not rep.finite:
        return False
    if rep.constant > threshold:
        return False
    if not rep.converged and rep.upper_bound > threshold:
        raise SearchNotConverged(rep)
    return True


# --- kernel test ------------------------------------------------------------------

@dataclass
class HsfResult:
    holds: bool
    offenders: list = field(default_factory=list)

    def __bool__(self):
        return self.holds


def _clusters(vals, tol):
    order = np.argsort(vals.real, kind="stable")
    groups = []
    for i in order:
        for g in groups:
            if abs(vals[i] - np.mean(vals[g])) <= tol:
                g.append(i)
                break
        else:
            groups.append([i])
    return groups


def hsf_test(sys: ControlSystem, tol: float | None = None) -> HsfResult:
    """Hautus kernel test on the closed right half-plane.

    Every eigenvalue ``lam`` of ``A*`` with ``Re lam >= -1e-10`` is checked
    for an eigenvector annihilated by ``B*``.  Degenerate eigenspaces are
    handled through ``sigma_min(B* V)`` with ``V`` an orthonormal eigenbasis.

    Returns
    -------
    HsfResult
        Truthy iff no offending eigenpair exists; ``offenders`` holds
        ``(lam, phi)`` pairs otherwise.
    """
    As = sys.A.conj().T
    Bs = sys.B.conj().T
    normA = max(float(np.max(np.abs(np.diag(As)))) if is_diagonal(As)
                else float(linalg.norm(As, 2)), 1.0)
    if tol is None:
        tol = 1e-8 * max(1.0, float(linalg.norm(Bs, 2)) if sys.m else 1.0)
    mu = np.conj(spectrum(sys))
    cand = mu[mu.real >= -UNSTABLE_TOL]
    offenders = []
    if len(cand) == 0:
        return HsfResult(True, [])
    diag = is_diagonal(As)
    for g in _clusters(cand, 1e-6 * normA):
        lam = complex(np.mean(cand[g]))
        if diag:
            dvals = np.diag(As)
            idx = np.nonzero(np.abs(dvals - lam) <= 1e-6 * normA)[0]
            V = np.eye(sys.n, dtype=complex)[:, idx]
        else:
            M = lam * np.eye(sys.n) - As
            _, s, Vh = linalg.svd(M)
            k = max(1, int(np.sum(s <= 1e-6 * normA)))
            V = Vh[-k:].conj().T
        if sys.m == 0:
            offenders.append((lam, V[:, 0]))
            continue
        _, s, Wh = linalg.svd(Bs @ V)
        if s.size < V.shape[1] or s[-1] <= tol:
            w = Wh[-1].conj() if s.size == V.shape[1] else linalg.null_space(Bs @ V)[:, 0]
            offenders.append((lam, V @ w))
    return HsfResult(not offenders, offenders)


# --- equivalence of the two formulations ---------------------------------------------

def hesi_equivalence_check(sys: ControlSystem, beta: float, bounds: SemigroupBounds,
                           beta1: float | None = None, search: SearchConfig | None = None,
                           rtol: float = 1e-6) -> dict:
    """Check the constant chain linking the weighted and flat formulations.

    Verifies ``W(beta) <= (beta + M)^2 F(beta) + 4 C^2`` with
    ``M = max(omega, 2|beta - omega| - beta)`` and
    ``F(beta1) <= W(beta) / (beta - beta1)^2`` for ``beta1 < beta``.
    """
    beta1 = beta / 2 if beta1 is None else beta1
    if not 0 < beta1 < beta:
        raise ValueError("need 0 < beta1 < beta")
    W = hesi_constant(sys, beta, Variant.WEIGHTED, search)
    F = hesi_constant(sys, beta, Variant.FLAT, search)
    F1 = hesi_constant(sys, beta1, Variant.FLAT, search)
    om, C = bounds.omega, bounds.C_omega
    Mw = max(om, 2 * abs(beta - om) - beta)
    wb = (beta + Mw) ** 2 * F.constant + 4 * C ** 2 if F.finite else math.inf
    fb = W.constant / (beta - beta1) ** 2 if W.finite else math.inf

    def le(a, b, gap):
        if math.isinf(b):
            return True
        return a <= b * (1 + rtol) + gap

    first = (not F.finite) or (W.finite and le(W.constant, wb, max(W.lipschitz_gap, 0)))
    second = (not W.finite) or (F1.finite and le(F1.constant, fb, max(F1.lipschitz_gap, 0)))
    return {
        "beta": beta, "beta1": beta1, "omega": om, "C_omega": C,
        "weighted": W.constant, "flat": F.constant, "flat_beta1": F1.constant,
        "weighted_bound": wb, "flat_beta1_bound": fb,
        "weighted_from_flat_holds": bool(first),
        "flat_from_weighted_holds": bool(second),
        "holds": bool(first and second),
        "reports": (W, F, F1),
    }
