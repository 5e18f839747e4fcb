"""Finite-dimensional control systems and the basic linear-algebra substrate.

Everything downstream consumes a :class:`ControlSystem`, i.e. a dense
complex pair ``(A, B)``.  Two specialisations carry extra structure that the
solvers exploit: :class:`SpectralSystem` (``A`` exactly diagonal) and
:class:`BlockSystem` (``A`` block diagonal with each input acting on a single
coordinate of each block).
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import linalg

RANK_RTOL = 1e-10
EXPM_CAP = 1e4


class SemigroupOverflowError(ArithmeticError):
    """Raised when ``exp(At)`` would exceed the configured size cap."""


def _frozen(a):
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ControlSystem:
    """Truncated control pair ``y' = A y + B u``.

    Parameters
    ----------
    A : array_like, shape (n, n)
        State matrix.
    B : array_like, shape (n, m)
        Input matrix.  ``m = 0`` encodes ``B = 0``.
    label : str
        Free text.
    """

    A: np.ndarray
    B: np.ndarray
    label: str = ""

    def __post_init__(self):
        A = _frozen(np.atleast_2d(self.A))
        B = np.asarray(self.B, dtype=complex)
        if B.ndim == 1:
            B = B.reshape(-1, 1)
        if B.size == 0:
            B = np.zeros((A.shape[0], 0), dtype=complex)
        B = _frozen(B)
        if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] < 1:
            raise ValueError(f"A must be square with n >= 1, got shape {A.shape}")
        if B.ndim != 2 or B.shape[0] != A.shape[0]:
            raise ValueError(f"B must have {A.shape[0]} rows, got shape {B.shape}")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(B))):
            raise ValueError("A and B must have finite entries")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    def with_matrices(self, A, B=None, label=None) -> "ControlSystem":
        """Plain copy with replaced matrices (structure flags are dropped)."""
        return ControlSystem(A, self.B if B is None else B,
                             self.label if label is None else label)

    def shifted(self, alpha: float) -> "ControlSystem":
        """The pair ``(A + alpha I, B)``, keeping diagonal/block structure."""
        return self.with_matrices(self.A + alpha * np.eye(self.n),
                                  label=f"{self.label}+{alpha}I")


@dataclass(frozen=True, eq=False)
class SpectralSystem(ControlSystem):
    """Control pair whose state matrix is diagonal in a known orthonormal basis."""

    mode_labels: tuple = ()
    basis_note: str = ""

    def __post_init__(self):
        super().__post_init__()
        off = self.A - np.diag(np.diag(self.A))
        if np.any(off != 0):
            raise ValueError("SpectralSystem requires an exactly diagonal A")
        if self.mode_labels and len(self.mode_labels) != self.n:
            raise ValueError("one mode label per eigenvalue expected")

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.diag(self.A).copy()

    @property
    def base(self) -> ControlSystem:
        return ControlSystem(self.A, self.B, self.label)

    def with_matrices(self, A, B=None, label=None):
        A = np.asarray(A)
        if np.count_nonzero(A - np.diag(np.diag(A))) == 0:
            return SpectralSystem(A, self.B if B is None else B,
                                  self.label if label is None else label,
                                  self.mode_labels, self.basis_note)
        return super().with_matrices(A, B, label)


@dataclass(frozen=True, eq=False)
class BlockSystem(ControlSystem):
    """Control pair with block-diagonal ``A``.

    ``blocks`` lists the coordinate indices of each block and ``ports`` the
    single coordinate inside each block on which ``B`` may be nonzero.
    """

    blocks: tuple = ()
    ports: tuple = ()

    def __post_init__(self):
        super().__post_init__()
        blocks = tuple(np.asarray(b, dtype=int) for b in self.blocks)
        object.__setattr__(self, "blocks", blocks)
        object.__setattr__(self, "ports", tuple(int(p) for p in self.ports))
        if len(blocks) != len(self.ports):
            raise ValueError("one port per block expected")
        allidx = np.concatenate(blocks) if blocks else np.zeros(0, int)
        if np.sort(allidx).tolist() != list(range(self.n)):
            raise ValueError("blocks must partition the state coordinates")
        mask = np.zeros((self.n, self.n), dtype=bool)
        for b in blocks:
            mask[np.ix_(b, b)] = True
        if np.any(self.A[~mask] != 0):
            raise ValueError("A is not block diagonal for the given blocks")
        ports = np.array([b[p] for b, p in zip(blocks, self.ports)])
        rest = np.setdiff1d(np.arange(self.n), ports)
        if np.any(self.B[rest] != 0):
            raise ValueError("B must vanish outside the port coordinates")

    def block_matrices(self):
        return [self.A[np.ix_(b, b)] for b in self.blocks]

    def port_indices(self) -> np.ndarray:
        return np.array([b[p] for b, p in zip(self.blocks, self.ports)])

    def with_matrices(self, A, B=None, label=None):
        try:
            return BlockSystem(A, self.B if B is None else B,
                               self.label if label is None else label,
                               self.blocks, self.ports)
        except ValueError:
            return super().with_matrices(A, B, label)


@dataclass(frozen=True)
class SemigroupBounds:
    """Sampled growth data ``||exp(A* t)|| <= C_omega exp(omega t)``."""

    omega: float
    C_omega: float
    C_uniform: float | None = None


@dataclass(frozen=True, eq=False)
class KalmanDecomposition:
    P: np.ndarray
    A1: np.ndarray
    A2: np.ndarray
    A3: np.ndarray
    B1: np.ndarray
    nc: int
    smallest_kept: float = np.inf
    largest_dropped: float = 0.0

    @property
    def rank_gap(self) -> float:
        """Ratio between the weakest accepted and strongest rejected direction."""
        if self.largest_dropped == 0.0:
            return np.inf
        return self.smallest_kept / self.largest_dropped


@dataclass(frozen=True, eq=False)
class ObservationPair:
    """The dual pair ``(A*, B*)``; ``B`` here is the m x n observation map."""

    A: np.ndarray
    B: np.ndarray
    label: str = ""

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def m(self):
        return self.B.shape[0]

    def adjoint(self) -> ControlSystem:
        return ControlSystem(self.A.conj().T, self.B.conj().T, self.label.rstrip("*"))


def adjoint_pair(sys: ControlSystem) -> ObservationPair:
    """Observation form ``(A*, B*)`` of a control pair."""
    return ObservationPair(_frozen(sys.A.conj().T), _frozen(sys.B.conj().T), sys.label + "*")


def is_diagonal(A) -> bool:
    A = np.asarray(A)
    return np.count_nonzero(A - np.diag(np.diag(A))) == 0


def spectrum(sys: ControlSystem) -> np.ndarray:
    """Eigenvalues of ``A`` using whatever structure is available."""
    if isinstance(sys, SpectralSystem) or is_diagonal(sys.A):
        return np.diag(sys.A).copy()
    if isinstance(sys, BlockSystem):
        return np.concatenate([linalg.eigvals(a) for a in sys.block_matrices()])
    return linalg.eigvals(sys.A)


def expm_t(A, t: float, cap: float = EXPM_CAP) -> np.ndarray:
    """``exp(A t)`` with the overflow guard used throughout the package."""
    A = np.asarray(A, dtype=complex)
    if t < 0:
        raise ValueError("t must be nonnegative")
    if is_diagonal(A):
        d = np.diag(A) * t
        if np.max(d.real, initial=-np.inf) > np.log(np.finfo(float).max):
            raise SemigroupOverflowError("exp(At) overflows")
        return np.diag(np.exp(d))
    if linalg.norm(A, 1) * t > cap:
        raise SemigroupOverflowError(f"||At|| = {linalg.norm(A, 1) * t:.3g} exceeds cap {cap:g}")
    E = linalg.expm(A * t)
    if not np.all(np.isfinite(E)):
        raise SemigroupOverflowError("exp(At) overflows")
    return E


def semigroup_apply(sys: ControlSystem, t: float, v, cap: float = EXPM_CAP) -> np.ndarray:
    """Apply ``exp(A t)`` to ``v``.

    Diagonal state matrices are exponentiated exactly; everything else goes
    through scipy's scaling-and-squaring Pade ``expm``.

    Raises
    ------
    SemigroupOverflowError
        If ``||A t||`` exceeds ``cap`` or the result is not finite.
    """
    v = np.asarray(v, dtype=complex)
    if is_diagonal(sys.A):
        d = np.diag(sys.A) * t
        if t < 0:
            raise ValueError("t must be nonnegative")
        if np.max(d.real, initial=-np.inf) > np.log(np.finfo(float).max):
            raise SemigroupOverflowError("exp(At) overflows")
        return np.exp(d).reshape((-1,) + (1,) * (v.ndim - 1)) * v
    return expm_t(sys.A, t, cap) @ v


def check_normality(A, tol: float = 1e-10) -> tuple[bool, float]:
    """Commutator test ``||A A* - A* A||_F <= tol ||A||_F^2``."""
    A = np.asarray(A, dtype=complex)
    defect = float(linalg.norm(A @ A.conj().T - A.conj().T @ A, "fro"))
    scale = float(linalg.norm(A, "fro")) ** 2
    return bool(defect <= tol * scale), defect


def system_is_normal(sys: ControlSystem, tol: float = 1e-10) -> bool:
    if isinstance(sys, SpectralSystem) or is_diagonal(sys.A):
        return True
    if isinstance(sys, BlockSystem):
        return all(check_normality(a, tol)[0] for a in sys.block_matrices())
    return check_normality(sys.A, tol)[0]


def _orth_complement(Q: np.ndarray, n: int) -> np.ndarray:
    if Q.shape[1] == 0:
        return np.eye(n, dtype=complex)
    if Q.shape[1] == n:
        return np.zeros((n, 0), dtype=complex)
    return linalg.null_space(Q.conj().T)


def kalman_decompose(sys: ControlSystem, rtol: float = RANK_RTOL) -> KalmanDecomposition:
    """Orthogonal staircase reduction onto the controllable subspace.

    Krylov directions ``B, AB, ...`` are orthonormalised one block at a time
    and singular values below ``rtol`` times the block scale are discarded.
    The weakest kept and strongest discarded singular values are returned so
    that borderline rank calls can be audited.

    Returns
    -------
    KalmanDecomposition
        ``P`` is unitary, so ``P A P^{-1} = P A P^H``.
    """
    A, B, n = sys.A, sys.B, sys.n
    scaleA = max(float(linalg.norm(A, 2)), np.finfo(float).tiny)
    kept, dropped = np.inf, 0.0
    Q = np.zeros((n, 0), dtype=complex)
    if sys.m > 0 and np.any(B != 0):
        U, s, _ = linalg.svd(B, full_matrices=False)
        r = int(np.sum(s > rtol * s[0]))
        kept = float(s[r - 1] / s[0])
        if r < len(s):
            dropped = max(dropped, float(s[r] / s[0]))
        Q = U[:, :r]
        new = Q
        while new.shape[1] > 0 and Q.shape[1] < n:
            W = A @ new
            for _ in range(2):
                W = W - Q @ (Q.conj().T @ W)
            U, s, _ = linalg.svd(W, full_matrices=False)
            r = int(np.sum(s > rtol * scaleA))
            if r:
                kept = min(kept, float(s[r - 1] / scaleA))
            if r < len(s):
                dropped = max(dropped, float(s[r] / scaleA))
            new = U[:, :r]
            Q = np.hstack([Q, new])
    nc = Q.shape[1]
    Qu = _orth_complement(Q, n)
    P = np.hstack([Q, Qu]).conj().T
    T = P @ A @ P.conj().T
    PB = P @ B
    return KalmanDecomposition(P=P, A1=T[:nc, :nc], A2=T[:nc, nc:], A3=T[nc:, nc:],
                               B1=PB[:nc], nc=nc, smallest_kept=kept,
                               largest_dropped=dropped)


def controllability_rank(A, B, rtol: float = RANK_RTOL) -> int:
    """Rank of ``[B, AB, ..., A^{n-1}B]`` (plain Kalman test, small n only)."""
    A = np.asarray(A, dtype=complex)
    B = np.asarray(B, dtype=complex)
    n = A.shape[0]
    if B.size == 0 or n == 0:
        return 0
    blocks, cur = [], B
    for _ in range(n):
        blocks.append(cur)
        cur = A @ cur
    K = np.hstack(blocks)
    s = linalg.svd(K, compute_uv=False)
    return int(np.sum(s > rtol * max(s[0], 1.0)))


def spectral_abscissa(sys: ControlSystem) -> float:
    return float(np.max(spectrum(sys).real))


def growth_bound_estimate(sys: ControlSystem, t_grid) -> SemigroupBounds:
    """Fit ``||exp(A* t)|| <= C exp(omega t)`` on a sample grid.

    ``omega`` is the spectral abscissa.  ``C_uniform`` is only reported when
    ``omega <= 0``; it is the sampled sup of ``||exp(A* t)||``.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if np.any(~np.isfinite(t_grid)) or np.any(t_grid <= 0):
        raise ValueError("t_grid must be finite and positive")
    omega = spectral_abscissa(sys)
    As = sys.A.conj().T
    if is_diagonal(As):
        norms = np.exp(omega * t_grid)
    else:
        norms = np.array([linalg.norm(expm_t(As, t), 2) for t in t_grid])
    C = max(1.0, float(np.max(norms * np.exp(-omega * t_grid))))
    Cu = max(1.0, float(np.max(norms))) if omega <= 1e-12 else None
    return SemigroupBounds(omega=omega, C_omega=C, C_uniform=Cu)


# --- system files -----------------------------------------------------------

def _encode(M) -> list:
    M = np.asarray(M, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in M]


def _decode(rows, nrows: int, ncols: int) -> np.ndarray:
    M = np.zeros((nrows, ncols), dtype=complex)
    if ncols == 0:
        return M
    rows = list(rows)
    if len(rows) != nrows:
        raise ValueError(f"expected {nrows} rows, got {len(rows)}")
    for i, row in enumerate(rows):
        if len(row) != ncols:
            raise ValueError(f"row {i}: expected {ncols} entries")
        for j, z in enumerate(row):
            if isinstance(z, (int, float)):
                M[i, j] = z
            else:
                re, im = z
                M[i, j] = complex(re, im)
    return M


def system_to_dict(sys: ControlSystem) -> dict:
    return {"n": sys.n, "m": sys.m, "A": _encode(sys.A), "B": _encode(sys.B),
            "label": sys.label}


def system_from_dict(d: dict) -> ControlSystem:
    unknown = set(d) - {"n", "m", "A", "B", "label"}
    if unknown:
        raise ValueError(f"unknown system keys: {sorted(unknown)}")
    n, m = int(d["n"]), int(d["m"])
    if n < 1 or m < 0:
        raise ValueError("need n >= 1 and m >= 0")
    A = _decode(d["A"], n, n)
    B = _decode(d.get("B", []), n, m) if m else np.zeros((n, 0))
    return ControlSystem(A, B, str(d.get("label", "")))


def load_system(path) -> ControlSystem:
    with open(path, encoding="utf-8") as fh:
        return system_from_dict(json.load(fh))


def save_system(sys: ControlSystem, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(system_to_dict(sys), indent=1) + "\n", encoding="utf-8")
    return path
