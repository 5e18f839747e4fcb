"""Periodic grids, thick control sets and the band-limited spectral inequality."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg


@dataclass(frozen=True, eq=False)
class PeriodicGrid:
    """Uniform grid on the torus ``[0, L)^N``.

    Integer wave vectors follow the FFT convention: for ``P`` points per axis
    the indices are ``-P/2, ..., P/2 - 1`` so the grid carries exactly ``P^N``
    modes.  The physical frequency of index ``k`` is ``2 pi k / L``.
    """

    N_dim: int = 1
    L: float = 2 * math.pi
    points_per_axis: int = 64

    def __post_init__(self):
        if self.N_dim not in (1, 2):
            raise ValueError("N_dim must be 1 or 2")
        P = self.points_per_axis
        if P < 2 or P & (P - 1):
            raise ValueError("points_per_axis must be a power of two")
        if not self.L > 0:
            raise ValueError("L must be positive")

    @property
    def h(self) -> float:
        return self.L / self.points_per_axis

    @property
    def cell_volume(self) -> float:
        return self.h ** self.N_dim

    @property
    def size(self) -> int:
        return self.points_per_axis ** self.N_dim

    @property
    def frequencies(self) -> np.ndarray:
        """Integer wave vectors, shape ``(P^N, N)``."""
        k1 = np.fft.fftfreq(self.points_per_axis, 1.0 / self.points_per_axis).astype(int)
        return np.array(list(itertools.product(k1, repeat=self.N_dim)), dtype=int)

    @property
    def points(self) -> np.ndarray:
        x1 = np.arange(self.points_per_axis) * self.h
        return np.array(list(itertools.product(x1, repeat=self.N_dim)))

    def xi(self, modes=None) -> np.ndarray:
        k = self.frequencies if modes is None else np.asarray(modes, dtype=int).reshape(-1, self.N_dim)
        return 2 * math.pi * k / self.L

    def xi_norm2(self, modes=None) -> np.ndarray:
        return np.sum(self.xi(modes) ** 2, axis=1)

    def synthesis_matrix(self, modes=None) -> np.ndarray:
        """Columns map Fourier coefficients to scaled grid values.

        With values scaled by ``sqrt(cell volume)`` the Euclidean norm equals
        the discrete ``L^2`` norm, and the full matrix is unitary.
        """
        xi = self.xi(modes)
        X = self.points
        return np.exp(1j * X @ xi.T) / math.sqrt(self.size)

    def mode_index(self, modes) -> np.ndarray:
        lookup = {tuple(k): i for i, k in enumerate(self.frequencies)}
        out = []
        for k in np.asarray(modes, dtype=int).reshape(-1, self.N_dim):
            if tuple(k) not in lookup:
                raise ValueError(f"mode {tuple(k)} not on the grid")
            out.append(lookup[tuple(k)])
        return np.array(out, dtype=int)

    def low_modes(self, kmax: int) -> np.ndarray:
        """Integer wave vectors with ``|k|_inf <= kmax``, in grid order."""
        f = self.frequencies
        return f[np.max(np.abs(f), axis=1) <= kmax]


@dataclass(frozen=True, eq=False)
class ThickSetSpec:
    indicator: np.ndarray
    epsilon: float
    L_cube: float

    def __post_init__(self):
        ind = np.asarray(self.indicator, dtype=bool).ravel().copy()
        ind.setflags(write=False)
        object.__setattr__(self, "indicator", ind)
        if not 0 < self.epsilon <= 1:
            raise ValueError("epsilon must lie in (0, 1]")
        if not self.L_cube > 0:
            raise ValueError("L_cube must be positive")

    @property
    def point_indices(self) -> np.ndarray:
        return np.nonzero(self.indicator)[0]


def omega_from_intervals(grid: PeriodicGrid, axes) -> np.ndarray:
    """Indicator of a product of periodic interval patterns.

    ``axes`` holds one ``(period, [(a, b), ...])`` entry per axis (or one
    entry reused for all axes); a point is inside when ``x mod period`` falls
    in some ``[a, b)``.
    """
    if len(axes) == 1 and grid.N_dim > 1:
        axes = list(axes) * grid.N_dim
    x1 = np.arange(grid.points_per_axis) * grid.h
    masks = []
    for period, ivals in axes:
        r = np.mod(x1 + 1e-12 * grid.L, period) - 1e-12 * grid.L
        m = np.zeros(len(x1), dtype=bool)
        for a, b in ivals:
            m |= (r >= a - 1e-12) & (r < b - 1e-12)
        masks.append(m)
    out = masks[0]
    for m in masks[1:]:
        out = np.logical_and.outer(out, m).ravel()
    return out


def quarter_cells(grid: PeriodicGrid, epsilon: float | None = None, cell: float = 1.0) -> ThickSetSpec:
    """First quarter of every cell of side ``cell`` (per axis)."""
    ind = omega_from_intervals(grid, [(cell, [(0.0, cell / 4)])])
    return ThickSetSpec(ind, 0.25 ** grid.N_dim if epsilon is None else epsilon, cell)


def full_domain(grid: PeriodicGrid) -> ThickSetSpec:
    return ThickSetSpec(np.ones(grid.size, dtype=bool), 1.0, grid.L)


def verify_thickness(spec: ThickSetSpec, grid: PeriodicGrid):
    """Exhaustive periodic scan of grid-aligned cubes.

    Returns
    -------
    ok : bool
    worst_anchor : ndarray
        Grid coordinates of the cube corner with the least coverage.
    worst_fraction : float
        Covered measure divided by ``L_cube^N`` at that anchor.
    """
    if spec.L_cube > grid.L * (1 + 1e-12):
        raise ValueError("L_cube must not exceed L")
    P, N = grid.points_per_axis, grid.N_dim
    c = int(round(spec.L_cube / grid.h))
    if c < 1 or abs(c * grid.h - spec.L_cube) > 1e-9 * grid.L:
        raise ValueError("L_cube must be a multiple of the grid spacing")
    ind = spec.indicator.reshape((P,) * N).astype(float)
    counts = ind
    for ax in range(N):
        cs = np.cumsum(np.concatenate([counts, np.take(counts, range(c), axis=ax)], axis=ax), axis=ax)
        zero = np.zeros_like(np.take(cs, [0], axis=ax))
        cs = np.concatenate([zero, cs], axis=ax)
        counts = np.take(cs, range(c, c + P), axis=ax) - np.take(cs, range(0, P), axis=ax)
    frac = counts * grid.cell_volume / spec.L_cube ** N
    i = np.unravel_index(int(np.argmin(frac)), frac.shape)
    worst = float(frac[i])
    return bool(worst >= spec.epsilon - 1e-12), np.array(i) * grid.h, worst


def band_modes(grid: PeriodicGrid, R: float) -> np.ndarray:
    """Integer wave vectors with ``|xi|_inf <= R``."""
    xi = grid.xi()
    return grid.frequencies[np.max(np.abs(xi), axis=1) <= R * (1 + 1e-12)]


def restriction_matrix(grid: PeriodicGrid, spec: ThickSetSpec, modes=None) -> np.ndarray:
    """``f -> chi_omega f`` from Fourier coefficients to scaled values on omega."""
    S = grid.synthesis_matrix(modes)
    return S[spec.point_indices]


def spectral_inequality_constant(grid: PeriodicGrid, spec: ThickSetSpec, R: float,
                                 return_vector: bool = False):
    """Least ``C`` with ``||f|| <= C ||chi_omega f||`` for ``|xi|_inf <= R``.

    Computed exactly on the grid as ``1 / sigma_min`` of the restriction.
    Returns ``inf`` when ``sigma_min <= 1e-12``.  With ``return_vector`` the
    Fourier coefficients of an extremal ``f`` are returned as well.
    """
    modes = band_modes(grid, R)
    if len(modes) == 0:
        raise ValueError("band contains no modes")
    nz = np.min(np.abs(grid.xi()[np.any(grid.frequencies != 0, axis=1)]).max(axis=1)) if grid.size > 1 else 0
    if R < nz * (1 - 1e-12):
        raise ValueError("R is below the smallest nonzero frequency")
    M = restriction_matrix(grid, spec, modes)
    if M.shape[0] == 0:
        C, v = math.inf, np.zeros(len(modes))
    else:
        _, s, Vh = linalg.svd(M, full_matrices=True)
        smin = s[-1] if len(s) == len(modes) else 0.0
        C = math.inf if smin <= 1e-12 else 1.0 / smin
        v = Vh[-1].conj()
    if return_vector:
        return C, modes, v
    return C
