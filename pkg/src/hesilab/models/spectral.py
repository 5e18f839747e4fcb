"""Ginzburg-Landau and fractional heat semigroups on a periodic grid.

Both are diagonal in the Fourier basis.  The control ``chi_omega u`` enters
through ``B* phi = (chi_omega phi)`` evaluated on the grid points of omega, so
``m`` equals the number of such points and ``B B*`` is the Fourier image of
the multiplication by ``chi_omega``.
"""
from __future__ import annotations

import numpy as np

from ..core import SpectralSystem
from .grid import PeriodicGrid, ThickSetSpec, restriction_matrix


def _labels(modes):
    return tuple(tuple(int(v) for v in k) for k in modes)


def _modes(grid, modes):
    return grid.frequencies if modes is None else np.asarray(modes, dtype=int).reshape(-1, grid.N_dim)


def multiplier_system(eigenvalues, grid: PeriodicGrid, spec: ThickSetSpec, modes=None,
                      label: str = "", note: str = "") -> SpectralSystem:
    """Diagonal Fourier multiplier with the interior control ``chi_omega``."""
    modes = _modes(grid, modes)
    Bs = restriction_matrix(grid, spec, modes)
    return SpectralSystem(np.diag(np.asarray(eigenvalues, dtype=complex)), Bs.conj().T, label,
                          _labels(modes), note or f"Fourier modes e^(i xi x)/L^(N/2) on torus L={grid.L}")


def heat_system(grid: PeriodicGrid, spec: ThickSetSpec, modes=None) -> SpectralSystem:
    """``y' = Laplacian y + chi_omega u``."""
    modes = _modes(grid, modes)
    return multiplier_system(-grid.xi_norm2(modes), grid, spec, modes, label="heat")


def ginzburg_landau_system(a: float, b: float, grid: PeriodicGrid, spec: ThickSetSpec,
                           modes=None) -> SpectralSystem:
    """Linear Ginzburg-Landau: eigenvalues ``-(a + ib)|xi|^2``."""
    if not a > 0:
        raise ValueError("a must be positive")
    modes = _modes(grid, modes)
    ev = -(a + 1j * b) * grid.xi_norm2(modes)
    return multiplier_system(ev, grid, spec, modes, label=f"ginzburg-landau a={a} b={b}")


def fractional_heat_system(s: float, grid: PeriodicGrid, spec: ThickSetSpec,
                           modes=None) -> SpectralSystem:
    """Fractional heat: eigenvalues ``-|xi|^s`` with ``0 < s < 1``."""
    if not 0 < s < 1:
        raise ValueError("s must lie in (0, 1)")
    modes = _modes(grid, modes)
    ev = -np.sqrt(grid.xi_norm2(modes)) ** s
    return multiplier_system(ev, grid, spec, modes, label=f"fractional heat s={s}")


def fractional_spectral_projection(sys: SpectralSystem, k: float) -> np.ndarray:
    """Spectral projector of ``A*`` for ``Re z in [-k, 0]`` (real spectrum).

    For the fractional heat system this keeps the modes with ``|xi|^s <= k``.
    """
    if k < 0:
        raise ValueError("k must be nonnegative")
    ev = np.conj(sys.eigenvalues)
    keep = (ev.real >= -k * (1 + 1e-12) - 1e-300) & (ev.real <= 1e-14)
    return np.diag(keep.astype(complex))


def high_band_mask(grid: PeriodicGrid, a: float, beta: float, modes=None) -> np.ndarray:
    """Modes with ``|xi| >= sqrt(2 beta / a)``."""
    return grid.xi_norm2(_modes(grid, modes)) >= 2 * beta / a
