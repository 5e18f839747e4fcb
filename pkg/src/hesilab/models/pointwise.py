"""Heat equation on (0, 1) with Dirichlet ends, controlled at a single point."""
from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

from ..core import SpectralSystem


class _Irrational:
    """Marker for an irrational control point."""

    def __repr__(self):
        return "IRRATIONAL"


IRRATIONAL = _Irrational()


def as_fraction(x0) -> Fraction:
    """Exact rational from ``Fraction``, ``(p, q)`` or a ``"p/q"`` string.

    Floats are refused: the verdict is discontinuous in the control point.
    """
    if isinstance(x0, Fraction):
        fr = x0
    elif isinstance(x0, tuple) and len(x0) == 2:
        fr = Fraction(int(x0[0]), int(x0[1]))
    elif isinstance(x0, str):
        fr = Fraction(x0)
    elif isinstance(x0, int):
        fr = Fraction(x0)
    else:
        raise TypeError("control point must be an exact rational (Fraction, (p, q) or 'p/q')")
    if not 0 < fr < 1:
        raise ValueError("control point must lie in (0, 1)")
    return fr


def critical_index(c: float) -> int:
    """Largest ``n`` with ``(n pi)^2 <= c``."""
    return int(math.floor(math.sqrt(c) / math.pi))


def input_coefficients(x0, n_modes: int) -> np.ndarray:
    """``b_n = sqrt(2) sin(n pi x0)``; exact zeros from ``n p mod q`` for rational points."""
    n = np.arange(1, n_modes + 1)
    if isinstance(x0, float):
        return math.sqrt(2) * np.sin(n * math.pi * x0)
    fr = as_fraction(x0)
    p, q = fr.numerator, fr.denominator
    b = math.sqrt(2) * np.sin(n * math.pi * p / q)
    b[(n * p) % q == 0] = 0.0
    return b


def pointwise_heat_system(c: float, x0, n_modes: int) -> SpectralSystem:
    """Modal truncation of ``y_t = y_xx + c y + delta(x - x0) u``.

    ``A = diag(-(n pi)^2 + c)`` for ``n = 1..n_modes`` in the sine basis
    ``sqrt(2) sin(n pi x)`` and ``B = (b_n)`` as a single column.
    """
    need = critical_index(c) + 2
    if n_modes < need:
        raise ValueError(f"need at least {need} modes for c={c}")
    n = np.arange(1, n_modes + 1)
    lam = -(n * math.pi) ** 2 + c
    b = input_coefficients(x0, n_modes)
    return SpectralSystem(np.diag(lam.astype(complex)), b.reshape(-1, 1).astype(complex),
                          f"pointwise heat c={c} x0={x0}", tuple(int(k) for k in n),
                          "sqrt(2) sin(n pi x), Dirichlet on (0,1)")


def input_growth(x0, sizes) -> list[tuple[int, float]]:
    """``||b||`` for truncation sizes; grows like ``sqrt(N)`` since the input is unbounded."""
    return [(int(N), float(np.linalg.norm(input_coefficients(x0, int(N))))) for N in sizes]


def pointwise_criterion(c: float, x0) -> bool:
    """Stabilizability verdict for the point ``x0``.

    Rational ``p/q`` (lowest terms) fails iff ``q <= floor(sqrt(c)/pi)``;
    the :data:`IRRATIONAL` marker always passes.
    """
    if not c > math.pi ** 2:
        raise ValueError("c must exceed pi^2")
    if x0 is IRRATIONAL:
        return True
    fr = as_fraction(x0)
    return fr.denominator > critical_index(c)
