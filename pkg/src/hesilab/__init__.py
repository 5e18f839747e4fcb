"""Stabilizability analysis via Hautus-type resolvent estimates.

Submodules
----------
core           system types, semigroups, Kalman structure, JSON I/O
hautus         Hautus margins, HESI constants, kernel test
observability  Gramians and weak observability constants
synthesis      Riccati feedback, decay rates, Laplace witnesses
models         PDE truncations on periodic grids and intervals
"""
from .core import (BlockSystem, ControlSystem, SemigroupBounds, SpectralSystem,
                   kalman_decompose, load_system, save_system)
from .hautus import HesiReport, SearchConfig, Variant, hesi_constant, hesi_holds, hsf_test
from .observability import control_gramian, weak_obs_min_C
from .synthesis import (FeedbackReport, NotStabilizable, optimal_decay_rate, rapid_feedback,
                        stabilizing_feedback)

__version__ = "0.1.0"

__all__ = [
    "BlockSystem", "ControlSystem", "SemigroupBounds", "SpectralSystem", "kalman_decompose",
    "load_system", "save_system", "HesiReport", "SearchConfig", "Variant", "hesi_constant",
    "hesi_holds", "hsf_test", "control_gramian", "weak_obs_min_C", "FeedbackReport",
    "NotStabilizable", "optimal_decay_rate", "rapid_feedback", "stabilizing_feedback",
]
