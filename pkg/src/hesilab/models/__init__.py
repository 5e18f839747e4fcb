"""Application models on periodic grids and intervals."""
from .delay import (DelayParams, SingularResolvent, analytic_delay_constants,
                    delay_heat_system, delay_hesi_bound, delay_instability_scan,
                    delay_resolvent_solve, discrete_resolvent_norm, dissipativity_defect,
                    matrix_resolvent_solve, sampled_dissipativity)
from .grid import (PeriodicGrid, ThickSetSpec, band_modes, full_domain, omega_from_intervals,
                   quarter_cells, spectral_inequality_constant, verify_thickness)
from .pointwise import (IRRATIONAL, as_fraction, critical_index, input_growth,
                        pointwise_criterion, pointwise_heat_system)
from .spectral import (fractional_heat_system, fractional_spectral_projection,
                       ginzburg_landau_system, heat_system, high_band_mask)

__all__ = [
    "DelayParams", "SingularResolvent", "analytic_delay_constants", "delay_heat_system",
    "delay_hesi_bound", "delay_instability_scan", "delay_resolvent_solve",
    "discrete_resolvent_norm", "dissipativity_defect", "matrix_resolvent_solve",
    "sampled_dissipativity", "PeriodicGrid", "ThickSetSpec", "band_modes", "full_domain",
    "omega_from_intervals", "quarter_cells", "spectral_inequality_constant",
    "verify_thickness", "IRRATIONAL", "as_fraction", "critical_index", "input_growth",
    "pointwise_criterion", "pointwise_heat_system", "fractional_heat_system",
    "fractional_spectral_projection", "ginzburg_landau_system", "heat_system",
    "high_band_mask",
]
