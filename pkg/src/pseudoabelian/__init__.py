"""Pseudo-abelian integrals of Darboux integrable unfoldings: tracing, continuation, compensators and zero counts."""

from __future__ import annotations

__version__ = "0.1.0"

from .compensator import omega_chart, omega_closed, omega_ode, omega_root
from .darboux import DarbouxSystem, OneForm, UnfoldingParams, check_genericity, first_integral, triangle_system
from .difference import LogChartPoly, delta, iterated_sum, solve_delta
from .errors import ConfigError, NumericalError, PseudoAbelianError
from .integrator import pseudo_abelian_integral, sweep
from .tracer import interior_extremum, trace_oval, trace_ovals
from .transport import HPath, VarSpec, continue_cycle, iterated_var, var_integral
from .zeros import fit_leading_term, sector_zero_count, uniformity_experiment, variation_fit

__all__ = [
    "__version__",
    "DarbouxSystem",
    "OneForm",
    "UnfoldingParams",
    "triangle_system",
    "first_integral",
    "check_genericity",
    "interior_extremum",
    "trace_oval",
    "trace_ovals",
    "pseudo_abelian_integral",
    "sweep",
    "HPath",
    "VarSpec",
    "continue_cycle",
    "var_integral",
    "iterated_var",
    "omega_root",
    "omega_ode",
    "omega_chart",
    "omega_closed",
    "LogChartPoly",
    "delta",
    "solve_delta",
    "iterated_sum",
    "sector_zero_count",
    "fit_leading_term",
    "uniformity_experiment",
    "variation_fit",
    "PseudoAbelianError",
    "NumericalError",
    "ConfigError",
]
