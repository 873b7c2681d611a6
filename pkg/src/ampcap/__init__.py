"""Capacity versus power-transfer trade-off of a small-signal amplifier."""

__version__ = "0.1.0"

from .circuit import (
    CircuitParams,
    FrequencyGrid,
    GainProfile,
    Matching,
    Placement,
    Termination,
    Units,
    gain_profile,
    noise_figure,
    output_noise_psd,
    power_gain,
    transfer_function,
)
from .pareto import (
    Box,
    ParetoPoint,
    Scenario,
    TraceConfig,
    band_average_gain,
    capacity_uniform,
    default_eta_grid,
    eta_max,
    optimize_terminations_A,
    optimize_terminations_B,
    trace_pareto,
)
from .spectrum import BudgetSpec, SpectralSolution, Status, solve_constrained
