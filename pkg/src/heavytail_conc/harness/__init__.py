"""Monte Carlo engine, constant fitting and experiment runners."""

from .fitting import ConstantFit, FitResult, fit_constant, fit_rate_to_curve, fit_threshold_multiplier, stability_ratio
from .montecarlo import EmpiricalDeviation, map_chunks, mc_survival, mc_values, stream, wilson_interval

__all__ = [
    "ConstantFit", "FitResult", "fit_constant", "fit_rate_to_curve", "fit_threshold_multiplier",
    "stability_ratio", "EmpiricalDeviation", "map_chunks", "mc_survival", "mc_values", "stream",
    "wilson_interval",
]
