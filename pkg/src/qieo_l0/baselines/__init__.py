"""Comparison solvers: GA, IHT, ADAM, DE and AM-RR."""
from .amrr import AmrrConfig, run_amrr
from .continuous import AdamConfig, DeConfig, DivergenceError, run_adam, run_de
from .ga import GaConfig, run_ga
from .iht import IhtConfig, hard_threshold, run_iht

__all__ = [
    "AdamConfig",
    "AmrrConfig",
    "DeConfig",
    "DivergenceError",
    "GaConfig",
    "IhtConfig",
    "hard_threshold",
    "run_adam",
    "run_amrr",
    "run_de",
    "run_ga",
    "run_iht",
]
