"""H-infinity norm of retarded time-delay systems by a predictor-corrector scheme.

The predictor runs a criss-cross level-set search on a Chebyshev spectral
discretization of the delay operator; the corrector refines the peak with
Gauss-Newton on a small nonlinear system.
"""

from importlib import resources

from .corrector import HinfResult, compute_hinf
from .errors import (
    ConvergenceError,
    DelayHinfError,
    InputError,
    InstabilityError,
    NumericalError,
)
from .levelset import predict_gmax
from .oracles import hamiltonian_oracle, sweep_oracle
from .spectral import choose_N, cutoff_frequency, cutoff_table
from .system import (
    DelaySystem,
    check_stability,
    eval_transfer,
    load_system,
    rescale,
    save_system,
    system_from_dict,
)

__version__ = "0.1.0"

__all__ = [
    "DelaySystem",
    "HinfResult",
    "compute_hinf",
    "predict_gmax",
    "check_stability",
    "eval_transfer",
    "load_system",
    "save_system",
    "system_from_dict",
    "rescale",
    "choose_N",
    "cutoff_frequency",
    "cutoff_table",
    "sweep_oracle",
    "hamiltonian_oracle",
    "g12_system",
    "DelayHinfError",
    "InputError",
    "NumericalError",
    "ConvergenceError",
    "InstabilityError",
]


def g12_system():
    """The three-state, two-delay benchmark plant bundled with the package."""
    import json

    text = resources.files(__name__).joinpath("data/g12.json").read_text()
    return system_from_dict(json.loads(text))
