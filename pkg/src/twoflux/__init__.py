"""Conservation laws with a flux discontinuity at x = 0: forward solves,
backward construction, optimal control, and reachability."""

from .errors import (
    ConvergenceError,
    DomainError,
    InputError,
    SolveError,
    StabilityError,
    TwofluxError,
)
from .fluxes import ConvexFlux, FluxPair, canonical_pair
from .stepfn import StepFn

from . import backward, control, godunov, hj, reachable, stepfn  # noqa: E402

__all__ = [
    "ConvexFlux",
    "FluxPair",
    "StepFn",
    "canonical_pair",
    "TwofluxError",
    "DomainError",
    "InputError",
    "SolveError",
    "StabilityError",
    "ConvergenceError",
    "backward",
    "control",
    "godunov",
    "hj",
    "reachable",
    "stepfn",
]

__version__ = "0.1.0"
