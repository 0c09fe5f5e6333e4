"""Error taxonomy shared by every module.

Five categories, raised consistently:

* ``DomainError``   -- an evaluation was requested outside a map's domain
  (branch inverses below the flux minimum, h-map arguments left of the
  admissible interval, inconsistent (x, rho, T) triples).
* ``InputError``    -- malformed or inconsistent user data (non-monotone
  breakpoints, sign violations, infeasible discretization settings).
* ``SolveError``    -- a root or minimum could not be bracketed/located.
* ``StabilityError``-- the finite-volume oracle lost its CFL guarantee.
* ``ConvergenceError`` -- an adaptive loop hit its refinement cap.
"""

from __future__ import annotations


class TwofluxError(Exception):
    """Base class for all package errors."""


class DomainError(TwofluxError):
    """Argument outside the mathematical domain of the requested map."""


class InputError(TwofluxError):
    """Malformed, inconsistent, or out-of-contract input data."""


class SolveError(TwofluxError):
    """A root/minimum search failed to bracket or converge."""


class StabilityError(TwofluxError):
    """Finite-volume time stepping violated its stability bound."""


class ConvergenceError(TwofluxError):
    """An adaptive refinement loop exhausted its budget."""
