"""Piecewise-constant functions with exact primitives and JSON round-tripping.

A :class:`StepFn` is right-continuous. Two layouts exist:

* whole-line (``domain is None``): ``len(values) == len(breakpoints) + 1``;
  ``values[i]`` applies on ``[breakpoints[i-1], breakpoints[i])`` with the
  obvious unbounded end pieces.
* interval (``domain=(lo, hi)``): ``len(values) == len(breakpoints)`` and
  ``breakpoints[0] == lo``; ``values[i]`` applies on
  ``[breakpoints[i], breakpoints[i+1])`` (last piece closes at ``hi``).

The value *at* a jump is the right piece's value (evaluation is a.e. anyway;
every consumer in the package treats jump points as measure zero).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import DomainError, InputError

_DOMAIN_SLACK = 1e-12


@dataclass(frozen=True)
class StepFn:
    breakpoints: np.ndarray
    values: np.ndarray
    domain: tuple[float, float] | None = None

    def __post_init__(self) -> None:
        bp = np.asarray(self.breakpoints, dtype=float).ravel()
        vals = np.asarray(self.values, dtype=float).ravel()
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "values", vals)
        if bp.size and not np.all(np.diff(bp) > 0):
            raise InputError("StepFn breakpoints must be strictly increasing")
        if not np.all(np.isfinite(bp)):
            raise InputError("StepFn breakpoints must be finite")
        if not np.all(np.isfinite(vals)):
            raise InputError("StepFn values must be finite")
        if self.domain is None:
            if vals.size != bp.size + 1:
                raise InputError(
                    f"whole-line StepFn needs {bp.size + 1} values, got {vals.size}")
        else:
            lo, hi = float(self.domain[0]), float(self.domain[1])
            object.__setattr__(self, "domain", (lo, hi))
            if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
                raise InputError(f"StepFn domain must be a finite interval, got {self.domain}")
            if vals.size != bp.size or bp.size == 0:
                raise InputError(
                    f"interval StepFn needs len(values) == len(breakpoints) >= 1, "
                    f"got {vals.size} vs {bp.size}")
            if abs(bp[0] - lo) > _DOMAIN_SLACK:
                raise InputError("interval StepFn must start at the domain left endpoint")
            if bp[-1] > hi + _DOMAIN_SLACK:
                raise InputError("interval StepFn breakpoints exceed the domain")

    # ------------------------------------------------------------------ eval

    def __call__(self, x):
        x_arr = np.asarray(x, dtype=float)
        if self.domain is None:
            idx = np.searchsorted(self.breakpoints, x_arr, side="right")
        else:
            lo, hi = self.domain
            if np.any(x_arr < lo - _DOMAIN_SLACK) or np.any(x_arr > hi + _DOMAIN_SLACK):
                raise DomainError(f"StepFn evaluated outside domain [{lo}, {hi}]")
            idx = np.searchsorted(self.breakpoints, x_arr, side="right") - 1
            idx = np.clip(idx, 0, self.values.size - 1)
        out = self.values[idx]
        return float(out) if np.isscalar(x) or x_arr.ndim == 0 else out

    def pieces(self) -> list[tuple[float, float, float]]:
        """List of (lo, hi, value) pieces; unbounded ends use +-inf."""
        bp = self.breakpoints
        if self.domain is None:
            edges = np.concatenate(([-np.inf], bp, [np.inf]))
            return [(float(edges[i]), float(edges[i + 1]), float(self.values[i]))
                    for i in range(self.values.size)]
        lo, hi = self.domain
        edges = np.concatenate((bp, [hi]))
        return [(float(edges[i]), float(edges[i + 1]), float(self.values[i]))
                for i in range(self.values.size)]

    # ------------------------------------------------------------- primitive

    def primitive(self, x):
        """Exact primitive P(x) = int_0^x of the step function (whole line only)."""
        if self.domain is not None:
            raise InputError("primitive() requires a whole-line StepFn")
        bp = self.breakpoints
        vals = self.values
        x_arr = np.asarray(x, dtype=float)
        if bp.size == 0:
            out = vals[0] * x_arr
            return float(out) if x_arr.ndim == 0 else out
        # cumulative integral at the breakpoints, anchored so that P(0)=0
        seg = vals[1:-1] * np.diff(bp) if bp.size > 1 else np.empty(0)
        p_bp = np.concatenate(([0.0], np.cumsum(seg)))  # primitive at bp, up to a constant
        idx = np.searchsorted(bp, x_arr, side="right")
        # primitive relative to bp[0]
        base = np.where(idx == 0, vals[0] * (x_arr - bp[0]),
                        p_bp[np.clip(idx - 1, 0, bp.size - 1)]
                        + vals[np.clip(idx, 0, vals.size - 1)]
                        * (x_arr - bp[np.clip(idx - 1, 0, bp.size - 1)]))
        # subtract the same expression at x=0
        idx0 = int(np.searchsorted(bp, 0.0, side="right"))
        if idx0 == 0:
            base0 = vals[0] * (0.0 - bp[0])
        else:
            base0 = p_bp[idx0 - 1] + vals[idx0] * (0.0 - bp[idx0 - 1])
        out = base - base0
        return float(out) if x_arr.ndim == 0 else out

    # ------------------------------------------------------------------ misc

    def left_limit(self, x: float) -> float:
        """Value of the piece ending at x (equals self(x) off breakpoints)."""
        if self.domain is not None:
            lo, hi = self.domain
            if x < lo - _DOMAIN_SLACK or x > hi + _DOMAIN_SLACK:
                raise DomainError(f"StepFn evaluated outside domain [{lo}, {hi}]")
            idx = int(np.searchsorted(self.breakpoints, x, side="left")) - 1
            return float(self.values[np.clip(idx, 0, self.values.size - 1)])
        idx = int(np.searchsorted(self.breakpoints, x, side="left"))
        return float(self.values[idx])

    def mirrored(self) -> "StepFn":
        """The step function z -> -self(-z) (values at jumps follow the
        right-continuous convention, so they differ from the literal mirror
        only on the measure-zero breakpoint set)."""
        bp = -self.breakpoints[::-1]
        vals = -self.values[::-1]
        dom = None if self.domain is None else (-self.domain[1], -self.domain[0])
        if dom is not None and bp.size:
            # re-anchor: the mirrored left edge becomes the first breakpoint
            bp = np.concatenate(([dom[0]], bp[:-1])) if abs(bp[0] - dom[0]) > _DOMAIN_SLACK else bp
        return StepFn(breakpoints=bp, values=vals, domain=dom)

    def map(self, fn: Callable[[np.ndarray], np.ndarray]) -> "StepFn":
        return StepFn(self.breakpoints.copy(), np.asarray(fn(self.values), dtype=float),
                      self.domain)

    def total_variation(self) -> float:
        return float(np.sum(np.abs(np.diff(self.values)))) if self.values.size > 1 else 0.0

    @property
    def min(self) -> float:
        return float(self.values.min())

    @property
    def max(self) -> float:
        return float(self.values.max())

    # ------------------------------------------------------------------ json

    def to_dict(self) -> dict:
        return {
            "breakpoints": [float(b) for b in self.breakpoints],
            "values": [float(v) for v in self.values],
            "domain": None if self.domain is None else [self.domain[0], self.domain[1]],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "StepFn":
        if not isinstance(d, dict) or "breakpoints" not in d or "values" not in d:
            raise InputError("StepFn JSON must contain 'breakpoints' and 'values'")
        dom = d.get("domain")
        return cls(np.asarray(d["breakpoints"], dtype=float),
                   np.asarray(d["values"], dtype=float),
                   None if dom is None else (float(dom[0]), float(dom[1])))

    def dump(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "StepFn":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def constant(value: float) -> StepFn:
    return StepFn(np.empty(0), np.asarray([value], dtype=float))


def from_pairs(breaks: Sequence[float], values: Sequence[float],
               domain: tuple[float, float] | None = None) -> StepFn:
    return StepFn(np.asarray(breaks, dtype=float), np.asarray(values, dtype=float), domain)
