"""Convex fluxes and two-flux pairs.

``ConvexFlux`` wraps a C^1 strictly convex superlinear flux, either an exact
quadratic ``a*u^2 + b*u + c`` (a > 0) or a tabulated flux interpolated by a
shape-preserving C^1 cubic (PCHIP) with strict convexity validated at load
(outside the table the flux continues as a C^1 quadratic, keeping convexity
and superlinear growth).

``FluxPair(f, g)`` is the heterogeneous pair: ``g`` governs x < 0 and ``f``
governs x > 0. It carries the matched state ``theta_bar``, the admissible
branch intervals, and the interface transfer maps ``h_plus`` / ``h_minus``
(slope on one side mapped through flux equality to the slope on the other).

Inversion policy: quadratics invert in closed form (exact); tabulated fluxes
invert by bisection to absolute tolerance 1e-12 with automatic bracket growth.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import DomainError, InputError
from .rootfind import BISECT_TOL, golden_min, solve_increasing, solve_increasing_vec

_H_TOL = 1e-9  # slack for domain checks at interval endpoints

Side = Literal["plus", "minus"]


class ConvexFlux:
    """C^1 strictly convex superlinear flux on the real line."""

    def __init__(self, kind: str, *, coeffs=None, samples=None):
        self.kind = kind
        if kind == "quadratic":
            a, b, c = (float(v) for v in coeffs)
            if not np.isfinite([a, b, c]).all() or a <= 0.0:
                raise InputError(f"quadratic flux needs finite coefficients with a > 0, got {coeffs}")
            self._a, self._b, self._c = a, b, c
            self.theta = -b / (2.0 * a)
            self.min_value = c - b * b / (4.0 * a)
        elif kind == "tabulated":
            s = np.asarray(samples, dtype=float)
            if s.ndim != 2 or s.shape[1] != 2 or s.shape[0] < 4:
                raise InputError("tabulated flux needs >= 4 (u, f(u)) samples")
            if not np.all(np.isfinite(s)):
                raise InputError("tabulated flux samples must be finite")
            u, fu = s[:, 0], s[:, 1]
            if not np.all(np.diff(u) > 0):
                raise InputError("tabulated flux sample abscissae must be strictly increasing")
            slopes = np.diff(fu) / np.diff(u)
            if not np.all(np.diff(slopes) > 0):
                raise InputError("tabulated flux samples are not strictly convex")
            self._u_lo, self._u_hi = float(u[0]), float(u[-1])
            self._pchip = PchipInterpolator(u, fu, extrapolate=False)
            self._dpchip = self._pchip.derivative()
            # validate strict convexity of the interpolant itself
            grid = np.linspace(self._u_lo, self._u_hi, max(64, 16 * len(u)))
            dg = self._dpchip(grid)
            if not np.all(np.diff(dg) > -1e-12):
                raise InputError("PCHIP interpolant of the samples is not convex")
            # C^1 quadratic continuation beyond the table
            self._d_lo = float(self._dpchip(self._u_lo))
            self._d_hi = float(self._dpchip(self._u_hi))
            self._f_lo = float(self._pchip(self._u_lo))
            self._f_hi = float(self._pchip(self._u_hi))
            kappa_lo = (slopes[1] - slopes[0]) / (0.5 * (u[2] - u[0]))
            kappa_hi = (slopes[-1] - slopes[-2]) / (0.5 * (u[-1] - u[-3]))
            self._kappa_lo = max(float(kappa_lo), 1e-6)
            self._kappa_hi = max(float(kappa_hi), 1e-6)
            th, _ = golden_min(lambda x: float(self._pchip(x)), self._u_lo, self._u_hi,
                               tol=1e-12)
            if self._d_lo >= 0.0:      # minimum sits left of the table
                th = self._u_lo + (0.0 - self._d_lo) / self._kappa_lo
            elif self._d_hi <= 0.0:    # minimum sits right of the table
                th = self._u_hi + (0.0 - self._d_hi) / self._kappa_hi
            self.theta = float(th)
            self.min_value = float(self.eval(self.theta))
            self.samples = s
        else:
            raise InputError(f"unknown flux kind {kind!r}")

    # ------------------------------------------------------------ constructors

    @classmethod
    def quadratic(cls, a: float, b: float = 0.0, c: float = 0.0) -> "ConvexFlux":
        return cls("quadratic", coeffs=(a, b, c))

    @classmethod
    def tabulated(cls, samples) -> "ConvexFlux":
        return cls("tabulated", samples=samples)

    @classmethod
    def from_dict(cls, d: dict) -> "ConvexFlux":
        if not isinstance(d, dict) or "kind" not in d:
            raise InputError("flux JSON must be an object with a 'kind' field")
        if d["kind"] == "quadratic":
            return cls.quadratic(d.get("a", 1.0), d.get("b", 0.0), d.get("c", 0.0))
        if d["kind"] == "tabulated":
            return cls.tabulated(d.get("samples"))
        raise InputError(f"unknown flux kind {d['kind']!r}")

    def to_dict(self) -> dict:
        if self.kind == "quadratic":
            return {"kind": "quadratic", "a": self._a, "b": self._b, "c": self._c}
        return {"kind": "tabulated", "samples": [[float(u), float(v)] for u, v in self.samples]}

    def mirrored(self) -> "ConvexFlux":
        """The flux u -> f(-u)."""
        if self.kind == "quadratic":
            return ConvexFlux.quadratic(self._a, -self._b, self._c)
        s = self.samples[::-1].copy()
        s[:, 0] = -s[:, 0]
        return ConvexFlux.tabulated(s)

    # ------------------------------------------------------------- evaluation

    def eval(self, u):
        u_arr = np.asarray(u, dtype=float)
        if self.kind == "quadratic":
            out = (self._a * u_arr + self._b) * u_arr + self._c
        else:
            out = np.empty_like(u_arr)
            lo = u_arr < self._u_lo
            hi = u_arr > self._u_hi
            mid = ~(lo | hi)
            out[mid] = self._pchip(u_arr[mid])
            d = u_arr[lo] - self._u_lo
            out[lo] = self._f_lo + self._d_lo * d + 0.5 * self._kappa_lo * d * d
            d = u_arr[hi] - self._u_hi
            out[hi] = self._f_hi + self._d_hi * d + 0.5 * self._kappa_hi * d * d
        return float(out) if np.isscalar(u) or u_arr.ndim == 0 else out

    __call__ = eval

    def deriv(self, u):
        u_arr = np.asarray(u, dtype=float)
        if self.kind == "quadratic":
            out = 2.0 * self._a * u_arr + self._b
        else:
            out = np.empty_like(u_arr)
            lo = u_arr < self._u_lo
            hi = u_arr > self._u_hi
            mid = ~(lo | hi)
            out[mid] = self._dpchip(u_arr[mid])
            out[lo] = self._d_lo + self._kappa_lo * (u_arr[lo] - self._u_lo)
            out[hi] = self._d_hi + self._kappa_hi * (u_arr[hi] - self._u_hi)
        return float(out) if np.isscalar(u) or u_arr.ndim == 0 else out

    def inv_deriv(self, p):
        """(f')^{-1}(p), the maximizer in the Legendre transform."""
        p_arr = np.asarray(p, dtype=float)
        if self.kind == "quadratic":
            out = (p_arr - self._b) / (2.0 * self._a)
        else:
            out = np.empty_like(p_arr)
            lo = p_arr < self._d_lo
            hi = p_arr > self._d_hi
            mid = ~(lo | hi)
            out[lo] = self._u_lo + (p_arr[lo] - self._d_lo) / self._kappa_lo
            out[hi] = self._u_hi + (p_arr[hi] - self._d_hi) / self._kappa_hi
            if np.any(mid):
                out[mid] = solve_increasing_vec(
                    lambda uu: np.asarray(self._dpchip(np.clip(uu, self._u_lo, self._u_hi))),
                    p_arr[mid], self._u_lo, self._u_hi)
        return float(out) if np.isscalar(p) or p_arr.ndim == 0 else out

    def dual(self, p):
        """Legendre transform f*(p) = sup_u (p u - f(u))."""
        p_arr = np.asarray(p, dtype=float)
        if self.kind == "quadratic":
            d = p_arr - self._b
            with np.errstate(over="ignore"):
                out = d * d / (4.0 * self._a) - self._c
        else:
            u = self.inv_deriv(p_arr)
            out = p_arr * u - self.eval(u)
        return float(out) if np.isscalar(p) or p_arr.ndim == 0 else out

    def inv_branch(self, side: Side, v):
        """Branch inverse of the flux: plus branch is u >= theta, minus is u <= theta.

        Raises DomainError for values below the flux minimum (beyond tolerance);
        values within tolerance of the minimum clamp to theta.
        """
        v_arr = np.asarray(v, dtype=float)
        scale = 1.0 + abs(self.min_value)
        if np.any(v_arr < self.min_value - _H_TOL * scale):
            raise DomainError(
                f"inv_branch: value below the flux minimum {self.min_value!r}")
        v_arr = np.maximum(v_arr, self.min_value)
        if self.kind == "quadratic":
            r = np.sqrt((v_arr - self.min_value) / self._a)
            out = self.theta + r if side == "plus" else self.theta - r
        else:
            if side == "plus":
                out = solve_increasing_vec(
                    lambda uu: np.asarray(self.eval(np.maximum(uu, self.theta))),
                    v_arr, self.theta, self.theta + 1.0)
            else:
                out = -solve_increasing_vec(
                    lambda uu: np.asarray(self.eval(np.minimum(-uu, self.theta))),
                    v_arr, -self.theta, -self.theta + 1.0)
        return float(out) if np.isscalar(v) or v_arr.ndim == 0 else out

    def chord(self, u1, u2):
        """Secant slope (f(u1)-f(u2))/(u1-u2); tangent f'(u1) when u1 ~ u2."""
        u1a = np.asarray(u1, dtype=float)
        u2a = np.asarray(u2, dtype=float)
        du = u1a - u2a
        small = np.abs(du) < 1e-12
        safe = np.where(small, 1.0, du)
        out = np.where(small, self.deriv(u1a), (self.eval(u1a) - self.eval(u2a)) / safe)
        return float(out) if (np.isscalar(u1) and np.isscalar(u2)) else out

    def __repr__(self) -> str:
        if self.kind == "quadratic":
            return f"ConvexFlux.quadratic(a={self._a}, b={self._b}, c={self._c})"
        return f"ConvexFlux.tabulated(<{len(self.samples)} samples>)"


@dataclass
class FluxPair:
    """Heterogeneous pair: g on x < 0, f on x > 0."""

    f: ConvexFlux
    g: ConvexFlux

    def __post_init__(self) -> None:
        fm, gm = self.f.min_value, self.g.min_value
        if gm >= fm:
            # matched state sits on f's plus branch at g's crest value
            self.theta_bar = self.f.inv_branch("plus", gm)
            self.iplus_lo = self.theta_bar
            self.iminus_lo = self.g.theta
        else:
            self.theta_bar = self.g.inv_branch("minus", fm)
            self.iplus_lo = self.f.theta
            self.iminus_lo = self.g.inv_branch("plus", fm)
        self.p_plus_lo = float(self.f.deriv(self.iplus_lo))    # h_plus domain start
        self.q_minus_lo = float(self.g.deriv(self.iminus_lo))  # h_minus domain start
        # dwell running cost: min(f*(0), g*(0)) = -max(min f, min g)
        self.c0_star = -max(fm, gm)
        self.clamp_count = 0

    # --------------------------------------------------------------- h maps

    def h_plus(self, p):
        """Right slope -> left slope through flux equality (crossing states).

        Defined for p >= f'(iplus_lo); strictly increasing with h_plus >= 0.
        """
        p_arr = np.asarray(p, dtype=float)
        if np.any(p_arr < self.p_plus_lo - _H_TOL):
            raise DomainError(f"h_plus: argument below domain start {self.p_plus_lo!r}")
        p_arr = np.maximum(p_arr, self.p_plus_lo)
        v = self.f.eval(self.f.inv_deriv(p_arr))
        v = np.maximum(v, self.g.min_value)
        out = self.g.deriv(self.g.inv_branch("plus", v))
        return float(out) if np.isscalar(p) or p_arr.ndim == 0 else out

    def h_minus(self, q):
        """Left slope -> right slope through flux equality on f's minus branch.

        The literal composition f' o f_-^{-1} o g o (g')^{-1}; defined wherever
        g((g')^{-1}(q)) >= f(theta_f). On q >= g'(iminus_lo) it is <= 0 and
        strictly decreasing.
        """
        q_arr = np.asarray(q, dtype=float)
        v = self.g.eval(self.g.inv_deriv(q_arr))
        fm = self.f.min_value
        if np.any(v < fm - _H_TOL * (1.0 + abs(fm))):
            raise DomainError("h_minus: flux value below f's minimum (outside domain)")
        v = np.maximum(v, fm)
        out = self.f.deriv(self.f.inv_branch("minus", v))
        return float(out) if np.isscalar(q) or q_arr.ndim == 0 else out

    def h_plus_inv(self, q: float) -> float:
        """Inverse of h_plus (scalar); q must be >= 0."""
        if q < -_H_TOL:
            raise DomainError("h_plus_inv: h_plus is nonnegative")
        q = max(q, 0.0)
        return solve_increasing(lambda p: float(self.h_plus(p)), q,
                                self.p_plus_lo, self.p_plus_lo + 1.0)

    # ----------------------------------------------------- transport maps

    def transport_right(self, u):
        """u on x>0 mapped to the matched left slope g'(g_+^{-1}(f(u))).

        Values with f(u) below g's crest clamp at the branch endpoint; the
        clamp count accumulates on the pair.
        """
        u_arr = np.asarray(u, dtype=float)
        v = self.f.eval(u_arr)
        low = v < self.g.min_value
        self.clamp_count += int(np.count_nonzero(low))
        v = np.maximum(v, self.g.min_value)
        out = self.g.deriv(self.g.inv_branch("plus", v))
        return float(out) if np.isscalar(u) or u_arr.ndim == 0 else out

    def transport_left(self, u):
        """u on x<0 mapped to the matched right slope f'(f_-^{-1}(g(u)))."""
        u_arr = np.asarray(u, dtype=float)
        v = self.g.eval(u_arr)
        low = v < self.f.min_value
        self.clamp_count += int(np.count_nonzero(low))
        v = np.maximum(v, self.f.min_value)
        out = self.f.deriv(self.f.inv_branch("minus", v))
        return float(out) if np.isscalar(u) or u_arr.ndim == 0 else out

    # ------------------------------------------------------------------ misc

    def mirrored(self) -> "FluxPair":
        """The pair for the reflected problem x -> -x, u -> -u."""
        return FluxPair(f=self.g.mirrored(), g=self.f.mirrored())

    def theta_bar_fn(self, x):
        """The stationary-branch state: theta_g on x<0, theta_f on x>0."""
        x_arr = np.asarray(x, dtype=float)
        out = np.where(x_arr > 0, self.f.theta, self.g.theta)
        return float(out) if np.isscalar(x) or x_arr.ndim == 0 else out

    def speed_bound(self, u_lo: float, u_hi: float) -> float:
        """Max characteristic speed over [u_lo, u_hi] for either flux."""
        cand = [abs(self.f.deriv(u_lo)), abs(self.f.deriv(u_hi)),
                abs(self.g.deriv(u_lo)), abs(self.g.deriv(u_hi))]
        return float(max(cand))


def canonical_pair() -> FluxPair:
    """f = u^2/2, g = u^2 -- the worked-example pair."""
    return FluxPair(f=ConvexFlux.quadratic(0.5), g=ConvexFlux.quadratic(1.0))
