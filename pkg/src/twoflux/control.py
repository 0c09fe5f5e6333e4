"""Optimal control of the time-T profile through monotone foot-map triples.

A target is a profile ``k`` with slope signature ``eta(x) = g'(k(x))`` on
x <= 0 and ``f'(k(x))`` on x > 0, supported in [-C, C] (k sits at the rest
states theta_g / theta_f beyond the support). Candidate initial data are
encoded as triples ``(R, rho, y)``: a crossing band on (0, R) fed by negative
feet ``rho``, direct feet ``y`` elsewhere (identity off the y domain).

Two costs:

* ``cost_J(sol, target)``: misfit of a solved profile u(., T) against eta in
  slope coordinates. On the two interface-influenced regions the state is
  first mapped through the flux-equality composites g' g_+^{-1} f and
  f' f_-^{-1} g; outside them the native slopes g'(u), f'(u) are compared.
* ``cost_Jtilde(triple, target, T)``: the relaxed cost of a triple, with
  (x - y(x))/T standing in for the direct slopes and -rho(x)/t(x) for the
  crossing slopes (t from backward.solve_tmap). It equals cost_J of the
  backward-constructed data up to construction defects.

``minimize`` searches truncated triples: the a-priori bounds (rho0, R0, M1)
box the admissible set; for each candidate R the rho-part is solved pointwise
and projected monotone, the y-part is a bounded isotonic least-squares fit;
the mirrored problem (band on the left) is solved the same way and the
cheaper side wins, ties going to the band-right side.

Conventions: ``rho`` is a nondecreasing StepFn on [0, R] with values <= 0
(feet get closer to the interface as the arrival point moves right); ``y``
is an interval-domain StepFn continued as the identity outside its domain;
``y = None`` means identity everywhere. The y <= rho(0) coupling is reported
by ``violations`` but deliberately not enforced in the y-solve: the backward
constructor truncates any residual overlap, and enforcing it would exclude
identity exteriors (which the relaxed cost treats as optimal for eta = 0).
"""

from __future__ import annotations

import warnings as _warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.optimize import isotonic_regression

from . import backward, hj
from .errors import InputError
from .fluxes import FluxPair
from .rootfind import golden_min, solve_increasing
from .stepfn import StepFn

_TOL = 1e-12
_REST_TOL = 1e-7   # tolerance for the rest-state check beyond +-C
_TRIM_TOL = 1e-9   # identity-cell trimming in the y-solve


# --------------------------------------------------------------------- helpers

def _vec(fn: Callable, xs: np.ndarray) -> np.ndarray:
    """Evaluate a possibly-scalar-only callable on an array."""
    out = np.asarray(fn(xs), dtype=float)
    if out.shape != xs.shape:
        out = np.array([float(fn(float(v))) for v in xs.ravel()],
                       dtype=float).reshape(xs.shape)
    return out


def _simpson_over(fn: Callable[[np.ndarray], np.ndarray],
                  nodes: np.ndarray, n: int) -> float:
    """Composite Simpson with n panels on each [nodes[i], nodes[i+1]].

    Endpoint samples are nudged a hair into the interval so that integrands
    with jumps exactly at the nodes (region edges, step breakpoints) are read
    from the correct side instead of picking up O(h) endpoint artifacts.
    """
    if n < 2 or n % 2:
        raise InputError(f"Simpson panel count must be even and >= 2, got {n}")
    w = np.ones(n + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    total = 0.0
    for a, b in zip(nodes[:-1], nodes[1:]):
        if b - a <= 1e-15 * (1.0 + abs(a) + abs(b)):
            continue
        xs = np.linspace(a, b, n + 1)
        eps = 1e-9 * (b - a)
        xs[0] += eps
        xs[-1] -= eps
        total += (b - a) / (3.0 * n) * float(w @ fn(xs))
    return total


def _interval_nodes(pts, lo: float, hi: float) -> np.ndarray:
    p = np.asarray(pts, dtype=float)
    p = p[(p > lo + 1e-13) & (p < hi - 1e-13)]
    return np.unique(np.concatenate(([lo], p, [hi])))


def isotonic_fit(values, weights=None, *, increasing: bool = True,
                 lo: Optional[float] = None, hi: Optional[float] = None) -> np.ndarray:
    """Weighted isotonic least squares with a uniform box constraint.

    Clipping the unconstrained isotonic fit to [lo, hi] is exact when the
    bounds are the same for every coordinate, which is the only case needed
    here.
    """
    vals = np.asarray(values, dtype=float)
    if vals.size == 0:
        return vals.copy()
    res = isotonic_regression(vals, weights=weights, increasing=increasing)
    out = np.asarray(res.x, dtype=float).copy()
    if lo is not None or hi is not None:
        out = np.clip(out, lo if lo is not None else -np.inf,
                      hi if hi is not None else np.inf)
    return out


# ---------------------------------------------------------------- target spec

@dataclass
class TargetSpec:
    """Target profile k with support radius C; eta is derived from k."""

    pair: FluxPair
    k: object                   # callable or StepFn
    C: float
    _norm2: Optional[float] = field(default=None, repr=False)

    def __post_init__(self) -> None:
        self.C = float(self.C)
        if not np.isfinite(self.C) or self.C <= 0.0:
            raise InputError(f"support radius C must be positive, got {self.C}")
        if isinstance(self.k, StepFn) and self.k.domain is not None:
            # pad an interval-domain profile with the rest states
            lo, hi = self.k.domain
            bp = np.concatenate((self.k.breakpoints, [hi]))
            vals = np.concatenate(([self.pair.g.theta], self.k.values,
                                   [self.pair.f.theta]))
            self.k = StepFn(bp, vals)
        self._check_rest_states()

    def _check_rest_states(self) -> None:
        g_th, f_th = self.pair.g.theta, self.pair.f.theta
        xs_l = np.array([-self.C - 1e-6, -2.0 * self.C, -3.0 * self.C - 1.0])
        xs_r = -xs_l
        kl = _vec(self.k_eval, xs_l)
        kr = _vec(self.k_eval, xs_r)
        if np.any(np.abs(kl - g_th) > _REST_TOL * (1.0 + abs(g_th))):
            raise InputError(
                f"target must equal the rest state theta_g={g_th!r} left of -C")
        if np.any(np.abs(kr - f_th) > _REST_TOL * (1.0 + abs(f_th))):
            raise InputError(
                f"target must equal the rest state theta_f={f_th!r} right of C")

    @classmethod
    def from_eta(cls, pair: FluxPair, eta, C: float) -> "TargetSpec":
        """Build the profile k realizing a prescribed slope signature eta."""
        if isinstance(eta, StepFn):
            if eta.domain is not None:
                lo, hi = eta.domain
                bp = np.concatenate((eta.breakpoints, [hi]))
                vals = np.concatenate(([0.0], eta.values, [0.0]))
                eta = StepFn(bp, vals)
            bp = eta.breakpoints
            if 0.0 not in bp:
                i = int(np.searchsorted(bp, 0.0))
                bp = np.insert(bp, i, 0.0)
                vals = np.insert(eta.values, i, eta.values[i])
            else:
                vals = eta.values
            mids = np.concatenate(([bp[0] - 1.0],
                                   0.5 * (bp[:-1] + bp[1:]), [bp[-1] + 1.0]))
            kv = np.where(mids > 0, pair.f.inv_deriv(vals), pair.g.inv_deriv(vals))
            return cls(pair, StepFn(bp, kv), C)

        def k_fn(x):
            x_arr = np.asarray(x, dtype=float)
            ev = _vec(eta, np.atleast_1d(x_arr))
            out = np.where(np.atleast_1d(x_arr) > 0,
                           pair.f.inv_deriv(ev), pair.g.inv_deriv(ev))
            return float(out[0]) if x_arr.ndim == 0 else out.reshape(x_arr.shape)

        return cls(pair, k_fn, C)

    # ------------------------------------------------------------ evaluation

    def k_eval(self, xs):
        if isinstance(self.k, StepFn):
            return self.k(xs)
        return self.k(xs)

    def eta(self, xs):
        x_arr = np.atleast_1d(np.asarray(xs, dtype=float))
        kv = _vec(self.k_eval, x_arr)
        out = np.where(x_arr > 0, self.pair.f.deriv(kv), self.pair.g.deriv(kv))
        if np.asarray(xs).ndim == 0:
            return float(out[0])
        return out

    def k_breakpoints(self) -> np.ndarray:
        if isinstance(self.k, StepFn):
            return self.k.breakpoints.copy()
        return np.empty(0)

    @property
    def eta_norm_sq(self) -> float:
        if self._norm2 is None:
            self._norm2 = self._compute_norm_sq()
        return self._norm2

    def _compute_norm_sq(self) -> float:
        f, g, C = self.pair.f, self.pair.g, self.C
        if isinstance(self.k, StepFn):
            total = 0.0
            for lo, hi, v in self.k.pieces():
                a, b = max(lo, -C), min(hi, 0.0)
                if b > a:
                    total += g.deriv(v) ** 2 * (b - a)
                a, b = max(lo, 0.0), min(hi, C)
                if b > a:
                    total += f.deriv(v) ** 2 * (b - a)
            return float(total)
        left = _simpson_over(lambda xs: self.eta(xs) ** 2,
                             np.array([-C, 0.0]), 4096)
        right = _simpson_over(lambda xs: self.eta(xs) ** 2,
                              np.array([0.0, C]), 4096)
        return left + right


# ------------------------------------------------------------------- triples

@dataclass
class AdmissibleTriple:
    """Band radius R, crossing feet rho on [0, R], direct feet y elsewhere."""

    R: float
    rho: Optional[StepFn]
    y: Optional[StepFn]

    def __post_init__(self) -> None:
        self.R = float(self.R)
        if not np.isfinite(self.R) or self.R < 0.0:
            raise InputError(f"band radius must be finite and >= 0, got {self.R}")
        if (self.R > _TOL) != (self.rho is not None):
            raise InputError("rho must be present exactly when R > 0")
        if self.rho is not None:
            if self.rho.domain is None:
                raise InputError("rho must be an interval-domain StepFn on [0, R]")
            lo, hi = self.rho.domain
            if abs(lo) > 1e-9 * (1.0 + self.R) or abs(hi - self.R) > 1e-9 * (1.0 + self.R):
                raise InputError(f"rho domain {self.rho.domain} does not match R={self.R}")
        if self.y is not None and self.y.domain is None:
            raise InputError("y must be an interval-domain StepFn (identity outside)")

    def violations(self) -> list:
        """All order/sign conditions on the triple; empty when fully admissible."""
        out = []
        if self.rho is not None:
            v = self.rho.values
            if np.any(v > 1e-12):
                out.append("rho not <= 0")
            if np.any(np.diff(v) < -1e-12):
                out.append("rho not nondecreasing")
        if self.y is not None:
            v = self.y.values
            if np.any(np.diff(v) < -1e-12):
                out.append("y not nondecreasing")
            for lo, hi, val in self.y.pieces():
                if hi <= 0.0 and val > 1e-12:
                    out.append("xy(x) >= 0 fails on the left")
                    break
                if lo >= self.R and val < -1e-12:
                    out.append("xy(x) >= 0 fails on the right")
                    break
            if self.rho is not None:
                rho0 = float(self.rho.values[0])
                left_vals = [val for lo, hi, val in self.y.pieces() if lo < 0.0]
                if left_vals and max(left_vals) > rho0 + 1e-12:
                    out.append("y(x) <= rho(0) fails on the left")
        return out


def zero_triple() -> AdmissibleTriple:
    return AdmissibleTriple(0.0, None, None)


def _foot_vals(y: Optional[StepFn], xs: np.ndarray) -> np.ndarray:
    out = np.asarray(xs, dtype=float).copy()
    if y is None:
        return out
    lo, hi = y.domain
    m = (out >= lo) & (out <= hi)
    if m.any():
        out[m] = y(out[m])
    return out


def truncate_y(y: Optional[StepFn], M1: float) -> Optional[StepFn]:
    """Replace y by the identity outside [-M1, M1] (domain clipping)."""
    if y is None:
        return None
    pieces = [(max(lo, -M1), min(hi, M1), v) for lo, hi, v in y.pieces()
              if min(hi, M1) - max(lo, -M1) > 1e-14]
    if not pieces:
        return None
    bp = np.array([p[0] for p in pieces])
    vals = np.array([p[2] for p in pieces])
    return StepFn(bp, vals, domain=(pieces[0][0], pieces[-1][1]))


# ----------------------------------------------------------------- functionals

def cost_Jtilde(triple: AdmissibleTriple, target: TargetSpec, T: float,
                n_quad: int = 64) -> float:
    """Relaxed cost of a triple: direct slopes (x - y)/T off the band,
    crossing slopes -rho/t on it."""
    if T <= 0.0 or not np.isfinite(T):
        raise InputError(f"horizon must be positive, got {T}")
    pair, C = target.pair, target.C
    R, y, rho = triple.R, triple.y, triple.rho
    if rho is not None and np.any(rho.values > 1e-9 * (1.0 + abs(rho.min))):
        raise InputError("cost_Jtilde expects the band-on-the-right orientation; "
                         "mirror the triple and target first")
    kbp = target.k_breakpoints()

    def direct_sq(xs):
        return ((xs - _foot_vals(y, xs)) / T - target.eta(xs)) ** 2

    # left of the interface
    pts = [-C]
    lo_int = -C
    if y is not None:
        dlo, dhi = y.domain
        lo_int = min(lo_int, dlo)
        pts.extend([dlo, dhi])
        pts.extend(y.breakpoints.tolist())
    pts.extend(kbp.tolist())
    total = _simpson_over(direct_sq, _interval_nodes(pts, lo_int, 0.0), n_quad)

    # crossing band
    if R > _TOL and rho is not None:
        qtol = 1e-11 * (1.0 + float(np.max(np.abs(rho.values))))

        def cross_sq(xs):
            rv = rho(np.clip(xs, 0.0, R))
            q = np.empty_like(xs)
            m = rv < -qtol
            if m.any():
                t = backward.solve_tmap(pair, xs[m], rv[m], T)
                q[m] = -rv[m] / t
            if (~m).any():
                q[~m] = pair.h_plus(np.maximum(xs[~m] / T, pair.p_plus_lo))
            return (q - target.eta(xs)) ** 2

        mid_pts = list(rho.breakpoints) + kbp.tolist()
        total += _simpson_over(cross_sq, _interval_nodes(mid_pts, 0.0, R), n_quad)

    # right of the band
    hi_int = max(C, R)
    pts = [C]
    if y is not None:
        dlo, dhi = y.domain
        hi_int = max(hi_int, dhi)
        pts.extend([dlo, dhi])
        pts.extend(y.breakpoints.tolist())
    pts.extend(kbp.tolist())
    if hi_int > R + _TOL:
        total += _simpson_over(direct_sq, _interval_nodes(pts, R, hi_int), n_quad)
    return float(total)


def cost_J(sol: "hj.SolutionField", target: TargetSpec, n_quad: int = 64) -> float:
    """Slope-coordinate misfit of a solved profile against the target.

    Four regions split by the activity boundaries L1(T) <= 0 <= R1(T): native
    slopes outside, flux-equality composites inside (clamped at the branch
    endpoints; the clamp count accumulates on the pair).
    """
    pair, T = sol.pair, sol.T
    L1, R1 = float(sol.l1()), float(sol.r1())
    C = target.C
    xs_s = np.asarray(sol.x, dtype=float)
    us = np.asarray(sol.u, dtype=float)
    lo = min(float(xs_s[0]), -C, L1)
    hi = max(float(xs_s[-1]), C, R1)
    pts = np.concatenate((xs_s, target.k_breakpoints(),
                          [-C, C, L1, R1, 0.0]))
    nodes = _interval_nodes(pts, lo, hi)

    def misfit_sq(xs):
        u = np.interp(xs, xs_s, us)
        mapped = np.empty_like(xs)
        m1 = xs < L1
        m2 = (xs >= L1) & (xs <= 0.0)
        m3 = (xs > 0.0) & (xs <= R1)
        m4 = xs > R1
        if m1.any():
            mapped[m1] = pair.g.deriv(u[m1])
        if m2.any():
            mapped[m2] = pair.transport_left(u[m2])
        if m3.any():
            mapped[m3] = pair.transport_right(u[m3])
        if m4.any():
            mapped[m4] = pair.f.deriv(u[m4])
        return (mapped - target.eta(xs)) ** 2

    return _simpson_over(misfit_sq, nodes, n_quad)


# --------------------------------------------------------------------- bounds

@dataclass(frozen=True)
class ControlBounds:
    rho0: float
    R0: float
    M1: float
    eta_norm_sq: float


def bounds(target: TargetSpec, T: float) -> ControlBounds:
    """A-priori box for the truncated admissible set:
    |rho| <= rho0 = (18 T^2 ||eta||^2)^{1/3}; R0 is the smallest R >= C with
    int_C^R h_+(x/T)^2 dx > 2 ||eta||^2; M1 = R0 + (6 T^2 ||eta||^2)^{1/3}."""
    if T <= 0.0 or not np.isfinite(T):
        raise InputError(f"horizon must be positive, got {T}")
    n2 = target.eta_norm_sq
    C = target.C
    rho0 = (18.0 * T * T * n2) ** (1.0 / 3.0)
    if n2 <= 1e-300:
        return ControlBounds(0.0, C, C, n2)
    pair = target.pair

    def growth(Rv: float) -> float:
        if Rv <= C:
            return 0.0
        xs = np.linspace(C, Rv, 513)
        vals = pair.h_plus(np.maximum(xs / T, pair.p_plus_lo)) ** 2
        w = np.ones(513)
        w[1:-1:2] = 4.0
        w[2:-1:2] = 2.0
        return (Rv - C) / (3.0 * 512) * float(w @ vals)

    R0 = solve_increasing(growth, 2.0 * n2, C, C + 1.0)
    M1 = R0 + (6.0 * T * T * n2) ** (1.0 / 3.0)
    return ControlBounds(rho0, R0, M1, n2)


# ------------------------------------------------------------------- minimize

@dataclass
class DiscSpec:
    n_R: int = 17
    n_levels: int = 64
    n_quad: int = 64

    def validate(self) -> None:
        if self.n_R < 1:
            raise InputError(f"n_R must be >= 1, got {self.n_R}")
        if self.n_levels < 1:
            raise InputError(f"n_levels must be >= 1, got {self.n_levels}")
        if self.n_quad < 2 or self.n_quad % 2:
            raise InputError(f"n_quad must be even and >= 2, got {self.n_quad}")


@dataclass
class MinimizeResult:
    triple: AdmissibleTriple        # in the winning frame (A2: mirrored coords)
    side: str                       # "A1" | "A2"
    jtilde: float
    u0: StepFn
    bounds: ControlBounds
    jcost: Optional[float] = None
    sol: Optional["hj.SolutionField"] = None
    plan: Optional[backward.BackwardPlan] = None
    history: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    def oriented(self):
        """(R_signed, rho, y) in the original frame; A2 results mirror back."""
        if self.side == "A1":
            return self.triple.R, self.triple.rho, self.triple.y
        rho = self.triple.rho.mirrored() if self.triple.rho is not None else None
        y = self.triple.y.mirrored() if self.triple.y is not None else None
        return -self.triple.R, rho, y


def _solve_rho_part(pair: FluxPair, target: TargetSpec, T: float, R: float,
                    b: ControlBounds, n_levels: int):
    edges = np.linspace(0.0, R, n_levels + 1)
    mids = 0.5 * (edges[:-1] + edges[1:])
    ev = target.eta(mids)
    floor = pair.h_plus(np.maximum(mids / T, pair.p_plus_lo))
    rho_hat = np.zeros_like(mids)
    solvable = ev > floor + 1e-12
    for i in np.nonzero(solvable)[0]:
        p = pair.h_plus_inv(float(ev[i]))
        t_i = T - mids[i] / p
        rho_hat[i] = -t_i * ev[i]
    rho_hat = np.clip(rho_hat, -b.rho0, 0.0)
    vals = isotonic_fit(rho_hat, increasing=True, lo=-b.rho0, hi=0.0)
    return StepFn(edges[:-1], vals, domain=(0.0, R))


def _y_segment(target: TargetSpec, T: float, edges: np.ndarray,
               lo: float, hi: float):
    """Bounded isotonic fit of the direct-slope targets on one exterior grid."""
    mids = 0.5 * (edges[:-1] + edges[1:])
    lens = np.diff(edges)
    goals = mids - T * target.eta(mids)
    vals = isotonic_fit(goals, weights=lens, increasing=True, lo=lo, hi=hi)
    return mids, vals


def _trim_identity(edges, vals, mids, side: str):
    """Drop identity-fitted cells from the outer end (left end of the left
    segment / right end of the right segment); the identity continuation is
    exact there while a step cell pays discretization cost."""
    n = len(vals)
    keep = np.abs(vals - mids) > _TRIM_TOL * (1.0 + np.abs(mids))
    if side == "left":
        idx = np.nonzero(keep)[0]
        if idx.size == 0:
            return None
        i0 = idx[0]
        return edges[i0:], vals[i0:]
    idx = np.nonzero(keep)[0]
    if idx.size == 0:
        return None
    i1 = idx[-1]
    return edges[:i1 + 2], vals[:i1 + 1]


def _solve_candidate(pair: FluxPair, target: TargetSpec, T: float, R: float,
                     b: ControlBounds, disc: DiscSpec):
    """Best triple at a fixed band radius R: pointwise rho + isotonic y."""
    C, M1 = target.C, b.M1
    R = float(min(max(R, 0.0), b.R0))
    rho = _solve_rho_part(pair, target, T, R, b, disc.n_levels) if R > _TOL else None

    n_out = max(4, disc.n_levels // 8)
    # left exterior: fine cells where eta lives, coarse filler out to -M1
    fine_l = np.linspace(-min(C, M1), 0.0, disc.n_levels + 1)
    if M1 > C + 1e-12:
        coarse = np.linspace(-M1, -C, n_out + 1)
        edges_l = np.concatenate((coarse[:-1], fine_l))
    else:
        edges_l = fine_l
    mids_l, vals_l = _y_segment(target, T, edges_l, lo=-M1, hi=0.0)
    left = _trim_identity(edges_l, vals_l, mids_l, "left")

    # right exterior: fine on [R, max(C, R)], coarse out to M1; a hairline
    # [R, C] gap is cost-invisible, so skip it rather than emit sliver cells
    fine_hi = max(C, R)
    seg_tol = 1e-8 * (1.0 + C + M1)
    parts = []
    if fine_hi > R + seg_tol:
        parts.append(np.linspace(R, fine_hi, disc.n_levels + 1))
    if M1 > fine_hi + seg_tol:
        coarse = np.linspace(fine_hi, M1, n_out + 1)
        parts.append(coarse if not parts else coarse[1:])
    right = None
    if parts:
        edges_r = np.concatenate(parts)
        mids_r, vals_r = _y_segment(target, T, edges_r, lo=0.0, hi=M1)
        right = _trim_identity(edges_r, vals_r, mids_r, "right")

    if left is None and right is None:
        y = None
    else:
        bp_parts, val_parts = [], []
        if left is not None:
            bp_parts.append(left[0][:-1])
            val_parts.append(left[1])
        if right is not None:
            if left is not None and right[0][0] - left[0][-1] > 1e-12:
                # filler over the gap [left end, right start); never used by
                # the cost (the band covers [0, R]) but keeps one StepFn
                bp_parts.append(np.array([left[0][-1]]))
                val_parts.append(np.array([right[1][0]]))
            bp_parts.append(right[0][:-1])
            val_parts.append(right[1])
            dom_hi = right[0][-1]
        else:
            dom_hi = left[0][-1]
        dom_lo = left[0][0] if left is not None else right[0][0]
        y = StepFn(np.concatenate(bp_parts), np.concatenate(val_parts),
                   domain=(dom_lo, dom_hi))

    triple = AdmissibleTriple(R, rho, y)
    return triple, cost_Jtilde(triple, target, T, disc.n_quad)


def _best_triple(pair: FluxPair, target: TargetSpec, T: float,
                 disc: DiscSpec, threads: int):
    """Grid + local search over R for one orientation."""
    b = bounds(target, T)
    base = zero_triple()
    best = (base, cost_Jtilde(base, target, T, disc.n_quad))
    history = [(0.0, best[1])]
    if b.R0 <= _TOL:
        return best[0], best[1], b, history
    grid = np.linspace(0.0, b.R0, max(disc.n_R, 2))

    def solve(Rv):
        return _solve_candidate(pair, target, T, Rv, b, disc)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            cands = list(ex.map(solve, grid))
    else:
        cands = [solve(Rv) for Rv in grid]
    history.extend((float(Rv), c[1]) for Rv, c in zip(grid, cands))
    i_best = int(np.argmin([c[1] for c in cands]))
    if cands[i_best][1] < best[1]:
        best = cands[i_best]
    # local refinement of R around the best grid point
    lo = grid[max(i_best - 1, 0)]
    hi = grid[min(i_best + 1, len(grid) - 1)]
    if hi - lo > 1e-9:
        r_star, _ = golden_min(lambda Rv: solve(Rv)[1], lo, hi, tol=1e-8)
        refined = solve(r_star)
        history.append((float(r_star), refined[1]))
        if refined[1] < best[1]:
            best = refined
    return best[0], best[1], b, history


def _mirror_target(target: TargetSpec) -> TargetSpec:
    pairm = target.pair.mirrored()
    if isinstance(target.k, StepFn):
        km = target.k.mirrored()
    else:
        k_orig = target.k_eval

        def km(x):
            x_arr = np.asarray(x, dtype=float)
            out = -_vec(k_orig, -np.atleast_1d(x_arr))
            return float(out[0]) if x_arr.ndim == 0 else out.reshape(x_arr.shape)

    return TargetSpec(pairm, km, target.C)


def _theta_data(pair: FluxPair) -> StepFn:
    return StepFn(np.array([0.0]), np.array([pair.g.theta, pair.f.theta]))


def minimize(target: TargetSpec, T: float = 1.0, disc: Optional[DiscSpec] = None,
             *, threads: int = 1, evaluate_J: bool = False,
             params: Optional[hj.SearchParams] = None) -> MinimizeResult:
    """Minimize the relaxed cost over truncated triples on both sides.

    Per candidate R the rho-part is matched pointwise and projected monotone,
    the y-part is a bounded isotonic fit; the zero triple is always in the
    candidate set, so the returned cost never exceeds ||eta||^2. Ties between
    the band-right and band-left solutions return the band-right one.
    """
    if disc is None:
        disc = DiscSpec()
    disc.validate()
    if T <= 0.0 or not np.isfinite(T):
        raise InputError(f"horizon must be positive, got {T}")
    pair = target.pair
    t1, c1, b1, h1 = _best_triple(pair, target, T, disc, threads)
    target_m = _mirror_target(target)
    t2, c2, b2, h2 = _best_triple(target_m.pair, target_m, T, disc, threads)

    if c1 <= c2 + 1e-12:
        side, triple, jt, b, hist = "A1", t1, c1, b1, h1
    else:
        side, triple, jt, b, hist = "A2", t2, c2, b2, h2

    caught: list = []
    plan = None
    if triple.R <= _TOL:
        u0 = _theta_data(pair)
        y_orig = triple.y
        if side == "A2" and y_orig is not None:
            y_orig = y_orig.mirrored()
        if y_orig is not None:
            plan = None
            # direct feet only: assemble data from the foot map piece by piece
            u0 = _feet_only_data(pair, y_orig, T)
    else:
        cap = 1e-9 * (1.0 + b.rho0)
        rho_c = StepFn(triple.rho.breakpoints,
                       np.minimum(triple.rho.values, -cap),
                       domain=triple.rho.domain)
        with _warnings.catch_warnings(record=True) as rec:
            _warnings.simplefilter("always")
            if side == "A1":
                plan = backward.construct(pair, rho_c, triple.y, T)
            else:
                rho_orig = rho_c.mirrored()
                y_orig = triple.y.mirrored() if triple.y is not None else None
                plan = backward.construct_minus(pair, rho_orig, y_orig, T)
        caught = [str(w.message) for w in rec]
        u0 = plan.u0

    res = MinimizeResult(triple=triple, side=side, jtilde=jt, u0=u0,
                         bounds=b, plan=plan, history=hist, warnings=caught)
    if evaluate_J:
        span = max(b.M1, target.C) + 1.0 + abs(pair.speed_bound(
            float(u0.values.min()), float(u0.values.max()))) * T
        xs = np.linspace(-span, span, 801)
        res.sol = hj.solve_profile(pair, u0, T, xs, params=params)
        res.jcost = cost_J(res.sol, target, disc.n_quad)
    return res


def _feet_only_data(pair: FluxPair, y: StepFn, T: float) -> StepFn:
    """Initial data whose direct characteristics realize a band-free foot map.

    Each y-cell [lo, hi) with foot v emits the fan state spanning slopes
    [(lo - v)/T, (hi - v)/T]; foot gaps close with two-constant lenses exactly
    as in the backward constructor. Implemented by delegating to a degenerate
    band vanishingly close to the interface.
    """
    eps = 1e-9
    rho = StepFn(np.array([0.0]), np.array([-eps]), domain=(0.0, eps))
    with _warnings.catch_warnings():
        _warnings.simplefilter("ignore")
        plan = backward.construct(pair, rho, y, T)
    return plan.u0
