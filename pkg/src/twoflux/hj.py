"""Variational forward solver.

The value function v(x, t) is the minimum of

    v0(curve start) + integral of the side's dual flux along the curve
                    + (dwell length) * c0_star

over curves made of at most three affine segments: an optional first segment
from the initial line to the interface, an optional dwell on x = 0 at rate
``c0_star = -max(min f, min g)``, and a final segment to (x, t). No segment
crosses x = 0. The entropy solution of the conservation law is u = dv/dx.

For step-function initial data every piece contributes one closed-form
candidate (interior stationary foot, clipped to the piece), so the direct
route is exact. Crossing routes are reduced to a one-dimensional search over
the interface departure time: arrivals V0(tau) are exact per piece, the
dwell is folded in with a prefix minimum over a tau grid, and the departure
time is polished by a vectorized golden-section pass, so crossing costs are
grid-seeded but locally exact.

Tie rule: candidates within tolerance of the minimal cost select the largest
extracted slope u (the left-limit state at shocks), which makes profiles
deterministic.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import InputError
from .fluxes import FluxPair
from .stepfn import StepFn

_GOLD = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass
class SearchParams:
    """Resolution of the crossing-route search."""

    tau_nodes: int = 1025       # uniform interface-time grid on [0, T]
    tail_levels: int = 48       # geometric nodes piling up at the query time
    refine_iters: int = 80      # golden-section iterations after the grid pass
    tie_tol: float = 1e-9       # relative cost tolerance for route ties
    trace_eps: float = 1e-6     # offset used when sampling interface traces
    threads: int = 1            # worker threads for profile evaluation


@dataclass
class ControlCurve:
    """The optimal curve behind one value query."""

    cost: float
    u: float
    route: str                  # "direct" | "cross" | "dwell"
    y0: float
    tau1: Optional[float] = None
    tau2: Optional[float] = None


@dataclass
class InterfaceTraces:
    """One-sided states at x = 0 -/+ along a time grid."""

    t: np.ndarray
    u_minus: np.ndarray
    u_plus: np.ndarray
    flux_minus: np.ndarray
    flux_plus: np.ndarray
    route_minus: list
    route_plus: list


@dataclass
class InterfaceReport:
    """Transmission and admissibility bookkeeping along the interface."""

    t: np.ndarray
    rh_defect: np.ndarray
    entropy_flag: np.ndarray
    dt: float
    rh_tol: float
    rh_violation_measure: float
    entropy_violation_measure: float


@dataclass
class SolutionField:
    """Profile of the entropy solution at time T plus route diagnostics."""

    pair: FluxPair
    u0: StepFn
    T: float
    x: np.ndarray
    u: np.ndarray
    v: np.ndarray
    tau2: np.ndarray            # interface departure time (nan on direct routes)
    y0: np.ndarray              # initial foot (nan on crossing routes)
    active: np.ndarray          # crossing route optimal (within tie tolerance)
    params: SearchParams = field(default_factory=SearchParams)

    def __post_init__(self):
        self._mini = None

    def _minimizer(self) -> "_Minimizer":
        if self._mini is None:
            self._mini = _Minimizer(self.pair, self.u0, self.T, self.params)
        return self._mini

    def interface_traces(self, t_grid=None) -> InterfaceTraces:
        return self._minimizer().traces(t_grid)

    def check_interface(self, t_grid=None, rh_tol=None) -> InterfaceReport:
        traces = self.interface_traces(t_grid)
        return check_traces(self.pair, traces, rh_tol=rh_tol,
                            slope_tol=_slope_tol(traces.t,
                                                 self.params.trace_eps))

    def r1(self, t: Optional[float] = None) -> float:
        return self._minimizer().active_bound(t if t is not None else self.T, "plus")

    def l1(self, t: Optional[float] = None) -> float:
        return self._minimizer().active_bound(t if t is not None else self.T, "minus")

    def activity_curves(self, t_grid=None):
        """(t, R1(t), L1(t)) arrays over a time grid."""
        m = self._minimizer()
        if t_grid is None:
            t_grid = np.linspace(self.T / 32.0, self.T, 32)
        t_grid = np.asarray(t_grid, dtype=float)
        r = np.array([m.active_bound(t, "plus") for t in t_grid])
        l = np.array([m.active_bound(t, "minus") for t in t_grid])
        return t_grid, r, l


class _Minimizer:
    """Precomputed search structures shared by every query at one horizon."""

    def __init__(self, pair: FluxPair, u0: StepFn, T: float, params: SearchParams):
        if not isinstance(u0, StepFn) or u0.domain is not None:
            raise InputError("forward solves need whole-line step-function initial data")
        if not (T > 0.0 and math.isfinite(T)):
            raise InputError(f"horizon T must be positive and finite, got {T}")
        self.pair = pair
        self.u0 = u0
        self.T = float(T)
        self.params = params
        self.v0 = u0.primitive

        left, right = [], []
        for lo, hi, val in u0.pieces():
            if lo < 0.0:
                left.append((lo, min(hi, 0.0), val))
            if hi > 0.0:
                right.append((max(lo, 0.0), hi, val))
        self._side = {
            "minus": tuple(np.array(a, dtype=float) for a in zip(*left)),
            "plus": tuple(np.array(a, dtype=float) for a in zip(*right)),
        }

        self.tau = np.linspace(0.0, T, params.tau_nodes)
        self.V0 = self._arrival_vec(self.tau)
        phi = self.V0 - pair.c0_star * self.tau
        self.prefix_min = np.minimum.accumulate(phi)
        hit = phi <= self.prefix_min
        self.prefix_arg = np.maximum.accumulate(
            np.where(hit, np.arange(len(phi)), -1))

    # ------------------------------------------------------------- arrivals

    def _arrival_vec(self, tau) -> np.ndarray:
        """V0(tau): cheapest one-segment arrival at the interface, both sides."""
        tau = np.atleast_1d(np.asarray(tau, dtype=float))
        out = np.full(tau.shape, np.inf)
        safe = np.maximum(tau, 1e-300)
        for side, flux in (("minus", self.pair.g), ("plus", self.pair.f)):
            lo, hi, val = self._side[side]
            ystar = -safe[None, :] * flux.deriv(val)[:, None]
            np.clip(ystar, lo[:, None], hi[:, None], out=ystar)
            cost = self.v0(ystar) + safe * flux.dual(-ystar / safe)
            out = np.minimum(out, cost.min(axis=0))
        out[tau <= 1e-15 * self.T] = self.v0(0.0)
        return out

    def arrival_structure(self, tau: float):
        """(cost, flux, state, foot) of the cheapest arrival at interface time tau."""
        if tau <= 1e-15 * self.T:
            return float(self.v0(0.0)), None, None, 0.0
        best = (np.inf, None, None, 0.0)
        for side, flux in (("minus", self.pair.g), ("plus", self.pair.f)):
            lo, hi, val = self._side[side]
            ystar = np.clip(-tau * flux.deriv(val), lo, hi)
            cost = self.v0(ystar) + tau * flux.dual(-ystar / tau)
            j = int(np.argmin(cost))
            if cost[j] < best[0]:
                w = float(flux.inv_deriv(-ystar[j] / tau))
                best = (float(cost[j]), float(flux.eval(w)), w, float(ystar[j]))
        return best

    # --------------------------------------------------------- route pieces

    def direct(self, xs: np.ndarray, t: float, side: str):
        """Exact single-segment route. Returns (cost, u, foot)."""
        flux = self.pair.f if side == "plus" else self.pair.g
        lo, hi, val = self._side[side]
        ystar = xs[None, :] - t * flux.deriv(val)[:, None]
        np.clip(ystar, lo[:, None], hi[:, None], out=ystar)
        cost = self.v0(ystar) + t * flux.dual((xs[None, :] - ystar) / t)
        cmin = cost.min(axis=0)
        # ties pick the smallest foot = largest slope u
        near = cost <= cmin + self.params.tie_tol * (1.0 + np.abs(cmin))
        y = np.where(near, ystar, np.inf).min(axis=0)
        u = flux.inv_deriv((xs - y) / t)
        return cmin, u, y

    def _node_set(self, t: float) -> np.ndarray:
        nodes = self.tau[self.tau < t * (1.0 - 1e-12)]
        tail = t - t * np.power(2.0, -np.arange(1, self.params.tail_levels + 1.0))
        nodes = np.unique(np.concatenate([nodes, tail[tail > 0.0]]))
        return nodes

    def _w_tilde(self, tau, anchor):
        """Approximate W(tau) = arrival + dwell: anchored prefix vs fresh arrival."""
        return np.minimum(anchor + self.pair.c0_star * tau, self._arrival_vec(tau))

    def cross(self, xs: np.ndarray, t: float, side: str):
        """Interface route. Returns (cost, u, tau2, tau1, dwell mask)."""
        flux = self.pair.f if side == "plus" else self.pair.g
        c0 = self.pair.c0_star
        nodes = self._node_set(t)
        idx = np.searchsorted(self.tau, nodes, side="right") - 1
        w_nodes = np.minimum(self.prefix_min[idx] + c0 * nodes,
                             self._arrival_vec(nodes))
        span = t - nodes
        cost_mat = w_nodes[:, None] + span[:, None] * flux.dual(xs[None, :] / span[:, None])
        j = np.argmin(cost_mat, axis=0)

        lo_b = nodes[np.maximum(j - 1, 0)]
        hi_b = np.minimum(nodes[np.minimum(j + 1, len(nodes) - 1)], t * (1.0 - 1e-14))
        anchor = self.prefix_min[np.maximum(idx[np.maximum(j - 1, 0)], 0)]

        def phi(taus):
            return (self._w_tilde(taus, anchor)
                    + (t - taus) * flux.dual(xs / (t - taus)))

        a, b = lo_b.copy(), hi_b.copy()
        c = b - _GOLD * (b - a)
        d = a + _GOLD * (b - a)
        fc, fd = phi(c), phi(d)
        for _ in range(self.params.refine_iters):
            take_left = fc < fd
            b = np.where(take_left, d, b)
            a = np.where(take_left, a, c)
            c = b - _GOLD * (b - a)
            d = a + _GOLD * (b - a)
            fc, fd = phi(c), phi(d)
        tau2 = np.where(fc < fd, c, d)
        cost = phi(tau2)
        arrival_here = self._arrival_vec(tau2)
        dwell = anchor + c0 * tau2 < arrival_here - 1e-12 * (1.0 + np.abs(arrival_here))
        u = flux.inv_deriv(xs / (t - tau2))
        if np.any(dwell):
            crest = (self.pair.f.inv_branch("plus", -c0) if side == "plus"
                     else self.pair.g.inv_branch("minus", -c0))
            u = np.where(dwell, crest, u)
        t1_idx = self.prefix_arg[np.clip(np.searchsorted(self.tau, tau2, side="right") - 1,
                                         0, len(self.tau) - 1)]
        tau1 = np.where(dwell, self.tau[np.maximum(t1_idx, 0)], tau2)
        return cost, u, tau2, tau1, dwell

    # ------------------------------------------------------------- assembly

    def profile_side(self, xs: np.ndarray, t: float, side: str):
        ca, ua, ya = self.direct(xs, t, side)
        cb, ub, tau2, tau1, dwell = self.cross(xs, t, side)
        tol = self.params.tie_tol * (1.0 + np.minimum(np.abs(ca), np.abs(cb)))
        tie = np.abs(ca - cb) <= tol
        pick_b = np.where(tie, ub > ua, cb < ca)
        v = np.where(pick_b, cb, ca)
        u = np.where(pick_b, ub, ua)
        active = cb <= ca + tol
        return (v, u,
                np.where(pick_b, tau2, np.nan),
                np.where(pick_b, np.nan, ya),
                active)

    def profile(self, xs: np.ndarray, t: float):
        xs = np.asarray(xs, dtype=float)
        v = np.empty_like(xs)
        u = np.empty_like(xs)
        tau2 = np.full_like(xs, np.nan)
        y0 = np.full_like(xs, np.nan)
        active = np.zeros(xs.shape, dtype=bool)
        for side, mask in (("minus", xs < 0.0), ("plus", xs >= 0.0)):
            if np.any(mask):
                out = self.profile_side(xs[mask], t, side)
                v[mask], u[mask], tau2[mask], y0[mask], active[mask] = out
        zero = xs == 0.0
        if np.any(zero):
            # the departure-slope formula degenerates at x = 0; report the
            # right limit extracted the same way traces are
            u[zero] = self._trace_one(t, "plus")[0]
        return v, u, tau2, y0, active

    # ------------------------------------------------------------ boundaries

    def active_bound(self, t: float, side: str) -> float:
        """R1(t) (side="plus") or L1(t) (side="minus"): outermost crossing-active x."""
        sgn = 1.0 if side == "plus" else -1.0
        umax = max(abs(self.u0.min), abs(self.u0.max), abs(self.pair.theta_bar)) + 1.0
        flux = self.pair.f if side == "plus" else self.pair.g
        xmax = (abs(flux.deriv(sgn * umax)) + abs(flux.deriv(-sgn * umax))) * t + 1e-9
        grid = sgn * np.linspace(1e-9, xmax, 256)
        act = self.profile(grid, t)[4]
        if not act.any():
            return 0.0
        k = int(np.max(np.nonzero(act)[0]))
        if k == len(grid) - 1:
            return float(grid[k])
        lo, hi = grid[k], grid[k + 1]          # active at lo, inactive at hi
        for _ in range(40):
            mid = 0.5 * (lo + hi)
            if self.profile(np.array([mid]), t)[4][0]:
                lo = mid
            else:
                hi = mid
        return float(0.5 * (lo + hi))

    # ---------------------------------------------------------------- traces

    def _trace_one(self, t: float, side: str):
        eps = self.params.trace_eps * (1.0 + self.T)
        x = np.array([eps if side == "plus" else -eps])
        ca, ua, ya = self.direct(x, t, side)
        cb, ub, tau2, tau1, dwell = self.cross(x, t, side)
        flux = self.pair.f if side == "plus" else self.pair.g
        floor = flux.min_value
        tol = self.params.tie_tol * (1.0 + min(abs(float(ca[0])), abs(float(cb[0]))))
        if float(ca[0]) < float(cb[0]) - tol:
            # re-extract the slope at x = 0 exactly, keeping the piece chosen
            # at the offset point (the one-sided limit)
            return float(flux.inv_deriv(-ya[0] / t)), "direct"
        if bool(dwell[0]):
            return float(ub[0]), "dwell"       # already the exact crest state
        _, arr_flux, _, _ = self.arrival_structure(float(tau1[0]))
        if arr_flux is None:
            return float(ub[0]), "cross"
        branch = "plus" if side == "plus" else "minus"
        return float(flux.inv_branch(branch, max(arr_flux, floor))), "cross"

    def traces(self, t_grid=None) -> InterfaceTraces:
        if t_grid is None:
            t_grid = np.linspace(self.T / 64.0, self.T, 64)
        t_grid = np.asarray(t_grid, dtype=float)
        um, up, rm, rp = [], [], [], []
        for t in t_grid:
            a, la = self._trace_one(float(t), "minus")
            b, lb = self._trace_one(float(t), "plus")
            um.append(a)
            up.append(b)
            rm.append(la)
            rp.append(lb)
        um, up = np.array(um), np.array(up)
        return InterfaceTraces(
            t=t_grid, u_minus=um, u_plus=up,
            flux_minus=np.asarray(self.pair.g.eval(um)),
            flux_plus=np.asarray(self.pair.f.eval(up)),
            route_minus=rm, route_plus=rp)


# ------------------------------------------------------------------ frontend

def value(pair: FluxPair, u0: StepFn, x: float, t: float,
          params: Optional[SearchParams] = None) -> float:
    """Value function at a single point."""
    return optimal_curve(pair, u0, x, t, params).cost


def optimal_curve(pair: FluxPair, u0: StepFn, x: float, t: float,
                  params: Optional[SearchParams] = None) -> ControlCurve:
    params = params or SearchParams()
    m = _Minimizer(pair, u0, t, params)
    side = "plus" if x >= 0 else "minus"
    xs = np.array([float(x)])
    ca, ua, ya = m.direct(xs, t, side)
    cb, ub, tau2, tau1, dwell = m.cross(xs, t, side)
    tol = params.tie_tol * (1.0 + min(abs(float(ca[0])), abs(float(cb[0]))))
    if float(ca[0]) < float(cb[0]) - tol or (abs(float(ca[0]) - float(cb[0])) <= tol
                                             and float(ua[0]) >= float(ub[0])):
        return ControlCurve(cost=float(ca[0]), u=float(ua[0]), route="direct",
                            y0=float(ya[0]))
    route = "dwell" if bool(dwell[0]) else "cross"
    _, _, _, y_foot = m.arrival_structure(float(tau1[0]))
    return ControlCurve(cost=float(cb[0]), u=float(ub[0]), route=route,
                        y0=y_foot, tau1=float(tau1[0]), tau2=float(tau2[0]))


def solve_profile(pair: FluxPair, u0: StepFn, T: float, xs=None,
                  params: Optional[SearchParams] = None) -> SolutionField:
    """Entropy-solution profile u(., T) on a grid of x values."""
    params = params or SearchParams()
    m = _Minimizer(pair, u0, T, params)
    if xs is None:
        umax = max(abs(u0.min), abs(u0.max), abs(pair.theta_bar)) + 1.0
        speed = pair.speed_bound(-umax, umax)
        lo = (float(u0.breakpoints[0]) if len(u0.breakpoints) else -1.0) - speed * T
        hi = (float(u0.breakpoints[-1]) if len(u0.breakpoints) else 1.0) + speed * T
        xs = np.linspace(lo, hi, 2001)
    xs = np.asarray(xs, dtype=float)

    n_threads = max(1, int(params.threads))
    if n_threads > 1 and len(xs) >= 64:
        chunks = np.array_split(np.arange(len(xs)), n_threads)
        results = [None] * len(chunks)
        with ThreadPoolExecutor(max_workers=n_threads) as ex:
            futs = {ex.submit(m.profile, xs[c], T): i for i, c in enumerate(chunks)}
            for fut, i in futs.items():
                results[i] = fut.result()
        v = np.concatenate([r[0] for r in results])
        u = np.concatenate([r[1] for r in results])
        tau2 = np.concatenate([r[2] for r in results])
        y0 = np.concatenate([r[3] for r in results])
        active = np.concatenate([r[4] for r in results])
    else:
        v, u, tau2, y0, active = m.profile(xs, T)

    fieldobj = SolutionField(pair=pair, u0=u0, T=T, x=xs, u=u, v=v,
                             tau2=tau2, y0=y0, active=active, params=params)
    fieldobj._mini = m
    return fieldobj


def interface_traces(pair: FluxPair, u0: StepFn, T: float, t_grid=None,
                     params: Optional[SearchParams] = None) -> InterfaceTraces:
    params = params or SearchParams()
    return _Minimizer(pair, u0, T, params).traces(t_grid)


def _slope_tol(t, trace_eps: float):
    # sampling at offset eps reads a fan centered at the interface as a
    # slope ~eps/t on each side; the outgoing-characteristics test sits two
    # orders above that bias (a genuine violation has eps-independent slopes)
    return np.maximum(1e-6, 100.0 * trace_eps / np.maximum(t, 1e-300))


def check_traces(pair: FluxPair, traces: InterfaceTraces,
                 rh_tol: Optional[float] = None,
                 slope_tol=None) -> InterfaceReport:
    """Flux transmission and admissibility measures along the interface."""
    scale = 1.0 + max(float(np.max(np.abs(traces.flux_minus))),
                      float(np.max(np.abs(traces.flux_plus))))
    if rh_tol is None:
        # trace states carry an O(eps) offset from one-sided sampling, so the
        # transmission tolerance sits well above it but far below O(1) jumps
        rh_tol = 1e-4 * scale
    if slope_tol is None:
        slope_tol = _slope_tol(traces.t, SearchParams().trace_eps)
    defect = np.abs(traces.flux_plus - traces.flux_minus)
    sp = np.asarray(pair.f.deriv(traces.u_plus))
    sm = np.asarray(pair.g.deriv(traces.u_minus))
    ent = (sp > slope_tol) & (sm < -slope_tol)
    dt = float(traces.t[1] - traces.t[0]) if len(traces.t) > 1 else float(traces.t[0])
    return InterfaceReport(
        t=traces.t, rh_defect=defect, entropy_flag=ent, dt=dt, rh_tol=rh_tol,
        rh_violation_measure=float(np.count_nonzero(defect > rh_tol) * dt),
        entropy_violation_measure=float(np.count_nonzero(ent) * dt))


def check_interface(pair: FluxPair, u0: StepFn, T: float, t_grid=None,
                    params: Optional[SearchParams] = None,
                    rh_tol: Optional[float] = None) -> InterfaceReport:
    traces = interface_traces(pair, u0, T, t_grid, params)
    eps = (params or SearchParams()).trace_eps
    return check_traces(pair, traces, rh_tol=rh_tol,
                        slope_tol=_slope_tol(traces.t, eps))
