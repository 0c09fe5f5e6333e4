"""Backward construction of initial data from a time-T target description.

The target at time T is encoded by two foot maps:

* ``rho`` on [0, R] (nondecreasing, strictly negative): each x in (0, R]
  is reached by a characteristic that starts at ``(rho(x), 0)`` on the
  g side, crosses the interface at a time ``t(x)`` in (0, T), and ends at
  ``(x, T)`` on the f side.  The target value there is
  ``u(x, T) = (f')^{-1}(x / (T - t(x)))``.
* ``y`` elsewhere (the exterior): each x outside [0, R] is reached by a
  same-side characteristic from ``(y(x), 0)``, so
  ``u(x, T) = (h')^{-1}((x - y(x)) / T)`` with h = g on x < 0 and h = f on
  x > 0.  ``y=None`` means the identity map (quiescent exterior).

``construct`` assembles piecewise-constant initial data whose entropy
solution realizes that target exactly on (0, R]:

* each constant piece of ``rho`` becomes a centred fan (an upward jump of
  the data at the foot);
* adjacent pieces are separated by a *bridge shock* that is backtracked
  from its landing point ``(x_i, T)`` through the interface to a seed on
  the t=0 line (``bridge_shock``);
* gaps between prescribed feet are filled with two-constant lenses whose
  internal shock, both edge characteristics, and the gap's closing point
  on the T line all meet exactly;
* the gap (0, y(R)) on the f side is filled the same way when the lens
  split lands at z >= 0, and otherwise with a stepified focusing ramp
  ``(f')^{-1}((R - z)/T)`` whose waves all collapse at (R, T), which keeps
  (0, R] exact and perturbs only a O(1/N) neighbourhood right of R.

An exterior map with ``y(0-) > rho(0)`` cannot coexist with the crossing
band; the exterior is then truncated at ``rho(0)`` with a warning (the
band stays exact, the left exterior near 0- is not realized).
"""

from __future__ import annotations

import math
import warnings as _warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ConvergenceError, InputError
from .fluxes import ConvexFlux, FluxPair
from .rootfind import solve_increasing
from .stepfn import StepFn

_TOL = 1e-12
_TMAP_ITERS = 100


def _t_at_zero(pair: FluxPair, rho, T: float):
    """Crossing time for the target x = 0+: T unless the minus-side
    admissible floor cuts the feed short (then -rho / g'(floor))."""
    rho_arr = np.asarray(rho, dtype=float)
    q_lo = pair.q_minus_lo
    if q_lo <= _TOL:
        out = np.full(rho_arr.shape, float(T))
    else:
        out = np.minimum(float(T), -rho_arr / q_lo)
    return float(out) if rho_arr.ndim == 0 else out


def solve_tmap(pair: FluxPair, x, rho, T: float):
    """Interface crossing time t in (0, T] for the target (x, T), x >= 0,
    with g-side foot rho < 0.

    t is the unique root of ``(T - t) f'(a(t)) = x`` where
    ``b(t) = (g')^{-1}(-rho/t)`` and ``a(t) = f_+^{-1}(g(b(t)))``; the left
    side is strictly decreasing in t. Vectorized over x and rho.
    """
    x_arr, rho_arr = np.broadcast_arrays(np.asarray(x, dtype=float),
                                         np.asarray(rho, dtype=float))
    scalar = x_arr.ndim == 0
    x_arr = np.atleast_1d(np.array(x_arr, dtype=float))
    rho_arr = np.atleast_1d(np.array(rho_arr, dtype=float))
    if T <= 0.0:
        raise InputError("solve_tmap: T must be positive")
    if np.any(x_arr < -_TOL):
        raise InputError("solve_tmap: x must be >= 0")
    if np.any(rho_arr >= 0.0):
        raise InputError("solve_tmap: rho must be strictly negative")

    f, g = pair.f, pair.g
    fm = f.min_value

    def resid(t):
        b = g.inv_deriv(-rho_arr / t)
        a = f.inv_branch("plus", np.maximum(g.eval(b), fm))
        return (T - t) * f.deriv(a) - x_arr

    lo = np.zeros_like(x_arr)
    hi = np.full_like(x_arr, float(T))
    for _ in range(_TMAP_ITERS):
        mid = 0.5 * (lo + hi)
        pos = resid(mid) > 0.0          # decreasing residual: root right of mid
        lo = np.where(pos, mid, lo)
        hi = np.where(pos, hi, mid)
    t = 0.5 * (lo + hi)
    at_zero = x_arr <= _TOL
    if np.any(at_zero):
        t = np.where(at_zero, _t_at_zero(pair, rho_arr, T), t)
    return float(t[0]) if scalar else t


@dataclass
class CrossingState:
    """Resolved crossing characteristic for one target point."""
    a: float      # f-side state (plus branch)
    b: float      # g-side state (plus branch of g')
    t: float      # interface time


def solve_briemann(pair: FluxPair, x: float, rho0: float, T: float) -> CrossingState:
    """Crossing state for the target (x, T), x >= 0, when the foot map is the
    constant rho0 < 0.

    The g-side state b solves ``S(b) = x`` with
    ``S(b) = f'(f_+^{-1}(g(b))) * (T + rho0/g'(b))``, which is strictly
    increasing from 0 on ``b > b_min = max((g')^{-1}(-rho0/T), floor)``.
    """
    if T <= 0.0 or x < -_TOL:
        raise InputError("solve_briemann: need T > 0 and x >= 0")
    if rho0 >= 0.0:
        raise InputError("solve_briemann: rho0 must be strictly negative")
    f, g = pair.f, pair.g
    fm = f.min_value
    b_T = float(g.inv_deriv(-rho0 / T))
    b_min = max(b_T, pair.iminus_lo)

    if x <= _TOL:
        b = b_min
    else:
        def S(b):
            a = float(f.inv_branch("plus", max(float(g.eval(b)), fm)))
            return f.deriv(a) * (T + rho0 / g.deriv(b))
        b = solve_increasing(S, float(x), b_min, b_min + 1.0)
    a = float(f.inv_branch("plus", max(float(g.eval(b)), fm)))
    t = min(float(T), -rho0 / float(g.deriv(b)))
    return CrossingState(a=a, b=float(b), t=t)


@dataclass
class BridgeShock:
    """Shock that lands at (x0, T) and separates two crossing fans.

    Backtracked from the landing point: an f-side segment of slope ``s2``
    down to the interface at time ``t3``, then a g-side segment of slope
    ``s1`` down to the seed ``(rho3, 0)``, with ``rho3`` strictly between
    the two feet.
    """
    x0: float
    rho1: float
    rho2: float
    t1: float
    t2: float
    b1: float
    b2: float
    a1: float
    a2: float
    s2: float
    t3: float
    s1: float
    rho3: float


def bridge_shock(pair: FluxPair, x0: float, t1: float, t2: float,
                 rho1: float, rho2: float, T: float) -> BridgeShock:
    """Backtrack the fan-separating shock landing at (x0, T).

    ``rho1 < rho2 < 0`` are the feet of the two fans and ``t1 > t2`` their
    crossing times at the shared target edge x0.
    """
    if not (rho1 < rho2 < 0.0):
        raise InputError("bridge_shock: need rho1 < rho2 < 0")
    if not (0.0 < t2 < t1 <= T):
        raise InputError("bridge_shock: need 0 < t2 < t1 <= T")
    if x0 <= 0.0:
        raise InputError("bridge_shock: need x0 > 0")
    f, g = pair.f, pair.g
    fm = f.min_value
    b1 = float(g.inv_deriv(-rho1 / t1))
    b2 = float(g.inv_deriv(-rho2 / t2))
    a1 = float(f.inv_branch("plus", max(float(g.eval(b1)), fm)))
    a2 = float(f.inv_branch("plus", max(float(g.eval(b2)), fm)))
    s2 = float(f.chord(a1, a2))
    t3 = T - x0 / s2
    s1 = float(g.chord(b1, b2))
    rho3 = -s1 * t3
    return BridgeShock(x0=x0, rho1=rho1, rho2=rho2, t1=t1, t2=t2,
                       b1=b1, b2=b2, a1=a1, a2=a2, s2=s2, t3=t3, s1=s1,
                       rho3=rho3)


# --------------------------------------------------------------------------
# foot-map discretization


def discretize_rho(rho, R: float, N: int) -> StepFn:
    """Quantize a callable nondecreasing negative foot map on [0, R] into a
    StepFn with value gaps below 1/N (level count scales with the range).

    StepFn inputs are validated and passed through unchanged.
    """
    if isinstance(rho, StepFn):
        _validate_rho(rho)
        return rho
    if not callable(rho):
        raise InputError("rho must be a StepFn or a callable")
    if not (R > 0.0) or N < 1:
        raise InputError("discretize_rho: need R > 0 and N >= 1")
    xs = np.linspace(0.0, R, 4097)
    vals = np.asarray(rho(xs), dtype=float)
    if vals.shape != xs.shape:
        vals = np.array([float(rho(float(xx))) for xx in xs])
    if np.any(np.diff(vals) < -1e-10 * (1.0 + np.abs(vals).max())):
        raise InputError("discretize_rho: rho must be nondecreasing")
    scale = float(np.abs(vals).max())
    cap = -1e-9 * (1.0 + scale)
    if vals[0] > -cap:          # only noise-level excursions above 0 are clamped
        raise InputError("discretize_rho: rho must be strictly negative")
    vals = np.minimum(vals, cap)
    vals = np.maximum.accumulate(vals)          # enforce monotone after clamp
    rng = float(vals[-1] - vals[0])
    L = max(1, int(math.ceil(rng * N)))
    if rng <= 1e-14 * (1.0 + scale):
        return StepFn(np.asarray([0.0]), np.asarray([0.5 * (vals[0] + vals[-1])]),
                      domain=(0.0, R))
    edges = vals[0] + rng * np.arange(1, L) / L
    mids = np.minimum(vals[0] + rng * (np.arange(L) + 0.5) / L, cap)
    x_edges = np.interp(edges, vals, xs)
    bp = [0.0]
    out_vals = [float(mids[0])]
    for j, xe in enumerate(x_edges):
        if xe <= bp[-1] + 1e-12 * (1.0 + R):
            out_vals[-1] = float(mids[j + 1])   # zero-width level: skip it
            continue
        if xe >= R - 1e-12 * (1.0 + R):
            break
        bp.append(float(xe))
        out_vals.append(float(mids[j + 1]))
    return StepFn(np.asarray(bp), np.asarray(out_vals), domain=(0.0, R))


def _validate_rho(rho: StepFn) -> None:
    if rho.domain is None:
        raise InputError("rho must be an interval-domain StepFn starting at 0")
    lo, hi = rho.domain
    if abs(lo) > _TOL or hi <= 0.0:
        raise InputError("rho domain must be [0, R] with R > 0")
    if np.any(rho.values >= 0.0):
        raise InputError("rho values must be strictly negative")
    if np.any(np.diff(rho.values) < 0.0):
        raise InputError("rho must be nondecreasing")


# --------------------------------------------------------------------------
# assembly


def _merge_rho_pieces(rho: StepFn) -> tuple[np.ndarray, np.ndarray]:
    """Edges x[0..n] (x0=0, xn=R) and feet r[0..n-1], equal neighbours merged."""
    lo, hi = rho.domain
    edges = np.concatenate((rho.breakpoints, [hi]))
    feet = rho.values
    keep_e = [edges[0]]
    keep_r = [feet[0]]
    scale = 1.0 + float(np.abs(feet).max())
    # below ~1e-12 the bridge times between neighbouring fans drown in solver
    # noise, so such neighbours are one fan for every practical purpose
    for i in range(1, feet.size):
        if abs(feet[i] - keep_r[-1]) <= 1e-12 * scale:
            continue
        keep_e.append(edges[i])
        keep_r.append(feet[i])
    keep_e.append(edges[-1])
    return np.asarray(keep_e), np.asarray(keep_r)


def _side_pieces(y: StepFn, lo_cut: float, hi_cut: float) -> list[tuple[float, float, float]]:
    """Pieces of y clipped to (lo_cut, hi_cut), inf-aware."""
    out = []
    for plo, phi, v in y.pieces():
        a = max(plo, lo_cut)
        b = min(phi, hi_cut)
        if b > a + _TOL:
            out.append((a, b, v))
    return out


def _drop_sliver_y(y: StepFn | None, scale: float,
                   warn: list[str]) -> StepFn | None:
    """Drop exterior prescriptions of negligible width.

    A y piece over a hairline landing interval moves no measurable mass, but
    the lens bookkeeping would still treat its foot state as real data and
    grow a sacrificial block out of it; filter such pieces up front.
    """
    if y is None:
        return None
    tol = 1e-8 * scale
    kept = [(plo, phi, v) for plo, phi, v in y.pieces() if phi - plo > tol]
    if len(kept) == len(y.values):
        return y
    warn.append("dropped negligible-width exterior pieces")
    if not kept:
        return None
    bp = np.asarray([p[0] for p in kept])
    vals = np.asarray([p[2] for p in kept])
    return StepFn(bp, vals, domain=(kept[0][0], kept[-1][1]))


def _exterior_events(flux: ConvexFlux, pieces, ident_lo: float, ident_hi: float,
                     T: float, warn: list[str], label: str):
    """Lens-split events for one exterior side.

    ``pieces``: (x_lo, x_hi, foot) of the prescribed exterior, ordered, with
    identity continuation outside (ident_lo, ident_hi). Returns
    (events, last_foot, last_top_state); events are (z, value-right-of-z).
    The sweep starts from the flux's rest state theta.
    """
    theta = flux.theta
    events: list[tuple[float, float]] = []
    feet = [p[2] for p in pieces]
    if any(feet[i + 1] < feet[i] - _TOL for i in range(len(feet) - 1)):
        raise InputError("exterior foot map y must be nondecreasing")

    # walk gap-by-gap; the virtual identity piece ends at ident_lo with foot
    # ident_lo and state theta
    prev_top = theta
    prev_foot = ident_lo
    for (plo, phi, v) in pieces:
        x_j = plo
        lo_state = float(flux.inv_deriv((x_j - v) / T))
        if v > prev_foot + _TOL:
            zsplit = x_j - T * float(flux.chord(prev_top, lo_state))
            zsplit = min(max(zsplit, prev_foot), v)
            events.append((zsplit, lo_state))
        elif v < prev_foot - _TOL:
            warn.append(f"{label}: foot map decreases at x={x_j:g}; clipped")
            v = prev_foot
        top = float(flux.inv_deriv((phi - v) / T))
        events.append((v, top))
        prev_top, prev_foot = top, v
    # closing gap to the identity continuation at ident_hi (if finite)
    if np.isfinite(ident_hi):
        x_j = ident_hi
        lo_state = theta
        if ident_hi > prev_foot + _TOL:
            zsplit = x_j - T * float(flux.chord(prev_top, lo_state))
            zsplit = min(max(zsplit, prev_foot), ident_hi)
            events.append((zsplit, lo_state))
        events.append((ident_hi, theta))
        prev_top, prev_foot = theta, ident_hi
    return events, prev_foot, prev_top


@dataclass
class BackwardPlan:
    """Initial data realizing a time-T target, plus the construction record."""
    pair: FluxPair
    T: float
    side: str                      # "plus" | "minus"
    rho: StepFn
    y: StepFn | None
    u0: StepFn
    bridges: list[BridgeShock]
    feed_t_lo: np.ndarray          # per rho piece, crossing time at the left target edge
    feed_t_hi: np.ndarray          # ... at the right target edge (smaller)
    tv_crossing: float             # TV of g' o u0 over (rho(0), rho(R))
    tv_bound: float                # a-priori bound T * C6^2 (|rho(0)| + |rho(0)-rho(R)|)
    warnings: list[str] = field(default_factory=list)

    @property
    def R(self) -> float:
        """Signed extent of the crossing band (negative for the minus side)."""
        return self.rho.domain[1] if self.side == "plus" else self.rho.domain[0]

    def _working(self):
        if self.side == "plus":
            return self.pair, self.rho
        return self.pair.mirrored(), self.rho.mirrored()

    def tmap(self, x):
        """Crossing times for targets inside the band (vectorized)."""
        wpair, wrho = self._working()
        x_arr = np.asarray(x, dtype=float)
        wx = x_arr if self.side == "plus" else -x_arr
        lo, hi = wrho.domain
        if np.any(wx < lo - 1e-9 * (1 + hi)) or np.any(wx > hi + 1e-9 * (1 + hi)):
            raise InputError("tmap: x outside the crossing band")
        wx = np.clip(wx, lo, hi)
        return solve_tmap(wpair, wx, wrho(wx), self.T)

    def ideal_profile(self, x):
        """The target profile u(x, T) encoded by rho, on the band."""
        wpair, _ = self._working()
        x_arr = np.asarray(x, dtype=float)
        wx = x_arr if self.side == "plus" else -x_arr
        t = np.asarray(self.tmap(x), dtype=float)
        u = wpair.f.inv_deriv(wx / np.maximum(self.T - t, 1e-300))
        return u if self.side == "plus" else -u

    def roundtrip_error(self, nx: int = 601, params=None) -> float:
        """L1 distance on the band between the forward solution of u0 and the
        encoded target profile."""
        from .hj import solve_profile
        lo, hi = (0.0, self.R) if self.side == "plus" else (self.R, 0.0)
        xs = lo + (hi - lo) * (np.arange(nx) + 0.5) / nx
        fwd = solve_profile(self.pair, self.u0, self.T, xs=xs, params=params)
        return float(np.mean(np.abs(fwd.u - self.ideal_profile(xs))) * (hi - lo))


def construct(pair: FluxPair, rho, y: StepFn | None = None, T: float = 1.0,
              *, N: int = 64, R: float | None = None) -> BackwardPlan:
    """Assemble initial data realizing the target encoded by (rho, y) at time T.

    ``rho``: StepFn on [0, R] (strictly negative, nondecreasing) or a callable
    (then ``R`` is required and ``N`` controls the quantization).  ``y``:
    exterior foot map (StepFn, identity-continued outside its domain) or None
    for the identity.
    """
    if T <= 0.0:
        raise InputError("construct: T must be positive")
    if not isinstance(rho, StepFn):
        if R is None:
            raise InputError("construct: a callable rho needs an explicit R")
        rho = discretize_rho(rho, R, N)
    _validate_rho(rho)
    if y is not None and not isinstance(y, StepFn):
        raise InputError("construct: y must be a StepFn or None")
    if y is not None and y.domain is None:
        raise InputError("construct: y must have an interval domain")

    f, g = pair.f, pair.g
    fm = f.min_value
    warn: list[str] = []

    edges, feet = _merge_rho_pieces(rho)   # edges[0]=0, edges[-1]=R
    n = feet.size
    R_band = float(edges[-1])
    if y is not None:
        dlo, dhi = y.domain
        y = _drop_sliver_y(y, 1.0 + R_band + max(abs(dlo), abs(dhi)), warn)

    t_lo = np.empty(n)
    t_hi = np.empty(n)
    t_lo[0] = _t_at_zero(pair, feet[0], T)
    if n > 1:
        t_lo[1:] = solve_tmap(pair, edges[1:-1], feet[1:], T)
    t_hi[:] = solve_tmap(pair, edges[1:], feet, T)
    B_lo = np.asarray(g.inv_deriv(-feet / t_lo), dtype=float)
    B_hi = np.asarray(g.inv_deriv(-feet / t_hi), dtype=float)

    bridges = [bridge_shock(pair, float(edges[i + 1]), float(t_hi[i]),
                            float(t_lo[i + 1]), float(feet[i]),
                            float(feet[i + 1]), T)
               for i in range(n - 1)]
    for i, br in enumerate(bridges):
        if not (feet[i] - _TOL <= br.rho3 <= feet[i + 1] + _TOL):
            warn.append(f"bridge seed at x={br.x0:g} clipped into its fan gap")
            bridges[i] = BridgeShock(**{**br.__dict__,
                                        "rho3": float(np.clip(br.rho3, feet[i], feet[i + 1]))})

    # ---- left exterior + filler ------------------------------------------
    events: list[tuple[float, float]] = []
    if y is None:
        left_foot, left_top = 0.0, g.theta
    else:
        dom_lo, dom_hi = y.domain
        pieces_left = _side_pieces(y, dom_lo, 0.0)
        if any(v > _TOL for (_, _, v) in pieces_left):
            warn.append("left exterior feet above 0 clipped")
        pieces_left = [(plo, phi, min(v, 0.0)) for (plo, phi, v) in pieces_left]
        if pieces_left:
            ident_hi = dom_hi if dom_hi < 0.0 else np.inf
            ev, left_foot, left_top = _exterior_events(
                g, pieces_left, ident_lo=dom_lo, ident_hi=ident_hi, T=T,
                warn=warn, label="left exterior")
            events.extend(ev)
            if dom_hi < 0.0:
                left_foot, left_top = 0.0, g.theta   # identity resumes before 0-
        else:
            left_foot, left_top = 0.0, g.theta

    z_gate = -T * float(g.deriv(B_lo[0]))   # equals rho(0) unless the floor binds
    if left_foot > z_gate + _TOL:
        warn.append(
            f"exterior foot map ends at {left_foot:g} > {z_gate:g}; "
            "left exterior truncated at the crossing band")
        cut = float(feet[0])
        kept = [(z, v) for (z, v) in events if z < cut - _TOL]
        events = kept
    else:
        zsplit = -T * float(g.chord(left_top, float(B_lo[0])))
        zsplit = min(max(zsplit, left_foot), float(feet[0]))
        events.append((zsplit, float(B_lo[0])))

    # ---- crossing band ----------------------------------------------------
    for i in range(n):
        events.append((float(feet[i]), float(B_hi[i])))
        if i < n - 1:
            events.append((float(bridges[i].rho3), float(B_lo[i + 1])))

    # ---- right filler ------------------------------------------------------
    a2n = float(f.inv_branch("plus", max(float(g.eval(B_hi[-1])), fm)))
    if y is None:
        yR = R_band
    else:
        dom_lo, dom_hi = y.domain
        yR = float(y(R_band)) if dom_lo <= R_band <= dom_hi else R_band
        if yR < -_TOL:
            warn.append("right exterior foot at R clipped up to 0")
        yR = max(yR, 0.0)
    u_rm = float(f.inv_deriv((R_band - yR) / T))
    if yR > _TOL:
        sigma = float(f.chord(a2n, u_rm))
        zsr = R_band - T * sigma
        if zsr >= -1e-6 * (1.0 + R_band):
            # junction shock starts on the f side at (zsr, 0): an a2n wedge
            # tops up the crossing flux so the shock lands at (R, T) after
            # consuming exactly the u_rm block up to the foot yR
            zsr = min(max(zsr, 0.0), yR)
            events.append((0.0, a2n))
            events.append((zsr, u_rm))
        else:
            # the shock is faster than R/T once on the f side, so it must
            # start on the g side and cross at t0 = T - R/sigma: shorten the
            # feeder block to z_g and seed the flux-matched state w there
            # (g(w) = f(u_rm), so its crossings become the shock's right food)
            t0 = T - R_band / sigma
            w = float(g.inv_branch("plus", max(float(f.eval(u_rm)), g.min_value)))
            z_g = -t0 * float(g.chord(float(B_hi[-1]), w))
            if z_g < float(feet[-1]):
                warn.append("junction feeder block exhausted; shock arrival "
                            "at the band edge is degraded")
                z_g = float(feet[-1])
            events.append((z_g, w))
            events.append((0.0, u_rm))
    else:
        events.append((0.0, u_rm))

    # ---- right exterior ----------------------------------------------------
    if y is None:
        pass                                  # identity: theta_f beyond the filler
    else:
        dom_lo, dom_hi = y.domain
        pieces_right = _side_pieces(y, R_band, dom_hi)
        for (plo, phi, v) in pieces_right:
            if v < -_TOL:
                warn.append("right exterior feet below 0 clipped")
        pieces_right = [(plo, phi, max(v, 0.0)) for (plo, phi, v) in pieces_right]
        if pieces_right:
            # the sweep over x>R starts from the filler state at foot yR
            theta_f = f.theta
            prev_top, prev_foot = u_rm, yR
            for (plo, phi, v) in pieces_right:
                x_j = plo
                lo_state = float(f.inv_deriv((x_j - v) / T))
                if v > prev_foot + _TOL:
                    zsplit = x_j - T * float(f.chord(prev_top, lo_state))
                    zsplit = min(max(zsplit, prev_foot), v)
                    events.append((zsplit, lo_state))
                elif v < prev_foot - _TOL:
                    warn.append(f"right exterior: foot map decreases at x={x_j:g}; clipped")
                    v = prev_foot
                top = float(f.inv_deriv((phi - v) / T))
                events.append((v, top))
                prev_top, prev_foot = top, v
            # closing lens back to the identity continuation
            x_j = dom_hi
            if np.isfinite(x_j):
                zsplit = x_j - T * float(f.chord(prev_top, theta_f))
                zsplit = min(max(zsplit, prev_foot), x_j)
                events.append((zsplit, theta_f))
                events.append((x_j, theta_f))

    # ---- assemble the StepFn ------------------------------------------------
    events.sort(key=lambda zv: zv[0])
    breaks: list[float] = []
    vals: list[float] = [g.theta]
    z_scale = 1.0 + max(abs(e[0]) for e in events)
    for z, v in events:
        if breaks and z <= breaks[-1] + 1e-13 * z_scale:
            vals[-1] = v                      # coincident events: last one wins
            continue
        breaks.append(z)
        vals.append(v)
    # drop no-op jumps
    bb: list[float] = []
    vv: list[float] = [vals[0]]
    for z, v in zip(breaks, vals[1:]):
        if v == vv[-1]:
            continue
        bb.append(z)
        vv.append(v)
    u0 = StepFn(np.asarray(bb), np.asarray(vv))

    # ---- variation bookkeeping ----------------------------------------------
    # the estimate covers the fan-feeding seeds between the extreme feet,
    # (rho(0), rho(R)); the sacrificial block right of rho(R) that feeds the
    # junction shock is outside it
    gp = np.asarray(g.deriv(u0.values), dtype=float)
    in_band = [i for i, z in enumerate(u0.breakpoints)
               if feet[0] + _TOL < z < feet[-1] - _TOL]
    tv_crossing = float(sum(abs(gp[i + 1] - gp[i]) for i in in_band))
    c6 = 1.0 / float(t_hi.min())
    tv_bound = T * c6 * c6 * (abs(float(feet[0]))
                              + abs(float(feet[0]) - float(feet[-1])))

    for w in warn:
        _warnings.warn(w, stacklevel=2)
    return BackwardPlan(pair=pair, T=float(T), side="plus", rho=rho, y=y,
                        u0=u0, bridges=bridges, feed_t_lo=t_lo, feed_t_hi=t_hi,
                        tv_crossing=tv_crossing, tv_bound=tv_bound,
                        warnings=warn)


def construct_minus(pair: FluxPair, rho, y: StepFn | None = None, T: float = 1.0,
                    *, N: int = 64, L: float | None = None) -> BackwardPlan:
    """Mirror of :func:`construct` for a crossing band on [L, 0], L < 0.

    ``rho`` there is strictly positive and nondecreasing (feet on the right
    half-line). Everything is solved on the mirrored pair and reflected back.
    """
    if not isinstance(rho, StepFn):
        if L is None:
            raise InputError("construct_minus: a callable rho needs an explicit L")
        if L >= 0.0:
            raise InputError("construct_minus: need L < 0")
        mirrored = discretize_rho(lambda z: -np.asarray(rho(-np.asarray(z))), -L, N)
    else:
        if rho.domain is None or abs(rho.domain[1]) > _TOL or rho.domain[0] >= 0.0:
            raise InputError("construct_minus: rho domain must be [L, 0] with L < 0")
        if np.any(rho.values <= 0.0):
            raise InputError("construct_minus: rho values must be strictly positive")
        mirrored = rho.mirrored()
    y_m = y.mirrored() if y is not None else None
    wplan = construct(pair.mirrored(), mirrored, y_m, T, N=N)
    rho_out = rho if isinstance(rho, StepFn) else mirrored.mirrored()
    bridges = [BridgeShock(x0=-b.x0, rho1=-b.rho2, rho2=-b.rho1, t1=b.t2, t2=b.t1,
                           b1=-b.b2, b2=-b.b1, a1=-b.a2, a2=-b.a1, s2=-b.s2,
                           t3=b.t3, s1=-b.s1, rho3=-b.rho3)
               for b in wplan.bridges]
    return BackwardPlan(pair=pair, T=float(T), side="minus", rho=rho_out, y=y,
                        u0=wplan.u0.mirrored(), bridges=bridges,
                        feed_t_lo=wplan.feed_t_lo, feed_t_hi=wplan.feed_t_hi,
                        tv_crossing=wplan.tv_crossing, tv_bound=wplan.tv_bound,
                        warnings=list(wplan.warnings))


@dataclass
class RefineResult:
    plan: BackwardPlan
    N: int
    error: float
    history: list[tuple[int, float]]


def _callable_error(plan: BackwardPlan, rho_fn, nx: int, params) -> float:
    """L1 distance on the band between the forward solution of plan.u0 and
    the target encoded by the *continuous* foot map rho_fn."""
    from .hj import solve_profile
    lo, hi = (0.0, plan.R) if plan.side == "plus" else (plan.R, 0.0)
    xs = lo + (hi - lo) * (np.arange(nx) + 0.5) / nx
    fwd = solve_profile(plan.pair, plan.u0, plan.T, xs=xs, params=params)
    if plan.side == "plus":
        feet = np.asarray(rho_fn(xs), dtype=float)
        t = solve_tmap(plan.pair, xs, feet, plan.T)
        u_ref = plan.pair.f.inv_deriv(xs / np.maximum(plan.T - t, 1e-300))
    else:
        mp = plan.pair.mirrored()
        feet = -np.asarray(rho_fn(xs), dtype=float)
        t = solve_tmap(mp, -xs, feet, plan.T)
        u_ref = -np.asarray(mp.f.inv_deriv(-xs / np.maximum(plan.T - t, 1e-300)))
    return float(np.mean(np.abs(fwd.u - u_ref)) * (hi - lo))


def refine(pair: FluxPair, rho, y: StepFn | None = None, T: float = 1.0,
           R: float | None = None, *, side: str = "plus", tol: float = 1e-2,
           n_max: int = 14, nx: int = 601, params=None) -> RefineResult:
    """Double the quantization density until the forward solution of the
    constructed data matches the encoded target within ``tol`` in L1.

    StepFn foot maps are exact by construction, so they return after a single
    verification pass.  Raises :class:`ConvergenceError` past N = 2**n_max.
    """
    build = construct if side == "plus" else construct_minus
    kw = {"R": R} if side == "plus" else {"L": R}
    if isinstance(rho, StepFn):
        plan = build(pair, rho, y, T, **kw)
        err = plan.roundtrip_error(nx, params)
        return RefineResult(plan=plan, N=1, error=err, history=[(1, err)])
    history: list[tuple[int, float]] = []
    for k in range(n_max + 1):
        N = 2 ** k
        plan = build(pair, rho, y, T, N=N, **kw)
        err = _callable_error(plan, rho, nx, params)
        history.append((N, err))
        if err <= tol:
            return RefineResult(plan=plan, N=N, error=err, history=history)
    raise ConvergenceError(
        f"backward refinement did not reach tol={tol:g} by N=2^{n_max} "
        f"(last error {history[-1][1]:.3e})")
