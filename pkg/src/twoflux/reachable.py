"""Reachable time-T profiles and the exact controller with free-region buffers.

A profile W on [C1, C2] is reachable from the plus side when it decomposes as

* W = (g')^{-1}((x - y(x))/T) on [C1, 0]   (direct g-side characteristics),
* W = (f')^{-1}(x/(T - t(x))) on (0, R)    (characteristics that crossed at t(x)),
* W = (f')^{-1}((x - y(x))/T) on [R, C2]   (direct f-side characteristics),

with a nondecreasing foot map y into [B1+delta, B2-delta] satisfying
x*y(x) >= 0 and y(x) <= rho(0) on the left, crossing feet
rho(x) = -t(x) * h_+(f'(W(x))) nondecreasing in [B1-delta, 0], and t strictly
decreasing.  ``membership`` recovers (y, t, rho) from W and checks every
constraint at midpoint samples (tol 1e-8), scanning an R grid per side when no
R is pinned; the minus side is the full mirror (x, u, f, g) -> (-x, -u, g~, f~).

``exact_control`` realizes a member profile from prescribed initial data
outside (B1, B2): the interior is the backward construction of the recovered
witness, padded out to the buffers with the edge fan states, and the buffers
(B1, B1+delta), (B2-delta, B2) carry large constants lambda1, lambda2 from
``free_region_lambda`` so the shocks against the exterior data outrun the
influence cones Q1, Q2 (10% speed margin; entropy-admissible against the
exterior range by construction).
"""

from __future__ import annotations

import warnings as _warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from . import backward, hj
from .errors import InputError
from .fluxes import ConvexFlux, FluxPair
from .rootfind import solve_increasing
from .stepfn import StepFn

_TOL = 1e-8          # constraint tolerance at sample points
_RTOL = 1e-12


def _vec(fn: Callable, xs: np.ndarray) -> np.ndarray:
    out = np.asarray(fn(xs), dtype=float)
    if out.shape != xs.shape:
        out = np.array([float(fn(float(v))) for v in xs.ravel()],
                       dtype=float).reshape(xs.shape)
    return out


def _foot_vals(y: Optional[StepFn], xs: np.ndarray) -> np.ndarray:
    out = np.asarray(xs, dtype=float).copy()
    if y is None:
        return out
    lo, hi = y.domain
    m = (out >= lo) & (out <= hi)
    if m.any():
        out[m] = y(out[m])
    return out


# ------------------------------------------------------------------- domain

@dataclass
class ReachSpec:
    """Window geometry: target on [C1, C2] at time T, control on (B1, B2)."""

    T: float
    C1: float
    C2: float
    B1: float
    B2: float
    delta: Optional[float] = None
    R: Optional[float] = None
    exterior: Optional[StepFn] = None     # prescribed data on R \ (B1, B2)

    def __post_init__(self) -> None:
        if self.T <= 0.0:
            raise InputError(f"T must be positive, got {self.T}")
        if not (self.C1 < 0.0 < self.C2):
            raise InputError(f"need C1 < 0 < C2, got ({self.C1}, {self.C2})")
        if not (self.B1 < 0.0 < self.B2):
            raise InputError(f"need B1 < 0 < B2, got ({self.B1}, {self.B2})")
        if self.delta is None:
            self.delta = (self.B2 - self.B1) / 100.0
        if self.delta <= 0.0 or not (self.B1 + self.delta < 0.0 < self.B2 - self.delta):
            raise InputError(
                f"delta must satisfy B1+delta < 0 < B2-delta, got {self.delta}")
        if self.R is not None and not (self.C1 < self.R < self.C2):
            raise InputError(f"R must lie in (C1, C2), got {self.R}")
        if self.exterior is not None and self.exterior.domain is not None:
            raise InputError("exterior data must be a whole-line StepFn")

    def mirrored(self) -> "ReachSpec":
        ext = self.exterior.mirrored() if self.exterior is not None else None
        return ReachSpec(T=self.T, C1=-self.C2, C2=-self.C1,
                         B1=-self.B2, B2=-self.B1, delta=self.delta,
                         R=None if self.R is None else -self.R,
                         exterior=ext)


@dataclass
class ReachTarget:
    """A candidate profile with optional side/witness annotations."""

    W: Callable
    side: Optional[str] = None            # "plus" | "minus" | None (scan both)
    witness: Optional[tuple] = None       # (R, rho, y), R signed

    def __post_init__(self) -> None:
        if self.side not in (None, "plus", "minus"):
            raise InputError(f"side must be 'plus' or 'minus', got {self.side!r}")


@dataclass
class ReachReport:
    """Membership verdict; witness (R, rho, y) in original coordinates."""

    member: bool
    side: Optional[str] = None
    R: Optional[float] = None             # signed: negative on the minus side
    rho: Optional[StepFn] = None
    y: Optional[StepFn] = None
    violation: Optional[str] = None
    checks_passed: int = 0

    def witness(self) -> tuple:
        return self.R, self.rho, self.y


# ------------------------------------------------------------ profile maker

def witness_profile(pair: FluxPair, R: float, rho, y, T: float,
                    side: str = "plus") -> Callable:
    """The time-T profile generated by a foot-map triple (the membership
    relations read forward); the oracle for membership round trips."""
    if side == "minus":
        mp = pair.mirrored()
        rho_m = rho.mirrored() if isinstance(rho, StepFn) else rho
        y_m = y.mirrored() if isinstance(y, StepFn) else y
        w_plus = witness_profile(mp, -R, rho_m, y_m, T, side="plus")

        def w_minus(x):
            xs = np.asarray(x, dtype=float)
            out = -w_plus(-np.atleast_1d(xs))
            return float(out[0]) if xs.ndim == 0 else out.reshape(xs.shape)

        return w_minus
    if side != "plus":
        raise InputError(f"side must be 'plus' or 'minus', got {side!r}")
    R = float(R)
    if R < 0.0:
        raise InputError("plus-side witness needs R >= 0")

    def w(x):
        xs = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.empty_like(xs)
        left = xs <= 0.0
        band = (xs > 0.0) & (xs < R)
        right = xs >= R
        if left.any():
            out[left] = pair.g.inv_deriv((xs[left] - _foot_vals(y, xs[left])) / T)
        if band.any():
            t = backward.solve_tmap(pair, xs[band], rho(xs[band]), T)
            out[band] = pair.f.inv_deriv(xs[band] / (T - t))
        if right.any():
            out[right] = pair.f.inv_deriv((xs[right] - _foot_vals(y, xs[right])) / T)
        return float(out[0]) if np.asarray(x).ndim == 0 else out.reshape(np.shape(x))

    return w


# ---------------------------------------------------------------- membership

def _mids(lo: float, hi: float, n: int) -> np.ndarray:
    return lo + (hi - lo) * (np.arange(n) + 0.5) / n


def _check_plus(pair: FluxPair, W: Callable, spec: ReachSpec, R: float,
                grid: int):
    """One plus-side candidate R: recover (y, t, rho) and walk the ordered
    constraint list. Returns (member, witness, checks_passed, violation)."""
    T, C1, C2 = spec.T, spec.C1, spec.C2
    B1, B2, d = spec.B1, spec.B2, spec.delta
    f, g = pair.f, pair.g
    R = float(R)
    passed = 0

    xs_l = _mids(C1, 0.0, grid)
    W_l = _vec(W, xs_l)
    y_l = xs_l - T * np.asarray(g.deriv(W_l), dtype=float)

    if np.any(np.diff(y_l) < -_TOL):
        return False, None, passed, "y not nondecreasing"
    passed += 1
    if np.any(y_l < B1 + d - _TOL) or np.any(y_l > _TOL):
        return False, None, passed, "y out of range on the left"
    passed += 1

    rho_vals = None
    t_vals = None
    xs_b = None
    if R > _RTOL:
        xs_b = _mids(0.0, R, grid)
        W_b = _vec(W, xs_b)
        if np.any(W_b < pair.iplus_lo - _TOL):
            return False, None, passed, "W below the crossing branch on the band"
        passed += 1
        fw = np.asarray(f.deriv(np.maximum(W_b, pair.iplus_lo)), dtype=float)
        if np.any(fw * T <= xs_b):
            return False, None, passed, "crossing time not positive on the band"
        passed += 1
        t_vals = T - xs_b / fw
        if np.any(np.diff(t_vals) >= -1e-15):
            return False, None, passed, "crossing times not decreasing"
        passed += 1
        q = pair.h_plus(np.maximum(fw, pair.p_plus_lo))
        rho_vals = -t_vals * q
        if np.any(np.diff(rho_vals) < -_TOL):
            return False, None, passed, "rho not nondecreasing"
        passed += 1
        if np.any(rho_vals < B1 - d - _TOL) or np.any(rho_vals > _TOL):
            return False, None, passed, "rho out of range"
        passed += 1
    else:
        passed += 5

    y_r = None
    xs_r = None
    if C2 > R + _RTOL:
        xs_r = _mids(R, C2, grid)
        W_r = _vec(W, xs_r)
        y_r = xs_r - T * np.asarray(f.deriv(W_r), dtype=float)
        if np.any(np.diff(y_r) < -_TOL):
            return False, None, passed, "y not nondecreasing"
        passed += 1
        if np.any(y_r < -_TOL) or np.any(y_r > B2 - d + _TOL):
            return False, None, passed, "y out of range on the right"
        passed += 1
    else:
        passed += 2

    if rho_vals is not None and np.any(y_l > rho_vals[0] + _TOL):
        return False, None, passed, "y exceeds rho(0) on the left"
    passed += 1

    # assemble the witness from the samples, monotonized and clipped within
    # tol so the backward construction's strict validators accept it verbatim
    rho_sf = None
    y_l_w = np.clip(np.maximum.accumulate(y_l), B1 + d, 0.0)
    if rho_vals is not None:
        edges = np.linspace(0.0, R, grid + 1)
        rho_w = np.minimum(np.maximum.accumulate(rho_vals), -1e-30)
        rho_sf = StepFn(edges[:-1], rho_w, domain=(0.0, R))
        y_l_w = np.minimum(y_l_w, float(rho_w[0]))
    bp = [np.linspace(C1, 0.0, grid + 1)[:-1]]
    vals = [y_l_w]
    if R > _RTOL:
        bp.append(np.array([0.0]))
        vals.append(np.array([y_l_w[-1]]))
    if y_r is not None:
        bp.append(np.linspace(R, C2, grid + 1)[:-1])
        vals.append(np.clip(np.maximum.accumulate(y_r), 0.0, B2 - d))
        hi = C2
    else:
        hi = R
    y_sf = StepFn(np.concatenate(bp), np.concatenate(vals), domain=(C1, hi))
    return True, (R, rho_sf, y_sf), passed, None


_N_CHECKS = 10


def _membership_side(pair: FluxPair, W: Callable, spec: ReachSpec,
                     grid: int, threads: int):
    """Scan plus-side candidates; first feasible R wins."""
    if spec.R is not None:
        cands = [float(spec.R)]
    else:
        cands = list(np.linspace(0.0, spec.C2, 65)[:-1])

    def run(Rv):
        return _check_plus(pair, W, spec, Rv, grid)

    best = (-1, None, None)               # (passed, violation, R)
    if threads > 1 and len(cands) > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(run, cands))
    else:
        results = [run(Rv) for Rv in cands]
    for Rv, (ok, wit, passed, viol) in zip(cands, results):
        if ok:
            return True, wit, passed, None
        if passed > best[0]:
            best = (passed, viol, Rv)
    return False, None, best[0], best[1]


def membership(pair: FluxPair, W: Callable, spec: ReachSpec,
               grid: int = 256, side: Optional[str] = None,
               threads: int = 1) -> ReachReport:
    """Test reachability of W on [C1, C2]; witness or best-prefix violation.

    ``side`` restricts the scan; otherwise a pinned spec.R picks the side by
    its sign and both sides are scanned when R is free.  The returned witness
    is in original coordinates (R < 0, rho on [R, 0] on the minus side).
    """
    if grid < 2:
        raise InputError(f"grid must be >= 2, got {grid}")
    if side not in (None, "plus", "minus"):
        raise InputError(f"side must be 'plus' or 'minus', got {side!r}")
    sides = [side] if side else ["plus", "minus"]
    if spec.R is not None and spec.R != 0.0:
        forced = "plus" if spec.R > 0 else "minus"
        if side is not None and side != forced:
            raise InputError(f"spec.R={spec.R} contradicts side={side!r}")
        sides = [forced]

    best = ReachReport(member=False, checks_passed=-1)
    for s in sides:
        if s == "plus":
            ok, wit, passed, viol = _membership_side(pair, W, spec, grid, threads)
            if ok:
                R, rho, y = wit
                return ReachReport(True, "plus", R, rho, y, None, passed)
        else:
            mp = pair.mirrored()
            mspec = spec.mirrored()

            def mW(x, _W=W):
                xs = np.asarray(x, dtype=float)
                out = -_vec(_W, -np.atleast_1d(xs))
                return float(out[0]) if xs.ndim == 0 else out.reshape(xs.shape)

            ok, wit, passed, viol = _membership_side(mp, mW, mspec, grid, threads)
            if ok:
                R, rho, y = wit
                return ReachReport(True, "minus", -R,
                                   rho.mirrored() if rho is not None else None,
                                   y.mirrored() if y is not None else None,
                                   None, passed)
        if passed > best.checks_passed:
            best = ReachReport(False, s, None, None, None, viol, passed)
    return best


# ------------------------------------------------------------- free regions

def free_region_lambda(flux: ConvexFlux, m: float, B: float, P: float,
                       T: float, side: str) -> float:
    """Buffer state whose shock against any exterior state bounded by m
    clears the influence-cone line from (B, 0) to (P, T) with a 10% margin.

    ``m`` bounds the exterior on its dangerous side: the essential infimum
    for a right buffer (slowest opposing state), the essential supremum for
    a left one.  Right case: solve chord(lam, m) = 1.1 (P - B)/T above m when
    the target exceeds f'(m), else any state does and lam = m + 1; left case
    mirrored below m.
    """
    if T <= 0.0:
        raise InputError(f"T must be positive, got {T}")
    target = 1.1 * (P - B) / T
    if side == "right":
        if target <= float(flux.deriv(m)):
            return m + 1.0
        return solve_increasing(lambda lam: float(flux.chord(lam, m)),
                                target, m, m + 1.0)
    if side == "left":
        if target >= float(flux.deriv(m)):
            return m - 1.0
        s = solve_increasing(lambda s: -float(flux.chord(m - s, m)),
                             -target, 0.0, 1.0)
        return m - s
    raise InputError(f"side must be 'right' or 'left', got {side!r}")


def q_boundary(spec: ReachSpec, side: str) -> Callable[[float], float]:
    """The influence-cone edge: x(t) from (B2, 0) to (P2, T) on the right
    (P2 = C2 + delta), mirrored on the left."""
    T, d = spec.T, spec.delta
    if side == "right":
        B, P = spec.B2, spec.C2 + d
    elif side == "left":
        B, P = spec.B1, spec.C1 - d
    else:
        raise InputError(f"side must be 'right' or 'left', got {side!r}")
    return lambda t: (t - T) * (P - B) / T + P


# ------------------------------------------------------------ exact control

@dataclass
class ControlResult:
    u0: StepFn
    sol: "hj.SolutionField"
    l1_error: float
    report: ReachReport
    lam1: float
    lam2: float
    warnings: list = field(default_factory=list)


def _exterior_bounds(ext: StepFn, B1: float, B2: float):
    """(sup, inf) of the exterior data left of B1 and right of B2."""
    lsup = linf = None
    rsup = rinf = None
    for lo, hi, v in ext.pieces():
        if lo < B1:
            lsup = v if lsup is None else max(lsup, v)
            linf = v if linf is None else min(linf, v)
        if hi > B2:
            rsup = v if rsup is None else max(rsup, v)
            rinf = v if rinf is None else min(rinf, v)
    return (lsup, linf), (rsup, rinf)


def exact_control(pair: FluxPair, target: ReachTarget, spec: ReachSpec,
                  N: int = 64, *, grid: int = 256, nx: int = 1201,
                  params=None, threads: int = 1) -> ControlResult:
    """Initial data equal to the prescribed exterior outside (B1, B2) whose
    solution hits W on [C1, C2] at time T; InputError when W is not a member."""
    if spec.R is None and target.witness is not None:
        spec = replace(spec, R=float(target.witness[0]))
    report = membership(pair, target.W, spec, grid=grid, side=target.side,
                        threads=threads)
    if not report.member:
        raise InputError(
            f"target is not reachable: {report.violation} "
            f"(side={report.side}, {report.checks_passed} checks passed)")
    warn: list[str] = []

    if report.side == "minus":
        mspec = spec.mirrored()

        def mW(x, _W=target.W):
            xs = np.asarray(x, dtype=float)
            out = -_vec(_W, -np.atleast_1d(xs))
            return float(out[0]) if xs.ndim == 0 else out.reshape(xs.shape)

        mres = exact_control(pair.mirrored(), ReachTarget(mW, side="plus"),
                             mspec, N=N, grid=grid, nx=nx, params=params,
                             threads=threads)
        u0 = mres.u0.mirrored()
        xs = _mids(spec.C1, spec.C2, nx)
        sol = hj.solve_profile(pair, u0, spec.T, xs=xs, params=params)
        l1 = float(np.mean(np.abs(sol.u - _vec(target.W, xs)))
                   * (spec.C2 - spec.C1))
        return ControlResult(u0, sol, l1, report, -mres.lam2, -mres.lam1,
                             mres.warnings)

    T, C1, C2 = spec.T, spec.C1, spec.C2
    B1, B2, d = spec.B1, spec.B2, spec.delta
    f, g = pair.f, pair.g
    R, rho, y = report.witness()
    ext = spec.exterior
    if ext is None:
        ext = StepFn([0.0], [g.theta, f.theta])
    (lsup, linf), (rsup, rinf) = _exterior_bounds(ext, B1, B2)

    lam1 = free_region_lambda(g, lsup, B1, C1 - d, T, "left")
    lam1 = min(lam1, linf - 1.0)
    lam2 = free_region_lambda(f, rinf, B2, C2 + d, T, "right")
    lam2 = max(lam2, rsup + 1.0)

    yC1 = float(y.values[0])
    yC2 = float(y.left_limit(y.domain[1]))
    pad_left = float(g.inv_deriv((C1 - yC1) / T))
    pad_right = float(f.inv_deriv((C2 - yC2) / T))

    # widen the witness foot map's domain so the construction's identity
    # continuation (and its edge lenses) stays outside the spliced window;
    # the splice below discards everything beyond [yC1, yC2] anyway
    lo_ext = min(C1, yC1 - 1.0)
    hi_ext = max(C2, yC2 + 1.0)
    ybp = y.breakpoints.copy()
    ybp[0] = lo_ext
    y_ext = StepFn(ybp, y.values, domain=(lo_ext, hi_ext))

    if R > 1e-12:
        band = rho
    else:
        eps = 1e-9 * (1.0 + abs(B1))
        band = StepFn([0.0], [-eps], domain=(0.0, eps))
    with _warnings.catch_warnings(record=True) as wrec:
        _warnings.simplefilter("always")
        plan = backward.construct(pair, band, y_ext, T=T, N=N)
    warn.extend(str(w.message) for w in wrec)

    events: list[tuple[float, float]] = []
    base = float(ext.values[0])
    for b, v in zip(ext.breakpoints, ext.values[1:]):
        if b < B1:
            events.append((float(b), float(v)))
    events.append((B1, lam1))
    events.append((B1 + d, pad_left))
    for lo, hi, v in plan.u0.pieces():
        if hi <= yC1 or lo >= yC2:
            continue
        events.append((max(float(lo), yC1), float(v)))
    events.append((yC2, pad_right))
    events.append((B2 - d, lam2))
    events.append((B2, float(ext(B2))))
    for b, v in zip(ext.breakpoints, ext.values[1:]):
        if b > B2:
            events.append((float(b), float(v)))

    events.sort(key=lambda zv: zv[0])
    z_scale = 1.0 + max(abs(z) for z, _ in events)
    breaks: list[float] = []
    vals: list[float] = [base]
    for z, v in events:
        if breaks and z <= breaks[-1] + 1e-13 * z_scale:
            vals[-1] = v
            continue
        breaks.append(z)
        vals.append(v)
    bb: list[float] = []
    vv: list[float] = [vals[0]]
    for z, v in zip(breaks, vals[1:]):
        if v == vv[-1]:
            continue
        bb.append(z)
        vv.append(v)
    u0 = StepFn(np.asarray(bb), np.asarray(vv))

    xs = _mids(C1, C2, nx)
    sol = hj.solve_profile(pair, u0, T, xs=xs, params=params)
    l1 = float(np.mean(np.abs(sol.u - _vec(target.W, xs))) * (C2 - C1))
    for w in warn:
        _warnings.warn(w, stacklevel=2)
    return ControlResult(u0, sol, l1, report, lam1, lam2, warn)
