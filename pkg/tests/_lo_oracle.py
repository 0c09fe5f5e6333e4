"""Independent classical references for the single-flux degeneracy checks.

Everything here is built from first principles on purpose -- a plain
Lax-Oleinik minimization for u_t + (a u^2)_x = 0 and the textbook backward
construction -- so it shares no solver code with the package.
"""

import numpy as np


class PiecewiseConstant:
    """Minimal whole-line step function: values[i] on (bp[i-1], bp[i])."""

    def __init__(self, breakpoints, values):
        self.breakpoints = np.asarray(breakpoints, dtype=float)
        self.values = np.asarray(values, dtype=float)


def _primitive_factory(u0):
    """Antiderivative of a whole-line step function, from its pieces."""
    bp = np.asarray(u0.breakpoints, dtype=float)
    vals = np.asarray(u0.values, dtype=float)
    # primitive anchored at bp[0]; interior piece i+1 spans (bp[i], bp[i+1])
    cums = np.concatenate(([0.0], np.cumsum(vals[1:-1] * np.diff(bp))))

    def U0(y):
        y = np.asarray(y, dtype=float)
        j = np.searchsorted(bp, y)
        anchor = bp[np.clip(j - 1, 0, bp.size - 1)]
        anchor = np.where(j == 0, bp[0], anchor)
        base = cums[np.clip(j - 1, 0, cums.size - 1)]
        base = np.where(j == 0, 0.0, base)
        return base + vals[j] * (y - anchor)

    return U0


def lo_profile(a, u0, xs, T, n_grid=4001, n_refine=70):
    """u(x, T) for u_t + (a u^2)_x = 0 by direct Hopf-Lax minimization.

    The flux a*u^2 has conjugate f*(s) = s^2 / (4a); the minimizer y* of
    U0(y) + T f*((x - y)/T) gives u = (x - y*)/(2 a T).
    """
    xs = np.asarray(xs, dtype=float)
    U0 = _primitive_factory(u0)
    umin, umax = float(np.min(u0.values)), float(np.max(u0.values))
    lo_off = 2.0 * a * umin * T - 1e-6
    hi_off = 2.0 * a * umax * T + 1e-6
    out = np.empty_like(xs)
    gold = (np.sqrt(5.0) - 1.0) / 2.0
    for i, x in enumerate(xs):
        ys = np.linspace(x - hi_off, x - lo_off, n_grid)
        G = U0(ys) + (x - ys) ** 2 / (4.0 * a * T)
        j = int(np.argmin(G))
        lo = ys[max(j - 1, 0)]
        hi = ys[min(j + 1, n_grid - 1)]
        c = hi - gold * (hi - lo)
        d = lo + gold * (hi - lo)
        fc = U0(c) + (x - c) ** 2 / (4.0 * a * T)
        fd = U0(d) + (x - d) ** 2 / (4.0 * a * T)
        for _ in range(n_refine):
            if fc < fd:
                hi, d, fd = d, c, fc
                c = hi - gold * (hi - lo)
                fc = U0(c) + (x - c) ** 2 / (4.0 * a * T)
            else:
                lo, c, fc = c, d, fd
                d = lo + gold * (hi - lo)
                fd = U0(d) + (x - d) ** 2 / (4.0 * a * T)
        ystar = (lo + hi) / 2.0
        out[i] = (x - ystar) / (2.0 * a * T)
    return out


def classical_control_cost(w, C, T, a=0.5, n=200001):
    """Quadratic size of the classical backward-constructed control.

    For u_t + (a u^2)_x = 0 and a target profile w on (0, C) (rest state 0
    outside) with nondecreasing feet y(x) = x - 2 a T w(x), the construction
    transports w back along characteristics: u0(y(x)) = w(x), zero elsewhere.
    Returns int w(x)^2 dy(x), evaluated by trapezoid in x.
    """
    xs = np.linspace(0.0, C, n)
    ws = np.asarray(w(xs), dtype=float)
    ys = xs - 2.0 * a * T * ws
    if np.any(np.diff(ys) < -1e-12):
        raise ValueError("target is not reachable: feet must be nondecreasing")
    return float(np.trapezoid(ws ** 2, ys))


def backward_control(k, C, T, a=0.5, n_pieces=800, pad=1.0):
    """The backward-construction control for an attainable target k.

    The feet map y(x) = x - 2 a T k(x) must be nondecreasing (otherwise the
    target is not attainable and this raises). The control is read off its
    generalized inverse x(z): u0(z) = (x(z) - z) / (2 a T), which transports
    to k along regular characteristics and fills each shock's foot gap with
    the compression ramp focusing into it at time T exactly.
    """
    xg = np.linspace(-C - pad, C + pad, 8 * n_pieces + 1)
    feet = xg - 2.0 * a * T * np.asarray(k(xg), dtype=float)
    if np.any(np.diff(feet) < -1e-12):
        raise ValueError("target is not reachable: feet must be nondecreasing")
    feet = np.maximum.accumulate(feet)
    z_edges = np.linspace(feet[0], feet[-1], n_pieces + 1)
    zm = 0.5 * (z_edges[:-1] + z_edges[1:])
    vals = (np.interp(zm, feet, xg) - zm) / (2.0 * a * T)
    return PiecewiseConstant(z_edges, np.concatenate(([0.0], vals, [0.0])))


def classical_optimal_cost(k, C, T, a=0.5, n_pieces=800, n_eval=2001):
    """Tracking misfit int |f'(u(., T)) - f'(k)|^2 dx of the classical
    backward-construction optimal control, solved forward by Lax-Oleinik."""
    u0 = backward_control(k, C, T, a=a, n_pieces=n_pieces)
    span = 2.0 * a * T * float(np.abs(u0.values).max()) + 1.0
    xs = np.linspace(-C - span, C + span, n_eval)
    uT = lo_profile(a, u0, xs, T)
    misfit = (2.0 * a * (uT - np.asarray(k(xs), dtype=float))) ** 2
    return float(np.trapezoid(misfit, xs))
