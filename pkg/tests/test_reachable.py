"""Reachable-set membership, witness recovery, and exact control.

Frozen references for the canonical pair f = u^2/2, g = u^2:

* the triple (R=1, rho = -sqrt(2), y = identity) generates W(x) = 1 + x on
  (0, 1): t(x) = 1/(1+x) and f'^{-1}(x/(1-t)) = 1 + x;
* free_region_lambda(f, m=1, B=1, P=2, T=1, right) solves
  (lam^2/2 - 1/2)/(lam - 1) = 1.1 -> lam = 1.2;
* free_region_lambda(g, m=-1, B=-1, P=-2, T=1, left) solves
  (lam^2 - 1)/(lam + 1) = -1.1 -> lam = -2.0 (shock speed -3);
* the rest profile W = theta is a member with a degenerate band (R = 0)
  and identity feet.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from twoflux import canonical_pair, godunov
from twoflux import reachable as rc
from twoflux.errors import InputError
from twoflux.stepfn import StepFn

PAIR = canonical_pair()
SQ2 = np.sqrt(2.0)

GEOM = dict(T=1.0, C1=-1.0, C2=2.0, B1=-3.0, B2=3.0, delta=0.05)


def base_spec(**kw):
    args = dict(GEOM)
    args.update(kw)
    return rc.ReachSpec(**args)


def step_witness():
    """A two-level band and four-level feet, R = 1 (pinned in tests)."""
    rho = StepFn([0.0, 0.4], [-1.5, -0.9], domain=(0.0, 1.0))
    y = StepFn([-1.0, -0.5, 1.0, 1.5], [-2.2, -1.8, 0.3, 0.9],
               domain=(-1.0, 2.0))
    return rho, y


# ---------------------------------------------------------------- validation


def test_spec_validation():
    with pytest.raises(InputError):
        rc.ReachSpec(T=0.0, C1=-1, C2=2, B1=-3, B2=3)
    with pytest.raises(InputError):
        rc.ReachSpec(T=1.0, C1=1.0, C2=2, B1=-3, B2=3)
    with pytest.raises(InputError):
        rc.ReachSpec(T=1.0, C1=-1, C2=2, B1=3, B2=-3)
    with pytest.raises(InputError):
        rc.ReachSpec(T=1.0, C1=-1, C2=2, B1=-3, B2=3, delta=4.0)
    with pytest.raises(InputError):
        rc.ReachSpec(T=1.0, C1=-1, C2=2, B1=-3, B2=3, R=2.5)
    with pytest.raises(InputError):
        rc.ReachSpec(T=1.0, C1=-1, C2=2, B1=-3, B2=3,
                     exterior=StepFn([0.0], [0.1], domain=(0.0, 1.0)))


def test_spec_default_delta_and_mirror():
    spec = rc.ReachSpec(T=1.0, C1=-1, C2=2, B1=-3, B2=3, R=1.0)
    assert spec.delta == pytest.approx(0.06)
    m = spec.mirrored()
    assert (m.C1, m.C2, m.B1, m.B2) == (-2, 1, -3, 3)
    assert m.R == -1.0


def test_membership_argument_validation():
    spec = base_spec()
    with pytest.raises(InputError):
        rc.membership(PAIR, lambda x: 0.0 * x, spec, grid=1)
    with pytest.raises(InputError):
        rc.membership(PAIR, lambda x: 0.0 * x, spec, side="up")
    with pytest.raises(InputError):
        rc.membership(PAIR, lambda x: 0.0 * x, base_spec(R=1.0), side="minus")
    with pytest.raises(InputError):
        rc.ReachTarget(lambda x: 0.0 * x, side="both")


# ----------------------------------------------------------- witness profile


def test_witness_profile_closed_form():
    rho = StepFn([0.0], [-SQ2], domain=(0.0, 1.0))
    W = rc.witness_profile(PAIR, 1.0, rho, None, 1.0)
    xs = np.linspace(0.05, 0.95, 19)
    np.testing.assert_allclose(W(xs), 1.0 + xs, atol=1e-9)
    # identity feet outside the band: theta states
    assert W(-0.5) == pytest.approx(0.0, abs=1e-12)
    assert W(1.5) == pytest.approx(0.0, abs=1e-12)


def test_witness_profile_minus_is_mirror():
    # mirroring swaps the fluxes: the minus-side profile of `pair` is the
    # reflected plus-side profile of `pair.mirrored()`
    rho, y = step_witness()
    Wp = rc.witness_profile(PAIR.mirrored(), 1.0, rho, y, 1.0, side="plus")
    Wm = rc.witness_profile(PAIR, -1.0, rho.mirrored(), y.mirrored(), 1.0,
                            side="minus")
    xs = np.linspace(-1.9, 0.9, 41)
    np.testing.assert_allclose(Wm(xs), -Wp(-xs), atol=1e-12)


def test_witness_profile_rejects_negative_r_on_plus():
    with pytest.raises(InputError):
        rc.witness_profile(PAIR, -1.0, None, None, 1.0, side="plus")


# ------------------------------------------------------------- membership


def test_round_trip_plus_pinned():
    rho, y = step_witness()
    W = rc.witness_profile(PAIR, 1.0, rho, y, 1.0)
    rep = rc.membership(PAIR, W, base_spec(R=1.0))
    assert rep.member and rep.side == "plus"
    assert rep.R == pytest.approx(1.0)
    # recovered staircases match the truth away from the jumps
    xq = np.array([0.1, 0.3, 0.55, 0.8])
    np.testing.assert_allclose(rep.rho(xq), rho(xq), atol=1e-6)
    yq = np.array([-0.8, -0.3, 1.2, 1.8])
    np.testing.assert_allclose(rep.y(yq), y(yq), atol=1e-6)


def test_round_trip_minus_pinned():
    rho, y = step_witness()
    W = rc.witness_profile(PAIR, -1.0, rho.mirrored(), y.mirrored(), 1.0,
                           side="minus")
    spec = rc.ReachSpec(T=1.0, C1=-2.0, C2=1.0, B1=-3.0, B2=3.0,
                        delta=0.05, R=-1.0)
    rep = rc.membership(PAIR, W, spec)
    assert rep.member and rep.side == "minus"
    assert rep.R == pytest.approx(-1.0)
    # witness comes back in original coordinates: band on [R, 0]
    assert rep.rho.domain[0] == pytest.approx(-1.0)
    xq = np.array([-0.8, -0.55, -0.3, -0.1])
    np.testing.assert_allclose(rep.rho(xq), rho.mirrored()(xq), atol=1e-6)
    # regenerate the profile from the recovered witness
    W2 = rc.witness_profile(PAIR, rep.R, rep.rho, rep.y, 1.0, side="minus")
    xs = np.array([-1.9, -1.2, -0.85, -0.25, 0.3, 0.9])
    np.testing.assert_allclose(W2(xs), rc._vec(W, xs), atol=1e-6)


def test_scan_finds_grid_aligned_r():
    rho, y = step_witness()
    W = rc.witness_profile(PAIR, 1.0, rho, y, 1.0)
    rep = rc.membership(PAIR, W, base_spec(), side="plus")
    assert rep.member
    assert rep.R == pytest.approx(1.0, abs=1e-12)


def test_rest_profile_is_member_with_degenerate_band():
    rep = rc.membership(PAIR, lambda x: 0.0 * np.asarray(x), base_spec())
    assert rep.member
    assert rep.R == 0.0
    assert rep.rho is None
    xq = np.linspace(-0.9, 1.9, 15)
    np.testing.assert_allclose(rep.y(xq), xq, atol=(3.0 / 256) + 1e-8)


def test_membership_threads_match_serial():
    rho, y = step_witness()
    W = rc.witness_profile(PAIR, 1.0, rho, y, 1.0)
    r1 = rc.membership(PAIR, W, base_spec(), side="plus", threads=1)
    r4 = rc.membership(PAIR, W, base_spec(), side="plus", threads=4)
    assert r1.member == r4.member
    assert r1.R == r4.R


# ------------------------------------------------------ constraint violations


def test_violation_decreasing_right_feet():
    rho = StepFn([0.0], [-1.5], domain=(0.0, 1.0))
    y = StepFn([-1.0, 1.0, 1.5], [-2.0, 0.8, 0.4], domain=(-1.0, 2.0))
    W = rc.witness_profile(PAIR, 1.0, rho, y, 1.0)
    rep = rc.membership(PAIR, W, base_spec(R=1.0))
    assert not rep.member
    assert rep.violation == "y not nondecreasing"
    assert rep.checks_passed == 7


def test_violation_left_feet_out_of_range():
    rho = StepFn([0.0], [-1.5], domain=(0.0, 1.0))
    y = StepFn([-1.0], [-5.0], domain=(-1.0, 2.0))
    W = rc.witness_profile(PAIR, 1.0, rho, y, 1.0)
    rep = rc.membership(PAIR, W, base_spec(R=1.0))
    assert not rep.member
    assert rep.violation == "y out of range on the left"
    assert rep.checks_passed == 1


def test_violation_decreasing_rho():
    # on the band rho = -sqrt(2) (W - x), so slope W' = 2 makes rho strictly
    # decreasing while the crossing times t = 1 - x/W still decrease
    def W(x):
        xs = np.asarray(x, dtype=float)
        return np.where(xs <= 0.0, 0.0,
                        np.where(xs < 1.0, 0.5 + 2.0 * xs, xs - 0.5))

    rep = rc.membership(PAIR, W, base_spec(R=1.0))
    assert not rep.member
    assert rep.violation == "rho not nondecreasing"
    assert rep.checks_passed == 5


def test_violation_rho_jump_down_breaks_crossing_times():
    # a downward rho jump sends the crossing time up, so the time ordering
    # breaks before the rho staircase is even inspected
    rho = StepFn([0.0, 0.5], [-1.0, -1.4], domain=(0.0, 1.0))
    W = rc.witness_profile(PAIR, 1.0, rho, None, 1.0)
    rep = rc.membership(PAIR, W, base_spec(R=1.0))
    assert not rep.member
    assert rep.violation == "crossing times not decreasing"
    assert rep.checks_passed == 4


def test_violation_flat_band_crossing_time():
    def W(x):
        xs = np.asarray(x, dtype=float)
        return np.where(xs <= 0.0, 0.0,
                        np.where(xs < 1.0, 0.1, xs - 0.5))

    rep = rc.membership(PAIR, W, base_spec(R=1.0))
    assert not rep.member
    assert rep.violation == "crossing time not positive on the band"
    assert rep.checks_passed == 3


def test_violation_band_below_crossing_branch():
    def W(x):
        xs = np.asarray(x, dtype=float)
        return np.where(xs <= 0.0, 0.0,
                        np.where(xs < 1.0, -0.5, xs - 0.5))

    rep = rc.membership(PAIR, W, base_spec(R=1.0))
    assert not rep.member
    assert rep.violation == "W below the crossing branch on the band"
    assert rep.checks_passed == 2


def test_violation_left_feet_above_band_foot():
    rho = StepFn([0.0], [-1.0], domain=(0.0, 1.0))
    y = StepFn([-1.0], [-0.5], domain=(-1.0, 0.0))
    W = rc.witness_profile(PAIR, 1.0, rho, y, 1.0)
    rep = rc.membership(PAIR, W, base_spec(R=1.0))
    assert not rep.member
    assert rep.violation == "y exceeds rho(0) on the left"
    assert rep.checks_passed == 9


# -------------------------------------------------------------- free regions


def test_free_region_lambda_frozen():
    lam = rc.free_region_lambda(PAIR.f, 1.0, 1.0, 2.0, 1.0, "right")
    assert lam == pytest.approx(1.2, abs=1e-9)
    lam = rc.free_region_lambda(PAIR.g, -1.0, -1.0, -2.0, 1.0, "left")
    assert lam == pytest.approx(-2.0, abs=1e-9)
    # shock against the bound m travels at chord speed, clearing the cone
    assert PAIR.g.chord(-2.0, -1.0) == pytest.approx(-3.0)


def test_free_region_lambda_degenerate_branches():
    # cone slope already below the characteristic speed of the bound
    assert rc.free_region_lambda(PAIR.f, 5.0, 1.0, 2.0, 1.0, "right") == 6.0
    assert rc.free_region_lambda(PAIR.g, -5.0, -1.0, -2.0, 1.0, "left") == -6.0
    with pytest.raises(InputError):
        rc.free_region_lambda(PAIR.f, 1.0, 1.0, 2.0, 0.0, "right")
    with pytest.raises(InputError):
        rc.free_region_lambda(PAIR.f, 1.0, 1.0, 2.0, 1.0, "up")


def test_q_boundary_endpoints():
    spec = base_spec()
    right = rc.q_boundary(spec, "right")
    left = rc.q_boundary(spec, "left")
    assert right(0.0) == pytest.approx(3.0)
    assert right(1.0) == pytest.approx(2.05)
    assert left(0.0) == pytest.approx(-3.0)
    assert left(1.0) == pytest.approx(-1.05)


# ------------------------------------------------------------- exact control


def test_exact_control_plus_round_trip():
    rho, y = step_witness()
    W = rc.witness_profile(PAIR, 1.0, rho, y, 1.0)
    res = rc.exact_control(PAIR, rc.ReachTarget(W, side="plus"),
                           base_spec(R=1.0), N=64)
    assert res.l1_error <= 1e-6
    # controls agree with the exterior outside (B1, B2)
    theta = StepFn([0.0], [0.0, 0.0])
    for xq in (-4.0, 5.0):
        assert res.u0(xq) == pytest.approx(theta(xq))


def test_exact_control_minus_round_trip():
    rho, y = step_witness()
    W = rc.witness_profile(PAIR, -1.0, rho.mirrored(), y.mirrored(), 1.0,
                           side="minus")
    spec = rc.ReachSpec(T=1.0, C1=-2.0, C2=1.0, B1=-3.0, B2=3.0,
                        delta=0.05, R=-1.0)
    res = rc.exact_control(PAIR, rc.ReachTarget(W), spec, N=64)
    assert res.report.side == "minus"
    assert res.l1_error <= 1e-6


def test_exact_control_rest_profile():
    res = rc.exact_control(PAIR, rc.ReachTarget(lambda x: 0.0 * np.asarray(x)),
                           base_spec(), N=64)
    assert res.report.R == 0.0
    assert res.l1_error <= 1e-2


def test_exact_control_pins_r_from_witness():
    rho, y = step_witness()
    W = rc.witness_profile(PAIR, 1.0, rho, y, 1.0)
    tgt = rc.ReachTarget(W, witness=(1.0, rho, y))
    res = rc.exact_control(PAIR, tgt, base_spec(), N=32)
    assert res.report.R == pytest.approx(1.0)
    assert res.l1_error <= 1e-5


def test_exact_control_rejects_non_member():
    rho = StepFn([0.0], [-1.5], domain=(0.0, 1.0))
    y = StepFn([-1.0, 1.0, 1.5], [-2.0, 0.8, 0.4], domain=(-1.0, 2.0))
    W = rc.witness_profile(PAIR, 1.0, rho, y, 1.0)
    with pytest.raises(InputError, match="not reachable"):
        rc.exact_control(PAIR, rc.ReachTarget(W), base_spec(R=1.0))


def test_exact_control_error_halves_with_n():
    def rho_s(x):
        return -1.6 + 0.6 * np.asarray(x)

    y = StepFn([-1.0, 1.0], [-1.8, 0.3], domain=(-1.0, 2.0))
    W = rc.witness_profile(PAIR, 1.0, rho_s, y, 1.0)
    spec = base_spec(R=1.0)
    errs = []
    for n in (8, 16, 32):
        res = rc.exact_control(PAIR, rc.ReachTarget(W, side="plus"), spec,
                               N=n, grid=4 * n, nx=4001)
        errs.append(res.l1_error)
    assert errs[1] < errs[0] and errs[2] < errs[1]
    assert errs[2] <= 1e-3


# --------------------------------------------------- exterior data / isolation

EXT_A = StepFn([-5.0, 0.0, 5.0], [-0.8, -0.3, 0.5, 0.1])
EXT_B = StepFn([-4.0, 0.0, 4.0], [-0.3, -0.8, 0.1, 0.5])


@pytest.fixture(scope="module")
def isolation_runs():
    rho, y = step_witness()
    W = rc.witness_profile(PAIR, 1.0, rho, y, 1.0)
    out = []
    for ext in (EXT_A, EXT_B):
        out.append(rc.exact_control(PAIR, rc.ReachTarget(W, side="plus"),
                                    base_spec(R=1.0, exterior=ext), N=64))
    return out


def test_exterior_is_respected(isolation_runs):
    for res, ext in zip(isolation_runs, (EXT_A, EXT_B)):
        assert res.l1_error <= 5e-2
        for xq in (-6.0, -3.5, 4.5, 7.0):
            assert res.u0(xq) == pytest.approx(ext(xq))


def test_buffer_states_depend_only_on_exterior_bounds(isolation_runs):
    rA, rB = isolation_runs
    # both exteriors share (sup, inf) = (-0.3, -0.8) left, (0.5, 0.1) right
    assert rA.lam1 == pytest.approx(rB.lam1)
    assert rA.lam2 == pytest.approx(rB.lam2)
    assert rA.lam1 == pytest.approx(-1.8)
    assert rA.lam2 == pytest.approx(1.5)


def test_forward_solutions_agree_inside_q(isolation_runs):
    """Different exterior data, same interior: the solutions coincide inside
    the influence cone (up to scheme noise at captured shocks) and differ
    by O(1) outside it."""
    rA, rB = isolation_runs
    dx = 0.02
    fA = godunov.run(PAIR, rA.u0, 1.0, dx, window=(-9.0, 9.0))
    fB = godunov.run(PAIR, rB.u0, 1.0, dx, window=(-9.0, 9.0))
    d = np.abs(fA.u - fB.u)
    in_q = (fA.x >= -1.05 + 2 * dx) & (fA.x <= 2.05 - 2 * dx)
    outside = fA.x > 3.5
    assert np.sum(d[in_q]) * dx <= 1e-3
    assert np.sum(d[outside]) * dx >= 0.5


# ------------------------------------------------------------ random batches


def rand_witness(rng, spec, n_rho=3, n_y=3):
    """A random admissible staircase triple with R fixed at 1."""
    B1, B2, d = spec.B1, spec.B2, spec.delta
    C1, C2 = spec.C1, spec.C2
    R = 1.0
    levels = np.sort(rng.uniform(B1 + 0.2, -0.15, n_rho))
    bp = np.concatenate([[0.0], np.sort(rng.uniform(0.05, R - 0.05, n_rho - 1))])
    rho = StepFn(bp, levels, domain=(0.0, R))
    yl = np.sort(rng.uniform(B1 + d + 0.05, levels[0] - 0.01, n_y))
    yr = np.sort(rng.uniform(0.05, B2 - d - 0.05, n_y))
    bpl = np.concatenate([[C1], np.sort(rng.uniform(C1 + 0.05, -0.05, n_y - 1))])
    bpr = np.concatenate([[R], np.sort(rng.uniform(R + 0.05, C2 - 0.05, n_y - 1))])
    y = StepFn(np.concatenate([bpl, bpr]), np.concatenate([yl, yr]),
               domain=(C1, C2))
    return R, rho, y


def test_random_witness_batch_both_sides():
    rng = np.random.default_rng(20240817)
    spec = base_spec(R=1.0)
    mspec = spec.mirrored()
    for _ in range(10):
        R, rho, y = rand_witness(rng, spec)
        W = rc.witness_profile(PAIR, R, rho, y, spec.T)
        assert rc.membership(PAIR, W, spec).member
        Wm = rc.witness_profile(PAIR, -R, rho.mirrored(), y.mirrored(),
                                spec.T, side="minus")
        rep = rc.membership(PAIR, Wm, mspec)
        assert rep.member and rep.side == "minus"


@settings(max_examples=15, deadline=None)
@given(lvl=st.floats(-2.3, -0.2), off=st.floats(0.01, 0.6),
       yr=st.floats(0.0, 2.0))
def test_constant_triples_are_members(lvl, off, yr):
    rho = StepFn([0.0], [lvl], domain=(0.0, 1.0))
    y = StepFn([-1.0, 1.0], [lvl - off, yr], domain=(-1.0, 2.0))
    W = rc.witness_profile(PAIR, 1.0, rho, y, 1.0)
    rep = rc.membership(PAIR, W, base_spec(R=1.0))
    assert rep.member, rep.violation
