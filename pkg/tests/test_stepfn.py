"""Step-function container: evaluation, primitive, JSON round trip."""

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from twoflux import DomainError, InputError, StepFn
from twoflux.stepfn import constant, from_pairs


def test_whole_line_eval_right_continuous():
    s = StepFn(breakpoints=[-1.0, 0.0, 2.0], values=[5.0, 1.0, -2.0, 3.0])
    assert s(-5.0) == 5.0
    assert s(-1.0) == 1.0          # right-continuous at the jump
    assert s(-0.5) == 1.0
    assert s(0.0) == -2.0
    assert s(1.999) == -2.0
    assert s(2.0) == 3.0
    assert s(100.0) == 3.0
    np.testing.assert_allclose(s(np.array([-2.0, -1.0, 0.5, 3.0])),
                               [5.0, 1.0, -2.0, 3.0])


def test_interval_eval_and_domain():
    s = StepFn(breakpoints=[0.0, 1.0, 2.5], values=[1.0, 2.0, 3.0],
               domain=(0.0, 4.0))
    assert s(0.0) == 1.0
    assert s(1.0) == 2.0
    assert s(2.5) == 3.0
    assert s(4.0) == 3.0           # closed right endpoint
    with pytest.raises(DomainError):
        s(-0.1)
    with pytest.raises(DomainError):
        s(4.1)


def test_validation_rejects_bad_layout():
    with pytest.raises(InputError):
        StepFn(breakpoints=[0.0, 0.0], values=[1.0, 2.0, 3.0])     # not increasing
    with pytest.raises(InputError):
        StepFn(breakpoints=[0.0, 1.0], values=[1.0, 2.0])          # wrong count
    with pytest.raises(InputError):
        StepFn(breakpoints=[0.5, 1.0], values=[1.0, 2.0], domain=(0.0, 2.0))
    with pytest.raises(InputError):
        StepFn(breakpoints=[0.0], values=[np.nan, 1.0])


def test_primitive_exact_piecewise_linear():
    # u = 2 on (-inf,0), -1 on (0,1), 4 on (1,inf); P(x) = int_0^x u
    s = StepFn(breakpoints=[0.0, 1.0], values=[2.0, -1.0, 4.0])
    assert s.primitive(0.0) == 0.0
    assert s.primitive(1.0) == -1.0
    assert s.primitive(2.0) == 3.0
    assert s.primitive(-2.0) == -4.0
    np.testing.assert_allclose(s.primitive(np.array([0.5, 1.5])), [-0.5, 1.0])


def test_pieces_and_total_variation():
    s = StepFn(breakpoints=[-1.0, 1.0], values=[0.0, 3.0, 1.0])
    assert s.pieces() == [(-np.inf, -1.0, 0.0), (-1.0, 1.0, 3.0), (1.0, np.inf, 1.0)]
    assert s.total_variation() == 5.0
    assert s.min == 0.0 and s.max == 3.0


def test_json_round_trip(tmp_path):
    s = from_pairs([0.25, 1.5], [1.0, -2.0, 0.5])
    d = json.loads(json.dumps(s.to_dict()))
    s2 = StepFn.from_dict(d)
    assert s2.breakpoints.tolist() == s.breakpoints.tolist()
    assert s2.values.tolist() == s.values.tolist()
    p = tmp_path / "s.json"
    s.dump(p)
    s3 = StepFn.load(p)
    assert s3(0.3) == s(0.3)

    si = StepFn(breakpoints=[0.0, 2.0], values=[1.0, 5.0], domain=(0.0, 3.0))
    si2 = StepFn.from_dict(si.to_dict())
    assert si2.domain == (0.0, 3.0)


def test_constant_and_map():
    c = constant(2.5)
    assert c(-1e9) == 2.5 and c(1e9) == 2.5
    m = StepFn(breakpoints=[0.0], values=[1.0, 2.0]).map(lambda v: v * v)
    assert m(-1.0) == 1.0 and m(1.0) == 4.0


@given(st.lists(st.floats(-50, 50), min_size=1, max_size=8, unique=True),
       st.floats(-60, 60), st.floats(-60, 60))
@settings(max_examples=200, deadline=None)
def test_primitive_matches_quadrature(bps, x1, x2):
    bps = sorted(bps)
    vals = [float(i % 3 - 1) for i in range(len(bps) + 1)]
    s = StepFn(breakpoints=bps, values=vals)
    # Riemann sum on a fine grid as the independent check
    for x in (x1, x2):
        lo, hi = (0.0, x) if x >= 0 else (x, 0.0)
        grid = np.linspace(lo, hi, 20001)
        mids = 0.5 * (grid[:-1] + grid[1:])
        approx = float(np.sum(s(mids)) * (hi - lo) / (len(grid) - 1))
        if x < 0:
            approx = -approx
        assert abs(s.primitive(x) - approx) < 5e-2


@given(st.floats(-10, 10))
@settings(max_examples=100, deadline=None)
def test_eval_constant_between_breakpoints(x):
    s = StepFn(breakpoints=[-2.0, 0.0, 2.0], values=[1.0, 2.0, 3.0, 4.0])
    idx = int(np.searchsorted(np.array([-2.0, 0.0, 2.0]), x, side="right"))
    assert s(x) == [1.0, 2.0, 3.0, 4.0][idx]
