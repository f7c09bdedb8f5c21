import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tlsynth.lp import LinearProgram, lp_solve

from oracles import scipy_lp


def test_one_dimensional_vertex_problem():
    # max u  s.t.  u <= 0.2 (an inward-speed margin), -1 <= u <= 1
    res = lp_solve(LinearProgram([1.0], A=[[1.0]], b=[0.2], lo=[-1], hi=[1]))
    assert res.ok and res.x[0] == pytest.approx(0.2)


def test_one_dimensional_infeasible():
    res = lp_solve(LinearProgram([1.0], A=[[1.0]], b=[-2.0], lo=[-1], hi=[1]))
    assert res.status == "infeasible"


def test_unbounded():
    res = lp_solve(LinearProgram([1.0, 1.0], A=[[1.0, -1.0]], b=[1.0]))
    assert res.status == "unbounded"


def test_two_phase_needs_artificials():
    # x + y >= 2 written as -x - y <= -2
    res = lp_solve(LinearProgram([-1.0, -2.0], A=[[-1, -1]], b=[-2], lo=[0, 0], hi=[5, 5]))
    assert res.ok
    assert res.value == pytest.approx(-2.0)
    assert np.allclose(res.x, [2.0, 0.0])


def test_degenerate_vertex_terminates():
    A = [[1, 1], [1, -1], [-1, 1], [1, 0]]
    b = [1, 0, 0, 0.5]
    res = lp_solve(LinearProgram([1.0, 1.0], A=A, b=b, lo=[0, 0]))
    assert res.ok and res.value == pytest.approx(1.0)


def test_rejects_bad_data():
    with pytest.raises(ValueError):
        LinearProgram([1.0], A=[[np.inf]], b=[1.0])
    with pytest.raises(ValueError):
        LinearProgram([1.0], lo=[1.0], hi=[0.0])


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 3), st.integers(0, 4), st.integers(0, 2**32 - 1))
def test_matches_highs(n, m, seed):
    rng = np.random.default_rng(seed)
    lo = np.where(rng.random(n) < 0.8, rng.uniform(-2, 0, n), -np.inf)
    hi = np.where(rng.random(n) < 0.8, rng.uniform(0, 2, n), np.inf)
    lp = LinearProgram(rng.normal(size=n), A=rng.normal(size=(m, n)), b=rng.normal(size=m), lo=lo, hi=hi)
    status, value = scipy_lp(lp)
    res = lp_solve(lp)
    assert res.status == status
    if status == "optimal":
        assert res.value == pytest.approx(value, abs=1e-7)
        assert lp.residual(res.x) <= 1e-9
