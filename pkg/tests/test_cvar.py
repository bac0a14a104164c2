import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from prescript_opt.cvar import (AmbiguityLevel, cvar_from_infimum, max_over_support,
                                minimize_infimum, worst_case_expectation)
from prescript_opt.errors import InvalidInput
from prescript_opt.simplex import LinearProgram, solve_lp

from conftest import capped_simplex_lp

HALF = [0.5, 0.5]


@pytest.mark.parametrize("alpha,value,q", [
    (0.0, 2.0, [0.5, 0.5]),
    (0.2, 2.25, [0.375, 0.625]),
    (0.9, 3.0, [0.0, 1.0]),
])
def test_worst_case_examples(alpha, value, q):
    wc = worst_case_expectation([1.0, 3.0], HALF, AmbiguityLevel(alpha))
    assert wc.value == pytest.approx(value, abs=1e-12)
    assert wc.distribution == pytest.approx(q, abs=1e-12)


def test_infimum_examples():
    assert cvar_from_infimum([1.0, 3.0], HALF, 0.2, 1.0) == pytest.approx(2.25)
    assert cvar_from_infimum([1.0, 3.0], HALF, 0.6, 3.0) == pytest.approx(3.0)
    assert cvar_from_infimum([1.0, 3.0], [0.25, 0.75], 0.0, 1.0) == pytest.approx(2.5)


def test_level_validation():
    with pytest.raises(InvalidInput):
        AmbiguityLevel(1.0)
    with pytest.raises(InvalidInput):
        AmbiguityLevel(-0.1)
    assert AmbiguityLevel(0.75).cap == pytest.approx(4.0)


def test_empty_support_rejected():
    with pytest.raises(InvalidInput):
        worst_case_expectation([], [], 0.5)


def test_ties_go_to_lower_index():
    wc = worst_case_expectation([2.0, 2.0, 1.0], [1 / 3] * 3, 0.5)
    # cap 2 lets the first tied scenario take 2/3, the second the remaining 1/3
    assert wc.distribution == pytest.approx([2 / 3, 1 / 3, 0.0])


def _own_lp(values, weights, alpha):
    cap = 1.0 / (1.0 - alpha)
    n = len(values)
    sol = solve_lp(LinearProgram(-np.asarray(values), np.ones((1, n)), ("=",), [1.0],
                                 np.zeros(n), cap * np.asarray(weights)))
    return -sol.objective


def test_greedy_matches_both_lp_oracles_sample():
    rng = np.random.default_rng(11)
    for _ in range(100):
        n = int(rng.integers(1, 7))
        v = rng.normal(size=n) * 5
        w = rng.dirichlet(np.ones(n))
        alpha = float(rng.uniform(0, 0.99))
        got = worst_case_expectation(v, w, alpha).value
        assert got == pytest.approx(capped_simplex_lp(v, w, alpha), abs=1e-8)
        assert got == pytest.approx(_own_lp(v, w, alpha), abs=1e-8)


values_st = st.lists(st.floats(-100, 100), min_size=1, max_size=6)


@settings(max_examples=150, deadline=None)
@given(values_st, st.data())
def test_properties(values, data):
    n = len(values)
    raw = data.draw(st.lists(st.floats(0.01, 1.0), min_size=n, max_size=n))
    w = np.array(raw) / sum(raw)
    a1 = data.draw(st.floats(0.0, 0.98))
    a2 = data.draw(st.floats(a1, 0.99))
    lo = worst_case_expectation(values, w, a1)
    hi = worst_case_expectation(values, w, a2)
    # monotone in alpha, bracketed by the mean and the maximum
    assert lo.value <= hi.value + 1e-9
    assert float(w @ values) - 1e-9 <= lo.value <= max_over_support(values, w) + 1e-9
    # the returned distribution is admissible and attains the value
    q = lo.distribution
    assert abs(q.sum() - 1.0) <= 1e-9
    assert (q >= 0).all() and (q <= AmbiguityLevel(a1).cap * w + 1e-9).all()
    assert float(q @ values) == pytest.approx(lo.value, abs=1e-9)
    # the infimum representation reproduces it
    _, inf_value = minimize_infimum(values, w, a1)
    assert inf_value == pytest.approx(lo.value, abs=1e-6)
