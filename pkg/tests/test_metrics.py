import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from prescript_opt.errors import InvalidInput
from prescript_opt.metrics import CostTriple, format_pcr, pcr


def triple(policy, bench, hind):
    return CostTriple(np.atleast_1d(policy), np.atleast_1d(bench), np.atleast_1d(hind))


def test_pcr_examples():
    assert pcr(triple([1.0, 3.0], [4.0, 4.0], [1.0, 1.0])) == pytest.approx(2 / 3)
    assert pcr(triple([5.0, 3.0], [5.0, 3.0], [1.0, 2.0])) == 0.0
    assert pcr(triple(2.0, 2.0, 2.0)) == 1.0
    assert pcr(triple(3.0, 2.0, 2.0)) == -math.inf


def test_length_mismatch_rejected():
    with pytest.raises(InvalidInput):
        CostTriple([1.0, 2.0], [1.0], [1.0, 2.0])
    with pytest.raises(InvalidInput):
        CostTriple([], [], [])


def test_r_squared_equivalence():
    rng = np.random.default_rng(3)
    y = rng.normal(size=50)
    f = y + rng.normal(scale=0.3, size=50)
    t = triple((f - y) ** 2, (y.mean() - y) ** 2, np.zeros(50))
    r2 = 1 - np.sum((f - y) ** 2) / np.sum((y - y.mean()) ** 2)
    assert pcr(t) == pytest.approx(r2, abs=1e-9)


costs = st.lists(st.floats(0.0, 100.0), min_size=1, max_size=8)


@settings(max_examples=200, deadline=None)
@given(costs, st.data(), st.floats(0.01, 100.0))
def test_upper_bound_and_scale_invariance(hind, data, scale):
    n = len(hind)
    hind = np.array(hind)
    policy = hind + np.array(data.draw(st.lists(st.floats(0, 50), min_size=n, max_size=n)))
    bench = hind + np.array(data.draw(st.lists(st.floats(0, 50), min_size=n, max_size=n)))
    value = pcr(triple(policy, bench, hind))
    assert value <= 1.0
    scaled = pcr(triple(scale * policy, scale * bench, scale * hind))
    if math.isfinite(value) and bench.mean() - hind.mean() > 1e-6 * (1 + hind.mean()):
        assert scaled == pytest.approx(value, rel=1e-9, abs=1e-9)


def test_csv_round_trip_and_order_check(tmp_path):
    t = triple([1.5, 2.0], [3.0, 2.5], [1.0, 2.0])
    path = tmp_path / "c.csv"
    t.save(path)
    back = CostTriple.load(path)
    assert np.array_equal(back.policy_costs, t.policy_costs)
    assert back.hindsight_is_lowest()
    assert not triple(0.5, 1.0, 1.0).hindsight_is_lowest()


def test_format_pcr():
    assert format_pcr(-math.inf) == "-inf"
    assert float(format_pcr(0.25)) == 0.25
