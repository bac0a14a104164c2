import numpy as np
import pytest

from prescript_opt.cvar import AmbiguityLevel
from prescript_opt.datagen import make_graph
from prescript_opt.flow import FlowOracle
from prescript_opt.model import DirectedGraph, DiscreteConditional, feasibility_residual
from prescript_opt.solvers import (HindsightTable, hindsight, solve_cso, solve_drcro,
                                   solve_drcso, solve_saa, worst_case_cost)

from conftest import DIRECT, TWO_LEG, all_paths, random_weights

PAIR = np.array([[5.0, 2.0, 2.0], [3.0, 4.0, 4.0]])


@pytest.mark.parametrize("engine", ["simplex", "highs"])
def test_hindsight_examples(three_node, engine):
    oracle = FlowOracle(three_node, engine=engine)
    assert hindsight(three_node, [5, 2, 2], oracle=oracle)[0] == pytest.approx(4.0)
    assert hindsight(three_node, [3, 4, 4], oracle=oracle)[0] == pytest.approx(3.0)
    single = DirectedGraph(2, ((0, 1),), 0, 1)
    assert hindsight(single, [7.5])[0] == 7.5


def test_saa_examples(three_node):
    assert solve_saa(three_node, PAIR).flow.tolist() == DIRECT.tolist()
    assert solve_saa(three_node, PAIR[:1]).flow.tolist() == TWO_LEG.tolist()
    assert solve_saa(three_node, np.repeat(PAIR[1:], 3, axis=0)).flow.tolist() == DIRECT.tolist()


def test_cso_examples(three_node):
    d = solve_cso(three_node, DiscreteConditional(PAIR, [1.0, 0.0]))
    assert d.flow.tolist() == TWO_LEG.tolist()
    d = solve_cso(three_node, DiscreteConditional(PAIR, [0.5, 0.5]))
    assert d.flow.tolist() == DIRECT.tolist()


@pytest.mark.parametrize("binary", [False, True])
@pytest.mark.parametrize("engine", ["simplex", "highs"])
def test_drcso_example(three_node, binary, engine):
    cond = DiscreteConditional(np.array([[5.0, 2.0, 2.0], [5.0, 2.0, 6.0]]), [0.5, 0.5])
    oracle = FlowOracle(three_node, binary=binary, engine=engine)
    d = solve_drcso(three_node, cond, AmbiguityLevel(0.9), binary, oracle)
    assert d.flow.tolist() == DIRECT.tolist()


def test_drcso_point_mass_is_hindsight(three_node):
    cond = DiscreteConditional.point_mass(PAIR, 0)
    for alpha in (0.0, 0.5, 0.95):
        assert solve_drcso(three_node, cond, alpha).flow.tolist() == TWO_LEG.tolist()


def test_drcro_example_binary(three_node):
    table = HindsightTable.build(three_node, PAIR)
    cond = DiscreteConditional(PAIR, [0.5, 0.5])
    d = solve_drcro(three_node, cond, AmbiguityLevel(0.9), table, binary=True)
    assert d.flow.tolist() == DIRECT.tolist()
    assert worst_case_cost(d, cond, 0.9, table.values) == pytest.approx(1.0)


def test_drcro_relaxation_mixes_paths(three_node):
    # regrets are (lam, 5 (1 - lam)) for lam on the direct arc; the max is smallest at 5/6
    table = HindsightTable.build(three_node, PAIR)
    cond = DiscreteConditional(PAIR, [0.5, 0.5])
    d = solve_drcro(three_node, cond, AmbiguityLevel(0.9), table)
    assert d.flow[0] == pytest.approx(5 / 6)
    assert worst_case_cost(d, cond, 0.9, table.values) == pytest.approx(5 / 6)


def test_drcro_point_mass_has_zero_regret(three_node):
    table = HindsightTable.build(three_node, PAIR)
    cond = DiscreteConditional.point_mass(PAIR, 1)
    d = solve_drcro(three_node, cond, 0.7, table)
    assert worst_case_cost(d, cond, 0.7, table.values) == pytest.approx(0.0)


def test_hindsight_table_matches_fresh_solves():
    g = make_graph(3, 3)
    pool = np.random.default_rng(1).uniform(1, 5, size=(6, g.n_arcs))
    table = HindsightTable.build(g, pool)
    paths = all_paths(g)
    for xi, v in zip(pool, table.values):
        assert v == pytest.approx((paths @ xi).min(), abs=1e-7)


def test_random_properties():
    rng = np.random.default_rng(7)
    g = make_graph(2, 3)
    paths = all_paths(g)
    for _ in range(25):
        S = int(rng.integers(1, 9))
        pool = rng.uniform(0, 10, size=(S, g.n_arcs))
        cond = DiscreteConditional(pool, random_weights(rng, S))
        table = HindsightTable.build(g, pool)
        cso = solve_cso(g, cond)
        d0 = solve_drcso(g, cond, 0.0)
        # alpha = 0 reduces to the conditional expectation
        assert cond.mean() @ d0.flow == pytest.approx(cond.mean() @ cso.flow, abs=1e-6)
        assert cond.mean() @ cso.flow == pytest.approx((paths @ cond.mean()).min(), abs=1e-9)
        # robust cost is nondecreasing in alpha
        prev = -np.inf
        for alpha in (0.0, 0.3, 0.6, 0.9):
            d = solve_drcso(g, cond, alpha)
            val = worst_case_cost(d, cond, alpha)
            assert val >= prev - 1e-7
            prev = val
            assert feasibility_residual(d, g) <= 1e-7
        # regrets are nonnegative
        d = solve_drcro(g, cond, 0.5, table)
        assert (pool @ d.flow - table.values >= -1e-7).all()
        assert worst_case_cost(d, cond, 0.5, table.values) >= -1e-9
        # relaxed and binary CSO agree
        binary = solve_cso(g, cond, binary=True)
        assert cond.mean() @ binary.flow == pytest.approx(cond.mean() @ cso.flow, abs=1e-6)


def test_engines_agree_on_grid_epigraphs():
    g = make_graph(3, 4)
    rng = np.random.default_rng(3)
    native, highs = FlowOracle(g), FlowOracle(g, engine="highs")
    for _ in range(10):
        pool = rng.uniform(1, 10, size=(6, g.n_arcs))
        p = random_weights(rng, 6)
        off = rng.uniform(0, 20, size=6)
        a = native.epigraph(pool, p, off, 0.6)
        b = highs.epigraph(pool, p, off, 0.6, slot="s")
        assert a.value == pytest.approx(b.value, abs=1e-7)
        for sol in (a, b):
            # the worst-case weights certify the objective
            g_vals = pool @ sol.decision.flow - off
            assert sol.worst_weights @ g_vals == pytest.approx(sol.value, abs=1e-6)
            assert (sol.worst_weights <= AmbiguityLevel(0.6).cap * p + 1e-9).all()


def test_engines_agree_on_many_scenario_epigraphs():
    # forest-sized supports with sparse weights stress the native pivoting
    g = make_graph(3, 4)
    rng = np.random.default_rng(8)
    native, highs = FlowOracle(g), FlowOracle(g, engine="highs")
    for _ in range(20):
        pool = rng.uniform(1, 12, size=(40, g.n_arcs))
        p = random_weights(rng, 40, zero_prob=0.5)
        off = pool @ solve_saa(g, pool).flow * rng.uniform(0.5, 1.0)
        alpha = float(rng.choice([0.2, 0.5, 0.8, 0.95]))
        a = native.epigraph(pool, p, off, alpha)
        b = highs.epigraph(pool, p, off, alpha, slot="s")
        assert a.value == pytest.approx(b.value, abs=1e-7)
