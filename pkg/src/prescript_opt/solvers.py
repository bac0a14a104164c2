"""Baseline decision rules and per-scenario hindsight values.

* :func:`solve_saa` ignores covariates and routes on the mean training cost.
* :func:`solve_cso` routes on the conditional mean cost.
* :func:`solve_drcso` minimizes the worst-case expected cost over the
  capped simplex around the conditional weights.
* :func:`solve_drcro` does the same for the expected regret against the
  hindsight (perfect-information) value of each scenario.

Every function accepts an optional :class:`~prescript_opt.flow.FlowOracle`
so that callers solving many related problems can share warm starts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import cvar
from .errors import InvalidInput
from .flow import FlowOracle
from .model import Decision, DirectedGraph, DiscreteConditional


def _oracle(graph: DirectedGraph, binary, oracle):
    if oracle is None:
        return FlowOracle(graph, binary=binary)
    if (oracle.graph is not graph and oracle.graph != graph) or oracle.binary != bool(binary):
        raise InvalidInput("oracle was built for a different graph or integrality setting")
    return oracle


@dataclass(frozen=True)
class HindsightTable:
    """Best achievable cost of every scenario in a pool, with its route."""

    scenarios: np.ndarray
    values: np.ndarray
    decisions: tuple

    def __len__(self):
        return len(self.values)

    def covers(self, support) -> bool:
        support = np.asarray(support)
        return support is self.scenarios or (
            support.shape == self.scenarios.shape and np.array_equal(support, self.scenarios))

    def values_for(self, support) -> np.ndarray:
        if not self.covers(support):
            raise InvalidInput("hindsight table was computed for a different scenario pool")
        return self.values

    @classmethod
    def build(cls, graph, scenarios, binary=False, oracle=None) -> "HindsightTable":
        oracle = _oracle(graph, binary, oracle)
        scenarios = np.asarray(scenarios, dtype=float)
        pairs = [hindsight(graph, xi, binary, oracle) for xi in scenarios]
        values = np.array([v for v, _ in pairs])
        values.setflags(write=False)
        return cls(scenarios, values, tuple(d for _, d in pairs))


def hindsight(graph, xi, binary=False, oracle=None):
    """Shortest-path value and decision for one realized cost vector."""
    return _oracle(graph, binary, oracle).shortest_path(xi, slot="hindsight")


def solve_saa(graph, costs, binary=False, oracle=None) -> Decision:
    costs = np.asarray(costs, dtype=float)
    if costs.ndim != 2 or len(costs) == 0:
        raise InvalidInput("need a nonempty (N, |A|) cost array")
    return _oracle(graph, binary, oracle).shortest_path(costs.mean(axis=0), slot="saa")[1]


def solve_cso(graph, cond: DiscreteConditional, binary=False, oracle=None, slot=None) -> Decision:
    return _oracle(graph, binary, oracle).shortest_path(cond.mean(), slot=slot)[1]


def solve_drcso(graph, cond: DiscreteConditional, level, binary=False, oracle=None,
                slot=None) -> Decision:
    zero = np.zeros(len(cond))
    sol = _oracle(graph, binary, oracle).epigraph(cond.support, cond.weights, zero, level, slot)
    return sol.decision


def solve_drcro(graph, cond: DiscreteConditional, level, table: HindsightTable, binary=False,
                oracle=None, slot=None) -> Decision:
    offsets = table.values_for(cond.support)
    sol = _oracle(graph, binary, oracle).epigraph(cond.support, cond.weights, offsets, level, slot)
    return sol.decision


def worst_case_cost(decision: Decision, cond: DiscreteConditional, level, offsets=None) -> float:
    """Worst-case expectation of ``cost - offsets`` for a fixed decision."""
    g = cond.support @ decision.flow
    if offsets is not None:
        g = g - np.asarray(offsets, dtype=float)
    return cvar.worst_case_expectation(g, cond.weights, level).value
