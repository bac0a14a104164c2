"""Choosing the ambiguity level on validation data.

For every ``alpha`` on a grid the method's decisions are computed for
each validation context and scored by the PCR on the realized validation
costs, with the sample-average decision as benchmark.  The best-scoring
``alpha`` wins; ties go to the smallest ``alpha``.

:class:`FittedProblem` bundles what does not depend on the validation
data (weight model, benchmark, hindsight values, the bisection root per
``alpha``) so several validation sets can be scored without refitting.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from . import drpcr
from .estimators import EstimatorSpec, WeightModel, fit
from .flow import FlowOracle
from .metrics import CostTriple, format_pcr, pcr
from .model import Dataset, Decision, JointModel, PolicyTable
from .errors import InvalidInput
from .solvers import HindsightTable, solve_cso, solve_drcso, solve_drcro, solve_saa

METHODS = ("cso", "drcso", "drcro", "drpcr")
# how a DRPCR decision is formed for a new context: re-solve the
# subproblem under its own conditional weights, or reuse the decision of
# the closest training context
DRPCR_POLICIES = ("fresh", "nearest")


def alpha_grid(n_log=20, n_even=20, lo=0.01, hi=0.99) -> np.ndarray:
    """Union of log-spaced points on ``[lo, hi]`` and evenly spaced points on ``[0, 1)``."""
    logs = np.geomspace(lo, hi, n_log)
    even = np.linspace(0.0, 1.0, n_even, endpoint=False)
    grid = np.unique(np.round(np.concatenate([logs, even]), 12))
    return grid[grid < 1.0]


@dataclass
class FittedProblem:
    graph: object
    train: Dataset
    model: WeightModel
    binary: bool = False
    epsilon: float = 1e-3
    accelerated: bool = False
    engine: str = "simplex"
    drpcr_policy: str = "fresh"
    benchmark: Decision = None
    table: HindsightTable = None
    joint: JointModel = None
    gammas: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.drpcr_policy not in DRPCR_POLICIES:
            raise InvalidInput(f"drpcr_policy must be one of {DRPCR_POLICIES}")
        self.oracle = FlowOracle(self.graph, binary=self.binary, engine=self.engine)
        self._cond_cache = {}
        self._training_policies = {}
        if self.benchmark is None:
            self.benchmark = solve_saa(self.graph, self.train.costs, self.binary, self.oracle)
        if self.table is None:
            self.table = HindsightTable.build(self.graph, self.model.costs, self.binary, self.oracle)
        if self.joint is None:
            n = len(self.train)
            conds = self.model.conditionals(self.train.contexts)
            self.joint = JointModel(self.train.contexts, np.full(n, 1.0 / n), conds)

    @classmethod
    def from_data(cls, graph, train, spec=EstimatorSpec(), seed=0, **kw) -> "FittedProblem":
        return cls(graph, train, fit(train, spec, seed), **kw)

    def gamma_star(self, alpha) -> float:
        alpha = float(alpha)
        if alpha not in self.gammas:
            solver = drpcr.accelerated_bisection if self.accelerated else drpcr.bisection
            res = solver(self.graph, self.joint, alpha, self.benchmark, self.table, self.epsilon,
                         self.binary, self.oracle)
            self.gammas[alpha] = res.gamma_star
        return self.gammas[alpha]

    def decisions(self, method, alpha, contexts, tag="eval", gamma=None) -> list:
        """Decisions of ``method`` at level ``alpha`` for each row of ``contexts``."""
        if method not in METHODS:
            raise InvalidInput(f"unknown method {method!r}")
        conds = self._conditionals(contexts)
        g, o, b = self.graph, self.oracle, self.binary
        if method == "drpcr" and gamma is None:
            gamma = self.gamma_star(alpha)
        if method == "drpcr" and self.drpcr_policy == "nearest":
            table = self.training_policy(alpha, gamma)
            return [table.nearest(z) for z in np.atleast_2d(contexts)]
        out = []
        for j, cond in enumerate(conds):
            slot = (tag, j)
            if method == "cso":
                out.append(solve_cso(g, cond, b, o, slot=("path", j)))
            elif method == "drcso":
                out.append(solve_drcso(g, cond, alpha, b, o, slot))
            elif method == "drcro":
                out.append(solve_drcro(g, cond, alpha, self.table, b, o, slot))
            else:
                out.append(drpcr.extract_policy(g, cond, gamma, alpha, self.benchmark, self.table,
                                                b, o, slot))
        return out

    def training_policy(self, alpha, gamma) -> PolicyTable:
        """DRPCR decisions at every training context for one ``(alpha, gamma)``."""
        key = (float(alpha), float(gamma))
        if key not in self._training_policies:
            decisions = {w: drpcr.extract_policy(self.graph, cond, gamma, alpha, self.benchmark,
                                                 self.table, self.binary, self.oracle, ("ctx", w))
                         for w, cond in enumerate(self.joint.conditionals)}
            self._training_policies[key] = PolicyTable(decisions, self.benchmark,
                                                       self.joint.contexts)
        return self._training_policies[key]

    def _conditionals(self, contexts):
        # validation sets are scored once per alpha; reuse their weights
        key = id(contexts)
        hit = self._cond_cache.get(key)
        if hit is None or hit[0] is not contexts:
            hit = (contexts, self.model.conditionals(contexts))
            self._cond_cache = {key: hit}
        return hit[1]

    def hindsight_costs(self, data: Dataset) -> np.ndarray:
        return np.array([self.oracle.shortest_path(xi, slot="hindsight")[0] for xi in data.costs])

    def score(self, decisions, data: Dataset, hindsight_costs=None) -> CostTriple:
        flows = np.array([d.flow for d in decisions])
        policy = np.einsum("ij,ij->i", flows, data.costs)
        bench = data.costs @ self.benchmark.flow
        hind = self.hindsight_costs(data) if hindsight_costs is None else hindsight_costs
        return CostTriple(policy, bench, hind)


@dataclass
class CalibrationResult:
    method: str
    alpha_star: float
    gamma_star: float | None
    scores: list
    triples: dict
    policy: PolicyTable

    @property
    def best_score(self) -> float:
        return max(s for _, _, s in self.scores)

    def write_report(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["alpha", "gamma", "validation_pcr"])
            for a, g, s in self.scores:
                writer.writerow([repr(a), "" if g is None else repr(g), format_pcr(s)])


def _calibrate(problem: FittedProblem, val: Dataset, method, grid) -> CalibrationResult:
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or len(grid) == 0 or (grid < 0).any() or (grid >= 1).any():
        raise InvalidInput("alpha grid must be a nonempty sequence in [0, 1)")
    grid = np.unique(grid)
    hind = problem.hindsight_costs(val)
    scores, triples = [], {}
    best = None
    for alpha in grid:
        alpha = float(alpha)
        gamma = problem.gamma_star(alpha) if method == "drpcr" else None
        decisions = problem.decisions(method, alpha, val.contexts, tag="val", gamma=gamma)
        triple = problem.score(decisions, val, hind)
        s = pcr(triple)
        scores.append((alpha, gamma, s))
        triples[alpha] = triple
        # strict improvement keeps the smallest alpha on ties
        if best is None or s > best[2]:
            best = (alpha, gamma, s, decisions)
    alpha, gamma, _, decisions = best
    policy = PolicyTable(dict(enumerate(decisions)), problem.benchmark, val.contexts)
    return CalibrationResult(method, alpha, gamma, scores, triples, policy)


def calibrate_drpcr(train, val, graph, spec=EstimatorSpec(), grid=None, epsilon=1e-3, binary=False,
                    seed=0, problem: FittedProblem | None = None, accelerated=False,
                    engine="simplex", drpcr_policy="fresh") -> CalibrationResult:
    if problem is None:
        problem = FittedProblem.from_data(graph, train, spec, seed, binary=binary, epsilon=epsilon,
                                          accelerated=accelerated, engine=engine,
                                          drpcr_policy=drpcr_policy)
    return _calibrate(problem, val, "drpcr", alpha_grid() if grid is None else grid)


def calibrate_dr(train, val, graph, spec=EstimatorSpec(), grid=None, method="drcso", binary=False,
                 seed=0, problem: FittedProblem | None = None, engine="simplex") -> CalibrationResult:
    if method not in ("cso", "drcso", "drcro"):
        raise InvalidInput(f"method must be cso, drcso or drcro, got {method!r}")
    if problem is None:
        problem = FittedProblem.from_data(graph, train, spec, seed, binary=binary, engine=engine)
    if method == "cso":
        grid = [0.0]
    return _calibrate(problem, val, method, alpha_grid() if grid is None else grid)
