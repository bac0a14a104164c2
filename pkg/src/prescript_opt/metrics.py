"""Prescriptiveness competitive ratio (PCR).

The ratio measures how much of the gap between a benchmark decision and
the perfect-information cost a policy closes:

    pcr = 1 - (E[policy] - E[hindsight]) / (E[benchmark] - E[hindsight])

With the sample-average decision as benchmark this is the coefficient of
prescriptiveness.  When the benchmark already attains hindsight the ratio
is 1 if the policy does too and minus infinity otherwise.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInput

COST_ORDER_TOL = 1e-7


@dataclass(frozen=True)
class CostTriple:
    policy_costs: np.ndarray
    benchmark_costs: np.ndarray
    hindsight_costs: np.ndarray

    def __post_init__(self):
        arrays = [np.array(a, dtype=float).ravel() for a in
                  (self.policy_costs, self.benchmark_costs, self.hindsight_costs)]
        n = len(arrays[0])
        if n == 0 or any(len(a) != n for a in arrays):
            raise InvalidInput("cost sequences must be nonempty and of equal length")
        for name, a in zip(("policy_costs", "benchmark_costs", "hindsight_costs"), arrays):
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    def __len__(self):
        return len(self.policy_costs)

    def hindsight_is_lowest(self, tol=COST_ORDER_TOL) -> bool:
        low = np.minimum(self.policy_costs, self.benchmark_costs)
        return bool((self.hindsight_costs <= low + tol).all())

    def save(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["policy", "benchmark", "hindsight"])
            for row in zip(self.policy_costs, self.benchmark_costs, self.hindsight_costs):
                writer.writerow([repr(float(v)) for v in row])

    @classmethod
    def load(cls, path) -> "CostTriple":
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
        if not rows or rows[0] != ["policy", "benchmark", "hindsight"]:
            raise InvalidInput(f"{path}: expected header policy,benchmark,hindsight")
        try:
            body = np.array([[float(v) for v in r] for r in rows[1:]], dtype=float)
        except ValueError as exc:
            raise InvalidInput(f"{path}: {exc}") from exc
        if body.ndim != 2 or body.shape[1] != 3:
            raise InvalidInput(f"{path}: no cost rows")
        return cls(body[:, 0], body[:, 1], body[:, 2])


def pcr(triple: CostTriple) -> float:
    policy = float(np.mean(triple.policy_costs))
    bench = float(np.mean(triple.benchmark_costs))
    hind = float(np.mean(triple.hindsight_costs))
    tau = 1e-9 * (1.0 + abs(hind))
    denom = bench - hind
    if denom > tau:
        return 1.0 - (policy - hind) / denom
    if abs(denom) <= tau and abs(policy - hind) <= tau:
        return 1.0
    return -math.inf


def format_pcr(value: float) -> str:
    """CSV rendering; minus infinity becomes ``-inf``."""
    return "-inf" if value == -math.inf else repr(float(value))
