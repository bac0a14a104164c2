"""Domain types for the contextual shortest-path problem.

Arc costs, covariates and flows are plain numpy arrays indexed in the arc
order of the graph's arc list.  The containers below validate their
invariants on construction and freeze their arrays so they can be shared
between workers without copying.
"""

from __future__ import annotations

import csv
import json
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import InvalidInput

FEASIBILITY_TOL = 1e-7
WEIGHT_SUM_TOL = 1e-9


def _frozen(array, dtype=float):
    out = np.array(array, dtype=dtype)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class DirectedGraph:
    """Simple directed graph with a single origin and destination."""

    node_count: int
    arcs: tuple
    origin: int
    destination: int

    def __post_init__(self):
        arcs = tuple((int(t), int(h)) for t, h in self.arcs)
        object.__setattr__(self, "arcs", arcs)
        n = int(self.node_count)
        if n < 2:
            raise InvalidInput("graph needs at least two nodes")
        if not arcs:
            raise InvalidInput("graph has no arcs")
        for t, h in arcs:
            if not (0 <= t < n and 0 <= h < n):
                raise InvalidInput(f"arc ({t}, {h}) references a node outside 0..{n - 1}")
            if t == h:
                raise InvalidInput(f"self-loop on node {t}")
        if len(set(arcs)) != len(arcs):
            raise InvalidInput("parallel arcs are not supported")
        if not (0 <= self.origin < n and 0 <= self.destination < n):
            raise InvalidInput("origin/destination outside node range")
        if self.origin == self.destination:
            raise InvalidInput("origin and destination coincide")
        forward = self._reach(self.origin, reverse=False)
        backward = self._reach(self.destination, reverse=True)
        stranded = sorted(set(range(n)) - (forward & backward))
        if stranded:
            raise InvalidInput(f"nodes {stranded} are not on any origin-destination route")

    def _reach(self, start, reverse):
        adj = [[] for _ in range(self.node_count)]
        for t, h in self.arcs:
            if reverse:
                adj[h].append(t)
            else:
                adj[t].append(h)
        seen = {start}
        queue = deque([start])
        while queue:
            u = queue.popleft()
            for v in adj[u]:
                if v not in seen:
                    seen.add(v)
                    queue.append(v)
        return seen

    @property
    def n_arcs(self) -> int:
        return len(self.arcs)

    def incidence(self) -> np.ndarray:
        """Node-arc incidence matrix: +1 at the tail, -1 at the head."""
        mat = np.zeros((self.node_count, self.n_arcs))
        for k, (t, h) in enumerate(self.arcs):
            mat[t, k] = 1.0
            mat[h, k] = -1.0
        return mat

    def supply(self) -> np.ndarray:
        b = np.zeros(self.node_count)
        b[self.origin] = 1.0
        b[self.destination] = -1.0
        return b

    def to_dict(self) -> dict:
        return {
            "nodes": self.node_count,
            "arcs": [list(a) for a in self.arcs],
            "origin": self.origin,
            "destination": self.destination,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "DirectedGraph":
        try:
            return cls(int(data["nodes"]), tuple(tuple(a) for a in data["arcs"]),
                       int(data["origin"]), int(data["destination"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidInput(f"malformed graph description: {exc}") from exc


def load_graph(path) -> DirectedGraph:
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InvalidInput(f"{path}: not valid JSON ({exc})") from exc
    return DirectedGraph.from_dict(data)


def save_graph(graph: DirectedGraph, path) -> None:
    Path(path).write_text(json.dumps(graph.to_dict()) + "\n", encoding="utf-8")


@dataclass(frozen=True)
class Dataset:
    """Paired covariate/cost observations.

    ``contexts`` is ``(N, p)`` and ``costs`` is ``(N, |A|)``.
    """

    contexts: np.ndarray
    costs: np.ndarray
    role: str = "train"

    def __post_init__(self):
        z = np.array(self.contexts, dtype=float)
        c = np.array(self.costs, dtype=float)
        if z.ndim == 1:
            z = z[:, None]
        if c.ndim != 2 or z.ndim != 2 or len(z) != len(c):
            raise InvalidInput("contexts and costs must be 2-D with matching rows")
        if len(c) == 0:
            raise InvalidInput("dataset is empty")
        if not (np.isfinite(z).all() and np.isfinite(c).all()):
            raise InvalidInput("dataset contains non-finite entries")
        if (c < 0).any():
            raise InvalidInput("negative arc costs are not supported")
        if self.role not in ("train", "validation", "test"):
            raise InvalidInput(f"unknown dataset role {self.role!r}")
        z.setflags(write=False)
        c.setflags(write=False)
        object.__setattr__(self, "contexts", z)
        object.__setattr__(self, "costs", c)

    def __len__(self):
        return len(self.costs)

    @property
    def n_features(self) -> int:
        return self.contexts.shape[1]

    @property
    def n_arcs(self) -> int:
        return self.costs.shape[1]


def save_dataset(data: Dataset, path) -> None:
    """Write ``z_1..z_p,c_1..c_q`` CSV using round-trip float formatting."""
    header = [f"z_{i + 1}" for i in range(data.n_features)]
    header += [f"c_{i + 1}" for i in range(data.n_arcs)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for z, c in zip(data.contexts, data.costs):
            writer.writerow([repr(float(v)) for v in z] + [repr(float(v)) for v in c])


def load_dataset(path, role="train") -> Dataset:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise InvalidInput(f"{path}: empty file")
    header = rows[0]
    zcols = [i for i, h in enumerate(header) if h.startswith("z_")]
    ccols = [i for i, h in enumerate(header) if h.startswith("c_")]
    if not ccols or len(zcols) + len(ccols) != len(header):
        raise InvalidInput(f"{path}: header must be z_1..z_p,c_1..c_q")
    try:
        body = np.array([[float(v) for v in r] for r in rows[1:]], dtype=float)
    except ValueError as exc:
        raise InvalidInput(f"{path}: {exc}") from exc
    if body.ndim != 2 or body.shape[0] == 0:
        raise InvalidInput(f"{path}: no observations")
    return Dataset(body[:, zcols], body[:, ccols], role=role)


@dataclass(frozen=True)
class DiscreteConditional:
    """Probability weights over a fixed pool of cost scenarios.

    Zero-weight scenarios stay in ``support`` so scenario indices are
    shared by every conditional built over the same training pool.
    """

    support: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.support, dtype=float)
        w = _frozen(self.weights)
        if s.ndim != 2 or w.ndim != 1 or len(s) != len(w):
            raise InvalidInput("support must be (S, |A|) with one weight per scenario")
        if len(w) == 0:
            raise InvalidInput("empty support")
        if (w < 0).any() or not np.isfinite(w).all():
            raise InvalidInput("weights must be finite and nonnegative")
        if abs(w.sum() - 1.0) > WEIGHT_SUM_TOL:
            raise InvalidInput(f"weights sum to {w.sum():.12g}, not 1")
        object.__setattr__(self, "weights", w)
        if s.flags.writeable:
            s = _frozen(s)
        object.__setattr__(self, "support", s)

    def __len__(self):
        return len(self.weights)

    def mean(self) -> np.ndarray:
        return self.weights @ self.support

    @classmethod
    def point_mass(cls, support, index) -> "DiscreteConditional":
        w = np.zeros(len(support))
        w[index] = 1.0
        return cls(support, w)

    @classmethod
    def uniform(cls, support) -> "DiscreteConditional":
        n = len(support)
        return cls(support, np.full(n, 1.0 / n))


@dataclass(frozen=True)
class JointModel:
    """Discrete joint law: a context marginal plus one conditional per context."""

    contexts: np.ndarray
    context_weights: np.ndarray
    conditionals: tuple

    def __post_init__(self):
        z = _frozen(self.contexts)
        if z.ndim == 1:
            z = _frozen(z[:, None])
        w = _frozen(self.context_weights)
        conds = tuple(self.conditionals)
        if not (len(z) == len(w) == len(conds)) or len(w) == 0:
            raise InvalidInput("contexts, weights and conditionals must be parallel and nonempty")
        if (w < 0).any() or abs(w.sum() - 1.0) > WEIGHT_SUM_TOL:
            raise InvalidInput("context weights must be a probability vector")
        if not all(isinstance(c, DiscreteConditional) for c in conds):
            raise InvalidInput("conditionals must be DiscreteConditional instances")
        object.__setattr__(self, "contexts", z)
        object.__setattr__(self, "context_weights", w)
        object.__setattr__(self, "conditionals", conds)

    def __len__(self):
        return len(self.conditionals)


@dataclass(frozen=True)
class Decision:
    flow: np.ndarray
    binary: bool = False

    def __post_init__(self):
        f = _frozen(self.flow)
        if f.ndim != 1 or not np.isfinite(f).all():
            raise InvalidInput("flow must be a finite 1-D vector")
        if self.binary and not np.isin(f, (0.0, 1.0)).all():
            raise InvalidInput("binary decision with fractional entries")
        object.__setattr__(self, "flow", f)

    @classmethod
    def from_solver(cls, flow, binary=False, tol=1e-6) -> "Decision":
        """Snap solver noise: clip to [0, 1] and round binaries."""
        f = np.clip(np.asarray(flow, dtype=float), 0.0, 1.0)
        f[np.abs(f) < 1e-12] = 0.0
        if binary:
            r = np.round(f)
            if np.abs(r - f).max(initial=0.0) > tol:
                raise InvalidInput("solver returned a fractional binary decision")
            f = r
        return cls(f, binary)

    def __len__(self):
        return len(self.flow)


@dataclass(frozen=True)
class PolicyTable:
    """Decisions stored per context index with a fallback for everything else."""

    entries: Mapping[int, Decision]
    fallback: Decision
    contexts: np.ndarray | None = field(default=None, compare=False)

    def lookup(self, index) -> Decision:
        return self.entries.get(index, self.fallback)

    def nearest(self, zeta) -> Decision:
        """Decision stored for the context closest (Euclidean) to ``zeta``."""
        if self.contexts is None or not self.entries:
            return self.fallback
        d = np.linalg.norm(np.asarray(self.contexts) - np.asarray(zeta, dtype=float), axis=1)
        return self.lookup(int(np.argmin(d)))


def evaluate_cost(decision: Decision, xi) -> float:
    flow = decision.flow if isinstance(decision, Decision) else np.asarray(decision, dtype=float)
    xi = np.asarray(xi, dtype=float)
    if flow.shape != xi.shape:
        raise InvalidInput(f"decision has {flow.shape} entries, costs {xi.shape}")
    return float(flow @ xi)


def feasibility_residual(decision: Decision, graph: DirectedGraph) -> float:
    """Largest violation of flow balance or of the [0, 1] arc bounds."""
    flow = decision.flow if isinstance(decision, Decision) else np.asarray(decision, dtype=float)
    if len(flow) != graph.n_arcs:
        raise InvalidInput("decision length does not match the arc count")
    balance = np.abs(graph.incidence() @ flow - graph.supply()).max()
    bounds = max(0.0, -flow.min(), flow.max() - 1.0)
    return float(max(balance, bounds))


def arc_index(graph: DirectedGraph, path: Sequence[int]) -> np.ndarray:
    """Flow vector of a node path given as a node sequence."""
    lookup = {a: k for k, a in enumerate(graph.arcs)}
    flow = np.zeros(graph.n_arcs)
    for t, h in zip(path[:-1], path[1:]):
        flow[lookup[(t, h)]] = 1.0
    return flow
