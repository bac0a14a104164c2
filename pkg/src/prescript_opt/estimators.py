"""Conditional-distribution estimators built from training data.

Both estimators return weights over the *whole* training pool, so that
every conditional shares the same scenario indexing:

* k-nearest neighbours put ``1/k`` on the ``k`` closest training contexts;
* random forests use leaf co-membership weights, averaging
  ``1[i in leaf_t(z)] / |leaf_t(z)|`` over the trees.

Trees are CART regressors on the full cost vector (split score: total
within-node sum of squares over all arcs), grown on bootstrap resamples
with ``ceil(sqrt(p))`` candidate features per split.  Leaf membership is
recorded for every training point, not just the bootstrap draw.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidInput
from .model import Dataset, DiscreteConditional

FORMAT_NAME = "prescript_opt.weight_model"
FORMAT_VERSION = 1


@dataclass(frozen=True)
class EstimatorSpec:
    kind: str = "forest"
    k: int = 10
    n_trees: int = 100
    max_depth: int = 6
    min_leaf: int = 5
    max_features: int | None = None
    bootstrap: bool = True

    def __post_init__(self):
        if self.kind not in ("knn", "forest"):
            raise InvalidInput(f"unknown estimator kind {self.kind!r}")
        if self.kind == "knn" and self.k < 1:
            raise InvalidInput("k must be positive")
        if self.kind == "forest" and (self.n_trees < 1 or self.max_depth < 0 or self.min_leaf < 1):
            raise InvalidInput("forest needs n_trees >= 1, max_depth >= 0, min_leaf >= 1")


@dataclass
class Tree:
    """Array-encoded binary tree; ``left[i] == -1`` marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    members: list = field(default_factory=list)

    def apply(self, Z) -> np.ndarray:
        """Leaf node id reached by each row of ``Z``."""
        Z = np.atleast_2d(Z)
        node = np.zeros(len(Z), dtype=int)
        while True:
            internal = self.left[node] >= 0
            if not internal.any():
                return node
            rows = np.flatnonzero(internal)
            nd = node[rows]
            go_left = Z[rows, self.feature[nd]] <= self.threshold[nd]
            node[rows] = np.where(go_left, self.left[nd], self.right[nd])

    @property
    def depth(self) -> int:
        def walk(i):
            if self.left[i] < 0:
                return 0
            return 1 + max(walk(self.left[i]), walk(self.right[i]))
        return walk(0)

    def to_dict(self, i=0) -> dict:
        if self.left[i] < 0:
            return {"leaf": [int(v) for v in self.members[i]]}
        return {
            "feature": int(self.feature[i]),
            "threshold": float(self.threshold[i]),
            "left": self.to_dict(self.left[i]),
            "right": self.to_dict(self.right[i]),
        }

    @classmethod
    def from_dict(cls, data) -> "Tree":
        feature, threshold, left, right, members = [], [], [], [], []

        def add(node):
            i = len(feature)
            feature.append(-1)
            threshold.append(0.0)
            left.append(-1)
            right.append(-1)
            members.append(None)
            if "leaf" in node:
                members[i] = np.array(node["leaf"], dtype=int)
                return i
            feature[i] = int(node["feature"])
            threshold[i] = float(node["threshold"])
            left[i] = add(node["left"])
            right[i] = add(node["right"])
            return i

        add(data)
        return cls(np.array(feature), np.array(threshold), np.array(left), np.array(right), members)


class _Grower:
    def __init__(self, Z, Y, rng, max_depth, min_leaf, mtry):
        self.Z, self.Y, self.rng = Z, Y, rng
        self.max_depth, self.min_leaf, self.mtry = max_depth, min_leaf, mtry
        self.feature, self.threshold, self.left, self.right = [], [], [], []

    def grow(self, sample):
        self._node(sample, 0)
        return Tree(np.array(self.feature, dtype=int), np.array(self.threshold),
                    np.array(self.left, dtype=int), np.array(self.right, dtype=int))

    def _node(self, sample, depth):
        i = len(self.feature)
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        if depth >= self.max_depth or len(sample) < 2 * self.min_leaf:
            return i
        split = self._best_split(sample)
        if split is None:
            return i
        f, thr = split
        mask = self.Z[sample, f] <= thr
        self.feature[i], self.threshold[i] = f, thr
        self.left[i] = self._node(sample[mask], depth + 1)
        self.right[i] = self._node(sample[~mask], depth + 1)
        return i

    def _best_split(self, sample):
        n = len(sample)
        p = self.Z.shape[1]
        feats = self.rng.choice(p, size=min(self.mtry, p), replace=False)
        Y = self.Y[sample]
        total_sq = float((Y * Y).sum())
        best, best_score = None, -np.inf
        lo = self.min_leaf
        for f in np.sort(feats):
            z = self.Z[sample, f]
            order = np.argsort(z, kind="stable")
            zs = z[order]
            cum = np.cumsum(Y[order], axis=0)
            left_n = np.arange(1, n)
            # sum of squares removed by splitting after position k-1
            left_sum = cum[:-1]
            right_sum = cum[-1] - left_sum
            gain = (left_sum ** 2).sum(axis=1) / left_n + (right_sum ** 2).sum(axis=1) / (n - left_n)
            valid = (zs[:-1] < zs[1:]) & (left_n >= lo) & (n - left_n >= lo)
            if not valid.any():
                continue
            gain = np.where(valid, gain, -np.inf)
            k = int(np.argmax(gain))
            if gain[k] > best_score + 1e-12 * max(1.0, total_sq):
                best_score = gain[k]
                best = (int(f), float((zs[k] + zs[k + 1]) / 2.0))
        if best is None:
            return None
        parent = (Y.sum(axis=0) ** 2).sum() / n
        if best_score <= parent + 1e-12 * max(1.0, total_sq):
            return None
        return best


@dataclass
class WeightModel:
    spec: EstimatorSpec
    contexts: np.ndarray
    costs: np.ndarray
    trees: list = field(default_factory=list)
    seed: int | None = None

    @property
    def kind(self) -> str:
        return self.spec.kind

    def weight_matrix(self, Z) -> np.ndarray:
        """Weights for each row of ``Z``; shape ``(len(Z), N_train)``."""
        Z = np.atleast_2d(np.asarray(Z, dtype=float))
        if Z.shape[1] != self.contexts.shape[1]:
            raise InvalidInput(f"expected {self.contexts.shape[1]} covariates, got {Z.shape[1]}")
        N = len(self.contexts)
        W = np.zeros((len(Z), N))
        if self.kind == "knn":
            k = self.spec.k
            for r, z in enumerate(Z):
                d = np.sqrt(((self.contexts - z) ** 2).sum(axis=1))
                nearest = np.argsort(d, kind="stable")[:k]
                W[r, nearest] = 1.0 / k
            return W
        for tree in self.trees:
            leaves = tree.apply(Z)
            for r, leaf in enumerate(leaves):
                m = tree.members[leaf]
                W[r, m] += 1.0 / len(m)
        W /= len(self.trees)
        return W

    def conditional(self, zeta) -> DiscreteConditional:
        w = self.weight_matrix(np.asarray(zeta, dtype=float)[None, :])[0]
        return DiscreteConditional(self.costs, w / w.sum())

    def conditionals(self, Z) -> list:
        W = self.weight_matrix(Z)
        return [DiscreteConditional(self.costs, w / w.sum()) for w in W]


def fit(dataset: Dataset, spec: EstimatorSpec = EstimatorSpec(), seed=0) -> WeightModel:
    N = len(dataset)
    costs = np.array(dataset.costs)
    costs.setflags(write=False)
    model = WeightModel(spec, dataset.contexts, costs, seed=seed if isinstance(seed, int) else None)
    if spec.kind == "knn":
        if spec.k > N:
            raise InvalidInput(f"k={spec.k} exceeds the {N} training points")
        return model
    rng = np.random.default_rng(seed)
    p = dataset.n_features
    mtry = spec.max_features or math.ceil(math.sqrt(p))
    Z, Y = dataset.contexts, dataset.costs
    everyone = np.arange(N)
    for _ in range(spec.n_trees):
        sample = rng.integers(0, N, size=N) if spec.bootstrap else everyone
        tree = _Grower(Z, Y, rng, spec.max_depth, spec.min_leaf, mtry).grow(np.sort(sample))
        leaves = tree.apply(Z)
        tree.members = [np.flatnonzero(leaves == i) if tree.left[i] < 0 else None
                        for i in range(len(tree.left))]
        model.trees.append(tree)
    return model


def weights(model: WeightModel, zeta) -> DiscreteConditional:
    return model.conditional(zeta)


def save_model(model: WeightModel, path) -> None:
    data = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "spec": asdict(model.spec),
        "seed": model.seed,
        "contexts": model.contexts.tolist(),
        "costs": model.costs.tolist(),
        "trees": [t.to_dict() for t in model.trees],
    }
    Path(path).write_text(json.dumps(data) + "\n", encoding="utf-8")


def load_model(path) -> WeightModel:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InvalidInput(f"{path}: not valid JSON ({exc})") from exc
    if data.get("format") != FORMAT_NAME:
        raise InvalidInput(f"{path}: not a weight-model file")
    if data.get("version") != FORMAT_VERSION:
        raise InvalidInput(f"{path}: unsupported version {data.get('version')}")
    costs = np.array(data["costs"], dtype=float)
    costs.setflags(write=False)
    model = WeightModel(EstimatorSpec(**data["spec"]), np.array(data["contexts"], dtype=float),
                        costs, seed=data.get("seed"))
    model.trees = [Tree.from_dict(t) for t in data["trees"]]
    return model
