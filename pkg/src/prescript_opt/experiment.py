"""Distribution-shift study: calibrate every method, score it out of sample.

For each instance the training set is drawn at the nominal cost means.
For each perturbation level ``m`` the validation and test sets are drawn
with independently shifted means.  Every method is calibrated on the
validation set and scored by the PCR on the test set, with the
sample-average route as benchmark.

Random streams are keyed by ``(master seed, instance, stage)`` so adding a
method or a level never changes the data of the others.  Noise and shift
directions are shared across levels; only the shift size changes.
"""

from __future__ import annotations

import csv
import json
import math
import os
import time
from collections import namedtuple
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import datagen
from .calibration import (DRPCR_POLICIES, METHODS, FittedProblem, alpha_grid, calibrate_dr,
                          calibrate_drpcr)
from .errors import InvalidInput, PrescriptOptError
from .estimators import EstimatorSpec
from .metrics import CostTriple, format_pcr, pcr
from .model import load_graph

RESULT_COLUMNS = ["instance", "method", "perturbation", "alpha", "gamma", "oos_pcr",
                  "wall_time_ms", "status"]
SUMMARY_COLUMNS = ["method", "perturbation", "mean_pcr", "q25", "median", "q75"]
SummaryRow = namedtuple("SummaryRow", SUMMARY_COLUMNS)
JOBS_ENV = "PRESCRIPT_OPT_JOBS"

STAGES = {"law": 0, "train": 1, "forest": 2, "val_noise": 3, "val_shift": 4,
          "test_noise": 5, "test_shift": 6}


@dataclass(frozen=True)
class ExperimentConfig:
    rows: int = 5
    cols: int = 9
    graph_file: str | None = None
    n_context: int = 20
    n_train: int = 100
    n_val: int = 100
    n_test: int = 300
    instances: int = 30
    levels: tuple = (0.0, 0.2, 0.4, 0.6)
    methods: tuple = METHODS
    estimator: EstimatorSpec = field(default_factory=EstimatorSpec)
    epsilon: float = 1e-3
    binary: bool = False
    accelerated: bool = False
    seed: int = 0
    engine: str = "highs"
    spd_variant: str = "ones"
    drpcr_policy: str = "fresh"
    alphas: tuple | None = None
    record_wall_time: bool = False
    plots: bool = True

    def __post_init__(self):
        object.__setattr__(self, "levels", tuple(float(m) for m in self.levels))
        object.__setattr__(self, "methods", tuple(self.methods))
        if isinstance(self.estimator, dict):
            object.__setattr__(self, "estimator", EstimatorSpec(**self.estimator))
        if self.alphas is not None:
            object.__setattr__(self, "alphas", tuple(float(a) for a in self.alphas))
        sizes = (self.n_context, self.n_train, self.n_val, self.n_test, self.instances)
        if min(sizes) < 1:
            raise InvalidInput("sizes and instance count must be positive")
        if not self.levels or any(not 0.0 <= m <= 1.0 for m in self.levels):
            raise InvalidInput("perturbation levels must lie in [0, 1]")
        bad = set(self.methods) - set(METHODS)
        if not self.methods or bad:
            raise InvalidInput(f"methods must be a nonempty subset of {METHODS}")
        if not self.epsilon > 0:
            raise InvalidInput("epsilon must be positive")
        if self.spd_variant not in datagen.SPD_VARIANTS:
            raise InvalidInput(f"spd_variant must be one of {datagen.SPD_VARIANTS}")
        if self.drpcr_policy not in DRPCR_POLICIES:
            raise InvalidInput(f"drpcr_policy must be one of {DRPCR_POLICIES}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise InvalidInput(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise InvalidInput(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(data)

    def graph(self):
        if self.graph_file:
            return load_graph(self.graph_file)
        return datagen.make_graph(self.rows, self.cols)

    def grid(self) -> np.ndarray:
        return alpha_grid() if self.alphas is None else np.asarray(self.alphas)


def stage_seed(master, instance, stage) -> np.random.SeedSequence:
    return np.random.SeedSequence(int(master), spawn_key=(int(instance), STAGES[stage]))


@dataclass
class ResultRow:
    instance: int
    method: str
    perturbation: float
    alpha: float | None
    gamma: float | None
    oos_pcr: float
    wall_time_ms: float
    status: str = "ok"
    triple: CostTriple | None = field(default=None, repr=False)

    def cells(self, wall_time=True) -> list:
        def num(v):
            return "" if v is None else repr(float(v))
        score = "nan" if math.isnan(self.oos_pcr) else format_pcr(self.oos_pcr)
        wall = f"{self.wall_time_ms:.3f}" if wall_time else ""
        return [str(self.instance), self.method, repr(self.perturbation), num(self.alpha),
                num(self.gamma), score, wall, self.status]


def instance_data(config: ExperimentConfig, instance, level, graph=None):
    """Training, validation and test sets of one instance at one level."""
    graph = graph or config.graph()
    law = datagen.make_instance(graph, config.n_context, stage_seed(config.seed, instance, "law"),
                                config.spd_variant)
    train = law.sample(config.n_train, stage_seed(config.seed, instance, "train"))
    sets = [train]
    for role, n, noise, shift in (("validation", config.n_val, "val_noise", "val_shift"),
                                  ("test", config.n_test, "test_noise", "test_shift")):
        spec = datagen.ShiftSpec(level, stage_seed(config.seed, instance, shift))
        mu = datagen.perturb_means(law.mu_xi, spec)
        sets.append(law.sample(n, stage_seed(config.seed, instance, noise), role, mu))
    return law, tuple(sets)


def run_instance(config: ExperimentConfig, instance) -> list:
    graph = config.graph()
    rows = []
    try:
        law, (train, _, _) = instance_data(config, instance, 0.0, graph)
        problem = FittedProblem.from_data(
            graph, train, config.estimator, stage_seed(config.seed, instance, "forest"),
            binary=config.binary, epsilon=config.epsilon, accelerated=config.accelerated,
            engine=config.engine, drpcr_policy=config.drpcr_policy)
    except PrescriptOptError as exc:
        return [ResultRow(instance, m, lvl, None, None, math.nan, 0.0, _status(exc))
                for lvl in config.levels for m in config.methods]
    grid = config.grid()
    for level in config.levels:
        _, (_, val, test) = instance_data(config, instance, level, graph)
        test_hind = problem.hindsight_costs(test)
        for method in config.methods:
            start = time.perf_counter()
            try:
                if method == "drpcr":
                    res = calibrate_drpcr(train, val, graph, grid=grid, problem=problem)
                else:
                    res = calibrate_dr(train, val, graph, grid=grid, method=method, problem=problem)
                decisions = problem.decisions(method, res.alpha_star, test.contexts, tag="test",
                                              gamma=res.gamma_star)
                triple = problem.score(decisions, test, test_hind)
                row = ResultRow(instance, method, level, res.alpha_star, res.gamma_star,
                                pcr(triple), 0.0, "ok", triple)
            except PrescriptOptError as exc:
                row = ResultRow(instance, method, level, None, None, math.nan, 0.0, _status(exc))
            row.wall_time_ms = 1000.0 * (time.perf_counter() - start)
            rows.append(row)
    return rows


def _status(exc) -> str:
    return f"error:{type(exc).__name__}:{exc}".replace("\n", " ")


def _quantile(values, q) -> float:
    """Linear-interpolation quantile that tolerates minus infinity."""
    v = np.sort(np.asarray(values, dtype=float))
    pos = q * (len(v) - 1)
    lo = int(math.floor(pos))
    hi = min(lo + 1, len(v) - 1)
    frac = pos - lo
    if frac == 0.0 or v[lo] == v[hi]:
        return float(v[lo])
    if math.isinf(v[lo]):
        return -math.inf
    return float(v[lo] + frac * (v[hi] - v[lo]))


def summarize(rows) -> list:
    """Mean and quartiles of the out-of-sample PCR per method and level."""
    out = []
    methods = list(dict.fromkeys(r.method for r in rows))
    levels = list(dict.fromkeys(r.perturbation for r in rows))
    for method in methods:
        for level in levels:
            vals = [r.oos_pcr for r in rows
                    if r.method == method and r.perturbation == level and not math.isnan(r.oos_pcr)]
            if not vals:
                out.append(SummaryRow(method, level, math.nan, math.nan, math.nan, math.nan))
                continue
            mean = -math.inf if -math.inf in vals else float(np.mean(vals))
            out.append(SummaryRow(method, level, mean, _quantile(vals, 0.25),
                                  _quantile(vals, 0.5), _quantile(vals, 0.75)))
    return out


def _fmt(v) -> str:
    if math.isnan(v):
        return "nan"
    return format_pcr(v)


def write_results(rows, path, wall_time=True) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RESULT_COLUMNS)
        for r in rows:
            writer.writerow(r.cells(wall_time))


def write_summary(summary, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SUMMARY_COLUMNS)
        for method, level, *stats in summary:
            writer.writerow([method, repr(level)] + [_fmt(s) for s in stats])


def read_summary(path) -> list:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != SUMMARY_COLUMNS:
        raise InvalidInput(f"{path}: expected header {','.join(SUMMARY_COLUMNS)}")
    return [SummaryRow(r[0], float(r[1]), *(float(v) for v in r[2:])) for r in rows[1:]]


def read_results(path) -> list:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != RESULT_COLUMNS:
        raise InvalidInput(f"{path}: expected header {','.join(RESULT_COLUMNS)}")
    out = []
    for r in rows[1:]:
        opt = [None if v == "" else float(v) for v in (r[3], r[4])]
        out.append(ResultRow(int(r[0]), r[1], float(r[2]), opt[0], opt[1], float(r[5]),
                             float(r[6]) if r[6] else 0.0, r[7]))
    return out


def cost_file_name(row) -> str:
    return f"instance{row.instance:03d}_{row.method}_m{row.perturbation:g}.csv"


def resolve_jobs(jobs=None) -> int:
    env = os.environ.get(JOBS_ENV)
    if env:
        try:
            jobs = int(env)
        except ValueError as exc:
            raise InvalidInput(f"{JOBS_ENV} must be an integer, got {env!r}") from exc
    jobs = 1 if jobs is None else int(jobs)
    if jobs < 1:
        raise InvalidInput("jobs must be at least 1")
    return jobs


def _run_one(args):
    config, instance = args
    start = time.perf_counter()
    rows = run_instance(config, instance)
    return rows, time.perf_counter() - start


def run_experiment(config: ExperimentConfig, out_dir, jobs=None, progress=None) -> Path:
    """Run every instance and write results, summary, cost files and plots.

    Returns the path of the results CSV.
    """
    out = Path(out_dir)
    (out / "costs").mkdir(parents=True, exist_ok=True)
    jobs = resolve_jobs(jobs)
    config.graph()
    tasks = [(config, i) for i in range(config.instances)]
    start = time.perf_counter()
    rows = []
    instance_seconds = []
    if jobs == 1:
        outcomes = map(_run_one, tasks)
        pool = None
    else:
        pool = ProcessPoolExecutor(max_workers=jobs)
        outcomes = pool.map(_run_one, tasks)
    try:
        for t, (chunk, seconds) in zip(tasks, outcomes):
            rows.extend(chunk)
            instance_seconds.append(seconds)
            if progress:
                progress(t[1])
    finally:
        if pool is not None:
            pool.shutdown()
    elapsed = time.perf_counter() - start

    results = out / "results.csv"
    write_results(rows, results, config.record_wall_time)
    summary = summarize(rows)
    write_summary(summary, out / "summary.csv")
    with open(out / "timings.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["instance", "method", "perturbation", "wall_time_ms"])
        for r in rows:
            writer.writerow([r.instance, r.method, repr(r.perturbation), f"{r.wall_time_ms:.3f}"])
    for r in rows:
        if r.triple is not None:
            r.triple.save(out / "costs" / cost_file_name(r))
    # wall-clock figures live apart from the deterministic outputs
    datagen.write_manifest(out / "runtime.json", {
        "total_seconds": elapsed, "jobs": jobs, "cpu_count": os.cpu_count(),
        "instance_seconds": instance_seconds,
    })
    datagen.write_manifest(out / "manifest.json", {
        "config": config.to_dict(),
        "seed_scheme": "SeedSequence(seed, spawn_key=(instance, stage))",
        "stages": STAGES,
    })
    if config.plots:
        from . import plotting
        plotting.summary_plot(summary, out / "summary.svg")
        plotting.box_plots(rows, out / "boxplot.svg")
    if progress:
        progress(f"done in {elapsed:.1f}s")
    return results


def verify_costs(run_dir) -> list:
    """Rows whose stored PCR differs from the one recomputed from cost files."""
    run_dir = Path(run_dir)
    bad = []
    for row in read_results(run_dir / "results.csv"):
        if row.status != "ok":
            continue
        triple = CostTriple.load(run_dir / "costs" / cost_file_name(row))
        if format_pcr(pcr(triple)) != format_pcr(row.oos_pcr):
            bad.append(row)
    return bad


def quick_config(**overrides) -> ExperimentConfig:
    """Small configuration for smoke runs and tests."""
    base = ExperimentConfig(rows=3, cols=4, n_context=4, n_train=30, n_val=20, n_test=30,
                            instances=2, levels=(0.0, 0.6),
                            estimator=EstimatorSpec(n_trees=10, max_depth=3, min_leaf=3),
                            alphas=(0.0, 0.5, 0.9), engine="simplex", plots=False)
    return replace(base, **overrides)
