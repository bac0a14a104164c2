"""Command-line entry point: ``prescript-opt <command> [options]``.

Commands
--------
run        full distribution-shift study (results, summary, plots)
generate   sample one instance's graph and datasets
fit        fit a weight model on a training CSV
calibrate  choose alpha (and gamma) for one method on validation data
solve      decisions for the contexts of a dataset
evaluate   cost triple and PCR of stored decisions, or recheck a run
plot       SVG figure from a summary CSV
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import calibration, datagen, experiment
from .errors import InvalidInput, PrescriptOptError
from .estimators import EstimatorSpec, fit, load_model, save_model
from .flow import FlowOracle
from .metrics import CostTriple, format_pcr, pcr
from .model import Decision, load_dataset, load_graph, save_dataset, save_graph
from .solvers import solve_saa


class UsageError(Exception):
    pass


def _config(args) -> experiment.ExperimentConfig:
    cfg = experiment.ExperimentConfig.load(args.config) if args.config else \
        experiment.ExperimentConfig()
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if getattr(args, "epsilon", None) is not None:
        overrides["epsilon"] = args.epsilon
    if getattr(args, "binary", False):
        overrides["binary"] = True
    if getattr(args, "accelerated", False):
        overrides["accelerated"] = True
    if getattr(args, "nearest_policy", False):
        overrides["drpcr_policy"] = "nearest"
    if getattr(args, "instances", None) is not None:
        overrides["instances"] = args.instances
    return replace(cfg, **overrides) if overrides else cfg


def _need(path, what):
    if path is None:
        raise UsageError(f"missing --{what}")
    if not Path(path).is_file():
        raise UsageError(f"{what} file not found: {path}")
    return path


def cmd_run(args):
    cfg = _config(args)
    out = Path(args.out)

    def progress(item):
        print(f"instance {item} finished" if isinstance(item, int) else item, file=sys.stderr)

    path = experiment.run_experiment(cfg, out, jobs=args.jobs, progress=progress)
    print(path)


def cmd_generate(args):
    cfg = _config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    graph = cfg.graph()
    _, (train, val, test) = experiment.instance_data(cfg, args.instance, args.perturbation, graph)
    save_graph(graph, out / "graph.json")
    save_dataset(train, out / "train.csv")
    save_dataset(val, out / "validation.csv")
    save_dataset(test, out / "test.csv")
    datagen.write_manifest(out / "manifest.json", {
        "config": cfg.to_dict(), "instance": args.instance, "perturbation": args.perturbation,
        "seed_scheme": "SeedSequence(seed, spawn_key=(instance, stage))",
        "stages": experiment.STAGES,
    })
    print(out)


def _estimator(args) -> EstimatorSpec:
    if args.config:
        return experiment.ExperimentConfig.load(args.config).estimator
    return EstimatorSpec(kind=args.kind, k=args.k)


def cmd_fit(args):
    train = load_dataset(_need(args.train, "train"))
    model = fit(train, _estimator(args), args.seed if args.seed is not None else 0)
    save_model(model, args.out)
    print(args.out)


def _problem(args, epsilon=1e-3, accelerated=False):
    graph = load_graph(_need(args.graph, "graph"))
    train = load_dataset(_need(args.train, "train"))
    model = load_model(_need(args.model, "model"))
    if model.costs.shape != train.costs.shape or not np.array_equal(model.costs, train.costs):
        raise InvalidInput("model was not fitted on this training set")
    policy = "nearest" if args.nearest_policy else "fresh"
    return calibration.FittedProblem(graph, train, model, binary=args.binary, epsilon=epsilon,
                                     accelerated=accelerated, drpcr_policy=policy)


def cmd_calibrate(args):
    eps = args.epsilon if args.epsilon is not None else 1e-3
    problem = _problem(args, eps, args.accelerated)
    val = load_dataset(_need(args.validation, "validation"), role="validation")
    grid = calibration.alpha_grid() if not args.alphas else [float(a) for a in args.alphas.split(",")]
    if args.method == "drpcr":
        res = calibration.calibrate_drpcr(None, val, problem.graph, grid=grid, problem=problem)
    else:
        res = calibration.calibrate_dr(None, val, problem.graph, grid=grid, method=args.method,
                                       problem=problem)
    res.write_report(args.out)
    print(json.dumps({"method": res.method, "alpha_star": res.alpha_star,
                      "gamma_star": res.gamma_star, "validation_pcr": format_pcr(res.best_score)}))


def cmd_solve(args):
    eps = args.epsilon if args.epsilon is not None else 1e-3
    problem = _problem(args, eps, args.accelerated)
    data = load_dataset(_need(args.data, "data"))
    alpha = args.alpha
    gamma = args.gamma
    if args.method == "drpcr" and gamma is None:
        gamma = problem.gamma_star(alpha)
    decisions = problem.decisions(args.method, alpha, data.contexts, tag="solve", gamma=gamma)
    conds = problem.model.conditionals(data.contexts)
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["index", "objective"] + [f"x_{i + 1}" for i in range(problem.graph.n_arcs)])
        for j, (d, c) in enumerate(zip(decisions, conds)):
            writer.writerow([j, repr(float(c.mean() @ d.flow))] + [repr(float(v)) for v in d.flow])
    info = {"method": args.method, "alpha": alpha, "decisions": len(decisions)}
    if gamma is not None:
        info["gamma"] = gamma
    print(json.dumps(info))


def load_decisions(path) -> list:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][:2] != ["index", "objective"]:
        raise InvalidInput(f"{path}: not a decisions file")
    try:
        return [Decision(np.array([float(v) for v in r[2:]])) for r in rows[1:]]
    except ValueError as exc:
        raise InvalidInput(f"{path}: {exc}") from exc


def cmd_evaluate(args):
    if args.run:
        bad = experiment.verify_costs(args.run)
        for row in bad:
            print(f"mismatch: instance {row.instance} {row.method} m={row.perturbation}")
        print("ok" if not bad else f"{len(bad)} mismatches")
        return 0 if not bad else 1
    if args.costs:
        print(format_pcr(pcr(CostTriple.load(_need(args.costs, "costs")))))
        return 0
    graph = load_graph(_need(args.graph, "graph"))
    train = load_dataset(_need(args.train, "train"))
    data = load_dataset(_need(args.data, "data"))
    decisions = load_decisions(_need(args.decisions, "decisions"))
    if len(decisions) != len(data):
        raise InvalidInput("decision count does not match the dataset")
    oracle = FlowOracle(graph, binary=args.binary)
    bench = solve_saa(graph, train.costs, args.binary, oracle)
    hind = [oracle.shortest_path(xi)[0] for xi in data.costs]
    policy = [d.flow @ xi for d, xi in zip(decisions, data.costs)]
    triple = CostTriple(policy, data.costs @ bench.flow, hind)
    if args.out:
        triple.save(args.out)
    print(format_pcr(pcr(triple)))
    return 0


def cmd_plot(args):
    from . import plotting
    if args.results:
        plotting.box_plots(experiment.read_results(_need(args.results, "results")), args.out)
    else:
        plotting.summary_plot(experiment.read_summary(_need(args.summary, "summary")), args.out)
    print(args.out)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="prescript-opt", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, solver=True):
        p.add_argument("--config", help="experiment configuration JSON")
        p.add_argument("--seed", type=int, help="master seed")
        if solver:
            p.add_argument("--epsilon", type=float, help="bisection tolerance (default 1e-3)")
            p.add_argument("--binary", action="store_true", help="restrict flows to 0/1")
            p.add_argument("--accelerated", action="store_true", help="accelerated bisection")
            p.add_argument("--nearest-policy", action="store_true",
                           help="DRPCR reuses the decision of the closest training context")

    p = sub.add_parser("run", help="full study")
    common(p)
    p.add_argument("--out", default="results", help="output directory")
    p.add_argument("--jobs", type=int, help=f"worker processes (env {experiment.JOBS_ENV} wins)")
    p.add_argument("--instances", type=int, help="override the instance count")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("generate", help="sample one instance")
    common(p, solver=False)
    p.add_argument("--instance", type=int, default=0)
    p.add_argument("--perturbation", type=float, default=0.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("fit", help="fit a weight model")
    common(p, solver=False)
    p.add_argument("--train", required=True)
    p.add_argument("--kind", choices=("forest", "knn"), default="forest")
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fit)

    for name, func in (("calibrate", cmd_calibrate), ("solve", cmd_solve)):
        p = sub.add_parser(name, help=f"{name} one method")
        common(p)
        p.add_argument("--graph", required=True)
        p.add_argument("--train", required=True)
        p.add_argument("--model", required=True)
        p.add_argument("--method", choices=calibration.METHODS, required=True)
        p.add_argument("--out", required=True)
        if name == "calibrate":
            p.add_argument("--validation", required=True)
            p.add_argument("--alphas", help="comma-separated alpha grid")
        else:
            p.add_argument("--data", required=True)
            p.add_argument("--alpha", type=float, default=0.0)
            p.add_argument("--gamma", type=float)
        p.set_defaults(func=func)

    p = sub.add_parser("evaluate", help="score decisions or recheck a run")
    p.add_argument("--run", help="run directory to recheck against its cost files")
    p.add_argument("--costs", help="cost-triple CSV")
    p.add_argument("--graph")
    p.add_argument("--train")
    p.add_argument("--data")
    p.add_argument("--decisions")
    p.add_argument("--binary", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("plot", help="SVG from summary or results")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--summary")
    g.add_argument("--results")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        code = args.func(args)
    except (UsageError, InvalidInput, OSError) as exc:
        print(f"{parser.prog} {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except PrescriptOptError as exc:
        print(f"{parser.prog} {args.command}: failed: {exc}", file=sys.stderr)
        return 1
    return code or 0


if __name__ == "__main__":
    sys.exit(main())
