"""Command-line pipeline: generate-toy -> train -> build-graph -> explain / baseline."""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .baseline import WachterConfig, compute_mad, wachter_counterfactual
from .data import DataError, ToySpec, generate_toy, load_csv, save_csv
from .density import WeightFunction, fit_kde
from .graph import (ConditionsFunction, GraphConfig, GraphError, apply_conditions, build_graph, graph_stats,
                    load_graph)
from .pathfinder import FaceQuery, explain, explain_instance
from .predictor import MlpModel, ProbabilityTable, TrainingError, train_mlp

log = logging.getLogger("facecf")


class CliError(Exception):
    pass


def _write_json(doc, path):
    text = json.dumps(doc, indent=2) + "\n"
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _file_sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _require(path, what):
    if not Path(path).is_file():
        raise CliError(f"{what} not found: {path}")
    return path


def _bandwidth_arg(text):
    if text == "auto":
        return text
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bandwidth must be 'auto' or a number, got {text!r}") from None
    if not value > 0:
        raise argparse.ArgumentTypeError("bandwidth must be positive")
    return value


def _load_model(path):
    _require(path, "model file")
    try:
        return MlpModel.load(path)
    except (KeyError, ValueError, TypeError) as exc:
        raise CliError(f"cannot read model {path}: {exc}") from None


# --------------------------------------------------------------------------
# commands

def cmd_generate_toy(args):
    spec = ToySpec(args.n_blue, args.n_red_bottom, args.n_red_cluster, args.seed)
    data = generate_toy(spec)
    save_csv(data, args.out)
    print(f"wrote {data.n} rows to {args.out}")
    return 0


def cmd_train(args):
    data = load_csv(_require(args.data, "data file"), args.label_column)
    model = train_mlp(data, args.lr, args.epochs, args.seed)
    model.metadata["dataset"] = data.fingerprint()
    model.save(args.out)
    print(f"training accuracy {model.metadata['train_accuracy']:.4f}; model written to {args.out}")
    return 0


def cmd_build_graph(args):
    data = load_csv(_require(args.data, "data file"), args.label_column)
    config = GraphConfig(args.mode, args.epsilon, args.k, WeightFunction(args.weight, args.floor), args.distance)
    conditions = ConditionsFunction.load(_require(args.conditions, "conditions file")) if args.conditions else None
    density = fit_kde(data, args.bandwidth)
    graph = build_graph(data, config, density, conditions)
    doc = graph.to_dict()
    doc["conditions"] = conditions.to_list() if conditions else []
    Path(args.out).write_text(json.dumps(doc) + "\n", encoding="utf-8")
    stats = graph_stats(graph)
    stats["config"] = config.to_dict()
    stats["bandwidth"] = density.bandwidth
    print(json.dumps(stats, indent=2))
    return 0


def _parse_instance(text, d):
    try:
        values = [float(v) for v in text.split(",")]
    except ValueError:
        raise CliError(f"--instance must be comma-separated numbers, got {text!r}") from None
    if len(values) != d:
        raise CliError(f"--instance has {len(values)} values, data has {d} features")
    return np.array(values)


def _write_plot_data(expl, feature_names, path):
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["path_id", "hop", "node", *feature_names])
        for rank, p in enumerate(expl.paths):
            for hop, (node, pt) in enumerate(zip(p.node_indices, p.points)):
                writer.writerow([rank, hop, int(node), *(repr(float(v)) for v in pt)])


def cmd_explain(args):
    data = load_csv(_require(args.data, "data file"), args.label_column)
    graph = load_graph(_require(args.graph, "graph file"), data)
    if args.proba_csv:
        probs = np.loadtxt(_require(args.proba_csv, "probability file"), delimiter=",", skiprows=1, ndmin=2)
        model = ProbabilityTable(data.features, probs)
        model_id = {"proba_csv_sha256": _file_sha256(args.proba_csv)}
    elif args.model:
        model = _load_model(args.model)
        model_id = {"model_sha256": _file_sha256(args.model)}
    else:
        raise CliError("one of --model or --proba-csv is required")
    bandwidth = args.bandwidth
    if bandwidth is None:
        bandwidth = graph.bandwidth if graph.bandwidth is not None else "auto"
    density = fit_kde(data, bandwidth)
    if args.conditions:
        conditions = ConditionsFunction.load(_require(args.conditions, "conditions file"))
    else:
        conditions = None
    if args.instance is not None:
        x = _parse_instance(args.instance, data.d)
        expl = explain_instance(data, model, density, graph, x, args.target_class, args.tp, args.td,
                                args.num_paths, conditions)
    else:
        if args.source is None or not 0 <= args.source < data.n:
            raise CliError(f"--source must be a row index in [0, {data.n})")
        if conditions is not None:
            graph = apply_conditions(graph, conditions, data)
        query = FaceQuery(args.source, args.target_class, args.tp, args.td, args.num_paths)
        expl = explain(data, model, density, graph, query)
    doc = {
        "command": "explain",
        "version": __version__,
        "config": {
            "graph": graph.config.to_dict(),
            "bandwidth": density.bandwidth,
            "query": expl.query.to_dict(),
            "instance": None if args.instance is None else [float(v) for v in x],
            "conditions": conditions.to_list() if conditions else [],
        },
        "inputs": {"dataset": data.fingerprint(), **model_id},
        "feature_names": list(data.feature_names),
        **expl.to_dict(),
    }
    _write_json(doc, args.out)
    if args.plot_data:
        _write_plot_data(expl, data.feature_names, args.plot_data)
    if expl.feasible:
        print(f"{len(expl.paths)} path(s); counterfactual row {expl.counterfactual}", file=sys.stderr)
    else:
        print(f"no feasible counterfactual ({expl.reason})", file=sys.stderr)
    return 0


def cmd_baseline(args):
    data = load_csv(_require(args.data, "data file"), args.label_column)
    model = _load_model(args.model)
    if not 0 <= args.source < data.n:
        raise CliError(f"--source must be a row index in [0, {data.n})")
    face = None
    if args.against:
        face = json.loads(Path(_require(args.against, "FACE result file")).read_text(encoding="utf-8"))
    bandwidth = args.bandwidth
    if bandwidth is None:
        bandwidth = face["config"]["bandwidth"] if face else "auto"
    density = fit_kde(data, bandwidth)
    target_value = args.target_value if args.target_value is not None else 0.5 + args.tolerance
    config = WachterConfig(target_value, args.tolerance, args.lambda_init, args.lambda_growth,
                           args.max_outer_iters, args.max_inner_iters, args.distance, args.step_size)
    scale = compute_mad(data) if args.distance == "mad_l1" else np.ones(data.d)
    x = data.features[args.source]
    res = wachter_counterfactual(model, x, config, scale, args.target_class)
    dens = density.estimate(res.x_prime)
    doc = {
        "command": "baseline",
        "version": __version__,
        "config": {**config.to_dict(), "source_index": args.source, "target_class": args.target_class,
                   "bandwidth": density.bandwidth, "mad": scale.tolist()},
        "inputs": {"dataset": data.fingerprint(), "model_sha256": _file_sha256(args.model)},
        "x": x.tolist(),
        "x_prime": res.x_prime.tolist(),
        "diagnostics": {k: v for k, v in res.to_dict().items() if k != "x_prime"},
        "density": dens,
        "confidence": res.target_probability,
    }
    if face is not None:
        if not face.get("paths"):
            doc["comparison"] = {"face_reason": face.get("reason"),
                                 "statement": "FACE result has no counterfactual to compare against"}
        else:
            end = face["paths"][0]["nodes"][-1]
            face_dens = density.estimate(data.features[end])
            doc["comparison"] = {
                "face_endpoint_index": end,
                "face_density": face_dens,
                "baseline_density": dens,
                "face_denser": face_dens > dens,
                "statement": (f"density at FACE endpoint {face_dens:.6g} "
                              f"{'>' if face_dens > dens else '<='} density at baseline counterfactual {dens:.6g}"),
            }
    _write_json(doc, args.out)
    if not res.converged:
        print("warning: baseline did not reach the tolerance within the iteration caps", file=sys.stderr)
    if "comparison" in doc:
        print(doc["comparison"]["statement"], file=sys.stderr)
    return 0


# --------------------------------------------------------------------------
# parser

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="random seed")
    common.add_argument("--verbose", "-v", action="store_true", help="log progress to stderr")

    data_args = argparse.ArgumentParser(add_help=False)
    data_args.add_argument("--data", required=True, help="CSV dataset with a header row")
    data_args.add_argument("--label-column", default="label")

    parser = argparse.ArgumentParser(prog="facecf", description=__doc__,
                                     formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    fmt = argparse.ArgumentDefaultsHelpFormatter

    p = sub.add_parser("generate-toy", parents=[common], formatter_class=fmt,
                       help="write the three-cloud toy dataset")
    p.add_argument("--n-blue", type=int, default=200)
    p.add_argument("--n-red-bottom", type=int, default=200)
    p.add_argument("--n-red-cluster", type=int, default=100)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate_toy)

    p = sub.add_parser("train", parents=[common, data_args], formatter_class=fmt,
                       help="train the 2x10 ReLU classifier")
    p.add_argument("--lr", type=float, default=0.05)
    p.add_argument("--epochs", type=int, default=5000)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("build-graph", parents=[common, data_args], formatter_class=fmt,
                       help="build the weighted neighbourhood graph")
    p.add_argument("--mode", choices=["kde", "knn", "egraph"], default="kde")
    p.add_argument("--epsilon", type=float, default=0.5)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--bandwidth", type=_bandwidth_arg, default="auto")
    p.add_argument("--weight", choices=["neg_log", "identity", "inverse"], default="neg_log")
    p.add_argument("--floor", type=float, default=0.0)
    p.add_argument("--distance", choices=["euclidean", "l1"], default="euclidean")
    p.add_argument("--conditions", help="JSON list of {type, feature, param} rules")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_build_graph)

    p = sub.add_parser("explain", parents=[common, data_args], formatter_class=fmt,
                       help="find counterfactual paths for one instance")
    p.add_argument("--model")
    p.add_argument("--proba-csv", help="per-row class probabilities instead of a model")
    p.add_argument("--graph", required=True)
    src = p.add_mutually_exclusive_group()
    src.add_argument("--source", type=int, help="row index of the instance to explain")
    src.add_argument("--instance", help="comma-separated feature values of a new instance")
    p.add_argument("--target-class", type=int, default=1)
    p.add_argument("--tp", type=float, default=0.75, help="prediction threshold")
    p.add_argument("--td", type=float, default=0.001, help="density threshold")
    p.add_argument("--num-paths", type=int, default=5)
    p.add_argument("--bandwidth", type=_bandwidth_arg, default=None,
                   help="KDE bandwidth (default: the one stored in the graph)")
    p.add_argument("--conditions", help="extra personal rules; removes graph edges")
    p.add_argument("--out", default="-")
    p.add_argument("--plot-data", help="write path polylines as CSV here")
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("baseline", parents=[common, data_args], formatter_class=fmt,
                       help="gradient-based closest counterfactual")
    p.add_argument("--model", required=True)
    p.add_argument("--source", type=int, required=True)
    p.add_argument("--target-class", type=int, default=1)
    p.add_argument("--target-value", type=float, default=None, help="default: 0.5 + tolerance")
    p.add_argument("--tolerance", type=float, default=0.05)
    p.add_argument("--lambda-init", type=float, default=0.1)
    p.add_argument("--lambda-growth", type=float, default=2.0)
    p.add_argument("--max-outer-iters", type=int, default=30)
    p.add_argument("--max-inner-iters", type=int, default=500)
    p.add_argument("--step-size", type=float, default=0.01)
    p.add_argument("--distance", choices=["mad_l1", "l2"], default="mad_l1")
    p.add_argument("--bandwidth", type=_bandwidth_arg, default=None)
    p.add_argument("--against", help="FACE explain JSON to compare densities with")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_baseline)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (CliError, DataError, GraphError, TrainingError, ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
