"""Feasible, actionable counterfactual explanations via density-weighted shortest paths."""

__version__ = "0.1.0"

from ._accel import backend_name
from .baseline import WachterConfig, WachterResult, compute_mad, mad_distance, wachter_counterfactual
from .data import Dataset, DataError, ToySpec, generate_toy, load_csv, save_csv, subsample
from .density import (KdeModel, WeightFunction, apply_weight, estimate, fit_kde, path_f_length,
                      volume_unit_ball)
from .graph import (ConditionsFunction, FaceGraph, GraphConfig, GraphError, Rule, apply_conditions,
                    attach_instance, build_graph, graph_stats, load_graph)
from .pathfinder import (Explanation, FaceQuery, PathResult, candidate_targets, dijkstra, explain,
                         explain_instance, shortest_paths)
from .predictor import (CallablePredictor, MlpModel, PredictorContract, ProbabilityTable, TrainingError,
                        predict_proba, train_mlp)

__all__ = [
    "backend_name",
    "WachterConfig", "WachterResult", "compute_mad", "mad_distance", "wachter_counterfactual",
    "Dataset", "DataError", "ToySpec", "generate_toy", "load_csv", "save_csv", "subsample",
    "KdeModel", "WeightFunction", "apply_weight", "estimate", "fit_kde", "path_f_length", "volume_unit_ball",
    "ConditionsFunction", "FaceGraph", "GraphConfig", "GraphError", "Rule", "apply_conditions",
    "attach_instance", "build_graph", "graph_stats", "load_graph",
    "Explanation", "FaceQuery", "PathResult", "candidate_targets", "dijkstra", "explain",
    "explain_instance", "shortest_paths",
    "CallablePredictor", "MlpModel", "PredictorContract", "ProbabilityTable", "TrainingError",
    "predict_proba", "train_mlp",
]
