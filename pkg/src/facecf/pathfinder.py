"""Candidate targets and shortest density-weighted paths to them."""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .graph import FaceGraph, GraphError, attach_instance

NO_CANDIDATES = "no_candidates"
NONE_REACHABLE = "none_reachable"


@dataclass(frozen=True)
class FaceQuery:
    source_index: int
    target_class: int = 1
    t_p: float = 0.75
    t_d: float = 0.001
    num_paths: int = 5

    def __post_init__(self):
        if not 0.0 <= self.t_p <= 1.0:
            raise ValueError(f"t_p must lie in [0, 1], got {self.t_p}")
        if not self.t_d >= 0:
            raise ValueError(f"t_d must be >= 0, got {self.t_d}")
        if int(self.num_paths) < 1:
            raise ValueError("num_paths must be >= 1")
        if int(self.target_class) < 0:
            raise ValueError("target_class must be >= 0")

    def to_dict(self):
        return {"source_index": int(self.source_index), "target_class": int(self.target_class),
                "t_p": float(self.t_p), "t_d": float(self.t_d), "num_paths": int(self.num_paths)}


@dataclass
class PathResult:
    node_indices: list
    edge_weights: list
    total_f_distance: float
    target_density: Optional[float] = None
    target_confidence: Optional[float] = None
    points: Optional[np.ndarray] = None

    @property
    def target(self):
        return self.node_indices[-1]

    def to_dict(self):
        out = {
            "nodes": [int(i) for i in self.node_indices],
            "edge_weights": [float(w) for w in self.edge_weights],
            "total_f_distance": float(self.total_f_distance),
            "target_density": self.target_density,
            "target_confidence": self.target_confidence,
        }
        if self.points is not None:
            out["coordinates"] = np.asarray(self.points).tolist()
        return out


@dataclass
class Explanation:
    """Ranked counterfactual paths, or the reason none exist."""

    query: FaceQuery
    paths: list = field(default_factory=list)
    reason: Optional[str] = None
    n_candidates: int = 0

    @property
    def feasible(self):
        return bool(self.paths)

    @property
    def counterfactual(self):
        return self.paths[0].target if self.paths else None

    def __len__(self):
        return len(self.paths)

    def __iter__(self):
        return iter(self.paths)

    def to_dict(self):
        return {
            "query": self.query.to_dict(),
            "reason": self.reason,
            "n_candidates": self.n_candidates,
            "paths": [dict(rank=r, **p.to_dict()) for r, p in enumerate(self.paths)],
        }


def _target_scores(data, model, density, target_class):
    X = data.features
    conf = np.asarray(model.predict_proba(X), dtype=np.float64)[:, target_class]
    dens = density.estimate_many(X)
    return conf, dens


def candidate_targets(data, model, density, query: FaceQuery) -> np.ndarray:
    """Rows whose target-class confidence >= t_p and density >= t_d, minus the source."""
    if query.target_class >= data.n_classes:
        raise ValueError(f"target_class {query.target_class} >= number of classes {data.n_classes}")
    conf, dens = _target_scores(data, model, density, query.target_class)
    ok = (conf >= query.t_p) & (dens >= query.t_d)
    if 0 <= query.source_index < data.n:
        ok[query.source_index] = False
    return np.flatnonzero(ok)


def dijkstra(graph: FaceGraph, source: int):
    """Single-source shortest distances and predecessors.

    Heap entries are ``(distance, node)`` and a node's label only changes on a
    strict improvement, so equal-cost alternatives resolve deterministically.
    """
    n = graph.n_nodes
    if not 0 <= source < n:
        raise GraphError(f"source {source} is not a node of the graph")
    dist = [math.inf] * n
    pred = [-1] * n
    done = [False] * n
    dist[source] = 0.0
    heap = [(0.0, source)]
    indptr = graph._indptr
    dst = graph.dst.tolist()
    wts = graph.weight.tolist()
    while heap:
        du, u = heapq.heappop(heap)
        if done[u]:
            continue
        done[u] = True
        for a in range(indptr[u], indptr[u + 1]):
            v = dst[a]
            if done[v]:
                continue
            alt = du + wts[a]
            if alt < dist[v]:
                dist[v] = alt
                pred[v] = u
                heapq.heappush(heap, (alt, v))
    return np.array(dist), np.array(pred, dtype=np.int64)


def _reconstruct(graph, pred, source, target):
    nodes = [target]
    while nodes[-1] != source:
        nodes.append(int(pred[nodes[-1]]))
    nodes.reverse()
    weights = [graph.arc_weight(a, b) for a, b in zip(nodes[:-1], nodes[1:])]
    total = 0.0
    for w in weights:
        total += w
    return PathResult(nodes, weights, total)


def shortest_paths(graph: FaceGraph, source: int, targets, num_paths: int = 5) -> list:
    """Shortest paths to the ``num_paths`` closest reachable targets.

    One path per target; ties in distance go to the lower node index.
    """
    dist, pred = dijkstra(graph, source)
    targets = np.unique(np.asarray(list(targets), dtype=np.int64))
    targets = targets[(targets != source) & (targets >= 0) & (targets < graph.n_nodes)]
    reach = targets[np.isfinite(dist[targets])]
    order = np.lexsort((reach, dist[reach]))
    return [_reconstruct(graph, pred, source, int(t)) for t in reach[order][:int(num_paths)]]


def explain(data, model, density, graph: FaceGraph, query: FaceQuery, points=None) -> Explanation:
    """Candidate selection followed by shortest paths from ``query.source_index``.

    ``points`` supplies coordinates for nodes beyond the dataset (e.g. an
    attached instance); by default node ``i`` is ``data.features[i]``.
    """
    if graph.fingerprint != data.fingerprint():
        raise GraphError("graph and dataset do not match")
    if points is None:
        points = data.features
    cands = candidate_targets(data, model, density, query)
    result = Explanation(query, n_candidates=int(cands.size))
    if cands.size == 0:
        result.reason = NO_CANDIDATES
        return result
    paths = shortest_paths(graph, query.source_index, cands, query.num_paths)
    if not paths:
        result.reason = NONE_REACHABLE
        return result
    ends = np.array([p.target for p in paths])
    conf = np.asarray(model.predict_proba(data.features[ends]), dtype=np.float64)[:, query.target_class]
    dens = density.estimate_many(data.features[ends])
    for p, c, dd in zip(paths, conf, dens):
        p.target_confidence = float(c)
        p.target_density = float(dd)
        p.points = points[p.node_indices]
    result.paths = paths
    return result


def explain_instance(data, model, density, graph: FaceGraph, x, target_class=1, t_p=0.75,
                     t_d=0.001, num_paths=5, conditions=None) -> Explanation:
    """Explain an arbitrary point by attaching it to the graph first."""
    g2, node = attach_instance(data, graph, x, density, conditions)
    query = FaceQuery(node, target_class, t_p, t_d, num_paths)
    points = np.vstack([data.features, np.asarray(x, dtype=np.float64).reshape(1, -1)])
    return explain(data, model, density, g2, query, points=points)
