"""Density-weighted neighbourhood graphs over a dataset.

Three constructions share one storage format: a list of directed arcs
``src -> dst`` sorted by ``(src, dst)``. Without directional conditions
every edge is present in both directions with the same weight.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from . import kernels
from .density import KdeModel, WeightFunction, volume_unit_ball

MODES = ("kde", "knn", "egraph")


class GraphError(ValueError):
    pass


@dataclass(frozen=True)
class GraphConfig:
    mode: str = "kde"
    epsilon: float = 0.5
    k: Optional[int] = None
    weight: WeightFunction = field(default_factory=WeightFunction)
    distance: str = "euclidean"

    def __post_init__(self):
        if self.mode not in MODES:
            raise GraphError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not (self.epsilon > 0):
            raise GraphError(f"epsilon must be positive, got {self.epsilon}")
        if self.mode == "knn" and (self.k is None or int(self.k) < 1):
            raise GraphError("knn mode needs k >= 1")
        kernels.metric_code(self.distance)

    def validate_for(self, n):
        if self.mode == "knn" and not 1 <= self.k < n:
            raise GraphError(f"knn mode needs 1 <= k < N (k={self.k}, N={n})")

    def to_dict(self):
        return {"mode": self.mode, "epsilon": self.epsilon, "k": self.k,
                "weight": self.weight.to_dict(), "distance": self.distance}

    @classmethod
    def from_dict(cls, d):
        return cls(mode=d["mode"], epsilon=float(d["epsilon"]),
                   k=None if d.get("k") is None else int(d["k"]),
                   weight=WeightFunction.from_dict(d.get("weight", {})),
                   distance=d.get("distance", "euclidean"))


# --------------------------------------------------------------------------
# conditions

RULE_TYPES = ("immutable", "monotone_increase", "monotone_decrease", "max_step")


@dataclass(frozen=True)
class Rule:
    """One per-feature feasibility rule for a move ``x_src -> x_dst``.

    ``param`` is the allowed absolute change for ``max_step`` and an equality
    tolerance (default 0) for ``immutable``; the monotone rules ignore it.
    """

    type: str
    feature: object
    param: Optional[float] = None

    def __post_init__(self):
        if self.type not in RULE_TYPES:
            raise GraphError(f"unknown rule type {self.type!r}; expected one of {RULE_TYPES}")
        if self.type == "max_step" and (self.param is None or not self.param >= 0):
            raise GraphError("max_step needs a nonnegative param")

    def allowed(self, before, after):
        delta = after - before
        if self.type == "immutable":
            return np.abs(delta) <= (self.param or 0.0)
        if self.type == "monotone_increase":
            return delta >= 0
        if self.type == "monotone_decrease":
            return delta <= 0
        return np.abs(delta) <= self.param

    @property
    def directional(self):
        return self.type in ("monotone_increase", "monotone_decrease")

    def to_dict(self):
        return {"type": self.type, "feature": self.feature, "param": self.param}


@dataclass(frozen=True)
class ConditionsFunction:
    """Pairwise feasibility predicate built from rules and an optional callable.

    ``custom(x_src, x_dst) -> bool`` is evaluated per arc after the rules.
    """

    rules: tuple = ()
    custom: Optional[Callable] = None

    def __post_init__(self):
        object.__setattr__(self, "rules", tuple(self.rules))

    @property
    def is_empty(self):
        return not self.rules and self.custom is None

    def allowed(self, X, src, dst, feature_index=None):
        """Boolean mask over the arcs ``src[a] -> dst[a]`` of feature matrix ``X``."""
        src = np.asarray(src, dtype=np.int64)
        dst = np.asarray(dst, dtype=np.int64)
        mask = np.ones(src.shape[0], dtype=bool)
        for rule in self.rules:
            f = _resolve_feature(rule.feature, X.shape[1], feature_index)
            mask &= rule.allowed(X[src, f], X[dst, f])
        if self.custom is not None:
            for a in np.flatnonzero(mask):
                mask[a] = bool(self.custom(X[src[a]], X[dst[a]]))
        return mask

    def __call__(self, x_src, x_dst):
        X = np.vstack([x_src, x_dst])
        return bool(self.allowed(X, [0], [1])[0])

    def to_list(self):
        return [r.to_dict() for r in self.rules]

    @classmethod
    def from_list(cls, records):
        rules = []
        for rec in records:
            if not isinstance(rec, dict) or "type" not in rec or "feature" not in rec:
                raise GraphError(f"malformed rule record {rec!r}")
            param = rec.get("param")
            rules.append(Rule(rec["type"], rec["feature"], None if param is None else float(param)))
        return cls(tuple(rules))

    @classmethod
    def load(cls, path):
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        if isinstance(doc, dict):
            doc = doc.get("rules", [])
        return cls.from_list(doc)


def _resolve_feature(feature, d, feature_index=None):
    if feature_index is not None:
        return feature_index(feature)
    if isinstance(feature, (int, np.integer)) and not isinstance(feature, bool) and 0 <= feature < d:
        return int(feature)
    raise GraphError(f"unknown feature {feature!r}")


def _feature_resolver(data):
    def resolve(feature):
        try:
            return data.feature_index(feature)
        except ValueError:
            raise GraphError(f"rule references unknown feature {feature!r}") from None
    return resolve


# --------------------------------------------------------------------------
# graph

@dataclass(frozen=True, eq=False)
class FaceGraph:
    n_nodes: int
    src: np.ndarray
    dst: np.ndarray
    weight: np.ndarray
    config: GraphConfig
    fingerprint: dict
    bandwidth: Optional[float] = None

    def __post_init__(self):
        src = np.asarray(self.src, dtype=np.int64)
        dst = np.asarray(self.dst, dtype=np.int64)
        w = np.asarray(self.weight, dtype=np.float64)
        if not (src.shape == dst.shape == w.shape):
            raise GraphError("arc arrays differ in length")
        if src.size:
            if src.min() < 0 or dst.min() < 0 or max(src.max(), dst.max()) >= self.n_nodes:
                raise GraphError("arc endpoint out of range")
            if np.any(src == dst):
                raise GraphError("self-loops are not allowed")
            if not np.all(np.isfinite(w)) or w.min() < 0:
                raise GraphError("arc weights must be finite and nonnegative")
        order = np.lexsort((dst, src))
        for name, arr in (("src", src[order]), ("dst", dst[order]), ("weight", w[order])):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        indptr = np.searchsorted(self.src, np.arange(self.n_nodes + 1)).astype(np.int64)
        object.__setattr__(self, "_indptr", indptr)

    @property
    def n_arcs(self):
        return int(self.src.size)

    def neighbors(self, i):
        """``(dst, weight)`` arrays of the arcs leaving node ``i``."""
        a, b = self._indptr[i], self._indptr[i + 1]
        return self.dst[a:b], self.weight[a:b]

    def has_arc(self, i, j):
        nbrs, _ = self.neighbors(i)
        k = np.searchsorted(nbrs, j)
        return bool(k < nbrs.size and nbrs[k] == j)

    def arc_weight(self, i, j):
        nbrs, w = self.neighbors(i)
        k = np.searchsorted(nbrs, j)
        if k < nbrs.size and nbrs[k] == j:
            return float(w[k])
        raise KeyError((i, j))

    def edge_pairs(self):
        """Unordered node pairs joined by at least one arc."""
        lo = np.minimum(self.src, self.dst)
        hi = np.maximum(self.src, self.dst)
        return set(zip(lo.tolist(), hi.tolist()))

    def arc_set(self):
        return set(zip(self.src.tolist(), self.dst.tolist()))

    def is_symmetric(self):
        fwd = dict(zip(zip(self.src.tolist(), self.dst.tolist()), self.weight.tolist()))
        return all(fwd.get((j, i)) == w for (i, j), w in fwd.items())

    def subgraph_mask(self, keep):
        keep = np.asarray(keep, dtype=bool)
        return FaceGraph(self.n_nodes, self.src[keep], self.dst[keep], self.weight[keep],
                         self.config, dict(self.fingerprint), self.bandwidth)

    def to_dict(self):
        return {
            "format": "facecf-graph/1",
            "config": self.config.to_dict(),
            "bandwidth": self.bandwidth,
            "fingerprint": self.fingerprint,
            "n_nodes": self.n_nodes,
            "arcs": [[int(i), int(j), float(w)] for i, j, w in zip(self.src, self.dst, self.weight)],
        }

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict()) + "\n", encoding="utf-8")


def load_graph(path, data=None) -> FaceGraph:
    """Read a graph file; when ``data`` is given its fingerprint must match."""
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if data is not None and doc["fingerprint"] != data.fingerprint():
        raise GraphError(f"{path}: graph was built from a different dataset")
    arcs = np.asarray(doc["arcs"], dtype=np.float64).reshape(-1, 3)
    return FaceGraph(int(doc["n_nodes"]), arcs[:, 0].astype(np.int64), arcs[:, 1].astype(np.int64),
                     arcs[:, 2], GraphConfig.from_dict(doc["config"]), doc["fingerprint"],
                     doc.get("bandwidth"))


def _edge_weights(config, dist, mids, n_ref, d, density):
    """Weights for candidate edges of length ``dist`` with midpoints ``mids``.

    Returns ``(weights, keep)``. Coincident endpoints cost nothing. In kde mode
    an edge whose midpoint has zero estimated density is dropped.
    """
    w = config.weight
    dist = np.asarray(dist, dtype=np.float64)
    out = np.zeros_like(dist)
    keep = np.ones(dist.shape, dtype=bool)
    if config.mode == "kde":
        if density is None:
            raise GraphError("kde mode needs a fitted density model")
        z = density.estimate_many(mids) if dist.size else np.empty(0)
        keep = z > 0
        pos = keep & (dist > 0)
        if pos.any():
            out[pos] = w(z[pos]) * dist[pos]
        return out, keep
    pos = dist > 0
    if config.mode == "knn":
        surrogate = config.k / (n_ref * volume_unit_ball(d))
    else:
        surrogate = config.epsilon ** d
    if pos.any():
        out[pos] = w(surrogate / dist[pos]) * dist[pos]
    return out, keep


def _knn_union_pairs(D, k):
    """Unordered pairs (i < j) where either endpoint is among the other's k nearest."""
    n = D.shape[0]
    D = D.copy()
    np.fill_diagonal(D, np.inf)
    nn = np.argsort(D, axis=1, kind="stable")[:, :k]
    rows = np.repeat(np.arange(n), k)
    cols = nn.ravel()
    lo, hi = np.minimum(rows, cols), np.maximum(rows, cols)
    pairs = np.unique(np.column_stack([lo, hi]), axis=0)
    return pairs[:, 0], pairs[:, 1]


def _symmetric_arcs(i, j, w):
    return np.concatenate([i, j]), np.concatenate([j, i]), np.concatenate([w, w])


def build_graph(data, config: GraphConfig, density: Optional[KdeModel] = None,
                conditions: Optional[ConditionsFunction] = None) -> FaceGraph:
    """Connect every pair within ``epsilon`` (k-NN pairs only, in knn mode).

    An arc ``i -> j`` is kept iff the pair is close enough and ``conditions``
    allows the move from ``x_i`` to ``x_j``. Weights are clamped at the weight
    function's floor, so they are never negative.
    """
    X = data.features
    n, d = X.shape
    config.validate_for(n)
    metric = kernels.metric_code(config.distance)
    if config.mode == "knn":
        D = kernels.cross_distances(X, X, metric)
        i, j = _knn_union_pairs(D, config.k)
        dist = D[i, j]
        close = dist <= config.epsilon
        i, j, dist = i[close], j[close], dist[close]
    else:
        i, j, dist = kernels.pairs_within(X, config.epsilon, metric)
    mids = 0.5 * (X[i] + X[j])
    w, keep = _edge_weights(config, dist, mids, n, d, density)
    src, dst, wt = _symmetric_arcs(i[keep], j[keep], w[keep])
    bandwidth = density.bandwidth if density is not None else None
    graph = FaceGraph(n, src, dst, wt, config, data.fingerprint(), bandwidth)
    if conditions is not None and not conditions.is_empty:
        graph = apply_conditions(graph, conditions, data)
    return graph


def apply_conditions(graph: FaceGraph, conditions: ConditionsFunction, data) -> FaceGraph:
    """New graph keeping only the arcs whose move passes ``conditions``."""
    if graph.fingerprint != data.fingerprint():
        raise GraphError("graph and dataset do not match")
    if conditions is None or conditions.is_empty:
        return graph
    keep = conditions.allowed(data.features, graph.src, graph.dst, _feature_resolver(data))
    return graph.subgraph_mask(keep)


def graph_stats(graph: FaceGraph) -> dict:
    """Node/edge counts, weak components and weight summary."""
    n = graph.n_nodes
    adj = coo_matrix((np.ones(graph.n_arcs), (graph.src, graph.dst)), shape=(n, n))
    n_comp, comp = connected_components(adj, directed=True, connection="weak")
    sizes = sorted(np.bincount(comp, minlength=n_comp).tolist(), reverse=True)
    w = graph.weight
    return {
        "n_nodes": n,
        "n_edges": len(graph.edge_pairs()),
        "n_arcs": graph.n_arcs,
        "directed": not graph.is_symmetric(),
        "n_components": int(n_comp),
        "component_sizes": sizes,
        "weight_min": float(w.min()) if w.size else None,
        "weight_mean": float(w.mean()) if w.size else None,
        "weight_max": float(w.max()) if w.size else None,
    }


def attach_instance(data, graph: FaceGraph, x, density: Optional[KdeModel] = None,
                    conditions: Optional[ConditionsFunction] = None):
    """Add ``x`` as node ``graph.n_nodes`` using the graph's own construction rules.

    Existing arcs are left untouched. In knn mode the new node links to its own
    k nearest data points and to every data point whose k-th neighbour is
    strictly farther away than ``x``. Returns ``(new_graph, node_id)``.
    """
    X = data.features
    n, d = X.shape
    if graph.fingerprint != data.fingerprint():
        raise GraphError("graph and dataset do not match")
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.shape[0] != d:
        raise GraphError(f"instance has {x.shape[0]} features, data has {d}")
    if not np.all(np.isfinite(x)):
        raise GraphError("instance must be finite")
    cfg = graph.config
    metric = kernels.metric_code(cfg.distance)
    dist = kernels.cross_distances(x[None, :], X, metric)[0]
    close = dist <= cfg.epsilon
    if cfg.mode == "knn":
        D = kernels.cross_distances(X, X, metric)
        np.fill_diagonal(D, np.inf)
        kth = np.sort(D, axis=1)[:, cfg.k - 1]
        own = np.zeros(n, dtype=bool)
        own[np.argsort(dist, kind="stable")[:cfg.k]] = True
        close &= own | (dist < kth)
    nbrs = np.flatnonzero(close)
    mids = 0.5 * (X[nbrs] + x)
    w, keep = _edge_weights(cfg, dist[nbrs], mids, n, d, density)
    nbrs, w = nbrs[keep], w[keep]
    new = np.full(nbrs.shape, n, dtype=np.int64)
    src, dst, wt = _symmetric_arcs(new, nbrs, w)
    if conditions is not None and not conditions.is_empty:
        ext = np.vstack([X, x])
        ok = conditions.allowed(ext, src, dst, _feature_resolver(data))
        src, dst, wt = src[ok], dst[ok], wt[ok]
    out = FaceGraph(n + 1, np.concatenate([graph.src, src]), np.concatenate([graph.dst, dst]),
                    np.concatenate([graph.weight, wt]), cfg, dict(graph.fingerprint), graph.bandwidth)
    return out, n
