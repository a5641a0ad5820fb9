import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from facecf.data import Dataset
from facecf.density import KdeModel, WeightFunction, fit_kde
from facecf.graph import (ConditionsFunction, FaceGraph, GraphConfig, GraphError, Rule, apply_conditions,
                          attach_instance, build_graph, graph_stats, load_graph)

# hand-evaluated edge weights, see test bodies for the arithmetic
KDE_WEIGHT = 0.3 * math.log(2)                       # 0.20794415416798358
KNN_WEIGHT = 0.2 * -math.log(5 / (100 * math.pi) / 0.2)  # 0.5062048493938581


class ConstDensity:
    bandwidth = None

    def __init__(self, value):
        self.value = value

    def estimate_many(self, X):
        return np.full(np.atleast_2d(X).shape[0], self.value)


def two_points(dist):
    return Dataset([[0.0, 0.0], [dist, 0.0]], [0, 1])


def knn_fixture():
    # two close points plus 98 points on a far-away lattice (spacing 10)
    far = np.array([[100.0 + 10 * (k % 10), 100.0 + 10 * (k // 10)] for k in range(98)])
    X = np.vstack([[[0.0, 0.0], [0.2, 0.0]], far])
    return Dataset(X, np.arange(100) % 2)


def test_kde_weight_hand_value():
    g = build_graph(two_points(0.3), GraphConfig("kde", 0.5), ConstDensity(0.5))
    assert KDE_WEIGHT == pytest.approx(0.20794415416798358, abs=1e-15)
    assert abs(g.arc_weight(0, 1) - KDE_WEIGHT) < 1e-9
    assert g.arc_weight(1, 0) == g.arc_weight(0, 1)


def test_knn_weight_hand_value():
    # r = k / (N * pi) = 0.0159155; r / 0.2 = 0.0795775; 0.2 * -log(0.0795775)
    assert 5 / (100 * math.pi) == pytest.approx(0.0159155, abs=1e-7)
    g = build_graph(knn_fixture(), GraphConfig("knn", 0.5, k=5))
    assert abs(g.arc_weight(0, 1) - KNN_WEIGHT) < 1e-9
    assert g.n_arcs == 2


def test_egraph_weight_clamped():
    # raw: 0.2 * -log(0.25 / 0.2) = -0.0446 -> floor 0
    assert 0.2 * -math.log(0.25 / 0.2) == pytest.approx(-0.0446287, abs=1e-7)
    g = build_graph(two_points(0.2), GraphConfig("egraph", 0.5))
    assert g.arc_weight(0, 1) == 0.0


def test_epsilon_boundary():
    eps = 0.5
    assert build_graph(two_points(eps + 1e-9), GraphConfig("egraph", eps)).n_arcs == 0
    assert build_graph(two_points(eps), GraphConfig("egraph", eps)).n_arcs == 2


def test_zero_density_midpoint_drops_edge():
    g = build_graph(two_points(0.3), GraphConfig("kde", 0.5), ConstDensity(0.0))
    assert g.n_arcs == 0


@pytest.mark.parametrize("mode, k", [("egraph", None), ("knn", 1), ("kde", None)])
def test_duplicate_points_free_move(mode, k):
    data = Dataset([[1.0, 1.0], [1.0, 1.0], [5.0, 5.0]], [0, 1, 1])
    g = build_graph(data, GraphConfig(mode, 0.5, k=k), ConstDensity(0.1))
    assert g.arc_weight(0, 1) == 0.0


def test_kde_mode_requires_density(toy):
    with pytest.raises(GraphError, match="density"):
        build_graph(toy, GraphConfig("kde", 0.5))


@pytest.mark.parametrize("kwargs", [
    {"mode": "grid"}, {"epsilon": 0}, {"epsilon": -1}, {"mode": "knn"}, {"mode": "knn", "k": 0},
    {"distance": "cosine"},
])
def test_config_validation(kwargs):
    with pytest.raises(GraphError if "distance" not in kwargs else ValueError):
        GraphConfig(**kwargs)


def test_knn_k_must_be_below_n():
    with pytest.raises(GraphError, match="k < N"):
        build_graph(two_points(0.1), GraphConfig("knn", 1.0, k=2))


def test_toy_graph_invariants(toy, toy_kde):
    g = build_graph(toy, GraphConfig("kde", 0.5), toy_kde)
    assert g.is_symmetric()
    assert g.weight.min() >= 0
    assert np.all(g.src != g.dst)
    d = np.linalg.norm(toy.features[g.src] - toy.features[g.dst], axis=1)
    assert d.max() <= 0.5


def test_toy_graph_regression(toy, toy_kde):
    stats = graph_stats(build_graph(toy, GraphConfig("kde", 0.5), toy_kde))
    assert stats["n_components"] == 9
    assert stats["n_edges"] == 3343
    assert stats["component_sizes"] == [247, 146, 98, 3, 2, 1, 1, 1, 1]


def test_l1_metric(toy, toy_kde):
    g = build_graph(toy, GraphConfig("kde", 0.5, distance="l1"), toy_kde)
    d = np.abs(toy.features[g.src] - toy.features[g.dst]).sum(axis=1)
    assert d.max() <= 0.5
    assert g.n_arcs < build_graph(toy, GraphConfig("kde", 0.5), toy_kde).n_arcs


def test_knn_union_and_cap(toy):
    k, eps = 4, 0.35
    g = build_graph(toy, GraphConfig("knn", eps, k=k))
    X = toy.features
    D = np.linalg.norm(X[:, None] - X[None], axis=-1)
    np.fill_diagonal(D, np.inf)
    nn = np.argsort(D, axis=1, kind="stable")[:, :k]
    knn_sets = [set(row.tolist()) for row in nn]
    expected = {(min(i, j), max(i, j)) for i in range(toy.n) for j in knn_sets[i] if D[i, j] <= eps}
    assert g.edge_pairs() == expected


# properties ------------------------------------------------------------------

points = st.integers(3, 25).flatmap(
    lambda n: arrays(np.float64, (n, 2), elements=st.floats(-3, 3, allow_nan=False, allow_infinity=False)))


def as_dataset(X):
    return Dataset(X, np.arange(X.shape[0]) % 2)


@settings(max_examples=60, deadline=None)
@given(X=points, e1=st.floats(0.05, 3), e2=st.floats(0.05, 3), mode=st.sampled_from(["kde", "egraph"]))
def test_epsilon_monotone(X, e1, e2, mode):
    data = as_dataset(X)
    kde = KdeModel(X, 0.7)
    lo, hi = sorted((e1, e2))
    assert build_graph(data, GraphConfig(mode, lo), kde).edge_pairs() <= \
        build_graph(data, GraphConfig(mode, hi), kde).edge_pairs()


@settings(max_examples=60, deadline=None)
@given(X=points, eps=st.floats(0.05, 4), mode=st.sampled_from(["kde", "egraph", "knn"]),
       kind=st.sampled_from(["neg_log", "identity", "inverse"]))
def test_weights_nonnegative_and_symmetric(X, eps, mode, kind):
    data = as_dataset(X)
    g = build_graph(data, GraphConfig(mode, eps, k=2, weight=WeightFunction(kind)), KdeModel(X, 0.4))
    assert g.n_arcs == 0 or g.weight.min() >= 0
    assert g.is_symmetric()


rule_strategy = st.lists(st.builds(
    Rule,
    type=st.sampled_from(["immutable", "monotone_increase", "monotone_decrease", "max_step"]),
    feature=st.integers(0, 1),
    param=st.floats(0, 2)), max_size=3)


@settings(max_examples=60, deadline=None)
@given(X=points, rules=rule_strategy)
def test_conditions_only_remove(X, rules):
    data = as_dataset(X)
    g = build_graph(data, GraphConfig("egraph", 2.0))
    h = apply_conditions(g, ConditionsFunction(rules), data)
    assert h.arc_set() <= g.arc_set()
    for i, j, w in zip(h.src, h.dst, h.weight):
        assert w == g.arc_weight(i, j)


# conditions ------------------------------------------------------------------

def lattice():
    X = np.array([[x, y] for x in range(3) for y in range(3)], dtype=float)
    return Dataset(X, np.arange(9) % 2, ("age", "income"))


def test_immutable_removes_exactly_differing_pairs():
    data = lattice()
    g = build_graph(data, GraphConfig("egraph", 1.5))
    h = apply_conditions(g, ConditionsFunction([Rule("immutable", "age")]), data)
    X = data.features
    expected = {(i, j) for i, j in g.arc_set() if X[i, 0] == X[j, 0]}
    assert h.arc_set() == expected


def test_empty_conditions_identity(toy, toy_kde):
    g = build_graph(toy, GraphConfig("kde", 0.5), toy_kde)
    h = apply_conditions(g, ConditionsFunction(), toy)
    assert h.arc_set() == g.arc_set()


def test_monotone_makes_directed():
    data = lattice()
    g = build_graph(data, GraphConfig("egraph", 1.5))
    h = apply_conditions(g, ConditionsFunction([Rule("monotone_increase", 0)]), data)
    X = data.features
    assert all(X[j, 0] >= X[i, 0] for i, j in h.arc_set())
    assert h.has_arc(0, 3) and not h.has_arc(3, 0)
    assert graph_stats(h)["directed"]


def test_max_step_and_custom():
    data = lattice()
    g = build_graph(data, GraphConfig("egraph", 1.5))
    h = apply_conditions(g, ConditionsFunction([Rule("max_step", 1, 0.0)]), data)
    assert all(data.features[i, 1] == data.features[j, 1] for i, j in h.arc_set())
    only_up = ConditionsFunction(custom=lambda a, b: b.sum() > a.sum())
    h2 = apply_conditions(g, only_up, data)
    assert all(data.features[j].sum() > data.features[i].sum() for i, j in h2.arc_set())


def test_conditions_at_build_time():
    data = lattice()
    cond = ConditionsFunction([Rule("immutable", "income")])
    a = build_graph(data, GraphConfig("egraph", 1.5), conditions=cond)
    b = apply_conditions(build_graph(data, GraphConfig("egraph", 1.5)), cond, data)
    assert a.arc_set() == b.arc_set()


def test_unknown_feature():
    data = lattice()
    g = build_graph(data, GraphConfig("egraph", 1.5))
    with pytest.raises(GraphError, match="unknown feature"):
        apply_conditions(g, ConditionsFunction([Rule("immutable", "height")]), data)
    with pytest.raises(GraphError):
        Rule("frozen", 0)


def test_conditions_file(tmp_path):
    path = tmp_path / "rules.json"
    path.write_text('[{"type": "immutable", "feature": 0}, {"type": "max_step", "feature": 1, "param": 2}]')
    cond = ConditionsFunction.load(path)
    assert cond.rules == (Rule("immutable", 0), Rule("max_step", 1, 2.0))
    assert cond([0.0, 0.0], [0.0, 1.0]) and not cond([0.0, 0.0], [1.0, 1.0])


# stats / io ------------------------------------------------------------------

def test_stats_empty_graph():
    data = Dataset(np.arange(10.0)[:, None] * 10, np.arange(10) % 2)
    stats = graph_stats(build_graph(data, GraphConfig("egraph", 1.0)))
    assert stats["n_components"] == 10 and stats["n_edges"] == 0 and stats["weight_min"] is None


def test_stats_complete_graph():
    data = Dataset([[0.0, 0.0], [0.1, 0.0], [0.0, 0.1], [0.1, 0.1]], [0, 1, 0, 1])
    stats = graph_stats(build_graph(data, GraphConfig("egraph", 1.0)))
    assert stats["n_components"] == 1 and stats["n_edges"] == 6 and stats["n_arcs"] == 12


def test_json_roundtrip(tmp_path, toy, toy_kde):
    g = build_graph(toy, GraphConfig("kde", 0.5), toy_kde)
    g.save(tmp_path / "g.json")
    back = load_graph(tmp_path / "g.json", toy)
    assert back.config == g.config and back.bandwidth == g.bandwidth
    assert back.src.tobytes() == g.src.tobytes() and back.weight.tobytes() == g.weight.tobytes()


def test_load_rejects_other_dataset(tmp_path, toy, toy_kde):
    build_graph(toy, GraphConfig("kde", 0.5), toy_kde).save(tmp_path / "g.json")
    with pytest.raises(GraphError, match="different dataset"):
        load_graph(tmp_path / "g.json", toy.take(np.arange(10)))


def test_facegraph_validation():
    fp = {}
    cfg = GraphConfig("egraph", 1.0)
    with pytest.raises(GraphError):
        FaceGraph(2, [0], [0], [1.0], cfg, fp)
    with pytest.raises(GraphError):
        FaceGraph(2, [0], [1], [-1.0], cfg, fp)
    with pytest.raises(GraphError):
        FaceGraph(2, [0], [2], [1.0], cfg, fp)


# attach ----------------------------------------------------------------------

@pytest.mark.parametrize("mode", ["kde", "egraph"])
def test_attach_copy_mirrors_twin(toy, toy_kde, mode):
    g = build_graph(toy, GraphConfig(mode, 0.5), toy_kde)
    twin = 42
    g2, node = attach_instance(toy, g, toy.features[twin], toy_kde)
    assert node == toy.n and g2.n_nodes == toy.n + 1
    new_nbrs, new_w = g2.neighbors(node)
    old_nbrs, old_w = g.neighbors(twin)
    assert set(new_nbrs.tolist()) == set(old_nbrs.tolist()) | {twin}
    old = dict(zip(old_nbrs.tolist(), old_w.tolist()))
    for j, w in zip(new_nbrs.tolist(), new_w.tolist()):
        assert abs(w - (0.0 if j == twin else old[j])) <= 1e-12
        assert g2.arc_weight(j, node) == w


def test_attach_keeps_original_arcs(toy, toy_kde):
    g = build_graph(toy, GraphConfig("kde", 0.5), toy_kde)
    g2, node = attach_instance(toy, g, [0.3, 3.3], toy_kde)
    old = {(i, j): w for i, j, w in zip(g.src.tolist(), g.dst.tolist(), g.weight.tolist())}
    new = {(i, j): w for i, j, w in zip(g2.src.tolist(), g2.dst.tolist(), g2.weight.tolist())
           if node not in (i, j)}
    assert old == new


def test_attach_far_point_isolated(toy, toy_kde):
    g = build_graph(toy, GraphConfig("kde", 0.5), toy_kde)
    g2, node = attach_instance(toy, g, [50.0, 50.0], toy_kde)
    assert g2.neighbors(node)[0].size == 0
    assert graph_stats(g2)["n_components"] == graph_stats(g)["n_components"] + 1


def test_attach_knn_and_conditions(toy, toy_kde):
    g = build_graph(toy, GraphConfig("knn", 0.8, k=10))
    g2, node = attach_instance(toy, g, [0.1, 5.0])
    assert 10 <= g2.neighbors(node)[0].size
    cond = ConditionsFunction([Rule("monotone_increase", "x1")])
    g3, node = attach_instance(toy, g, [0.1, 5.0], conditions=cond)
    X = np.vstack([toy.features, [0.1, 5.0]])
    for i, j in g3.arc_set():
        if node in (i, j):
            assert X[j, 1] >= X[i, 1]


def test_attach_dimension_mismatch(toy, toy_kde):
    g = build_graph(toy, GraphConfig("kde", 0.5), toy_kde)
    with pytest.raises(GraphError, match="features"):
        attach_instance(toy, g, [1.0, 2.0, 3.0], toy_kde)
