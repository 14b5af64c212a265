import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import random_tree_edges, subsets
from subgraph_cavity.measure import LocalMeasure, evaluate
from subgraph_cavity.network import (
    DegreeMismatchError,
    IncidenceError,
    MalformedNetworkError,
    Network,
    NetworkValidationError,
    ParallelEdgeError,
    SelfLoopError,
    VertexIdError,
    ball_is_tree,
    bfs_distances,
    bmatching_network,
    degree_histogram,
    diameter,
    diameter_upper_bound,
    induced_subnetwork,
    is_forest,
    is_tree,
    load_network,
    n_components,
    save_network,
)

TRIANGLE_JSON = """
{"vertices": [{"id": 0, "measure": {"type": "bmatching", "b": 1}},
              {"id": 1, "measure": {"type": "bmatching", "b": 1}},
              {"id": 2, "measure": {"type": "bmatching", "b": 1}}],
 "edges": [[0, 1], [1, 2], [2, 0]]}
"""


def path(n, b=1):
    return bmatching_network(n, [[i, i + 1] for i in range(n - 1)], b)


def test_load_triangle():
    net = load_network(TRIANGLE_JSON)
    assert net.n == 3
    assert net.n_arcs == 6
    assert net.edges.tolist() == [[0, 1], [0, 2], [1, 2]]


def test_self_loop_rejected():
    text = '{"vertices": [{"id": 0, "measure": {"type": "bmatching", "b": 1}}], "edges": [[0, 0]]}'
    with pytest.raises(SelfLoopError, match="vertex 0"):
        load_network(text)


def test_table_slot_out_of_range_rejected():
    text = json.dumps(
        {
            "vertices": [
                {"id": 0, "measure": {"type": "table", "entries": [{"subset": [], "weight": 1}, {"subset": [1], "weight": 1}]}},
                {"id": 1, "measure": {"type": "bmatching", "b": 1}},
            ],
            "edges": [[0, 1]],
        }
    )
    with pytest.raises(IncidenceError, match="vertex 0"):
        load_network(text)


@pytest.mark.parametrize(
    "text, err",
    [
        ("{not json", MalformedNetworkError),
        ('{"vertices": []}', MalformedNetworkError),
        ('{"vertices": [{"id": 1, "measure": {"type": "bmatching", "b": 1}}], "edges": []}', VertexIdError),
        (
            '{"vertices": [{"id": 0, "measure": {"type": "bmatching", "b": 1}},'
            ' {"id": 1, "measure": {"type": "bmatching", "b": 1}}], "edges": [[0, 1], [1, 0]]}',
            ParallelEdgeError,
        ),
        (
            '{"vertices": [{"id": 0, "measure": {"type": "bmatching", "b": 1}},'
            ' {"id": 1, "measure": {"type": "exchangeable", "coeffs": [1, 1, 1]}}], "edges": [[0, 1]]}',
            DegreeMismatchError,
        ),
        ('{"vertices": [{"id": 0, "measure": {"type": "bmatching", "b": 1}}], "edges": [[0, 3]]}', VertexIdError),
        ('{"vertices": [{"id": 0, "measure": {"type": "weird"}}], "edges": []}', MalformedNetworkError),
        ('{"vertices": [{"id": 0, "measure": {"type": "bmatching", "b": 0}}], "edges": []}', NetworkValidationError),
    ],
)
def test_validation_errors(text, err):
    with pytest.raises(err):
        load_network(text)


def test_constructor_degree_mismatch():
    with pytest.raises(DegreeMismatchError):
        Network(2, [[0, 1]], [LocalMeasure.bmatching(1, 1), LocalMeasure.bmatching(1, 2)])


def test_arc_layout(triangle):
    net = triangle
    for a in range(net.n_arcs):
        assert net.reverse(net.reverse(a)) == a
        i, j = int(net.arc_tail[a]), int(net.arc_head[a])
        assert net.arc(i, j) == a
        assert net.arc(j, i) == net.reverse(a)
    for i in range(net.n):
        nb = net.neighbors(i)
        assert list(nb) == sorted(nb)
        for s, j in enumerate(nb.tolist()):
            p = net.ptr[i] + s
            assert net.arc_tail[net.out_arc[p]] == i and net.arc_head[net.out_arc[p]] == j
            assert net.arc_slot[net.out_arc[p]] == s


def test_ball_is_tree_examples(triangle):
    assert not ball_is_tree(triangle, 0, 1)
    assert ball_is_tree(path(5), 2, 2)
    star = bmatching_network(5, [[0, k] for k in range(1, 5)], 1)
    assert ball_is_tree(star, 0, 1)


def test_ball_of_square_with_tail():
    net = bmatching_network(6, [[0, 1], [1, 2], [2, 3], [3, 0], [3, 4], [4, 5]], 1)
    assert ball_is_tree(net, 5, 1)
    assert ball_is_tree(net, 5, 3)
    assert not ball_is_tree(net, 5, 4)
    assert bfs_distances(net, 5).tolist() == [3, 4, 3, 2, 1, 0]


def test_graph_routines(triangle, single_edge):
    assert diameter(path(3)) == 2
    assert not is_tree(triangle)
    assert degree_histogram(single_edge).tolist() == [0, 2]
    two = bmatching_network(7, [[0, 1], [2, 3], [3, 4], [4, 5]], 1)
    assert diameter(two) == 3
    assert n_components(two) == 3
    assert is_forest(two) and not is_tree(two)
    assert diameter_upper_bound(two) >= 3


@given(st.integers(1, 40), st.integers(0, 2**32 - 1))
def test_diameter_bound_on_random_trees(n, seed):
    rng = np.random.default_rng(seed)
    net = bmatching_network(n, random_tree_edges(n, rng), 1)
    d = diameter(net)
    assert is_tree(net)
    assert d <= diameter_upper_bound(net) <= 2 * d
    assert all(ball_is_tree(net, r, 3) for r in range(n))


def test_induced_subnetwork():
    net = path(5, 2)
    sub, keep = induced_subnetwork(net, [3, 1, 2], lambda old, d: LocalMeasure.bmatching(2, d))
    assert keep.tolist() == [1, 2, 3]
    assert sub.edges.tolist() == [[0, 1], [1, 2]]


def random_table(m, rng):
    entries = [(F, float(rng.uniform(0.1, 2))) for F in subsets(range(m)) if rng.random() < 0.6]
    if not entries:
        entries = [((), 1.0)]
    return LocalMeasure.from_table(m, entries)


@given(st.integers(1, 9), st.integers(0, 2**32 - 1))
def test_round_trip(n, seed):
    rng = np.random.default_rng(seed)
    edges = random_tree_edges(n, rng)
    if n >= 3 and rng.random() < 0.5:
        extra = rng.choice(n, 2, replace=False)
        if not any(set(e) == set(extra.tolist()) for e in edges.tolist()):
            edges = np.vstack([edges, extra])
    deg = np.bincount(edges.ravel(), minlength=n) if len(edges) else np.zeros(n, dtype=int)
    measures = []
    for d in deg.tolist():
        kind = rng.integers(3)
        if kind == 0:
            measures.append(LocalMeasure.bmatching(int(rng.integers(1, 4)), d))
        elif kind == 1:
            measures.append(LocalMeasure.exchangeable(rng.uniform(0.1, 5, d + 1) / 3, d))
        else:
            measures.append(random_table(d, rng))
    net = Network(n, edges, measures)
    text = save_network(net)
    back = load_network(text)
    assert save_network(back) == text
    assert back.edges.tolist() == net.edges.tolist()
    for mu, nu in zip(net.measures, back.measures):
        for F in subsets(range(mu.ground_size)):
            assert evaluate(mu, F) == evaluate(nu, F)
