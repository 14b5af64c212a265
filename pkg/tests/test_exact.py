import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import quad

from oracles import brute_network, mixed_tree_network, random_tree_edges
from subgraph_cavity.measure import LocalMeasure
from subgraph_cavity.network import Network, bmatching_network
from subgraph_cavity.exact import (
    ExactSizeError,
    PartitionPolynomial,
    exact_edge_probabilities,
    exact_edge_probability,
    exact_energy,
    exact_log_Z,
    exact_M,
    exact_marginal,
    partition_polynomial,
)


def tri(b):
    return bmatching_network(3, [[0, 1], [1, 2], [0, 2]], b)


def test_polynomial_examples(single_edge):
    assert partition_polynomial(single_edge).coeffs.tolist() == [1, 1]
    assert partition_polynomial(tri(1)).coeffs.tolist() == [1, 3, 0, 0]
    # all three triangle edges give every vertex degree 2, which b = 2 allows
    assert partition_polynomial(tri(2)).coeffs.tolist() == [1, 3, 3, 1]


def test_energy_examples():
    assert exact_energy(PartitionPolynomial(np.array([1.0, 1.0])), 1.0) == 0.5
    assert exact_energy(PartitionPolynomial(np.array([1.0, 3.0, 0.0, 0.0])), 1.0) == 0.75
    assert exact_energy(PartitionPolynomial(np.array([2.0, 5.0, 1.0])), 0.0) == 0


def test_probability_examples(single_edge, path3):
    assert exact_edge_probability(single_edge, 1.0, 0) == pytest.approx(0.5, rel=1e-15)
    assert exact_edge_probability(path3, 1.0, (0, 1)) == pytest.approx(1 / 3, rel=1e-15)
    assert exact_edge_probability(path3, 0.0, (1, 2)) == 0
    np.testing.assert_allclose(exact_marginal(path3, 1.0, 1), [1 / 3, 1 / 3, 1 / 3, 0], rtol=1e-15)


def test_M_examples():
    assert exact_M(tri(1)) == 1
    assert exact_M(tri(3)) == 3
    assert exact_M(Network(4, [], [LocalMeasure.bmatching(1, 0)] * 4)) == 0
    assert exact_log_Z(Network(2, [], [LocalMeasure.exchangeable([2.0], 0)] * 2), 1.0) == pytest.approx(
        2 * math.log(2)
    )


def test_size_cap():
    n = 8
    edges = [[i, j] for i in range(n) for j in range(i + 1, n)]
    with pytest.raises(ExactSizeError):
        partition_polynomial(bmatching_network(n, edges, 2))


def random_graph(n, extra, rng):
    edges = {tuple(sorted(e)) for e in random_tree_edges(n, rng).tolist()}
    for _ in range(extra):
        u, v = rng.choice(n, 2, replace=False)
        edges.add((min(u, v), max(u, v)))
    return sorted(edges)


def random_measures(net_degrees, rng):
    out = []
    for d in net_degrees:
        r = rng.random()
        if r < 0.4:
            out.append(LocalMeasure.bmatching(int(rng.integers(1, 4)), d))
        elif r < 0.8:
            out.append(LocalMeasure.exchangeable(rng.uniform(0.2, 3, d + 1), d))
        else:
            entries = [((), 1.0)] + [((s,), float(rng.uniform(0.5, 2))) for s in range(d)]
            if d >= 2:
                entries.append(((0, d - 1), float(rng.uniform(0.5, 2))))
            out.append(LocalMeasure.from_table(d, entries))
    return out


@given(st.integers(2, 7), st.integers(0, 4), st.floats(0.05, 20), st.integers(0, 2**32 - 1))
def test_against_direct_enumeration(n, extra, t, seed):
    rng = np.random.default_rng(seed)
    edges = random_graph(n, extra, rng)
    deg = np.bincount(np.array(edges).ravel(), minlength=n)
    net = Network(n, edges, random_measures(deg.tolist(), rng))
    coeffs, energy, edge_p, marg = brute_network(net, t)
    poly = partition_polynomial(net)
    np.testing.assert_allclose(poly.coeffs, coeffs, rtol=1e-12, atol=0)
    assert exact_energy(poly, t) == pytest.approx(energy, rel=1e-12)
    np.testing.assert_allclose(exact_edge_probabilities(net, t), edge_p, rtol=1e-12, atol=1e-15)
    for i in range(n):
        np.testing.assert_allclose(exact_marginal(net, t, i), marg[i], rtol=1e-12, atol=1e-15)


def test_zero_coefficient_matches_empty_weights():
    rng = np.random.default_rng(3)
    net = mixed_tree_network(9, rng)
    z0 = np.prod([mu.empty_weight() for mu in net.measures])
    assert partition_polynomial(net).coeffs[0] == pytest.approx(z0, rel=1e-14)


@given(st.integers(2, 10), st.integers(0, 2**32 - 1))
def test_energy_increases_to_M(n, seed):
    rng = np.random.default_rng(seed)
    net = mixed_tree_network(n, rng)
    poly = partition_polynomial(net)
    ts = np.geomspace(1e-4, 1e12, 40)
    us = [exact_energy(poly, t) for t in ts]
    assert all(b >= a - 1e-12 for a, b in zip(us, us[1:]))
    assert us[-1] == pytest.approx(exact_M(poly), abs=1e-3)


def test_log_Z_is_integral_of_energy_over_log_activity():
    rng = np.random.default_rng(11)
    edges = random_graph(7, 3, rng)
    deg = np.bincount(np.array(edges).ravel(), minlength=7)
    net = Network(7, edges, random_measures(deg.tolist(), rng))
    poly = partition_polynomial(net)
    for t in (0.2, 3.0, 40.0):
        integral, _ = quad(lambda s: poly.energy(s) / s, 1.0, t, epsabs=1e-12, epsrel=1e-12)
        assert poly.log_Z(t) - poly.log_Z(1.0) == pytest.approx(integral, rel=1e-9, abs=1e-11)


def test_large_enumeration_runs():
    # 24 edges: a 5x5 grid minus a few edges, sum of marginals equals energy
    n = 25
    edges = []
    for r in range(5):
        for c in range(5):
            v = 5 * r + c
            if c < 4:
                edges.append([v, v + 1])
            if r < 4:
                edges.append([v, v + 5])
    edges = edges[:24]
    net = bmatching_network(n, edges, 2)
    poly = partition_polynomial(net)
    p = exact_edge_probabilities(net, 1.5)
    assert p.sum() == pytest.approx(poly.energy(1.5), rel=1e-12)
