import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from subgraph_cavity.ensembles import (
    DegreeDistribution,
    configuration_model,
    erasure_stats,
    erdos_renyi,
    erdos_renyi_edges,
    make_rng,
    random_regular,
    read_degree_distribution,
    sample_degree_sequence,
    size_biased,
)
from subgraph_cavity.measure import LocalMeasure
from subgraph_cavity.network import degree_histogram


def test_empty_er():
    net = erdos_renyi(100, 0.0, 1)
    assert net.n == 100 and net.n_edges == 0


def test_random_regular_handshake():
    for seed in range(5):
        net = random_regular(10, 3, seed)
        st_ = erasure_stats(net)
        assert net.n_edges + st_.self_loops + st_.multi_edges == 15
        assert net.degrees.max() <= 3
    with pytest.raises(ValueError):
        random_regular(5, 3, 0)


def test_determinism():
    a = erdos_renyi(500, 3.0, 7)
    b = erdos_renyi(500, 3.0, 7)
    c = erdos_renyi(500, 3.0, 8)
    assert np.array_equal(a.edges, b.edges)
    assert not np.array_equal(a.edges, c.edges)
    r1 = configuration_model(DegreeDistribution.poisson(2.0), 300, 5)
    r2 = configuration_model(DegreeDistribution.poisson(2.0), 300, 5)
    assert np.array_equal(r1.edges, r2.edges)


def test_philox_stream_is_stable():
    # frozen draws pin the generator choice across platforms
    rng = make_rng(12345)
    assert rng.integers(0, 2**32, 3).tolist() == make_rng(12345).integers(0, 2**32, 3).tolist()
    assert isinstance(make_rng(0).bit_generator, np.random.Philox)


def test_size_biased_examples():
    assert size_biased(DegreeDistribution.point_mass(3)).probs.tolist() == [0, 0, 1]
    assert size_biased(DegreeDistribution.explicit([0, 1])).probs.tolist() == [1]
    K = 60
    pb = size_biased(DegreeDistribution.poisson(2.0, K))
    ref = stats.poisson.pmf(np.arange(K), 2.0)
    np.testing.assert_allclose(pb.probs, ref / ref.sum(), atol=1e-10)


@given(st.lists(st.floats(0, 1), min_size=2, max_size=10))
def test_size_biased_formula(weights):
    w = np.array(weights)
    w[1] += 0.1
    pi = DegreeDistribution.explicit(w / w.sum())
    pb = size_biased(pi)
    n = np.arange(len(pi.probs) - 1)
    np.testing.assert_allclose(pb.probs, ((n + 1) * pi.probs[1:] / pi.mean)[: len(pb.probs)], rtol=1e-12, atol=1e-15)


def test_distribution_validation():
    with pytest.raises(ValueError):
        DegreeDistribution(np.array([0.5, 0.4]))
    with pytest.raises(ValueError):
        DegreeDistribution(np.array([1.5, -0.5]))
    with pytest.raises(ValueError):
        size_biased(DegreeDistribution.point_mass(0))
    p = DegreeDistribution.poisson(2.0)
    assert p.probs.sum() == pytest.approx(1.0, abs=1e-12)
    assert p.mean == pytest.approx(2.0, abs=1e-10)


def test_read_degree_distribution(tmp_path):
    f = tmp_path / "pi.txt"
    f.write_text("0, 0.5\n0.5\n")
    pi = read_degree_distribution(f)
    assert pi.probs.tolist() == [0, 0.5, 0.5]


def test_er_degrees_are_poisson():
    c = 3.0
    tvs = []
    for seed in range(5):
        net = erdos_renyi(100_000, c, seed)
        h = degree_histogram(net) / net.n
        K = max(len(h), 40)
        h = np.pad(h, (0, K - len(h)))
        tvs.append(0.5 * np.abs(h - stats.poisson.pmf(np.arange(K), c)).sum())
    assert np.mean(tvs) < 0.02


def test_er_edges_are_distinct_pairs():
    e = erdos_renyi_edges(300, 5.0, make_rng(3))
    assert (e[:, 0] < e[:, 1]).all() and (e[:, 1] < 300).all()
    assert len(np.unique(e, axis=0)) == len(e)


def test_configuration_model_from_sequence():
    net = configuration_model([2, 2, 2, 2], None, 0)
    st_ = erasure_stats(net)
    assert net.n_edges + st_.self_loops + st_.multi_edges == 4
    with pytest.raises(ValueError):
        configuration_model([1, 2], None, 0)


def test_even_degree_sum():
    deg = sample_degree_sequence(DegreeDistribution.poisson(1.5), 101, make_rng(2))
    assert deg.sum() % 2 == 0
    with pytest.raises(ValueError):
        sample_degree_sequence(DegreeDistribution.point_mass(3), 5, make_rng(2))


def test_custom_measures():
    net = erdos_renyi(50, 2.0, 1, measure_for_degree=lambda d: LocalMeasure.exchangeable([1.0] * (d + 1)))
    assert all(mu.kind == "exchangeable" for mu in net.measures)
