"""Seeded random graph ensembles and degree distributions.

All generators draw from ``numpy.random.Generator(Philox(seed))``: Philox is a
counter-based 64-bit generator, so a seed gives the same stream on every
platform, and independent streams for several seeds come from
``SeedSequence.spawn``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .measure import LocalMeasure
from .network import Network, uniform_network

log = logging.getLogger(__name__)

POISSON_TAIL = 1e-12
POISSON_MIN_K = 60


def make_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.Philox(seed))


def spawn_seeds(seed: int, n: int) -> list[np.random.SeedSequence]:
    return np.random.SeedSequence(seed).spawn(n)


# -- degree distributions --------------------------------------------------------


@dataclass(frozen=True)
class DegreeDistribution:
    """Probabilities ``probs[k] = P(degree = k)``; ``c`` is the Poisson mean when relevant."""

    probs: np.ndarray
    kind: str = "explicit"
    c: float | None = None

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if p.ndim != 1 or p.size == 0:
            raise ValueError("degree distribution needs a nonempty probability vector")
        if (p < 0).any() or not np.isfinite(p).all():
            raise ValueError("probabilities must be finite and nonnegative")
        if abs(p.sum() - 1.0) > 1e-12:
            raise ValueError(f"probabilities sum to {p.sum()!r}, not 1")
        object.__setattr__(self, "probs", p)

    @classmethod
    def explicit(cls, probs) -> "DegreeDistribution":
        p = np.asarray(probs, dtype=float)
        nz = np.flatnonzero(p > 0)
        if nz.size:
            p = p[: nz[-1] + 1]
        return cls(p)

    @classmethod
    def point_mass(cls, d: int) -> "DegreeDistribution":
        p = np.zeros(d + 1)
        p[d] = 1.0
        return cls(p)

    @classmethod
    def poisson(cls, c: float, K: int | None = None) -> "DegreeDistribution":
        """Poisson(c) truncated at ``K`` and renormalized.

        The default ``K`` is the smallest value >= 60 whose tail mass is below 1e-12.
        """
        if c <= 0:
            raise ValueError("Poisson mean must be positive")
        if K is None:
            K = max(POISSON_MIN_K, int(stats.poisson.isf(POISSON_TAIL, c)) + 1)
        p = stats.poisson.pmf(np.arange(K + 1), c)
        return cls(p / p.sum(), kind="poisson", c=float(c))

    @property
    def max_degree(self) -> int:
        return len(self.probs) - 1

    @property
    def mean(self) -> float:
        return float(np.dot(np.arange(len(self.probs)), self.probs))

    def sample(self, size: int, rng: np.random.Generator) -> np.ndarray:
        return rng.choice(len(self.probs), size=size, p=self.probs)


def size_biased(pi: DegreeDistribution) -> DegreeDistribution:
    """``pi_hat[n] = (n + 1) pi[n + 1] / mean``, the offspring law away from the root."""
    m = pi.mean
    if not m > 0:
        raise ValueError("size-biasing needs a positive mean")
    k = np.arange(1, len(pi.probs))
    p = k * pi.probs[1:] / m
    if p.size == 0:
        p = np.array([1.0])
    p = p / p.sum()
    return DegreeDistribution(p, kind=pi.kind, c=pi.c)


def read_degree_distribution(path) -> DegreeDistribution:
    """Whitespace- or comma-separated probabilities ``pi_0, pi_1, ...``."""
    with open(path) as fh:
        text = fh.read().replace(",", " ")
    return DegreeDistribution.explicit([float(v) for v in text.split()])


# -- edge generators -----------------------------------------------------------------


@dataclass(frozen=True)
class ErasureStats:
    self_loops: int
    multi_edges: int


def erdos_renyi_edges(n: int, c: float, rng: np.random.Generator) -> np.ndarray:
    """Edges of G(n, p = c/n): a binomial number of distinct uniform pairs."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if c < 0:
        raise ValueError("c must be >= 0")
    n_pairs = n * (n - 1) // 2
    p = min(1.0, c / n)
    m = int(rng.binomial(n_pairs, p)) if n_pairs else 0
    if m == 0:
        return np.zeros((0, 2), dtype=np.int64)
    idx = np.sort(rng.choice(n_pairs, size=m, replace=False, shuffle=False))
    # pairs (u, v), u < v, are numbered row by row
    rows = np.arange(n, dtype=np.int64)
    offsets = rows * (2 * n - rows - 1) // 2
    u = np.searchsorted(offsets, idx, side="right") - 1
    v = idx - offsets[u] + u + 1
    return np.stack([u, v], axis=1)


def erased_pairing_edges(degrees, rng: np.random.Generator) -> tuple[np.ndarray, ErasureStats]:
    """Uniform pairing of half-edges, then removal of self-loops and repeated edges."""
    degrees = np.asarray(degrees, dtype=np.int64)
    if (degrees < 0).any():
        raise ValueError("degrees must be nonnegative")
    if degrees.sum() % 2:
        raise ValueError("degree sum must be even")
    stubs = np.repeat(np.arange(len(degrees), dtype=np.int64), degrees)
    rng.shuffle(stubs)
    pairs = np.sort(stubs.reshape(-1, 2), axis=1)
    loops = pairs[:, 0] == pairs[:, 1]
    pairs = pairs[~loops]
    uniq = np.unique(pairs, axis=0) if len(pairs) else pairs.reshape(0, 2)
    st = ErasureStats(int(loops.sum()), int(len(pairs) - len(uniq)))
    return uniq, st


def sample_degree_sequence(pi: DegreeDistribution, n: int, rng: np.random.Generator, max_redraws: int = 1000):
    """i.i.d. degrees from ``pi`` conditioned on an even sum (by redrawing)."""
    odd_mass = pi.probs[1::2].sum()
    if odd_mass == 1.0 and n % 2 == 1:
        raise ValueError("every degree sequence of this law has an odd sum")
    for _ in range(max_redraws):
        deg = pi.sample(n, rng)
        if deg.sum() % 2 == 0:
            return deg
    raise ValueError("could not draw a degree sequence with even sum")


# -- network builders -------------------------------------------------------------------


def _measure_factory(b: int | None, measure_for_degree):
    if measure_for_degree is not None:
        return measure_for_degree
    if b is None:
        b = 1
    return lambda d: LocalMeasure.bmatching(b, d)


def _log_erasure(model: str, st: ErasureStats) -> None:
    if st.self_loops or st.multi_edges:
        log.info("%s: erased %d self-loops and %d repeated edges", model, st.self_loops, st.multi_edges)


def erdos_renyi(n: int, c: float, seed, b: int | None = 1, measure_for_degree=None) -> Network:
    """G(n, c/n) with a b-matching measure (or ``measure_for_degree(d)``) at every vertex."""
    edges = erdos_renyi_edges(n, c, make_rng(seed))
    return uniform_network(n, edges, _measure_factory(b, measure_for_degree))


def random_regular(n: int, d: int, seed, b: int | None = 1, measure_for_degree=None) -> Network:
    """Erased configuration model with all degrees ``d``; degrees may drop after erasure."""
    if n < 1 or d < 0:
        raise ValueError("need n >= 1 and d >= 0")
    if (n * d) % 2:
        raise ValueError("n * d must be even")
    edges, st = erased_pairing_edges(np.full(n, d), make_rng(seed))
    _log_erasure("random_regular", st)
    net = uniform_network(n, edges, _measure_factory(b, measure_for_degree))
    net._cache["erasure"] = st
    return net


def configuration_model(
    degrees_or_pi, n: int | None, seed, b: int | None = 1, measure_for_degree=None
) -> Network:
    """Erased configuration model from a degree sequence or an i.i.d. degree law."""
    rng = make_rng(seed)
    if isinstance(degrees_or_pi, DegreeDistribution):
        if n is None:
            raise ValueError("n is required when sampling degrees from a distribution")
        degrees = sample_degree_sequence(degrees_or_pi, n, rng)
    else:
        degrees = np.asarray(degrees_or_pi, dtype=np.int64)
        n = len(degrees)
    edges, st = erased_pairing_edges(degrees, rng)
    _log_erasure("configuration_model", st)
    net = uniform_network(n, edges, _measure_factory(b, measure_for_degree))
    net._cache["erasure"] = st
    return net


def erasure_stats(net: Network) -> ErasureStats | None:
    return net._cache.get("erasure")
