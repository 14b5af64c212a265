"""Brute-force oracle by enumeration of all edge subsets (at most 24 edges)."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _kernels
from .measure import ENUMERATION_MAX_GROUND
from .network import Network

MAX_EDGES = 24


class ExactSizeError(ValueError):
    pass


@dataclass(frozen=True)
class PartitionPolynomial:
    """Coefficients ``Z_k = sum over |F| = k of prod_i mu_i(F cap E_i)``."""

    coeffs: np.ndarray

    @property
    def degree(self) -> int:
        nz = np.flatnonzero(self.coeffs > 0)
        return int(nz[-1]) if nz.size else -1

    def evaluate(self, t: float) -> float:
        return float(np.polynomial.polynomial.polyval(t, self.coeffs))

    def _log_terms(self, t: float):
        k = np.flatnonzero(self.coeffs > 0)
        if k.size == 0:
            raise ValueError("partition polynomial vanishes")
        return k, np.log(self.coeffs[k]) + k * math.log(t)

    def log_Z(self, t: float) -> float:
        if t < 0:
            raise ValueError("activity must be nonnegative")
        if t == 0:
            z0 = self.coeffs[0]
            return math.log(z0) if z0 > 0 else -math.inf
        k, logs = self._log_terms(t)
        top = logs.max()
        return float(top + math.log(np.exp(logs - top).sum()))

    def energy(self, t: float) -> float:
        """``t Z'(t) / Z(t)``, evaluated with log-scaled terms."""
        if t < 0:
            raise ValueError("activity must be nonnegative")
        if t == 0:
            return 0.0 if self.coeffs[0] > 0 else float(self.degree)
        k, logs = self._log_terms(t)
        w = np.exp(logs - logs.max())
        return float(np.dot(k, w) / w.sum())


def _check_size(net: Network) -> None:
    if net.n_edges > MAX_EDGES:
        raise ExactSizeError(f"exact enumeration limited to {MAX_EDGES} edges, got {net.n_edges}")


def _weight_tables(net: Network):
    woff = np.zeros(net.n, dtype=np.int64)
    by_count = np.zeros(net.n, dtype=np.bool_)
    chunks = []
    pos = 0
    for i, mu in enumerate(net.measures):
        woff[i] = pos
        if mu.is_exchangeable:
            w = mu.size_weights()
            by_count[i] = True
        else:
            w = mu.dense_weights()
        chunks.append(w)
        pos += len(w)
    wtab = np.concatenate(chunks) if chunks else np.zeros(0)
    return wtab, woff, by_count


def _run(net: Network, ts: Sequence[float] = (), vertices: Sequence[int] | None = None):
    _check_size(net)
    wtab, woff, by_count = _weight_tables(net)
    E = net.n_edges
    slot_u = net.arc_slot[0::2].copy()
    slot_v = net.arc_slot[1::2].copy()
    ts = np.asarray(ts, dtype=float)
    moff = np.full(net.n, -1, dtype=np.int64)
    pos = 0
    if len(ts):
        for i in (range(net.n) if vertices is None else vertices):
            d = int(net.degrees[i])
            if d > ENUMERATION_MAX_GROUND:
                raise ExactSizeError(f"vertex {i} has degree {d} > {ENUMERATION_MAX_GROUND}")
            moff[i] = pos
            pos += 1 << d
    marg = np.zeros((len(ts), pos))
    tpow = ts[:, None] ** np.arange(E + 1)[None, :] if len(ts) else np.zeros((0, E + 1))
    Z = _kernels.enumerate_subsets(
        net.n,
        net.edges[:, 0].copy(),
        net.edges[:, 1].copy(),
        slot_u,
        slot_v,
        wtab,
        woff,
        by_count,
        np.ascontiguousarray(tpow),
        moff,
        marg,
    )
    return Z, marg, moff


def partition_polynomial(net: Network) -> PartitionPolynomial:
    Z, _, _ = _run(net)
    return PartitionPolynomial(Z)


def exact_energy(poly: PartitionPolynomial, t: float) -> float:
    return poly.energy(t)


def exact_log_Z(net_or_poly, t: float) -> float:
    poly = net_or_poly if isinstance(net_or_poly, PartitionPolynomial) else partition_polynomial(net_or_poly)
    return poly.log_Z(t)


def exact_M(net_or_poly) -> int:
    poly = net_or_poly if isinstance(net_or_poly, PartitionPolynomial) else partition_polynomial(net_or_poly)
    return max(poly.degree, 0)


def exact_marginals(net: Network, ts: Sequence[float], vertices: Sequence[int] | None = None):
    """Exact local marginals ``P(F cap E_i = I)`` at each activity in ``ts``.

    Returns ``out[k][i]``: array over local bitmasks ``I`` for ``ts[k]`` and
    vertex ``i`` (a dict keyed by vertex).
    """
    ts = [float(t) for t in ts]
    if any(t < 0 for t in ts):
        raise ValueError("activities must be nonnegative")
    _, marg, moff = _run(net, ts, vertices)
    out = []
    for k in range(len(ts)):
        per_vertex = {}
        for i in np.flatnonzero(moff >= 0).tolist():
            block = marg[k, moff[i] : moff[i] + (1 << int(net.degrees[i]))]
            per_vertex[i] = block / block.sum()
        out.append(per_vertex)
    return out


def exact_marginal(net: Network, t: float, vertex: int) -> np.ndarray:
    return exact_marginals(net, [t], [vertex])[0][vertex]


def exact_edge_probability(net: Network, t: float, edge) -> float:
    """``P(edge in F)``; ``edge`` is an edge index or a vertex pair."""
    if isinstance(edge, (tuple, list)):
        u, v = int(edge[0]), int(edge[1])
    else:
        u, v = (int(z) for z in net.edges[int(edge)])
    p = exact_marginal(net, t, u)
    slot = int(net.arc_slot[net.arc(u, v)])
    masks = np.arange(len(p))
    return float(p[(masks >> slot) & 1 == 1].sum())


def exact_edge_probabilities(net: Network, t: float) -> np.ndarray:
    """``P(e in F)`` for every edge, read off the endpoint marginals."""
    marg = exact_marginals(net, [t])[0]
    out = np.zeros(net.n_edges)
    for e, (u, v) in enumerate(net.edges.tolist()):
        p = marg[u]
        slot = int(net.arc_slot[2 * e])
        masks = np.arange(len(p))
        out[e] = p[(masks >> slot) & 1 == 1].sum()
    return out
