"""Cavity (belief-propagation) equations for networks with local measures.

Messages live on directed arcs (see :mod:`subgraph_cavity.network`). One
synchronous sweep maps a configuration ``x`` to ``y`` with

    y[i->j] = t * Gamma_i(x[k->i] for k in neighbours(i) except j).

Started from the zero configuration the even iterates increase and the odd
iterates decrease towards the unique fixed point for cavity-monotone
measures, so the last two iterates bracket it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .measure import (
    ENUMERATION_MAX_GROUND,
    INF,
    MeasureDomainError,
    cavity_monotone_status,
    cavity_ratio,
    energy,
    infinite_cavity_ratio,
    weight_spread,
)
from .network import Network, diameter_upper_bound, is_forest

DEFAULT_TOL = 1e-10


class NotCavityMonotoneError(ValueError):
    pass


class EnergyIdentityError(RuntimeError):
    """The vertex and edge forms of the energy disagree (a measure bug)."""


class NotConvergedError(RuntimeError):
    pass


# -- compiled per-network data --------------------------------------------------


@dataclass
class _Prepared:
    coef: np.ndarray
    cptr: np.ndarray
    active: np.ndarray
    table_vertices: list


def _prepare(net: Network) -> _Prepared:
    prep = net._cache.get("prepared")
    if prep is not None:
        return prep
    chunks = []
    cptr = np.zeros(net.n + 1, dtype=np.int64)
    active = np.zeros(net.n, dtype=np.bool_)
    table_vertices = []
    for i, mu in enumerate(net.measures):
        if mu.is_exchangeable:
            c = mu.size_weights()
            nz = np.flatnonzero(c > 0)
            c = c[: nz[-1] + 1] if nz.size else c[:1]
            active[i] = True
        else:
            c = np.zeros(0)
            table_vertices.append(i)
        chunks.append(c)
        cptr[i + 1] = cptr[i] + len(c)
    coef = np.concatenate(chunks) if chunks else np.zeros(0)
    prep = _Prepared(coef, cptr, active, table_vertices)
    net._cache["prepared"] = prep
    return prep


def validate_network(net: Network) -> None:
    """Reject measures without ``mu(empty) > 0`` or known not to be cavity-monotone.

    Exchangeable measures are decided exactly. For general tables only the
    necessary conditions (positive empty weight, matroid support) are checked.
    """
    if net._cache.get("validated"):
        return
    for i, mu in enumerate(net.measures):
        if mu.empty_weight() <= 0:
            raise MeasureDomainError(f"vertex {i}: measure gives zero weight to the empty set")
        if cavity_monotone_status(mu) is False:
            raise NotCavityMonotoneError(f"vertex {i}: measure is not cavity-monotone")
    net._cache["validated"] = True


def _incoming(net: Network, x: np.ndarray, i: int) -> np.ndarray:
    return x[net.in_arc[net.ptr[i] : net.ptr[i + 1]]]


def _check_config(net: Network, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (net.n_arcs,):
        raise ValueError(f"configuration must have {net.n_arcs} entries")
    if np.isnan(x).any() or (x < 0).any():
        raise ValueError("configuration entries must be in [0, inf]")
    return x


# -- sweeps -------------------------------------------------------------------


def _sweep(net: Network, x: np.ndarray, t: float, out: np.ndarray | None = None) -> np.ndarray:
    prep = _prepare(net)
    if out is None:
        out = np.empty(net.n_arcs)
    _kernels.gamma_sweep(x, net.ptr, net.in_arc, net.out_arc, prep.coef, prep.cptr, prep.active, float(t), out)
    for i in prep.table_vertices:
        mu = net.measures[i]
        inc = _incoming(net, x, i)
        lo = net.ptr[i]
        for s in range(len(inc)):
            g = cavity_ratio(mu, s, np.delete(inc, s))
            out[net.out_arc[lo + s]] = INF if g == INF else t * g
    return out


def _bar_sweep(net: Network, x: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
    prep = _prepare(net)
    if out is None:
        out = np.empty(net.n_arcs)
    _kernels.gamma_bar_sweep(x, net.ptr, net.in_arc, net.out_arc, prep.coef, prep.cptr, prep.active, out)
    for i in prep.table_vertices:
        mu = net.measures[i]
        inc = _incoming(net, x, i)
        lo = net.ptr[i]
        for s in range(len(inc)):
            out[net.out_arc[lo + s]] = infinite_cavity_ratio(mu, s, np.delete(inc, s))
    return out


def cavity_update(net: Network, x, t: float) -> np.ndarray:
    """One synchronous sweep of the cavity map at activity ``t``."""
    if not t > 0:
        raise ValueError("activity must be positive")
    return _sweep(net, _check_config(net, x), t)


def cavity_update_reference(net: Network, x, t: float) -> np.ndarray:
    """Same map through the generic measure code, one arc at a time (for cross-checks)."""
    x = _check_config(net, x)
    y = np.empty(net.n_arcs)
    for i, mu in enumerate(net.measures):
        inc = _incoming(net, x, i)
        for s in range(len(inc)):
            g = cavity_ratio(mu, s, np.delete(inc, s))
            y[net.out_arc[net.ptr[i] + s]] = INF if g == INF else t * g
    return y


def iterate_cavity(net: Network, t: float, n_iters: int, x0=None) -> list[np.ndarray]:
    """Iterates ``x^0, ..., x^n_iters`` of the synchronous map."""
    x = np.zeros(net.n_arcs) if x0 is None else _check_config(net, x0).copy()
    out = [x]
    for _ in range(n_iters):
        x = _sweep(net, x, t)
        out.append(x)
    return out


def config_gap(a: np.ndarray, b: np.ndarray) -> float:
    """Largest arcwise discrepancy; absolute below 1, relative above."""
    if a.size == 0:
        return 0.0
    inf_a = np.isinf(a)
    inf_b = np.isinf(b)
    if np.any(inf_a != inf_b):
        return INF
    fin = ~inf_a
    if not fin.any():
        return 0.0
    aa, bb = a[fin], b[fin]
    scale = np.maximum(1.0, np.maximum(np.abs(aa), np.abs(bb)))
    return float(np.max(np.abs(aa - bb) / scale))


@dataclass
class CavitySolution:
    """Bracket ``x_minus <= fixed point <= x_plus`` and convergence report.

    ``t`` is ``math.inf`` for infinite-activity solutions.
    """

    t: float
    x_minus: np.ndarray
    x_plus: np.ndarray
    gap: float
    iterations: int
    converged: bool
    tol: float = DEFAULT_TOL

    @property
    def estimate(self) -> np.ndarray:
        if math.isinf(self.t):
            return self.x_minus
        mid = 0.5 * (self.x_minus + self.x_plus)
        both_inf = np.isinf(self.x_minus) & np.isinf(self.x_plus)
        mid[both_inf] = INF
        return mid


def default_max_iters(net: Network) -> int:
    if "max_iters" not in net._cache:
        net._cache["max_iters"] = 10 * diameter_upper_bound(net) + 1000
    return net._cache["max_iters"]


def solve_cavity(
    net: Network,
    t: float,
    max_iters: int | None = None,
    tol: float = DEFAULT_TOL,
    x0=None,
    validate: bool = True,
) -> CavitySolution:
    """Iterate the cavity map until two consecutive iterates agree to ``tol``."""
    if not (t > 0 and math.isfinite(t)):
        raise ValueError("activity must be a positive finite number")
    if not tol > 0:
        raise ValueError("tol must be positive")
    if validate:
        validate_network(net)
    if max_iters is None:
        max_iters = default_max_iters(net)
    prev = np.zeros(net.n_arcs) if x0 is None else _check_config(net, x0).copy()
    if net.n_arcs == 0:
        return CavitySolution(t, prev, prev.copy(), 0.0, 0, True, tol)
    cur = np.empty_like(prev)
    gap = INF
    it = 0
    while it < max_iters:
        _sweep(net, prev, t, cur)
        it += 1
        gap = config_gap(prev, cur)
        if gap <= tol:
            break
        prev, cur = cur, prev
    else:
        prev, cur = cur, prev
    lo = np.minimum(prev, cur)
    hi = np.maximum(prev, cur)
    return CavitySolution(t, lo, hi, gap, it, gap <= tol, tol)


# -- energies and marginals ----------------------------------------------------


@dataclass(frozen=True)
class EnergyReport:
    total: float
    per_vertex: np.ndarray
    per_edge: np.ndarray
    edge_form_total: float


def vertex_energies(net: Network, x: np.ndarray) -> np.ndarray:
    """``U_i`` at the incoming messages of every vertex (infinite entries allowed)."""
    prep = _prepare(net)
    out = np.zeros(net.n)
    _kernels.energy_vertices(x, net.ptr, net.in_arc, prep.coef, prep.cptr, prep.active, out)
    for i in prep.table_vertices:
        out[i] = energy(net.measures[i], _incoming(net, x, i))
    return out


def edge_probabilities(net: Network, x: np.ndarray, t: float) -> np.ndarray:
    a = x[0::2]
    b = x[1::2]
    prod = a * b
    with np.errstate(invalid="ignore"):
        p = prod / (t + prod)
    p[np.isinf(prod)] = 1.0
    p[(a == 0) | (b == 0)] = 0.0
    return p


def energy_at(net: Network, sol: CavitySolution, rtol: float = 1e-9) -> EnergyReport:
    """Energy of the Gibbs measure from the fixed point, in vertex and edge form."""
    if math.isinf(sol.t):
        raise ValueError("use rank_estimate for infinite-activity solutions")
    if not sol.converged:
        raise NotConvergedError(f"cavity iteration did not converge (gap {sol.gap:.3g})")
    x = sol.estimate
    per_vertex = vertex_energies(net, x)
    per_edge = edge_probabilities(net, x, sol.t)
    total = 0.5 * float(per_vertex.sum())
    edge_total = float(per_edge.sum())
    # the two forms coincide only at the fixed point; allow for the remaining gap
    allowed = max(rtol, 10.0 * sol.gap)
    if abs(total - edge_total) > allowed * max(1.0, abs(total)):
        raise EnergyIdentityError(f"vertex form {total!r} differs from edge form {edge_total!r}")
    return EnergyReport(total, per_vertex, per_edge, edge_total)


def marginal(net: Network, sol: CavitySolution, i: int) -> np.ndarray:
    """Local marginal ``P(F cap E_i = I)`` indexed by the slot bitmask ``I``."""
    d = int(net.degrees[i])
    if d > ENUMERATION_MAX_GROUND:
        raise ValueError(f"vertex {i} has degree {d} > {ENUMERATION_MAX_GROUND}")
    inc = _incoming(net, sol.estimate, i)
    if np.isinf(inc).any():
        raise ValueError("marginals need finite incoming messages")
    w = net.measures[i].dense_weights()
    prod = np.ones(1)
    for v in inc:
        prod = np.concatenate([prod, prod * v])
    p = w * prod
    return p / p.sum()


def edge_probability(net: Network, sol: CavitySolution, edge) -> float:
    """``P(edge in F)`` from the two messages on the edge; ``edge`` is an index or a pair."""
    if isinstance(edge, (tuple, list)):
        e = net.edge_index(int(edge[0]), int(edge[1]))
    else:
        e = int(edge)
    x = sol.estimate
    return float(edge_probabilities(net, x[2 * e : 2 * e + 2], sol.t)[0])


# -- free entropy ---------------------------------------------------------------


@dataclass(frozen=True)
class FreeEntropyReport:
    """``(1/|V|) log Z`` estimate with its quadrature bookkeeping.

    ``exact_on_graph`` is True for forests, where the cavity energy is exact.
    """

    value: float
    t: float
    delta: float
    tail_bound: float
    error_estimate: float
    n_evals: int
    exact_on_graph: bool


def spread_sum(net: Network) -> float:
    A = np.array([weight_spread(mu) for mu in net.measures]) if net.n else np.zeros(0)
    if net.n_edges == 0:
        return 0.0
    return float(np.sum(A[net.edges[:, 0]] * A[net.edges[:, 1]]))


def _energy_density(net: Network, s: float, tol: float) -> float:
    sol = solve_cavity(net, s, tol=tol, validate=False)
    if not sol.converged:
        raise NotConvergedError(f"cavity iteration did not converge at t={s} (gap {sol.gap:.3g})")
    return energy_at(net, sol).total / net.n


def _adaptive_simpson(f, a, b, eps, max_depth=40):
    fa, fb = f(a), f(b)
    m = 0.5 * (a + b)
    fm = f(m)
    whole = (b - a) / 6.0 * (fa + 4 * fm + fb)
    err_total = [0.0]

    def rec(a, b, fa, fm, fb, whole, eps, depth):
        m = 0.5 * (a + b)
        lm, rm = 0.5 * (a + m), 0.5 * (m + b)
        flm, frm = f(lm), f(rm)
        left = (m - a) / 6.0 * (fa + 4 * flm + fm)
        right = (b - m) / 6.0 * (fm + 4 * frm + fb)
        diff = left + right - whole
        if depth <= 0 or abs(diff) <= 15 * eps:
            err_total[0] += abs(diff) / 15
            return left + right + diff / 15
        return rec(a, m, fa, flm, fm, left, eps / 2, depth - 1) + rec(m, b, fm, frm, fb, right, eps / 2, depth - 1)

    value = rec(a, b, fa, fm, fb, whole, eps, max_depth)
    return value, err_total[0]


def free_entropy(net: Network, t: float, tol: float = 1e-7, solver_tol: float = 1e-12) -> FreeEntropyReport:
    """``(1/|V|) sum_i log mu_i(empty) + int_0^t u(s)/s ds`` with the cavity energy density ``u``.

    The piece on ``[0, delta]`` is bounded by ``delta * sum_ij A_i A_j / |V|``;
    ``delta`` is halved until that bound is below ``tol / 2`` and the piece is
    estimated by ``u(delta)``. The rest is integrated by adaptive Simpson in
    ``log s`` to ``tol / 2``.
    """
    if not (t > 0 and math.isfinite(t)):
        raise ValueError("activity must be a positive finite number")
    if net.n == 0:
        raise ValueError("empty network")
    validate_network(net)
    empties = np.array([mu.empty_weight() for mu in net.measures])
    base = float(np.log(empties).mean())
    forest = is_forest(net)
    if net.n_edges == 0:
        return FreeEntropyReport(base, t, t, 0.0, 0.0, 0, True)
    rate = spread_sum(net) / net.n
    delta = t
    while delta * rate >= tol / 2:
        delta /= 2
    memo: dict[float, float] = {}

    def g(theta):
        if theta not in memo:
            memo[theta] = _energy_density(net, math.exp(theta), solver_tol)
        return memo[theta]

    head = _energy_density(net, delta, solver_tol)
    if delta < t:
        body, err = _adaptive_simpson(g, math.log(delta), math.log(t), tol / 2)
    else:
        body, err = 0.0, 0.0
    return FreeEntropyReport(
        value=base + head + body,
        t=t,
        delta=delta,
        tail_bound=delta * rate,
        error_estimate=err + delta * rate,
        n_evals=len(memo) + 1,
        exact_on_graph=forest,
    )


# -- infinite activity ------------------------------------------------------------


def _double_step(net: Network, z: np.ndarray) -> np.ndarray:
    return _bar_sweep(net, _sweep(net, z, 1.0))


def solve_infinite_activity(
    net: Network, max_iters: int | None = None, tol: float = DEFAULT_TOL, validate: bool = True
) -> CavitySolution:
    """Limit messages ``x_bar`` of the even iterates as the activity grows.

    The lower envelope iterates ``z -> Gamma_bar(Gamma(z))`` from zero and is
    non-decreasing; the upper envelope runs the same map from the all-infinite
    configuration and is non-increasing. Convergence means the two agree.
    """
    if validate:
        validate_network(net)
    if max_iters is None:
        max_iters = default_max_iters(net)
    lo = np.zeros(net.n_arcs)
    hi = np.full(net.n_arcs, INF)
    if net.n_arcs == 0:
        return CavitySolution(INF, lo, lo.copy(), 0.0, 0, True, tol)
    gap = config_gap(lo, hi)
    it = 0
    while it < max_iters and gap > tol:
        lo_new = _double_step(net, lo)
        hi_new = _double_step(net, hi)
        it += 1
        stalled = config_gap(lo, lo_new) <= tol * 1e-3 and config_gap(hi, hi_new) <= tol * 1e-3
        lo, hi = lo_new, hi_new
        gap = config_gap(lo, hi)
        if stalled:
            break
    return CavitySolution(INF, lo, hi, gap, it, gap <= tol, tol)


def rank_estimate(net: Network, sol: CavitySolution) -> float:
    """``(1/2) sum_i U_i`` at the incoming lower-envelope messages."""
    return 0.5 * float(vertex_energies(net, sol.x_minus).sum())


# -- energy bounds -------------------------------------------------------------------


@dataclass(frozen=True)
class EnergyBounds:
    upper: float
    lower: float | None
    max_size: float
    max_size_is_exact: bool


def energy_bounds(net: Network, t: float) -> EnergyBounds:
    """Upper bound ``t sum_ij A_i A_j`` and, for ``t > 1``, the lower bound
    ``M - (|E| log 2 + sum_i log A_i) / log t`` on the total energy."""
    from .exact import MAX_EDGES, exact_M

    if not t > 0:
        raise ValueError("activity must be positive")
    upper = t * spread_sum(net)
    if net.n_edges <= MAX_EDGES:
        M = float(exact_M(net))
        exact = True
    else:
        M = rank_estimate(net, solve_infinite_activity(net))
        exact = False
    lower = None
    if t > 1:
        log_a = sum(math.log(weight_spread(mu)) for mu in net.measures)
        lower = M - (net.n_edges * math.log(2) + log_a) / math.log(t)
    return EnergyBounds(upper, lower, M, exact)
