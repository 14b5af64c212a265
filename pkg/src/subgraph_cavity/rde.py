"""Population dynamics for the distributional fixed-point equation of b-matchings.

Two laws alternate: ``P`` on ``[0, 1]`` (messages after ``Gamma``) and ``Q``
on ``(0, inf]`` (messages after ``Gamma_bar``). ``theta_bar`` maps ``P`` to
the law of ``Gamma_bar(X_1..X_N)`` and ``theta`` maps ``Q`` to the law of
``Gamma(Y_1..Y_N)``, with ``N`` drawn from the size-biased degree law.

A pool keeps the point mass at the special value (``0`` for ``P``, ``inf`` for
``Q``) as an exact number and the rest of the law as ``N_pool`` samples. The
mass of the special value after one map only depends on the previous one
through binomial sums, so it can be propagated exactly (default) or, as in
plain population dynamics, re-drawn from a binomial with ``N_pool`` trials.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .ensembles import DegreeDistribution, make_rng, size_biased

DEFAULT_POOL = 100_000
DEFAULT_ITERS = 200


@dataclass(frozen=True)
class PopulationPool:
    """Law ``atom * delta_special + (1 - atom) * empirical(samples)``.

    ``side`` is ``"P"`` (special value 0, samples in ``(0, 1]``) or ``"Q"``
    (special value inf, samples in ``(0, inf)``).
    """

    samples: np.ndarray
    atom: float
    side: str

    def __post_init__(self):
        if self.side not in ("P", "Q"):
            raise ValueError("side must be 'P' or 'Q'")
        if not 0.0 <= self.atom <= 1.0:
            raise ValueError("atom mass must be in [0, 1]")
        s = self.samples
        if self.atom < 1.0 and s.size == 0:
            raise ValueError("pool with mass off the atom needs samples")
        if s.size:
            if self.side == "P" and ((s <= 0).any() or (s > 1 + 1e-12).any()):
                raise ValueError("P-side samples must lie in (0, 1]")
            if self.side == "Q" and ((s <= 0).any() or np.isinf(s).any()):
                raise ValueError("Q-side samples must lie in (0, inf)")

    @property
    def size(self) -> int:
        return int(self.samples.size)

    @property
    def s(self) -> float:
        """``P(X > 0)`` for a P-side pool."""
        return 1.0 - self.atom

    @classmethod
    def bernoulli(cls, s: float, size: int = DEFAULT_POOL) -> "PopulationPool":
        """P-side pool with mass ``s`` at 1 and ``1 - s`` at 0."""
        if not 0.0 <= s <= 1.0:
            raise ValueError("s must be in [0, 1]")
        samples = np.ones(size) if s > 0 else np.zeros(0)
        return cls(samples, 1.0 - s, "P")

    @classmethod
    def point_mass(cls, value: float, side: str, size: int = DEFAULT_POOL) -> "PopulationPool":
        special = 0.0 if side == "P" else math.inf
        if value == special:
            return cls(np.zeros(0), 1.0, side)
        return cls(np.full(size, float(value)), 0.0, side)

    def draw(self, size: int, rng: np.random.Generator) -> np.ndarray:
        """i.i.d. draws including the special value."""
        special = 0.0 if self.side == "P" else math.inf
        out = np.full(size, special)
        keep = rng.random(size) >= self.atom
        if keep.any():
            out[keep] = self.samples[rng.integers(0, self.size, int(keep.sum()))]
        return out

    def mean(self) -> float:
        if self.side == "Q" and self.atom > 0:
            return math.inf
        return (1.0 - self.atom) * float(self.samples.mean()) if self.size else 0.0


def _count_table(pi_hat: DegreeDistribution, q: float) -> np.ndarray:
    """``w[n, k] = pi_hat(n) * Binomial(n, q)(k)``."""
    K = len(pi_hat.probs)
    n = np.arange(K)[:, None]
    k = np.arange(K)[None, :]
    return pi_hat.probs[:, None] * stats.binom.pmf(k, n, q)


def _esp_rows(values: np.ndarray, order: int) -> np.ndarray:
    e = np.zeros((values.shape[0], order + 1))
    e[:, 0] = 1.0
    for col in range(values.shape[1]):
        v = values[:, col : col + 1]
        e[:, 1:] = e[:, 1:] + v * e[:, :-1]
    return e


def _sample_counts(table: np.ndarray, mask: np.ndarray, size: int, rng):
    """Draw ``size`` pairs ``(n, k)`` from ``table`` restricted to ``mask``."""
    w = np.where(mask, table, 0.0).ravel()
    total = w.sum()
    idx = rng.choice(w.size, size=size, p=w / total)
    return np.divmod(idx, table.shape[1])


def _special_mass(table: np.ndarray, mask: np.ndarray) -> float:
    return float(min(1.0, max(0.0, table[mask].sum())))


def _resolve_atom(exact_mass: float, size: int, exact_atoms: bool, rng) -> float:
    if exact_atoms:
        return exact_mass
    return rng.binomial(size, exact_mass) / size


def theta_bar(
    P: PopulationPool, pi_hat: DegreeDistribution, b: int, rng, size: int | None = None, exact_atoms: bool = True
) -> PopulationPool:
    """Law of ``Gamma_bar(X_1..X_N)``: infinite iff fewer than ``b`` positive inputs."""
    if P.side != "P":
        raise ValueError("theta_bar needs a P-side pool")
    rng = make_rng(rng)
    size = P.size if size is None else size
    size = size or DEFAULT_POOL
    table = _count_table(pi_hat, 1.0 - P.atom)  # k = number of positive inputs
    k = np.broadcast_to(np.arange(table.shape[1])[None, :], table.shape)
    infinite = k < b
    atom = _resolve_atom(_special_mass(table, infinite), size, exact_atoms, rng)
    if atom >= 1.0 or not (table * ~infinite).sum() > 0:
        return PopulationPool(np.zeros(0), 1.0, "Q")
    _, kk = _sample_counts(table, ~infinite, size, rng)
    out = np.empty(size)
    for kv in np.unique(kk):
        rows = np.flatnonzero(kk == kv)
        vals = P.samples[rng.integers(0, P.size, (len(rows), kv))]
        e = _esp_rows(vals, b)
        out[rows] = e[:, b - 1] / e[:, b]
    return PopulationPool(out, atom, "Q")


def theta(
    Q: PopulationPool, pi_hat: DegreeDistribution, b: int, rng, size: int | None = None, exact_atoms: bool = True
) -> PopulationPool:
    """Law of ``Gamma(Y_1..Y_N)``: zero iff at least ``b`` inputs are infinite."""
    if Q.side != "Q":
        raise ValueError("theta needs a Q-side pool")
    rng = make_rng(rng)
    size = Q.size if size is None else size
    size = size or DEFAULT_POOL
    table = _count_table(pi_hat, Q.atom)  # k = number of infinite inputs
    k = np.broadcast_to(np.arange(table.shape[1])[None, :], table.shape)
    zero = k >= b
    atom = _resolve_atom(_special_mass(table, zero), size, exact_atoms, rng)
    if atom >= 1.0 or not (table * ~zero).sum() > 0:
        return PopulationPool(np.zeros(0), 1.0, "P")
    nn, LL = _sample_counts(table, ~zero, size, rng)
    out = np.empty(size)
    for nv, Lv in set(zip(nn.tolist(), LL.tolist())):
        rows = np.flatnonzero((nn == nv) & (LL == Lv))
        m = nv - Lv
        if m:
            vals = Q.samples[rng.integers(0, Q.size, (len(rows), m))]
        else:
            vals = np.zeros((len(rows), 0))
        top = b - Lv
        e = _esp_rows(vals, top)
        # conditioning on the L infinite inputs shifts the capacity to b - L
        out[rows] = e[:, :top].sum(axis=1) / e[:, : top + 1].sum(axis=1)
    return PopulationPool(out, atom, "P")


def _energy_given_infinities(vals: np.ndarray, L: int, b: int) -> np.ndarray:
    if L >= b:
        return np.full(vals.shape[0], float(b))
    top = b - L
    e = _esp_rows(vals, top)
    j = np.arange(top + 1)
    return L + (e * j).sum(axis=1) / e.sum(axis=1)


@dataclass(frozen=True)
class MEstimate:
    mean: float
    stderr: float
    n_eval: int


def M_of(
    P: PopulationPool, pi: DegreeDistribution, b: int, n_eval: int, rng, exact_atoms: bool = True
) -> MEstimate:
    """Monte Carlo estimate of ``E[U(Y_1..Y_N) / 2]`` with ``N ~ pi`` and ``Y_i ~ theta_bar(P)``."""
    if pi.mean == 0:
        # isolated vertices carry no edges
        return MEstimate(0.0, 0.0, n_eval)
    rng = make_rng(rng)
    pi_hat = size_biased(pi)
    Q = theta_bar(P, pi_hat, b, rng, size=max(n_eval, P.size or 1), exact_atoms=exact_atoms)
    table = _count_table(pi, Q.atom)
    mask = np.ones_like(table, dtype=bool)
    nn, LL = _sample_counts(table, mask, n_eval, rng)
    U = np.empty(n_eval)
    for nv, Lv in set(zip(nn.tolist(), LL.tolist())):
        rows = np.flatnonzero((nn == nv) & (LL == Lv))
        m = nv - Lv
        if m and Q.size:
            vals = Q.samples[rng.integers(0, Q.size, (len(rows), m))]
        else:
            vals = np.zeros((len(rows), 0))
        U[rows] = _energy_given_infinities(vals, Lv, b)
    half = 0.5 * U
    se = float(half.std(ddof=1) / math.sqrt(n_eval)) if n_eval > 1 else math.inf
    return MEstimate(float(half.mean()), se, n_eval)


@dataclass
class RDETrajectory:
    """Pools ``P_0..P_n`` (only the last is kept unless ``keep_pools``) and ``s_n``."""

    s: list
    M: list
    M_stderr: list
    final: PopulationPool
    pools: list
    non_monotone: bool
    stopped_early: bool


def solve_rde(
    pi: DegreeDistribution,
    b: int,
    s_init: float,
    n_pool: int = DEFAULT_POOL,
    n_iters: int = DEFAULT_ITERS,
    rng=0,
    exact_atoms: bool = True,
    early_stop: bool = False,
    track_M: bool = False,
    n_eval: int | None = None,
    keep_pools: bool = False,
) -> RDETrajectory:
    """Iterate ``P -> theta(theta_bar(P))`` from the Bernoulli(``s_init``) pool.

    ``s_n`` is the mass off zero of ``P_n``. With ``early_stop`` the loop ends
    once ``|s_{n+1} - s_n|`` falls below ``3 / sqrt(n_pool)``. Since the exact
    ``s_n`` sequence is monotone, a reversal beyond that noise floor sets
    ``non_monotone``.
    """
    rng = make_rng(rng)
    pi_hat = size_biased(pi)
    P = PopulationPool.bernoulli(s_init, n_pool)
    floor = 3.0 / math.sqrt(n_pool)
    s_list = [P.s]
    M_list, se_list = [], []
    pools = [P] if keep_pools else []
    n_eval = n_eval or n_pool

    def record_M(pool):
        if track_M:
            est = M_of(pool, pi, b, n_eval, rng, exact_atoms)
            M_list.append(est.mean)
            se_list.append(est.stderr)

    record_M(P)
    direction = 0.0
    non_monotone = False
    stopped = False
    for _ in range(n_iters):
        Q = theta_bar(P, pi_hat, b, rng, size=n_pool, exact_atoms=exact_atoms)
        P = theta(Q, pi_hat, b, rng, size=n_pool, exact_atoms=exact_atoms)
        step = P.s - s_list[-1]
        s_list.append(P.s)
        if keep_pools:
            pools.append(P)
        record_M(P)
        if direction == 0.0 and abs(step) > floor:
            direction = math.copysign(1.0, step)
        elif direction and -direction * step > floor:
            non_monotone = True
        if early_stop and abs(step) < floor:
            stopped = True
            break
    return RDETrajectory(s_list, M_list, se_list, P, pools, non_monotone, stopped)


def wasserstein_P(a: PopulationPool, b: PopulationPool) -> float:
    """W1 distance between two P-side pools."""
    def parts(p):
        vals = np.concatenate([[0.0], p.samples])
        w = np.concatenate([[p.atom], np.full(p.size, (1.0 - p.atom) / max(p.size, 1))])
        return vals, w

    va, wa = parts(a)
    vb, wb = parts(b)
    return float(stats.wasserstein_distance(va, vb, wa, wb))


def cluster_pools(pools: list, tol: float = 0.02) -> list[list[int]]:
    """Greedy grouping of pools within W1 distance ``tol`` of a group's first member."""
    groups: list[list[int]] = []
    for i, p in enumerate(pools):
        for g in groups:
            if wasserstein_P(pools[g[0]], p) <= tol:
                g.append(i)
                break
        else:
            groups.append([i])
    return groups
