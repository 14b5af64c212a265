"""Closed-form large-graph limits for b-matchings on Galton-Watson trees.

For a degree law ``pi`` with generating function ``phi(s) = sum_k pi_k s^k``
and mean ``c = phi'(1)``:

    f(s) = (1/c) sum_{k<b} s^k phi^(k+1)(1-s) / k!
    g(s) = sum_{k<=b} s^k phi^(k)(1-s) / k!
    H(s) = b - (b/2) g(s) - (b/2) g(f(s)) + (c/2) f(s) f(f(s))

The limiting maximum b-matching size per vertex is ``H`` evaluated at its
historical minima among the fixed points of ``f o f``; ``m_b`` is the global
minimum of ``H`` on ``[0, 1]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .ensembles import DegreeDistribution

DEFAULT_GRID = 10_000
DEFAULT_TOL = 1e-12


@dataclass(frozen=True)
class LimitSpec:
    pi: DegreeDistribution
    b: int

    def __post_init__(self):
        if int(self.b) != self.b or self.b < 1:
            raise ValueError("b must be an integer >= 1")
        if not self.pi.mean > 0:
            raise ValueError("degree law must have positive mean")

    @property
    def c(self) -> float:
        return self.pi.mean


def phi_deriv(pi: DegreeDistribution, k: int, s):
    """``phi^(k)(s) = sum_n n!/(n-k)! pi_n s^(n-k)``."""
    p = pi.probs
    if k >= len(p):
        return np.zeros_like(np.asarray(s, dtype=float)) + 0.0
    n = np.arange(k, len(p))
    falling = np.ones(len(n))
    for j in range(k):
        falling *= n - j
    coeffs = falling * p[k:]
    return np.polynomial.polynomial.polyval(s, coeffs)


def f_b(spec: LimitSpec, s):
    s = np.asarray(s, dtype=float)
    total = np.zeros_like(s)
    for k in range(spec.b):
        total = total + s**k * phi_deriv(spec.pi, k + 1, 1 - s) / math.factorial(k)
    return total / spec.c


def g_b(spec: LimitSpec, s):
    s = np.asarray(s, dtype=float)
    total = np.zeros_like(s)
    for k in range(spec.b + 1):
        total = total + s**k * phi_deriv(spec.pi, k, 1 - s) / math.factorial(k)
    return total


def f_prime(spec: LimitSpec, s):
    """Derivative of ``f_b``, differentiating the defining sum term by term."""
    s = np.asarray(s, dtype=float)
    total = np.zeros_like(s)
    for k in range(spec.b):
        dk = -(s**k) * phi_deriv(spec.pi, k + 2, 1 - s)
        if k:
            dk = dk + k * s ** (k - 1) * phi_deriv(spec.pi, k + 1, 1 - s)
        total = total + dk / math.factorial(k)
    return total / spec.c


def ff(spec: LimitSpec, s):
    return f_b(spec, f_b(spec, s))


def H(spec: LimitSpec, s):
    b, c = spec.b, spec.c
    fs = f_b(spec, s)
    ffs = f_b(spec, fs)
    return b - 0.5 * b * g_b(spec, s) - 0.5 * b * g_b(spec, fs) + 0.5 * c * fs * ffs


def H_prime(spec: LimitSpec, s):
    """``(c/2) f'(s) ((f o f)(s) - s)``, using ``g_b' = (c s / b) f_b'``."""
    return 0.5 * spec.c * f_prime(spec, s) * (ff(spec, s) - np.asarray(s, dtype=float))


def _scalar(x) -> float:
    return float(np.asarray(x))


@dataclass(frozen=True)
class MinimaReport:
    """Fixed points of ``f o f`` and the historical minima of ``H`` among them.

    ``tangential`` lists grid points where ``f o f - id`` nearly vanishes
    without changing sign; ``degenerate`` marks an ``H`` that is constant on
    the grid (every point minimizes it).
    """

    roots: list
    H_values: list
    historical_minima: list
    historical_H: list
    m_b: float
    grid_min: float
    tangential: list = field(default_factory=list)
    degenerate: bool = False

    def as_dict(self) -> dict:
        return {
            "roots": list(self.roots),
            "H_values": list(self.H_values),
            "historical_minima": list(self.historical_minima),
            "historical_H": list(self.historical_H),
            "m_b": self.m_b,
            "grid_min": self.grid_min,
            "tangential": list(self.tangential),
            "degenerate": self.degenerate,
        }


def _roots_of(h, grid: np.ndarray, values: np.ndarray, tol: float):
    """Sign changes of ``h`` on the grid, refined by bisection, plus exact grid zeros."""
    roots = []
    tangential = []
    zero = values == 0.0
    for i in range(len(grid)):
        if zero[i]:
            roots.append(float(grid[i]))
    for i in range(len(grid) - 1):
        a, b = values[i], values[i + 1]
        if a * b < 0:
            roots.append(float(brentq(h, grid[i], grid[i + 1], xtol=tol, rtol=4 * np.finfo(float).eps)))
    # near-zero local extrema of |h| without a sign change
    absv = np.abs(values)
    step = grid[1] - grid[0]
    for i in range(1, len(grid) - 1):
        if zero[i] or values[i - 1] * values[i + 1] < 0:
            continue
        if absv[i] <= absv[i - 1] and absv[i] <= absv[i + 1] and absv[i] < step**2:
            if values[i - 1] * values[i] > 0 and values[i] * values[i + 1] > 0:
                tangential.append(float(grid[i]))
    return sorted(set(roots)), tangential


def historical_minima(spec: LimitSpec, grid_n: int = DEFAULT_GRID, tol: float = DEFAULT_TOL) -> MinimaReport:
    if grid_n < 1000:
        raise ValueError("grid_n must be >= 1000")
    grid = np.linspace(0.0, 1.0, grid_n + 1)

    def h(s):
        return _scalar(ff(spec, s)) - s

    hv = ff(spec, grid) - grid
    # endpoint values within rounding of zero are roots
    for idx in (0, -1):
        if abs(hv[idx]) < 1e-14:
            hv[idx] = 0.0
    roots, tangential = _roots_of(h, grid, hv, tol)
    Hgrid = H(spec, grid)
    Hroots = [_scalar(H(spec, r)) for r in roots]
    grid_min = float(Hgrid.min())
    degenerate = bool(Hgrid.max() - grid_min < 1e-12)
    step = grid[1] - grid[0]
    hist, hist_H = [], []
    for r, Hr in zip(roots, Hroots):
        left = Hgrid[grid < r - 2 * step]
        earlier = [Hv for rr, Hv in zip(roots, Hroots) if rr < r]
        candidates = np.concatenate([left, earlier]) if len(left) or earlier else np.zeros(0)
        # H must come down into r from the left: f o f > id just below r
        descending = r == 0.0 or h(max(0.0, r - 1e-7)) > 0
        if descending and (candidates.size == 0 or Hr < candidates.min() - 1e-13):
            hist.append(r)
            hist_H.append(Hr)
    m_b = min([grid_min] + Hroots)
    return MinimaReport(
        roots=roots,
        H_values=Hroots,
        historical_minima=hist,
        historical_H=hist_H,
        m_b=float(m_b),
        grid_min=grid_min,
        tangential=tangential,
        degenerate=degenerate,
    )


def karp_sipser_root(c: float, grid_n: int = DEFAULT_GRID, tol: float = 1e-15) -> float:
    """Smallest root in ``[0, 1]`` of ``t = exp(-c exp(-c t))``."""
    if not c > 0:
        raise ValueError("c must be positive")

    def F(t):
        return math.exp(-c * math.exp(-c * t)) - t

    grid = np.linspace(0.0, 1.0, grid_n + 1)
    vals = np.exp(-c * np.exp(-c * grid)) - grid
    for i in range(grid_n):
        if vals[i] == 0.0:
            return float(grid[i])
        if vals[i] * vals[i + 1] < 0:
            return float(brentq(F, grid[i], grid[i + 1], xtol=tol, rtol=4 * np.finfo(float).eps))
    return 1.0


def karp_sipser(c: float) -> float:
    """Limiting maximum matching size per vertex in G(n, c/n)."""
    if c == 0:
        return 0.0
    t = karp_sipser_root(c)
    e = math.exp(-c * t)
    return 1.0 - 0.5 * (t + e + c * t * e)


def limit_table(spec: LimitSpec, n_points: int = 1001) -> np.ndarray:
    """Rows ``(s, f(s), g(s), H(s))`` on a uniform grid of ``[0, 1]``."""
    s = np.linspace(0.0, 1.0, n_points)
    return np.column_stack([s, f_b(spec, s), g_b(spec, s), H(spec, s)])
