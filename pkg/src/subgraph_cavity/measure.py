"""Local measures over subsets of a finite ground set.

A local measure assigns a nonnegative weight to every subset of the edges
incident to one vertex. Three representations are supported: an explicit
table, an exchangeable measure (the weight depends only on the subset size)
and the b-matching measure ``1(|F| <= b)``, which is the exchangeable measure
with coefficients ``(1, ..., 1, 0, ..., 0)`` and is evaluated through exactly
the same code path.

Subsets are handled internally as integer bitmasks (bit ``e`` set means the
ground element ``e`` belongs to the subset).

Extended reals are plain floats with ``math.inf`` as the only infinite value.
Whenever an external field contains infinite entries, the products ``0 * inf``
are never formed: every such case is resolved by letting all the infinite
entries grow jointly and comparing the leading terms of the resulting
polynomials in the common scale.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

INF = math.inf
TABLE_MAX_GROUND = 24
ENUMERATION_MAX_GROUND = 20

KINDS = ("table", "exchangeable", "bmatching")


class MeasureError(ValueError):
    """Invalid measure or invalid argument to a measure operation."""


class MeasureSizeError(MeasureError):
    pass


class MeasureDomainError(MeasureError):
    pass


def esp(values: Sequence[float], order: int | None = None) -> np.ndarray:
    """Elementary symmetric polynomials ``e_0..e_order`` of ``values``.

    One-pass recurrence; every update adds nonnegative terms when the values
    are nonnegative, so there is no cancellation.
    """
    values = np.asarray(values, dtype=float)
    if order is None:
        order = len(values)
    e = np.zeros(order + 1)
    e[0] = 1.0
    for k, v in enumerate(values):
        top = min(k + 1, order)
        if top:
            e[1 : top + 1] += v * e[:top]
    return e


def _popcount(mask: int) -> int:
    return bin(mask).count("1")


def subset_to_mask(subset: Iterable[int], ground_size: int) -> int:
    mask = 0
    for e in subset:
        e = int(e)
        if e < 0 or e >= ground_size:
            raise MeasureDomainError(f"element {e} outside ground set of size {ground_size}")
        mask |= 1 << e
    return mask


def mask_to_subset(mask: int) -> tuple[int, ...]:
    out = []
    e = 0
    while mask:
        if mask & 1:
            out.append(e)
        mask >>= 1
        e += 1
    return tuple(out)


@dataclass(frozen=True)
class LocalMeasure:
    """A nonnegative weight function on subsets of ``{0, ..., ground_size - 1}``.

    Build instances with :meth:`bmatching`, :meth:`exchangeable` or
    :meth:`from_table` rather than calling the constructor directly.
    """

    kind: str
    ground_size: int
    table: Mapping[int, float] | None = None
    coeffs: tuple[float, ...] | None = None
    capacity: int | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise MeasureError(f"unknown measure kind {self.kind!r}")
        if self.ground_size < 0:
            raise MeasureError("ground_size must be >= 0")
        if self.kind == "bmatching":
            if self.capacity is None or int(self.capacity) != self.capacity or self.capacity < 1:
                raise MeasureError("b-matching capacity must be an integer >= 1")
        elif self.kind == "exchangeable":
            c = self.coeffs
            if c is None or len(c) != self.ground_size + 1:
                raise MeasureError(
                    f"exchangeable measure on {self.ground_size} elements needs "
                    f"{self.ground_size + 1} coefficients"
                )
            if any(not math.isfinite(x) or x < 0 for x in c):
                raise MeasureError("coefficients must be finite and nonnegative")
            if not any(x > 0 for x in c):
                raise MeasureError("measure must give positive weight to some subset")
        else:
            if self.ground_size > TABLE_MAX_GROUND:
                raise MeasureSizeError(
                    f"table measures are limited to {TABLE_MAX_GROUND} ground elements"
                )
            if not self.table:
                raise MeasureError("measure must give positive weight to some subset")
            for mask, w in self.table.items():
                if mask < 0 or mask >> self.ground_size:
                    raise MeasureDomainError(f"subset {mask_to_subset(mask)} outside ground set")
                if not math.isfinite(w) or w <= 0:
                    raise MeasureError("table weights must be finite and positive")

    # -- constructors -------------------------------------------------------

    @classmethod
    def bmatching(cls, b: int, ground_size: int) -> "LocalMeasure":
        return cls(kind="bmatching", ground_size=int(ground_size), capacity=int(b))

    @classmethod
    def exchangeable(cls, coeffs: Sequence[float], ground_size: int | None = None) -> "LocalMeasure":
        """Exchangeable measure ``mu(F) = coeffs[|F|]``.

        With an explicit ``ground_size`` larger than ``len(coeffs) - 1`` the
        missing coefficients are zero.
        """
        c = [float(x) for x in coeffs]
        if ground_size is None:
            ground_size = len(c) - 1
        if len(c) < ground_size + 1:
            c = c + [0.0] * (ground_size + 1 - len(c))
        elif len(c) > ground_size + 1:
            if any(x != 0 for x in c[ground_size + 1 :]):
                raise MeasureError("more nonzero coefficients than the ground set allows")
            c = c[: ground_size + 1]
        return cls(kind="exchangeable", ground_size=int(ground_size), coeffs=tuple(c))

    @classmethod
    def from_table(
        cls, ground_size: int, entries: Mapping[Iterable[int], float] | Iterable[tuple[Iterable[int], float]]
    ) -> "LocalMeasure":
        """Table measure; subsets missing from ``entries`` have weight zero.

        Zero weights are dropped, repeated subsets are rejected.
        """
        items = entries.items() if isinstance(entries, Mapping) else entries
        table: dict[int, float] = {}
        for subset, w in items:
            w = float(w)
            if not math.isfinite(w) or w < 0:
                raise MeasureError("table weights must be finite and nonnegative")
            mask = subset_to_mask(subset, ground_size)
            if mask in table:
                raise MeasureError(f"subset {sorted(subset)} listed twice")
            if w > 0:
                table[mask] = w
        return cls(kind="table", ground_size=int(ground_size), table=table)

    # -- views --------------------------------------------------------------

    @property
    def is_exchangeable(self) -> bool:
        return self.kind != "table"

    def size_weights(self) -> np.ndarray:
        """Coefficient vector ``c(0..m)`` for exchangeable and b-matching measures."""
        if self.kind == "exchangeable":
            return np.array(self.coeffs, dtype=float)
        if self.kind == "bmatching":
            c = np.zeros(self.ground_size + 1)
            c[: min(self.capacity, self.ground_size) + 1] = 1.0
            return c
        raise MeasureError("table measures have no size-weight vector")

    def dense_weights(self) -> np.ndarray:
        """Weights of all ``2**m`` subsets, indexed by bitmask."""
        m = self.ground_size
        if m > TABLE_MAX_GROUND:
            raise MeasureSizeError(f"cannot enumerate {m} ground elements")
        if self.kind == "table":
            out = np.zeros(1 << m)
            for mask, w in self.table.items():
                out[mask] = w
            return out
        sizes = _popcounts(m)
        return self.size_weights()[sizes]

    def empty_weight(self) -> float:
        return evaluate(self, ())

    def support_masks(self) -> list[int]:
        if self.kind == "table":
            return sorted(self.table)
        w = self.dense_weights()
        return [int(i) for i in np.flatnonzero(w > 0)]


def _popcounts(m: int) -> np.ndarray:
    sizes = np.zeros(1 << m, dtype=np.int64)
    for e in range(m):
        sizes[1 << e : 1 << (e + 1)] = sizes[: 1 << e] + 1
    return sizes


# -- basic evaluation ---------------------------------------------------------


def evaluate(measure: LocalMeasure, subset: Iterable[int]) -> float:
    """Weight ``mu(F)`` of the subset ``F``."""
    mask = subset_to_mask(subset, measure.ground_size)
    if measure.kind == "table":
        return measure.table.get(mask, 0.0)
    return float(measure.size_weights()[_popcount(mask)])


def rank(measure: LocalMeasure) -> int:
    """Largest size of a subset with positive weight."""
    if measure.kind == "bmatching":
        return min(measure.capacity, measure.ground_size)
    if measure.kind == "exchangeable":
        return int(np.flatnonzero(np.asarray(measure.coeffs) > 0)[-1])
    return max(_popcount(mask) for mask in measure.table)


def weight_spread(measure: LocalMeasure) -> float:
    """Ratio of the largest to the smallest positive weight."""
    if measure.kind == "bmatching":
        return 1.0
    if measure.kind == "exchangeable":
        c = np.asarray(measure.coeffs)
        pos = c[c > 0]
    else:
        pos = np.fromiter(measure.table.values(), dtype=float)
    return float(pos.max() / pos.min())


def _check_field(field: Sequence[float], length: int, allow_inf: bool) -> np.ndarray:
    w = np.asarray(field, dtype=float).reshape(-1)
    if w.shape[0] != length:
        raise MeasureDomainError(f"field has length {w.shape[0]}, expected {length}")
    if np.isnan(w).any() or (w < 0).any():
        raise MeasureDomainError("field entries must be nonnegative numbers")
    if not allow_inf and np.isinf(w).any():
        raise MeasureDomainError("infinite field entries are not allowed here")
    return w


def generating_eval(measure: LocalMeasure, field: Sequence[float]) -> float:
    """Multivariate generating polynomial ``sum_F mu(F) w^F`` at a finite field."""
    w = _check_field(field, measure.ground_size, allow_inf=False)
    if measure.is_exchangeable:
        r = rank(measure)
        c = measure.size_weights()
        return float(np.dot(c[: r + 1], esp(w, r)))
    total = 0.0
    for mask, weight in measure.table.items():
        total += weight * _monomial(w, mask)
    return total


def _monomial(w: np.ndarray, mask: int) -> float:
    out = 1.0
    e = 0
    while mask:
        if mask & 1:
            out *= w[e]
        mask >>= 1
        e += 1
    return out


# -- conditioning on infinite entries ------------------------------------------
#
# Let S be the set of infinite entries of a field. Setting w_f = s for f in S
# turns every generating sum into a polynomial in s; the coefficient of s^k
# collects the subsets meeting S in exactly k elements. The limit s -> inf of a
# ratio is decided by the leading (highest nonzero) coefficients.


def _leading(poly: Mapping[int, float]) -> tuple[int, float]:
    best = (-1, 0.0)
    for k, v in poly.items():
        if v > 0 and k > best[0]:
            best = (k, v)
    return best


def _ratio_from_leading(num: Mapping[int, float], den: Mapping[int, float]) -> float:
    kn, vn = _leading(num)
    kd, vd = _leading(den)
    if kd < 0:
        raise MeasureDomainError("denominator vanishes identically")
    if kn > kd:
        return INF
    if kn < kd:
        return 0.0
    return vn / vd


def _split_field(w: np.ndarray) -> tuple[np.ndarray, int]:
    inf = np.isinf(w)
    return w[~inf], int(inf.sum())


def _exchangeable_contraction_terms(c: np.ndarray, w: np.ndarray, shift: int):
    """Coefficients of ``s^k`` in ``sum_F c(|F| + shift) w^F`` under the scaling.

    Returns a dict ``k -> (Z_k, S_k)`` with ``S_k`` the same sum weighted by the
    number of finite elements in ``F``.
    """
    fin, L = _split_field(w)
    r = len(c) - 1
    E = esp(fin, min(len(fin), r))
    terms = {}
    for k in range(L + 1):
        z = 0.0
        s = 0.0
        for j in range(len(E)):
            idx = j + k + shift
            if idx > r:
                break
            z += c[idx] * E[j]
            s += j * c[idx] * E[j]
        binom = math.comb(L, k)
        terms[k] = (binom * z, binom * s)
    return terms


def _table_terms(measure: LocalMeasure, w: np.ndarray, e: int | None, contract: bool):
    """Same as the exchangeable version, by enumeration of the table support.

    ``w`` is indexed by the ground set with ``e`` removed (when ``e`` is given).
    """
    terms: dict[int, list[float]] = {}
    m = measure.ground_size
    # position of ground element g inside the reduced field
    pos = [g if e is None or g < e else g - 1 for g in range(m)]
    for mask, weight in measure.table.items():
        if e is not None:
            has_e = bool(mask >> e & 1)
            if has_e != contract:
                continue
            mask &= ~(1 << e)
        k = 0
        nfin = 0
        prod = weight
        g = 0
        mm = mask
        while mm:
            if mm & 1:
                v = w[pos[g]]
                if v == INF:
                    k += 1
                else:
                    prod *= v
                    nfin += 1
            mm >>= 1
            g += 1
        acc = terms.setdefault(k, [0.0, 0.0])
        acc[0] += prod
        acc[1] += nfin * prod
    return {k: (v[0], v[1]) for k, v in terms.items()}


def _require_empty_positive(measure: LocalMeasure) -> None:
    if measure.empty_weight() <= 0:
        raise MeasureDomainError("operation requires mu(empty set) > 0")


def cavity_ratio(measure: LocalMeasure, e: int, field: Sequence[float]) -> float:
    """Ratio of contraction to deletion of the generating polynomial at ``e``.

    ``field`` lists the entries of the other ground elements in increasing
    order and may contain ``inf``.
    """
    m = measure.ground_size
    if not 0 <= e < m:
        raise MeasureDomainError(f"element {e} outside ground set of size {m}")
    _require_empty_positive(measure)
    w = _check_field(field, m - 1, allow_inf=True)
    if measure.is_exchangeable:
        c = measure.size_weights()
        num = {k: v[0] for k, v in _exchangeable_contraction_terms(c, w, 1).items()}
        den = {k: v[0] for k, v in _exchangeable_contraction_terms(c, w, 0).items()}
    else:
        num = {k: v[0] for k, v in _table_terms(measure, w, e, True).items()}
        den = {k: v[0] for k, v in _table_terms(measure, w, e, False).items()}
    return _ratio_from_leading(num, den)


def infinite_cavity_ratio(measure: LocalMeasure, e: int, field: Sequence[float]) -> float:
    """Limit of ``t * cavity_ratio(t * field)`` as ``t`` grows, for a finite field."""
    m = measure.ground_size
    if not 0 <= e < m:
        raise MeasureDomainError(f"element {e} outside ground set of size {m}")
    _require_empty_positive(measure)
    w = _check_field(field, m - 1, allow_inf=False)
    num: dict[int, float] = {}
    den: dict[int, float] = {}
    if measure.is_exchangeable:
        c = measure.size_weights()
        E = esp(w)
        for j, ej in enumerate(E):
            if j + 1 <= m:
                num[j + 1] = c[j + 1] * ej
            den[j] = c[j] * ej
    else:
        pos = [g if g < e else g - 1 for g in range(m)]
        for mask, weight in measure.table.items():
            contract = bool(mask >> e & 1)
            rest = mask & ~(1 << e)
            prod = weight
            size = 0
            g = 0
            while rest:
                if rest & 1:
                    prod *= w[pos[g]]
                    size += 1
                rest >>= 1
                g += 1
            if contract:
                num[size + 1] = num.get(size + 1, 0.0) + prod
            else:
                den[size] = den.get(size, 0.0) + prod
    return _ratio_from_leading(num, den)


def energy(measure: LocalMeasure, field: Sequence[float]) -> float:
    """Expected subset size under ``P(F) ~ mu(F) w^F``; infinite entries by conditioning."""
    m = measure.ground_size
    if m == 0:
        return 0.0
    _require_empty_positive(measure)
    w = _check_field(field, m, allow_inf=True)
    if measure.is_exchangeable:
        terms = _exchangeable_contraction_terms(measure.size_weights(), w, 0)
    else:
        terms = _table_terms(measure, w, None, False)
    top = max((k for k, (z, _) in terms.items() if z > 0), default=None)
    if top is None:
        raise MeasureDomainError("generating polynomial vanishes")
    z, s = terms[top]
    return top + s / z


def edge_inclusion_probability(measure: LocalMeasure, e: int, field: Sequence[float]) -> float:
    """``P(e in F)`` for a finite field over the full ground set."""
    w = _check_field(field, measure.ground_size, allow_inf=False)
    rest = np.delete(w, e)
    g = w[e] * cavity_ratio(measure, e, rest)
    return g / (1.0 + g)


# -- cavity-monotone checks ---------------------------------------------------


def is_cavity_monotone_exchangeable(coeffs: Sequence[float], rtol: float = 1e-12) -> bool:
    """Log-concavity plus support an interval containing 0 and 1."""
    c = np.asarray(coeffs, dtype=float)
    if c.size == 0 or c[0] <= 0:
        return False
    if c.size == 1:
        return True
    support = np.flatnonzero(c > 0)
    if support[0] != 0 or support[-1] != len(support) - 1 or len(support) < 2:
        return False
    for k in range(1, len(c) - 1):
        if c[k] ** 2 < c[k - 1] * c[k + 1] * (1 - rtol):
            return False
    return True


def cavity_monotone_status(measure: LocalMeasure) -> bool | None:
    """True/False when decidable from the representation, None for general tables."""
    if measure.kind == "bmatching":
        return True
    if measure.kind == "exchangeable":
        return is_cavity_monotone_exchangeable(measure.coeffs)
    if measure.empty_weight() <= 0:
        return False
    sizes_only = _table_as_exchangeable(measure)
    if sizes_only is not None:
        return is_cavity_monotone_exchangeable(sizes_only)
    if measure.ground_size <= 12 and not support_is_matroid(measure):
        return False
    return None


def _table_as_exchangeable(measure: LocalMeasure) -> list[float] | None:
    m = measure.ground_size
    if m > 16:
        return None
    dense = measure.dense_weights()
    sizes = _popcounts(m)
    c = []
    for k in range(m + 1):
        vals = dense[sizes == k]
        if not np.all(vals == vals[0]):
            return None
        c.append(float(vals[0]))
    return c


@dataclass(frozen=True)
class Violation:
    field: tuple[float, ...]
    e: int
    f: int | None
    excess: float


def _sample_fields(m: int, n_fields: int, rng: np.random.Generator) -> np.ndarray:
    return 10.0 ** rng.uniform(-2.0, 2.0, size=(n_fields, m))


def _field_probabilities(measure: LocalMeasure, fields: np.ndarray) -> np.ndarray:
    """Gibbs probabilities of every subset for each field (rows)."""
    dense = measure.dense_weights()
    n_fields, m = fields.shape
    prod = np.ones((n_fields, 1))
    for e in range(m):
        prod = np.concatenate([prod, prod * fields[:, e : e + 1]], axis=1)
    p = prod * dense
    return p / p.sum(axis=1, keepdims=True)


def _chunks(n_fields: int, m: int):
    step = max(1, (1 << 22) >> m)
    for start in range(0, n_fields, step):
        yield slice(start, min(n_fields, start + step))


def _axis(m: int, e: int) -> int:
    # bitmask index i = sum bit_e 2^e; reshaping (n, 2, ..., 2) puts bit m-1 on axis 1
    return m - e


def check_rayleigh_sampled(
    measure: LocalMeasure, n_fields: int, rng: np.random.Generator, tol: float = 1e-12
) -> list[Violation]:
    """Sampled search for positively correlated pairs of ground elements."""
    m = measure.ground_size
    if m > ENUMERATION_MAX_GROUND:
        raise MeasureSizeError(f"enumeration limited to {ENUMERATION_MAX_GROUND} elements")
    if n_fields == 0 or m < 2:
        return []
    fields = _sample_fields(m, n_fields, rng)
    out = []
    for sl in _chunks(n_fields, m):
        p = _field_probabilities(measure, fields[sl]).reshape((-1,) + (2,) * m)
        all_axes = set(range(1, m + 1))
        single = {}
        for e in range(m):
            single[e] = p.sum(axis=tuple(all_axes - {_axis(m, e)}))[:, 1]
        for e, f in itertools.combinations(range(m), 2):
            ae, af = _axis(m, e), _axis(m, f)
            pair = p.sum(axis=tuple(all_axes - {ae, af}))[:, 1, 1]
            excess = pair - single[e] * single[f]
            for row in np.flatnonzero(excess > tol):
                out.append(Violation(tuple(fields[sl][row]), e, f, float(excess[row])))
    return out


def check_size_increasing_sampled(
    measure: LocalMeasure, n_fields: int, rng: np.random.Generator, tol: float = 1e-12
) -> list[Violation]:
    """Sampled search for elements that fail to raise the expected size strictly.

    A violation is recorded when ``E[|F| 1(e in F)] - E[|F|] P(e in F) <= tol``.
    """
    m = measure.ground_size
    if m > ENUMERATION_MAX_GROUND:
        raise MeasureSizeError(f"enumeration limited to {ENUMERATION_MAX_GROUND} elements")
    if n_fields == 0 or m == 0:
        return []
    fields = _sample_fields(m, n_fields, rng)
    sizes = _popcounts(m).astype(float)
    out = []
    for sl in _chunks(n_fields, m):
        p = _field_probabilities(measure, fields[sl])
        mean_size = p @ sizes
        q = (p * sizes).reshape((-1,) + (2,) * m)
        p = p.reshape((-1,) + (2,) * m)
        all_axes = set(range(1, m + 1))
        for e in range(m):
            axes = tuple(all_axes - {_axis(m, e)})
            pe = p.sum(axis=axes)[:, 1]
            qe = q.sum(axis=axes)[:, 1]
            diff = qe - mean_size * pe
            for row in np.flatnonzero(diff <= tol):
                out.append(Violation(tuple(fields[sl][row]), e, None, float(diff[row])))
    return out


def support_is_matroid(measure: LocalMeasure) -> bool:
    """Check nonemptiness, downward closure and the exchange axiom on the support."""
    m = measure.ground_size
    if m > ENUMERATION_MAX_GROUND:
        raise MeasureSizeError(f"enumeration limited to {ENUMERATION_MAX_GROUND} elements")
    support = set(measure.support_masks())
    if not support:
        return False
    for mask in support:
        mm = mask
        while mm:
            low = mm & -mm
            if mask & ~low not in support:
                return False
            mm &= mm - 1
    by_size: dict[int, list[int]] = {}
    for mask in support:
        by_size.setdefault(_popcount(mask), []).append(mask)
    # with downward closure, exchange between consecutive sizes suffices
    for k, small in by_size.items():
        for a in small:
            for b in by_size.get(k + 1, ()):
                diff = b & ~a
                ok = False
                while diff:
                    low = diff & -diff
                    if a | low in support:
                        ok = True
                        break
                    diff &= diff - 1
                if not ok:
                    return False
    return True
