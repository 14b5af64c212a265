"""Networks: simple graphs carrying one local measure per vertex.

Edges are stored canonically as ``(u, v)`` with ``u < v``, sorted
lexicographically. Edge ``e`` owns the two directed arcs ``2e`` (``u -> v``)
and ``2e + 1`` (``v -> u``), so the reverse of arc ``a`` is ``a ^ 1``.

The incident edges of every vertex are ordered by neighbour id; position in
that list is the *slot* index used by table measures.
"""

from __future__ import annotations

import json
from typing import Iterable, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, shortest_path

from .measure import LocalMeasure, MeasureError, mask_to_subset


class NetworkValidationError(ValueError):
    pass


class MalformedNetworkError(NetworkValidationError):
    pass


class SelfLoopError(NetworkValidationError):
    pass


class ParallelEdgeError(NetworkValidationError):
    pass


class VertexIdError(NetworkValidationError):
    pass


class DegreeMismatchError(NetworkValidationError):
    pass


class IncidenceError(NetworkValidationError):
    pass


def _canonical_edges(n: int, edges) -> np.ndarray:
    arr = np.asarray(edges, dtype=np.int64)
    if arr.size == 0:
        return np.zeros((0, 2), dtype=np.int64)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise MalformedNetworkError("edges must be pairs of vertex ids")
    bad = (arr < 0) | (arr >= n)
    if bad.any():
        k = int(np.flatnonzero(bad.any(axis=1))[0])
        raise VertexIdError(f"edge {k} {arr[k].tolist()} refers to a vertex outside 0..{n - 1}")
    loops = arr[:, 0] == arr[:, 1]
    if loops.any():
        k = int(np.flatnonzero(loops)[0])
        raise SelfLoopError(f"edge {k} is a self-loop at vertex {int(arr[k, 0])}")
    arr = np.sort(arr, axis=1)
    order = np.lexsort((arr[:, 1], arr[:, 0]))
    arr = arr[order]
    dup = np.all(arr[1:] == arr[:-1], axis=1)
    if dup.any():
        k = int(np.flatnonzero(dup)[0])
        raise ParallelEdgeError(f"edge {arr[k].tolist()} appears more than once")
    return arr


class Network:
    """Finite simple graph with a local measure at every vertex.

    Attributes of interest: ``n``, ``edges`` (``(E, 2)`` array), ``measures``,
    and the CSR incidence arrays ``ptr``, ``nbr``, ``slot_edge``, ``in_arc``,
    ``out_arc`` (slot ``s`` of vertex ``i`` is position ``ptr[i] + s``).
    Treat instances as immutable.
    """

    __slots__ = (
        "n", "edges", "measures", "ptr", "nbr", "slot_edge", "in_arc", "out_arc",
        "arc_head", "arc_tail", "arc_slot", "degrees", "__weakref__", "_cache",
    )

    def __init__(self, n: int, edges, measures: Sequence[LocalMeasure]):
        n = int(n)
        if n < 0:
            raise MalformedNetworkError("number of vertices must be >= 0")
        edges = _canonical_edges(n, edges)
        if len(measures) != n:
            raise MalformedNetworkError(f"{len(measures)} measures given for {n} vertices")
        E = len(edges)
        deg = np.bincount(edges.ravel(), minlength=n).astype(np.int64)
        for i, mu in enumerate(measures):
            if mu.ground_size != deg[i]:
                raise DegreeMismatchError(
                    f"vertex {i} has degree {deg[i]} but its measure has ground size {mu.ground_size}"
                )
        # incidence lists: (vertex, neighbour, edge, outgoing arc, incoming arc)
        u, v = edges[:, 0], edges[:, 1]
        eid = np.arange(E, dtype=np.int64)
        owner = np.concatenate([u, v])
        other = np.concatenate([v, u])
        edge_of = np.concatenate([eid, eid])
        out_arc = np.concatenate([2 * eid, 2 * eid + 1])
        order = np.lexsort((other, owner))
        ptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(deg, out=ptr[1:])
        self.n = n
        self.edges = edges
        self.measures = tuple(measures)
        self.degrees = deg
        self.ptr = ptr
        self.nbr = other[order]
        self.slot_edge = edge_of[order]
        self.out_arc = out_arc[order]
        self.in_arc = self.out_arc ^ 1
        arc_tail = np.empty(2 * E, dtype=np.int64)
        arc_head = np.empty(2 * E, dtype=np.int64)
        arc_tail[0::2], arc_head[0::2] = u, v
        arc_tail[1::2], arc_head[1::2] = v, u
        self.arc_tail = arc_tail
        self.arc_head = arc_head
        # slot of arc a inside the incidence list of its tail
        arc_slot = np.empty(2 * E, dtype=np.int64)
        owner_sorted = owner[order]
        arc_slot[self.out_arc] = np.arange(2 * E) - ptr[owner_sorted]
        self.arc_slot = arc_slot
        self._cache = {}

    # -- basic accessors ------------------------------------------------------

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def n_arcs(self) -> int:
        return 2 * len(self.edges)

    def neighbors(self, i: int) -> np.ndarray:
        return self.nbr[self.ptr[i] : self.ptr[i + 1]]

    def arc(self, i: int, j: int) -> int:
        """Index of the directed arc ``i -> j``."""
        nb = self.neighbors(i)
        k = int(np.searchsorted(nb, j))
        if k >= len(nb) or nb[k] != j:
            raise KeyError(f"no edge between {i} and {j}")
        return int(self.out_arc[self.ptr[i] + k])

    @staticmethod
    def reverse(a):
        return a ^ 1

    def edge_index(self, u: int, v: int) -> int:
        return self.arc(u, v) // 2

    def csgraph(self) -> csr_matrix:
        if "csgraph" not in self._cache:
            data = np.ones(len(self.nbr), dtype=np.int8)
            owners = np.repeat(np.arange(self.n), self.degrees)
            self._cache["csgraph"] = csr_matrix((data, (owners, self.nbr)), shape=(self.n, self.n))
        return self._cache["csgraph"]

    def __repr__(self):
        return f"Network(n={self.n}, edges={self.n_edges})"


def uniform_network(n: int, edges, measure_for_degree) -> Network:
    """Network whose measure at each vertex depends only on its degree."""
    edges = _canonical_edges(int(n), edges)
    deg = np.bincount(edges.ravel(), minlength=n)
    cache: dict[int, LocalMeasure] = {}
    measures = []
    for d in deg.tolist():
        if d not in cache:
            cache[d] = measure_for_degree(d)
        measures.append(cache[d])
    return Network(n, edges, measures)


def bmatching_network(n: int, edges, b: int) -> Network:
    return uniform_network(n, edges, lambda d: LocalMeasure.bmatching(b, d))


# -- serialization -------------------------------------------------------------


def _fmt(x: float) -> str:
    x = float(x)
    if x == int(x) and abs(x) < 1e16:
        return str(int(x)) + ".0"
    return format(x, ".17g")


def measure_to_json(mu: LocalMeasure) -> str:
    if mu.kind == "bmatching":
        return '{"type": "bmatching", "b": %d}' % mu.capacity
    if mu.kind == "exchangeable":
        return '{"type": "exchangeable", "coeffs": [%s]}' % ", ".join(_fmt(c) for c in mu.coeffs)
    entries = []
    for mask in sorted(mu.table, key=lambda m: (bin(m).count("1"), mask_to_subset(m))):
        subset = ", ".join(str(s) for s in mask_to_subset(mask))
        entries.append('{"subset": [%s], "weight": %s}' % (subset, _fmt(mu.table[mask])))
    return '{"type": "table", "entries": [%s]}' % ", ".join(entries)


def measure_from_json(obj, degree: int, vertex: int) -> LocalMeasure:
    if not isinstance(obj, dict) or "type" not in obj:
        raise MalformedNetworkError(f"vertex {vertex}: measure must be an object with a 'type'")
    kind = obj["type"]
    try:
        if kind == "bmatching":
            return LocalMeasure.bmatching(int(obj["b"]), degree)
        if kind == "exchangeable":
            coeffs = [float(c) for c in obj["coeffs"]]
            if len(coeffs) != degree + 1:
                raise DegreeMismatchError(
                    f"vertex {vertex} has degree {degree} but {len(coeffs)} coefficients"
                )
            return LocalMeasure.exchangeable(coeffs, degree)
        if kind == "table":
            entries = []
            for ent in obj["entries"]:
                subset = [int(s) for s in ent["subset"]]
                for s in subset:
                    if s < 0 or s >= degree:
                        raise IncidenceError(
                            f"vertex {vertex}: subset slot {s} outside incident range 0..{degree - 1}"
                        )
                entries.append((subset, float(ent["weight"])))
            return LocalMeasure.from_table(degree, entries)
    except NetworkValidationError:
        raise
    except (KeyError, TypeError) as exc:
        raise MalformedNetworkError(f"vertex {vertex}: malformed measure ({exc})") from exc
    except MeasureError as exc:
        raise NetworkValidationError(f"vertex {vertex}: {exc}") from exc
    raise MalformedNetworkError(f"vertex {vertex}: unknown measure type {kind!r}")


def load_network(text: str) -> Network:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedNetworkError(f"invalid JSON: {exc}") from exc
    if not isinstance(obj, dict) or "vertices" not in obj or "edges" not in obj:
        raise MalformedNetworkError("network must have 'vertices' and 'edges'")
    verts = obj["vertices"]
    n = len(verts)
    by_id: dict[int, dict] = {}
    for k, v in enumerate(verts):
        if not isinstance(v, dict) or "id" not in v or "measure" not in v:
            raise MalformedNetworkError(f"vertex entry {k} needs 'id' and 'measure'")
        vid = v["id"]
        if not isinstance(vid, int) or isinstance(vid, bool) or not 0 <= vid < n:
            raise VertexIdError(f"vertex id {vid!r} outside 0..{n - 1}")
        if vid in by_id:
            raise VertexIdError(f"vertex id {vid} listed twice")
        by_id[vid] = v
    raw_edges = obj["edges"]
    if not isinstance(raw_edges, list) or any(
        not isinstance(e, list) or len(e) != 2 or not all(isinstance(x, int) for x in e)
        for e in raw_edges
    ):
        raise MalformedNetworkError("edges must be a list of [u, v] integer pairs")
    edges = _canonical_edges(n, raw_edges)
    deg = np.bincount(edges.ravel(), minlength=n)
    measures = [measure_from_json(by_id[i]["measure"], int(deg[i]), i) for i in range(n)]
    return Network(n, edges, measures)


def save_network(net: Network) -> str:
    lines = ["{", '  "vertices": [']
    for i, mu in enumerate(net.measures):
        sep = "," if i + 1 < net.n else ""
        lines.append('    {"id": %d, "measure": %s}%s' % (i, measure_to_json(mu), sep))
    lines.append("  ],")
    edges = ", ".join(f"[{u}, {v}]" for u, v in net.edges.tolist())
    lines.append(f'  "edges": [{edges}]')
    lines.append("}")
    return "\n".join(lines) + "\n"


def read_network(path) -> Network:
    with open(path) as fh:
        return load_network(fh.read())


def write_network(net: Network, path) -> None:
    with open(path, "w") as fh:
        fh.write(save_network(net))


# -- graph routines ------------------------------------------------------------


def ball_vertices(net: Network, root: int, radius: int) -> np.ndarray:
    dist = bfs_distances(net, root, radius)
    return np.flatnonzero(dist >= 0)


def bfs_distances(net: Network, root: int, radius: int | None = None) -> np.ndarray:
    """Graph distances from ``root`` (``-1`` for unreached or beyond ``radius``)."""
    dist = np.full(net.n, -1, dtype=np.int64)
    dist[root] = 0
    frontier = [root]
    d = 0
    while frontier and (radius is None or d < radius):
        d += 1
        nxt = []
        for i in frontier:
            for j in net.neighbors(i).tolist():
                if dist[j] < 0:
                    dist[j] = d
                    nxt.append(j)
        frontier = nxt
    return dist


def ball_is_tree(net: Network, root: int, radius: int) -> bool:
    """Whether the induced subgraph on the radius-``radius`` ball is acyclic."""
    inside = np.zeros(net.n, dtype=bool)
    inside[ball_vertices(net, root, radius)] = True
    n_edges = int(np.count_nonzero(inside[net.edges[:, 0]] & inside[net.edges[:, 1]]))
    # the ball is connected, so it is a tree iff it has one edge fewer than vertices
    return n_edges == int(inside.sum()) - 1


def induced_subnetwork(net: Network, vertices: Iterable[int], measure_for_degree=None):
    """Induced subgraph on ``vertices`` with fresh measures per degree.

    Returns the network and the array mapping new ids to old ids.
    ``measure_for_degree(old_vertex, new_degree)`` builds each measure.
    """
    keep = np.unique(np.asarray(list(vertices), dtype=np.int64))
    new_id = np.full(net.n, -1, dtype=np.int64)
    new_id[keep] = np.arange(len(keep))
    mask = (new_id[net.edges[:, 0]] >= 0) & (new_id[net.edges[:, 1]] >= 0)
    sub_edges = new_id[net.edges[mask]]
    deg = np.bincount(sub_edges.ravel(), minlength=len(keep))
    measures = [measure_for_degree(int(old), int(d)) for old, d in zip(keep, deg)]
    return Network(len(keep), sub_edges, measures), keep


def n_components(net: Network) -> int:
    if net.n == 0:
        return 0
    return int(connected_components(net.csgraph(), directed=False)[0])


def is_forest(net: Network) -> bool:
    return net.n_edges == net.n - n_components(net)


def is_tree(net: Network) -> bool:
    return net.n > 0 and n_components(net) == 1 and net.n_edges == net.n - 1


def diameter(net: Network) -> int:
    """Largest finite distance between two vertices (max over components)."""
    if net.n_edges == 0:
        return 0
    g = net.csgraph()
    best = 0
    chunk = max(1, 2_000_000 // max(net.n, 1))
    for start in range(0, net.n, chunk):
        idx = np.arange(start, min(net.n, start + chunk))
        d = shortest_path(g, method="D", unweighted=True, directed=False, indices=idx)
        d = d[np.isfinite(d)]
        if d.size:
            best = max(best, int(d.max()))
    return best


def diameter_upper_bound(net: Network) -> int:
    """Twice the largest eccentricity of one representative per component."""
    if net.n_edges == 0:
        return 0
    g = net.csgraph()
    _, labels = connected_components(g, directed=False)
    _, reps = np.unique(labels, return_index=True)
    reps = reps[net.degrees[reps] > 0]
    best = 0
    chunk = max(1, 2_000_000 // max(net.n, 1))
    for start in range(0, len(reps), chunk):
        d = shortest_path(g, method="D", unweighted=True, directed=False, indices=reps[start : start + chunk])
        d = d[np.isfinite(d)]
        if d.size:
            best = max(best, int(d.max()))
    return 2 * best


def degree_histogram(net: Network) -> np.ndarray:
    """Counts of vertices by degree, index = degree."""
    return np.bincount(net.degrees, minlength=1)
