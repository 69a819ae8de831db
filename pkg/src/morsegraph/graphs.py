"""Weighted graphs as discrete weighted manifolds.

A :class:`WeightedGraph` carries a positive vertex measure ``mu``, a
nonnegative baseline potential ``W`` and strictly positive symmetric edge
conductances.  The mu-Laplacian acting on vertex functions is

    (Lap f)(x) = (1/mu(x)) * sum_y w_xy (f(x) - f(y)),

and Dirichlet restrictions keep the conductance of deleted crossing edges
as extra diagonal mass (``dirichlet_mass``), so that a function extended by
zero outside the region pays ``w * f(x)**2`` in the quadratic form.  Neumann
restrictions drop crossing edges entirely.

Canonical generators (lattice balls, half-lines, regular trees), exhaustions
by graph-distance balls, and a validating JSON loader live here as well.
All objects are immutable after construction.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Callable, Hashable, Iterable, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components, dijkstra

from .errors import (
    GraphValidationError,
    ProfileViolationError,
    RegionError,
    VertexCapError,
)

VertexId = Hashable

#: Default cap on generated graph sizes; generators accept an override.
DEFAULT_VERTEX_CAP = 50_000


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


class BoundaryCondition(Enum):
    DIRICHLET = "dirichlet"
    NEUMANN = "neumann"


@dataclass(frozen=True)
class WeightedGraph:
    """Finite weighted graph with vertex measure and baseline potential.

    ``edge_u``/``edge_v``/``edge_w`` store each undirected edge exactly once.
    ``dirichlet_mass`` is zero on freshly generated graphs and holds the
    grounded crossing-edge conductance on Dirichlet restrictions.
    """

    vertex_ids: tuple
    mu: np.ndarray
    W: np.ndarray
    edge_u: np.ndarray
    edge_v: np.ndarray
    edge_w: np.ndarray
    dirichlet_mass: np.ndarray

    def __post_init__(self):
        n = len(self.vertex_ids)
        if len(set(self.vertex_ids)) != n:
            raise GraphValidationError("vertex ids are not unique")
        for name in ("mu", "W", "dirichlet_mass"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (n,):
                raise GraphValidationError(f"{name} has shape {arr.shape}, expected ({n},)")
            object.__setattr__(self, name, _readonly(arr))
        if n and self.mu.min() <= 0:
            k = int(np.argmin(self.mu))
            raise GraphValidationError(f"mu must be positive; mu={self.mu[k]} at vertex {self.vertex_ids[k]!r}")
        if n and self.W.min() < 0:
            k = int(np.argmin(self.W))
            raise GraphValidationError(f"W must be nonnegative; W={self.W[k]} at vertex {self.vertex_ids[k]!r}")
        if n and self.dirichlet_mass.min() < 0:
            raise GraphValidationError("dirichlet_mass must be nonnegative")
        eu = np.asarray(self.edge_u, dtype=np.int64)
        ev = np.asarray(self.edge_v, dtype=np.int64)
        ew = np.asarray(self.edge_w, dtype=float)
        if not (eu.shape == ev.shape == ew.shape):
            raise GraphValidationError("edge arrays have mismatched lengths")
        if eu.size:
            if eu.min() < 0 or ev.min() < 0 or eu.max() >= n or ev.max() >= n:
                raise GraphValidationError("edge endpoint index out of range")
            if np.any(eu == ev):
                k = int(np.nonzero(eu == ev)[0][0])
                raise GraphValidationError(f"self-loop at vertex {self.vertex_ids[eu[k]]!r}")
            if ew.min() <= 0:
                k = int(np.argmin(ew))
                raise GraphValidationError(
                    f"conductance must be positive; w={ew[k]} on edge "
                    f"({self.vertex_ids[eu[k]]!r}, {self.vertex_ids[ev[k]]!r})"
                )
            lo, hi = np.minimum(eu, ev), np.maximum(eu, ev)
            if len(set(zip(lo.tolist(), hi.tolist()))) != eu.size:
                raise GraphValidationError("duplicate edge")
            eu, ev = lo, hi
        object.__setattr__(self, "edge_u", _readonly(eu))
        object.__setattr__(self, "edge_v", _readonly(ev))
        object.__setattr__(self, "edge_w", _readonly(ew))

    # -- construction -----------------------------------------------------

    @classmethod
    def build(
        cls,
        vertex_ids: Sequence[VertexId],
        mu: Iterable[float],
        W: Iterable[float],
        edges: Iterable[tuple[VertexId, VertexId, float]],
        dirichlet_mass: Iterable[float] | None = None,
    ) -> "WeightedGraph":
        """Build from vertex ids and (id_u, id_v, w) edge triples."""
        ids = tuple(vertex_ids)
        index = {v: i for i, v in enumerate(ids)}
        eu, ev, ew = [], [], []
        for u, v, w in edges:
            if u not in index:
                raise GraphValidationError(f"edge endpoint {u!r} is not a vertex")
            if v not in index:
                raise GraphValidationError(f"edge endpoint {v!r} is not a vertex")
            eu.append(index[u])
            ev.append(index[v])
            ew.append(w)
        n = len(ids)
        dm = np.zeros(n) if dirichlet_mass is None else np.asarray(list(dirichlet_mass), float)
        return cls(ids, np.fromiter(mu, float, n), np.fromiter(W, float, n),
                   np.asarray(eu, np.int64), np.asarray(ev, np.int64),
                   np.asarray(ew, float), dm)

    # -- basic queries ----------------------------------------------------

    @property
    def n_vertices(self) -> int:
        return len(self.vertex_ids)

    @property
    def n_edges(self) -> int:
        return int(self.edge_u.size)

    @cached_property
    def _index(self) -> dict:
        return {v: i for i, v in enumerate(self.vertex_ids)}

    def index_of(self, vid: VertexId) -> int:
        try:
            return self._index[vid]
        except KeyError:
            raise RegionError(f"vertex {vid!r} does not exist") from None

    def indices_of(self, region) -> np.ndarray:
        """Normalize a region argument to a sorted unique index array.

        Accepts an integer numpy array (already indices) or an iterable of
        vertex ids.
        """
        if isinstance(region, np.ndarray) and region.dtype.kind in "iu":
            idx = np.unique(region.astype(np.int64))
            if idx.size and (idx[0] < 0 or idx[-1] >= self.n_vertices):
                raise RegionError("region index out of range")
            return idx
        return np.unique([self.index_of(v) for v in region]).astype(np.int64)

    def edges(self):
        """Iterate (id_u, id_v, w) triples."""
        for u, v, w in zip(self.edge_u, self.edge_v, self.edge_w):
            yield self.vertex_ids[u], self.vertex_ids[v], float(w)

    @cached_property
    def adjacency(self) -> sp.csr_matrix:
        n = self.n_vertices
        u, v, w = self.edge_u, self.edge_v, self.edge_w
        return sp.coo_matrix(
            (np.concatenate([w, w]), (np.concatenate([u, v]), np.concatenate([v, u]))),
            shape=(n, n),
        ).tocsr()

    @cached_property
    def conductance_laplacian(self) -> sp.csr_matrix:
        """A + diag(dirichlet_mass), where A is the graph Laplacian of the
        conductances.  This is the kinetic part of every operator here."""
        n = self.n_vertices
        adj = self.adjacency
        deg = np.asarray(adj.sum(axis=1)).ravel()
        return (sp.diags(deg + self.dirichlet_mass) - adj).tocsr()

    @cached_property
    def is_connected(self) -> bool:
        if self.n_vertices <= 1:
            return True
        ncomp = connected_components(self.adjacency, directed=False, return_labels=False)
        return int(ncomp) == 1

    def component_labels(self) -> np.ndarray:
        _, labels = connected_components(self.adjacency, directed=False)
        return labels

    def hop_distances(self, center: VertexId) -> np.ndarray:
        """Graph (hop-count) distances from ``center``; inf if unreachable."""
        c = self.index_of(center)
        return dijkstra(self.adjacency, directed=False, unweighted=True, indices=c)


@dataclass(frozen=True)
class PotentialField:
    """Per-vertex potential tied to a specific graph.

    ``support`` is recomputed on every access, never cached.
    """

    graph: WeightedGraph
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.graph.n_vertices,):
            raise GraphValidationError(
                f"potential has shape {v.shape}, graph has {self.graph.n_vertices} vertices"
            )
        object.__setattr__(self, "values", _readonly(v))

    @classmethod
    def zeros(cls, graph: WeightedGraph) -> "PotentialField":
        return cls(graph, np.zeros(graph.n_vertices))

    @classmethod
    def from_dict(cls, graph: WeightedGraph, mapping: dict) -> "PotentialField":
        v = np.zeros(graph.n_vertices)
        for vid, val in mapping.items():
            v[graph.index_of(vid)] = float(val)
        return cls(graph, v)

    @property
    def support(self) -> np.ndarray:
        return np.nonzero(self.values != 0.0)[0]

    @property
    def support_ids(self) -> tuple:
        return tuple(self.graph.vertex_ids[i] for i in self.support)

    def negative_part(self) -> "PotentialField":
        """V_- = -min(V, 0), a nonnegative field."""
        return PotentialField(self.graph, np.maximum(-self.values, 0.0))

    def with_values(self, values) -> "PotentialField":
        return PotentialField(self.graph, np.asarray(values, float))


@dataclass(frozen=True)
class Exhaustion:
    """Strictly nested vertex subsets, the finite stand-in for a compact
    exhaustion.  Levels are sorted index arrays into ``graph``."""

    graph: WeightedGraph
    levels: tuple

    def __post_init__(self):
        if not self.levels:
            raise GraphValidationError("exhaustion needs at least one level")
        norm = []
        prev: set = set()
        for k, lev in enumerate(self.levels):
            idx = self.graph.indices_of(lev)
            if idx.size == 0:
                raise GraphValidationError(f"exhaustion level {k} is empty")
            cur = set(idx.tolist())
            if k > 0 and not (prev < cur):
                raise GraphValidationError(
                    f"exhaustion level {k} does not strictly contain level {k - 1}"
                )
            prev = cur
            norm.append(_readonly(idx))
        object.__setattr__(self, "levels", tuple(norm))

    @property
    def n_levels(self) -> int:
        return len(self.levels)

    def level_ids(self, k: int) -> tuple:
        return tuple(self.graph.vertex_ids[i] for i in self.levels[k])


@dataclass(frozen=True)
class Restriction:
    """Result of restricting a graph to a region: the subgraph plus the
    metadata needed to map vectors back to the parent."""

    graph: WeightedGraph
    parent: WeightedGraph
    parent_indices: np.ndarray
    bc: BoundaryCondition

    def inject(self, values: np.ndarray, fill: float = 0.0) -> np.ndarray:
        """Embed a region vector into a parent-sized vector."""
        out = np.full(self.parent.n_vertices, fill, dtype=float)
        out[self.parent_indices] = values
        return out

    def restrict_potential(self, pf: PotentialField) -> PotentialField:
        if pf.graph is not self.parent and pf.graph.vertex_ids != self.parent.vertex_ids:
            raise GraphValidationError("potential is not defined on the parent graph")
        return PotentialField(self.graph, pf.values[self.parent_indices])


# ---------------------------------------------------------------------------
# generators


def _evaluate_vertex_profile(profile, ids, what: str) -> np.ndarray:
    if profile is None:
        return np.ones(len(ids))
    vals = np.array([float(profile(v)) for v in ids])
    if vals.size and vals.min() <= 0:
        k = int(np.argmin(vals))
        raise ProfileViolationError(f"{what} produced {vals[k]} at vertex {ids[k]!r}")
    return vals


def _evaluate_edge_profile(profile, pairs, what: str) -> np.ndarray:
    if profile is None:
        return np.ones(len(pairs))
    vals = np.array([float(profile(u, v)) for u, v in pairs])
    if vals.size and vals.min() <= 0:
        k = int(np.argmin(vals))
        raise ProfileViolationError(f"{what} produced {vals[k]} on edge {pairs[k]!r}")
    return vals


def build_lattice(
    dimension: int,
    radius: int,
    mu_profile: Callable[[tuple], float] | None = None,
    w_profile: Callable[[tuple, tuple], float] | None = None,
    vertex_cap: int = DEFAULT_VERTEX_CAP,
) -> WeightedGraph:
    """Nearest-neighbor lattice on the sup-norm ball of Z^d.

    Vertex ids are coordinate tuples.  Defaults: mu = 1, w = 1, W = 0.
    """
    if dimension not in (1, 2, 3, 4):
        raise GraphValidationError(f"dimension must be in 1..4, got {dimension}")
    if radius < 1:
        raise GraphValidationError(f"radius must be >= 1, got {radius}")
    side = 2 * radius + 1
    n = side**dimension
    if n > vertex_cap:
        raise VertexCapError(f"lattice would have {n} vertices, cap is {vertex_cap}")
    axes = [range(-radius, radius + 1)] * dimension
    ids = tuple(itertools.product(*axes))
    index = np.arange(n).reshape((side,) * dimension)
    pairs_u, pairs_v = [], []
    for ax in range(dimension):
        a = np.moveaxis(index, ax, 0)
        pairs_u.append(a[:-1].ravel())
        pairs_v.append(a[1:].ravel())
    eu = np.concatenate(pairs_u)
    ev = np.concatenate(pairs_v)
    mu = _evaluate_vertex_profile(mu_profile, ids, "mu_profile")
    if w_profile is None:
        ew = np.ones(eu.size)
    else:
        ew = _evaluate_edge_profile(w_profile, [(ids[u], ids[v]) for u, v in zip(eu, ev)], "w_profile")
    return WeightedGraph(ids, mu, np.zeros(n), eu, ev, ew, np.zeros(n))


def build_half_line(
    length: int,
    mu_profile: Callable[[int], float] | None = None,
    w_profile: Callable[[int, int], float] | None = None,
) -> WeightedGraph:
    """Path graph on vertices 0..length with consecutive edges."""
    if length < 1:
        raise GraphValidationError(f"length must be >= 1, got {length}")
    ids = tuple(range(length + 1))
    mu = _evaluate_vertex_profile(mu_profile, ids, "mu_profile")
    pairs = [(j, j + 1) for j in range(length)]
    ew = _evaluate_edge_profile(w_profile, pairs, "w_profile")
    eu = np.arange(length, dtype=np.int64)
    ev = eu + 1
    n = length + 1
    return WeightedGraph(ids, mu, np.zeros(n), eu, ev, ew, np.zeros(n))


def build_tree(branching: int, depth: int, vertex_cap: int = DEFAULT_VERTEX_CAP) -> WeightedGraph:
    """Rooted regular tree with unit weights.  Ids are dotted path strings
    ('r', 'r.0', 'r.0.1', ...)."""
    if branching < 2:
        raise GraphValidationError(f"branching must be >= 2, got {branching}")
    if depth < 1:
        raise GraphValidationError(f"depth must be >= 1, got {depth}")
    n = (branching ** (depth + 1) - 1) // (branching - 1)
    if n > vertex_cap:
        raise VertexCapError(f"tree would have {n} vertices, cap is {vertex_cap}")
    ids = ["r"]
    eu, ev = [], []
    frontier = [0]
    for _ in range(depth):
        nxt = []
        for parent in frontier:
            for c in range(branching):
                child = len(ids)
                ids.append(f"{ids[parent]}.{c}")
                eu.append(parent)
                ev.append(child)
                nxt.append(child)
        frontier = nxt
    m = len(ids)
    return WeightedGraph(tuple(ids), np.ones(m), np.zeros(m),
                         np.asarray(eu, np.int64), np.asarray(ev, np.int64),
                         np.ones(len(eu)), np.zeros(m))


def ball_exhaustion(graph: WeightedGraph, center: VertexId, radii: Sequence[int]) -> Exhaustion:
    """Exhaustion by graph-distance balls around ``center``.

    On nearest-neighbor lattices the graph distance is the l1 distance, so
    the levels are l1 balls.
    """
    if len(radii) == 0:
        raise RegionError("radii list is empty")
    radii = list(radii)
    if any(b <= a for a, b in zip(radii, radii[1:])):
        raise GraphValidationError(f"radii must be strictly increasing, got {radii}")
    dist = graph.hop_distances(center)
    levels = [np.nonzero(dist <= r)[0] for r in radii]
    return Exhaustion(graph, tuple(levels))


def restrict(graph: WeightedGraph, region, bc: BoundaryCondition) -> Restriction:
    """Restrict to a vertex subset with Dirichlet or Neumann conditions.

    Dirichlet keeps each crossing edge's conductance as diagonal mass on its
    in-region endpoint; Neumann drops crossing edges entirely.
    """
    idx = graph.indices_of(region)
    if idx.size == 0:
        raise RegionError("region is empty")
    local = -np.ones(graph.n_vertices, dtype=np.int64)
    local[idx] = np.arange(idx.size)
    u, v, w = graph.edge_u, graph.edge_v, graph.edge_w
    in_u = local[u] >= 0
    in_v = local[v] >= 0
    keep = in_u & in_v
    dm = graph.dirichlet_mass[idx].copy()
    if bc is BoundaryCondition.DIRICHLET:
        cross_u = in_u & ~in_v
        cross_v = in_v & ~in_u
        np.add.at(dm, local[u[cross_u]], w[cross_u])
        np.add.at(dm, local[v[cross_v]], w[cross_v])
    elif bc is not BoundaryCondition.NEUMANN:
        raise GraphValidationError(f"unknown boundary condition {bc!r}")
    sub = WeightedGraph(
        tuple(graph.vertex_ids[i] for i in idx),
        graph.mu[idx],
        graph.W[idx],
        local[u[keep]],
        local[v[keep]],
        w[keep],
        dm,
    )
    return Restriction(sub, graph, _readonly(idx), bc)


# ---------------------------------------------------------------------------
# file ingestion

_GRAPH_SCHEMA_HINT = 'expected {"vertices": [{"id","mu","W"}...], "edges": [{"u","v","w"}...]}'


def load_graph_json(source) -> WeightedGraph:
    """Load a graph from a JSON document (path, file object, or dict).

    Validates every invariant and reports the first violation with a path
    into the document.
    """
    if isinstance(source, dict):
        doc = source
    elif hasattr(source, "read"):
        doc = json.load(source)
    else:
        with open(source) as fh:
            doc = json.load(fh)
    if not isinstance(doc, dict) or "vertices" not in doc or "edges" not in doc:
        raise GraphValidationError(_GRAPH_SCHEMA_HINT, path="$")
    ids, mu, W = [], [], []
    for k, rec in enumerate(doc["vertices"]):
        for field_ in ("id", "mu", "W"):
            if not isinstance(rec, dict) or field_ not in rec:
                raise GraphValidationError(f"missing field {field_!r}", path=f"vertices[{k}]")
        if not isinstance(rec["mu"], (int, float)) or rec["mu"] <= 0:
            raise GraphValidationError(f"mu must be a positive number, got {rec['mu']!r}",
                                       path=f"vertices[{k}].mu")
        if not isinstance(rec["W"], (int, float)) or rec["W"] < 0:
            raise GraphValidationError(f"W must be a nonnegative number, got {rec['W']!r}",
                                       path=f"vertices[{k}].W")
        if rec["id"] in set(ids):
            raise GraphValidationError(f"duplicate vertex id {rec['id']!r}", path=f"vertices[{k}].id")
        ids.append(rec["id"])
        mu.append(float(rec["mu"]))
        W.append(float(rec["W"]))
    index = {v: i for i, v in enumerate(ids)}
    eu, ev, ew = [], [], []
    seen = set()
    for k, rec in enumerate(doc["edges"]):
        for field_ in ("u", "v", "w"):
            if not isinstance(rec, dict) or field_ not in rec:
                raise GraphValidationError(f"missing field {field_!r}", path=f"edges[{k}]")
        if rec["u"] not in index:
            raise GraphValidationError(f"unknown vertex {rec['u']!r}", path=f"edges[{k}].u")
        if rec["v"] not in index:
            raise GraphValidationError(f"unknown vertex {rec['v']!r}", path=f"edges[{k}].v")
        if rec["u"] == rec["v"]:
            raise GraphValidationError("self-loop", path=f"edges[{k}]")
        if not isinstance(rec["w"], (int, float)) or rec["w"] <= 0:
            raise GraphValidationError(f"w must be a positive number, got {rec['w']!r}",
                                       path=f"edges[{k}].w")
        key = frozenset((rec["u"], rec["v"]))
        if key in seen:
            raise GraphValidationError("duplicate edge", path=f"edges[{k}]")
        seen.add(key)
        eu.append(index[rec["u"]])
        ev.append(index[rec["v"]])
        ew.append(float(rec["w"]))
    n = len(ids)
    return WeightedGraph(tuple(ids), np.asarray(mu), np.asarray(W),
                         np.asarray(eu, np.int64), np.asarray(ev, np.int64),
                         np.asarray(ew), np.zeros(n))
