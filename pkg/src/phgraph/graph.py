"""Directed open graphs and their incidence algebra.

An open graph is a directed graph whose vertices are split into internal and
boundary vertices. Everything downstream (Dirac structures, system templates,
circuits) is built from the incidence matrix returned by :meth:`OpenGraph.incidence`:
``+1`` at the tail of an edge, ``-1`` at its head.
"""

from __future__ import annotations

import json
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .subspace import Subspace, kernel, span


class GraphError(ValueError):
    """Raised for structurally invalid graphs or interconnection requests."""


@dataclass(frozen=True)
class Vertex:
    id: str
    boundary: bool = False


@dataclass(frozen=True)
class Edge:
    label: str
    tail: str
    head: str


@dataclass(frozen=True)
class OpenGraph:
    """Directed graph with an internal/boundary vertex partition.

    Vertex and edge order is declaration order; every matrix derived from the
    graph uses it for rows and columns.
    """

    vertices: tuple[Vertex, ...]
    edges: tuple[Edge, ...] = ()
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "vertices", tuple(self.vertices))
        object.__setattr__(self, "edges", tuple(self.edges))
        index = {}
        for k, v in enumerate(self.vertices):
            if v.id in index:
                raise GraphError(f"duplicate vertex id {v.id!r}")
            index[v.id] = k
        labels = set()
        for e in self.edges:
            if e.label in labels:
                raise GraphError(f"duplicate edge label {e.label!r}")
            labels.add(e.label)
            for end in (e.tail, e.head):
                if end not in index:
                    raise GraphError(f"edge {e.label!r} references undeclared vertex {end!r}")
            if e.tail == e.head:
                raise GraphError(f"edge {e.label!r} is a self-loop at {e.tail!r}")
        object.__setattr__(self, "_index", index)

    # -- construction helpers -------------------------------------------------

    @classmethod
    def build(
        cls,
        vertices: Iterable[str],
        edges: Iterable[tuple[str, str] | tuple[str, str, str]],
        boundary: Iterable[str] = (),
    ) -> OpenGraph:
        """Build from plain ids; edges are ``(tail, head)`` or ``(label, tail, head)``.

        Unlabelled edges get labels ``e0, e1, ...`` in order.
        """
        bset = set(boundary)
        verts = tuple(Vertex(v, v in bset) for v in vertices)
        missing = bset - {v.id for v in verts}
        if missing:
            raise GraphError(f"boundary vertices not declared: {sorted(missing)}")
        es = []
        for k, e in enumerate(edges):
            if len(e) == 2:
                es.append(Edge(f"e{k}", e[0], e[1]))
            else:
                es.append(Edge(*e))
        return cls(verts, tuple(es))

    @classmethod
    def from_dict(cls, doc: Mapping) -> OpenGraph:
        try:
            verts = tuple(Vertex(str(v["id"]), bool(v.get("boundary", False))) for v in doc["vertices"])
            edges = tuple(
                Edge(str(e.get("id", f"e{k}")), str(e["tail"]), str(e["head"]))
                for k, e in enumerate(doc.get("edges", ()))
            )
        except (KeyError, TypeError) as exc:
            raise GraphError(f"malformed graph document: {exc}") from exc
        return cls(verts, edges)

    @classmethod
    def load(cls, path: str | Path) -> OpenGraph:
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return {
            "vertices": [{"id": v.id, "boundary": v.boundary} for v in self.vertices],
            "edges": [{"id": e.label, "tail": e.tail, "head": e.head} for e in self.edges],
        }

    # -- sizes and index sets ---------------------------------------------------

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def vertex_ids(self) -> list[str]:
        return [v.id for v in self.vertices]

    @property
    def edge_labels(self) -> list[str]:
        return [e.label for e in self.edges]

    @property
    def internal_idx(self) -> list[int]:
        return [k for k, v in enumerate(self.vertices) if not v.boundary]

    @property
    def boundary_idx(self) -> list[int]:
        return [k for k, v in enumerate(self.vertices) if v.boundary]

    @property
    def internal_ids(self) -> list[str]:
        return [v.id for v in self.vertices if not v.boundary]

    @property
    def boundary_ids(self) -> list[str]:
        return [v.id for v in self.vertices if v.boundary]

    @property
    def is_closed(self) -> bool:
        return not self.boundary_idx

    def vertex_index(self, vid: str) -> int:
        try:
            return self._index[vid]
        except KeyError:
            raise GraphError(f"unknown vertex {vid!r}") from None

    def edge_index(self, label: str) -> int:
        for k, e in enumerate(self.edges):
            if e.label == label:
                return k
        raise GraphError(f"unknown edge {label!r}")

    # -- incidence algebra ----------------------------------------------------

    def incidence(self) -> np.ndarray:
        """N x M integer incidence matrix (+1 tail, -1 head)."""
        B = np.zeros((self.n_vertices, self.n_edges), dtype=np.int64)
        for j, e in enumerate(self.edges):
            B[self._index[e.tail], j] = 1
            B[self._index[e.head], j] = -1
        return B

    def split_incidence(self) -> tuple[np.ndarray, np.ndarray]:
        """Row blocks ``(B_i, B_b)`` for internal and boundary vertices."""
        B = self.incidence()
        return B[self.internal_idx, :], B[self.boundary_idx, :]

    def edge_subgraph(self, labels: Sequence[str]) -> OpenGraph:
        """Same vertex set, only the named edges (in the given order)."""
        keep = [self.edges[self.edge_index(lab)] for lab in labels]
        return OpenGraph(self.vertices, tuple(keep))

    def reversed(self, labels: Iterable[str] | None = None) -> OpenGraph:
        """Flip the orientation of the named edges (all edges by default)."""
        flip = set(self.edge_labels if labels is None else labels)
        edges = tuple(Edge(e.label, e.head, e.tail) if e.label in flip else e for e in self.edges)
        return OpenGraph(self.vertices, edges)

    def with_boundary(self, boundary: Iterable[str]) -> OpenGraph:
        bset = set(boundary)
        return OpenGraph(tuple(Vertex(v.id, v.id in bset) for v in self.vertices), self.edges)

    def connected_components(self) -> list[list[str]]:
        """Vertex partition by undirected reachability, in declaration order."""
        parent = list(range(self.n_vertices))

        def find(a):
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        for e in self.edges:
            ra, rb = find(self._index[e.tail]), find(self._index[e.head])
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)
        groups: dict[int, list[str]] = {}
        for k, v in enumerate(self.vertices):
            groups.setdefault(find(k), []).append(v.id)
        return list(groups.values())

    def n_components(self) -> int:
        return len(self.connected_components())

    def is_connected(self) -> bool:
        return self.n_components() <= 1

    def laplacian(self, weights: Sequence[float] | np.ndarray | None = None) -> np.ndarray:
        """Weighted Laplacian ``B diag(w) B^T``; unit weights by default."""
        B = self.incidence().astype(float)
        w = np.ones(self.n_edges) if weights is None else edge_weights(weights, self.n_edges)
        return (B * w) @ B.T

    def cycle_space(self, tol: float | None = None) -> Subspace:
        """Orthonormal basis of ``ker B`` (edge-space cycles)."""
        return kernel(self.incidence(), tol=tol)

    def cocycle_space(self, tol: float | None = None) -> Subspace:
        """Orthonormal basis of ``im B^T`` (edge-space co-cycles)."""
        return span(self.incidence().T, tol=tol)


def edge_weights(w, m: int, *, allow_zero: bool = False) -> np.ndarray:
    """Validate a per-edge weight vector (scalars broadcast)."""
    arr = np.asarray(w, dtype=float)
    if arr.ndim == 0:
        arr = np.full(m, float(arr))
    if arr.shape != (m,):
        raise GraphError(f"expected {m} edge weights, got shape {arr.shape}")
    if allow_zero:
        if np.any(arr < 0):
            raise GraphError("edge weights must be nonnegative")
    elif np.any(arr <= 0):
        raise GraphError("edge weights must be strictly positive")
    return arr


def interconnect(
    g_a: OpenGraph,
    g_b: OpenGraph,
    pairing: Mapping[str, str] | Sequence[tuple[str, str]],
    retain: bool = False,
) -> OpenGraph:
    """Glue two open graphs along paired boundary vertices.

    ``pairing`` maps boundary ids of ``g_a`` to boundary ids of ``g_b``; a
    merged vertex keeps the ``g_a`` id. Merged vertices become internal unless
    ``retain`` is set. Vertex order is: internal of ``g_a``, internal of
    ``g_b``, merged, unpaired boundary of ``g_a``, unpaired boundary of
    ``g_b``; edges of ``g_a`` precede those of ``g_b``. For a full pairing
    this gives the block incidence ``[[Bi_a, 0], [0, Bi_b], [Bb_a, Bb_b]]``.
    """
    pairs = list(pairing.items()) if isinstance(pairing, Mapping) else [tuple(p) for p in pairing]
    a_bnd, b_bnd = set(g_a.boundary_ids), set(g_b.boundary_ids)
    seen_a, seen_b = set(), set()
    for va, vb in pairs:
        if va not in a_bnd:
            raise GraphError(f"{va!r} is not a boundary vertex of the first graph")
        if vb not in b_bnd:
            raise GraphError(f"{vb!r} is not a boundary vertex of the second graph")
        if va in seen_a or vb in seen_b:
            raise GraphError("pairing must be one-to-one")
        seen_a.add(va)
        seen_b.add(vb)

    rename_b = {vb: va for va, vb in pairs}
    # order merged vertices by their position in g_a
    merged = [v for v in g_a.boundary_ids if v in seen_a]
    verts: list[Vertex] = []
    verts += [v for v in g_a.vertices if not v.boundary]
    verts += [v for v in g_b.vertices if not v.boundary]
    verts += [Vertex(v, retain) for v in merged]
    verts += [v for v in g_a.vertices if v.boundary and v.id not in seen_a]
    verts += [v for v in g_b.vertices if v.boundary and v.id not in seen_b]
    ids = [v.id for v in verts]
    if len(set(ids)) != len(ids):
        raise GraphError("vertex ids of the two graphs collide; relabel one of them first")

    edges = list(g_a.edges) + [
        Edge(e.label, rename_b.get(e.tail, e.tail), rename_b.get(e.head, e.head)) for e in g_b.edges
    ]
    if len({e.label for e in edges}) != len(edges):
        raise GraphError("edge labels of the two graphs collide; relabel one of them first")
    return OpenGraph(tuple(verts), tuple(edges))


def relabel(g: OpenGraph, prefix: str) -> OpenGraph:
    """Prefix every vertex id and edge label."""
    verts = tuple(Vertex(prefix + v.id, v.boundary) for v in g.vertices)
    edges = tuple(Edge(prefix + e.label, prefix + e.tail, prefix + e.head) for e in g.edges)
    return OpenGraph(verts, edges)


def random_graph(
    rng: np.random.Generator,
    max_vertices: int = 8,
    max_edges: int = 14,
    max_boundary: int = 3,
    *,
    min_vertices: int = 1,
    connected: bool = False,
    prefix: str = "",
) -> OpenGraph:
    """Random open graph used by the property sweeps.

    Parallel edges are allowed; self-loops never occur. With ``connected`` a
    random spanning tree is laid down first.
    """
    n = int(rng.integers(max(min_vertices, 2 if connected else 1), max_vertices + 1))
    ids = [f"{prefix}v{k}" for k in range(n)]
    pairs: list[tuple[str, str]] = []
    if connected:
        order = rng.permutation(n)
        for k in range(1, n):
            a, b = order[k], order[int(rng.integers(0, k))]
            pairs.append((ids[a], ids[b]) if rng.random() < 0.5 else (ids[b], ids[a]))
    if n >= 2:
        m_extra = int(rng.integers(0, max(0, max_edges - len(pairs)) + 1))
        for _ in range(m_extra):
            a, b = rng.choice(n, size=2, replace=False)
            pairs.append((ids[a], ids[b]))
    nb = int(rng.integers(0, min(max_boundary, n) + 1))
    bnd = [ids[k] for k in sorted(rng.choice(n, size=nb, replace=False))] if nb else []
    edges = [(f"{prefix}e{k}", t, h) for k, (t, h) in enumerate(pairs)]
    return OpenGraph.build(ids, edges, boundary=bnd)
