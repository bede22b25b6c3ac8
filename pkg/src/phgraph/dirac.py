"""Dirac structures in kernel representation.

A structure over ``n`` flow/effort pairs is ``{(f, e) : F f + E e = 0}``.
Coordinates are grouped into named port groups (edges, vertices, boundary
vertices, ...) and every coordinate carries a label, so structures built along
different routes can be aligned and compared as subspaces.

Composition and existential elimination share one primitive,
:func:`eliminate`: the projection of ``{(w, z) : M_w w + M_z z = 0}`` onto
``w`` is cut out by the rows ``Y^T M_w`` where ``Y`` spans the left null space
of ``M_z``.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from . import subspace as ss
from .graph import OpenGraph

EDGE, INTERNAL, VERTEX, BOUNDARY = "edge", "internal", "vertex", "boundary"


class DiracError(ValueError):
    pass


@dataclass(frozen=True)
class PortGroup:
    name: str
    labels: tuple[str, ...]
    kind: str = "other"

    @property
    def dim(self) -> int:
        return len(self.labels)


@dataclass(frozen=True)
class PortLayout:
    groups: tuple[PortGroup, ...]

    def __post_init__(self):
        names = [g.name for g in self.groups]
        if len(set(names)) != len(names):
            raise DiracError(f"port group names must be unique: {names}")

    @property
    def n(self) -> int:
        return sum(g.dim for g in self.groups)

    @property
    def names(self) -> list[str]:
        return [g.name for g in self.groups]

    def coords(self) -> list[tuple[str, str, str]]:
        """``(group, kind, label)`` for every scalar coordinate, in order."""
        return [(g.name, g.kind, lab) for g in self.groups for lab in g.labels]

    def group(self, name: str) -> PortGroup:
        for g in self.groups:
            if g.name == name:
                return g
        raise DiracError(f"no port group named {name!r}; have {self.names}")

    def slice(self, name: str) -> slice:
        start = 0
        for g in self.groups:
            if g.name == name:
                return slice(start, start + g.dim)
            start += g.dim
        raise DiracError(f"no port group named {name!r}; have {self.names}")

    def index(self, name: str, label: str) -> int:
        g = self.group(name)
        try:
            return self.slice(name).start + g.labels.index(label)
        except ValueError:
            raise DiracError(f"group {name!r} has no coordinate {label!r}") from None

    @classmethod
    def from_coords(cls, coords: Sequence[tuple[str, str, str]]) -> tuple[PortLayout, np.ndarray]:
        """Group coordinates by name (first-appearance order).

        Returns the layout and the permutation ``perm`` such that layout
        coordinate ``k`` is input coordinate ``perm[k]``.
        """
        order: list[str] = []
        members: dict[str, list[int]] = {}
        kinds: dict[str, str] = {}
        for k, (name, kind, _) in enumerate(coords):
            if name not in members:
                order.append(name)
                members[name] = []
                kinds[name] = kind
            members[name].append(k)
        perm = np.array([k for name in order for k in members[name]], dtype=int)
        groups = tuple(
            PortGroup(name, tuple(coords[k][2] for k in members[name]), kinds[name]) for name in order
        )
        return cls(groups), perm


@dataclass(frozen=True)
class PortVector:
    f: np.ndarray
    e: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "f", np.asarray(self.f, dtype=float).ravel())
        object.__setattr__(self, "e", np.asarray(self.e, dtype=float).ravel())
        if self.f.shape != self.e.shape:
            raise DiracError("flow and effort vectors must have equal length")

    def power(self) -> float:
        return float(self.e @ self.f)


@dataclass(frozen=True)
class DiracStructure:
    """``{(f, e) : F f + E e = 0}`` over the coordinates of ``layout``.

    ``F`` and ``E`` are kept as given; :attr:`rows` is an orthonormal basis of
    the row space of ``[F E]`` used for every numerical test, so residuals
    are true distances from the subspace.
    """

    layout: PortLayout
    F: np.ndarray
    E: np.ndarray
    tol: float = ss.DEFAULT_TOL
    source: Any = field(default=None, compare=False)
    _rows: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        n = self.layout.n
        F = np.asarray(self.F, dtype=float)
        E = np.asarray(self.E, dtype=float)
        F = F.reshape(F.size // n if n else 0, n)
        E = E.reshape(E.size // n if n else 0, n)
        if F.shape != E.shape:
            raise DiracError(f"F and E shapes differ: {F.shape} vs {E.shape}")
        object.__setattr__(self, "F", F)
        object.__setattr__(self, "E", E)
        object.__setattr__(self, "_rows", _row_basis(np.hstack([F, E]), self.tol))

    @property
    def n(self) -> int:
        return self.layout.n

    @property
    def rows(self) -> np.ndarray:
        return self._rows

    @property
    def dim(self) -> int:
        return 2 * self.n - self._rows.shape[0]

    def subspace(self) -> ss.Subspace:
        """The structure as a subspace of R^{2n}, coordinates ``(f, e)``."""
        return ss.kernel(self._rows, self.tol, scale=1.0) if self._rows.size else ss.full(2 * self.n, self.tol)

    def isotropy_residual(self) -> float:
        """``max |<e_a|f_b> + <e_b|f_a>|`` over orthonormal members."""
        basis = self.subspace().basis
        if basis.size == 0:
            return 0.0
        fb, eb = basis[: self.n], basis[self.n :]
        gram = eb.T @ fb
        return float(np.max(np.abs(gram + gram.T), initial=0.0))

    def residual(self, pv: PortVector) -> float:
        if pv.f.shape != (self.n,):
            raise DiracError(f"port vector has length {pv.f.size}, structure has {self.n} ports")
        x = np.concatenate([pv.f, pv.e])
        if self._rows.size == 0:
            return 0.0
        return float(np.linalg.norm(self._rows @ x))

    def contains(self, pv: PortVector, tol: float | None = None) -> bool:
        scale = max(1.0, float(np.linalg.norm(pv.f)), float(np.linalg.norm(pv.e)))
        return self.residual(pv) <= (10 * self.tol if tol is None else tol) * scale

    def random_member(self, rng: np.random.Generator) -> PortVector:
        basis = self.subspace().basis
        x = basis @ rng.standard_normal(basis.shape[1])
        return PortVector(x[: self.n], x[self.n :])

    def permuted(self, perm: Sequence[int], layout: PortLayout) -> DiracStructure:
        """Reorder coordinates: new coordinate ``k`` is old coordinate ``perm[k]``."""
        perm = np.asarray(perm, dtype=int)
        return DiracStructure(layout, self.F[:, perm], self.E[:, perm], self.tol, self.source)

    def aligned_to(self, layout: PortLayout) -> DiracStructure:
        """Permute coordinates to match ``layout`` by ``(group, label)``."""
        here = {(g, lab): k for k, (g, _, lab) in enumerate(self.layout.coords())}
        try:
            perm = [here[(g, lab)] for g, _, lab in layout.coords()]
        except KeyError as exc:
            raise DiracError(f"cannot align: coordinate {exc.args[0]} missing") from None
        if len(perm) != self.n:
            raise DiracError("cannot align: layouts have different sizes")
        return self.permuted(perm, layout)

    def with_tol(self, tol: float) -> DiracStructure:
        return DiracStructure(self.layout, self.F, self.E, tol, self.source)


def _row_basis(M: np.ndarray, tol: float) -> np.ndarray:
    if M.shape[0] == 0:
        return np.zeros((0, M.shape[1]))
    _, s, vt = np.linalg.svd(M, full_matrices=False)
    r = ss._svd_rank(s, tol, 0.0)
    return vt[:r].copy()


# -- checks ---------------------------------------------------------------------


def is_dirac(F, E, tol: float = ss.DEFAULT_TOL) -> bool:
    """Isotropy ``E F^T + F E^T = 0`` and maximality ``rank [F E] = n``."""
    F = np.atleast_2d(np.asarray(F, dtype=float))
    E = np.atleast_2d(np.asarray(E, dtype=float))
    if F.shape != E.shape:
        raise DiracError(f"F and E shapes differ: {F.shape} vs {E.shape}")
    n = F.shape[1]
    rows = _row_basis(np.hstack([F, E]), tol)
    if rows.shape[0] != n:
        return False
    Fn, En = rows[:, :n], rows[:, n:]
    iso = En @ Fn.T + Fn @ En.T
    return bool(np.max(np.abs(iso), initial=0.0) <= 10 * tol)


def check(d: DiracStructure) -> bool:
    return is_dirac(d.F, d.E, d.tol)


def is_separable(d: DiracStructure) -> tuple[bool, ss.Subspace | None]:
    """Whether ``d = K x K^perp``; returns ``K = {f : (f, 0) in d}`` when it is."""
    if not check(d):
        raise DiracError("input is not a Dirac structure")
    n = d.n
    rows = d.rows
    Fn, En = rows[:, :n], rows[:, n:]
    k_flow = ss.kernel(Fn, d.tol, scale=1.0)  # {f : (f, 0) in D}
    k_eff = ss.kernel(En, d.tol, scale=1.0)  # {e : (0, e) in D}
    if k_flow.dim + k_eff.dim != n:
        return False, None
    return True, k_flow


def tellegen_check(d: DiracStructure, a: PortVector, b: PortVector) -> float:
    """``<e_a | f_b>``; vanishes for members of a separable structure."""
    if a.f.size != d.n or b.f.size != d.n:
        raise DiracError("port vectors do not match the structure's layout")
    return float(a.e @ b.f)


def membership(d: DiracStructure, pv: PortVector, tol: float | None = None) -> bool:
    return d.contains(pv, tol)


def same_subspace(a: DiracStructure, b: DiracStructure, *, align: bool = True) -> float:
    """Mutual-inclusion residual between two structures (aligned by labels)."""
    if align:
        b = b.aligned_to(a.layout)
    elif a.n != b.n:
        return float("inf")
    return ss.distance(a.subspace(), b.subspace())


# -- elimination and composition ----------------------------------------------


def eliminate(M_keep: np.ndarray, M_elim: np.ndarray, tol: float = ss.DEFAULT_TOL) -> np.ndarray:
    """Rows cutting out ``{w : exists z, M_keep w + M_elim z = 0}``."""
    if M_elim.shape[1] == 0:
        return M_keep
    left = ss.kernel(M_elim.T, tol, scale=1.0).basis
    return left.T @ M_keep


def compose(
    da: DiracStructure,
    db: DiracStructure,
    shared: str,
    pairs: Sequence[tuple[str, str]] | None = None,
) -> DiracStructure:
    """Composition through a shared port.

    ``(f_A, e_A, f, e)`` in ``da`` and ``(f_B, e_B, -f, e)`` in ``db``; the
    shared ``(f, e)`` are eliminated. Without ``pairs`` the whole group
    ``shared`` of both structures is identified in order; otherwise only the
    listed ``(label_in_da, label_in_db)`` coordinates of that group are.
    Remaining groups with equal names are concatenated (``da`` first).
    """
    ga, gb = da.layout.group(shared), db.layout.group(shared)
    if pairs is None:
        if ga.dim != gb.dim:
            raise DiracError(f"shared port {shared!r} has dimension {ga.dim} vs {gb.dim}")
        pairs = list(zip(ga.labels, gb.labels))
    ia = [da.layout.index(shared, la) for la, _ in pairs]
    ib = [db.layout.index(shared, lb) for _, lb in pairs]
    if len(set(ia)) != len(ia) or len(set(ib)) != len(ib):
        raise DiracError("shared coordinates must be paired one-to-one")

    na, nb, c = da.n, db.n, len(pairs)
    keep_a = [k for k in range(na) if k not in set(ia)]
    keep_b = [k for k in range(nb) if k not in set(ib)]
    ra, rb = da.rows, db.rows
    Fa, Ea = ra[:, :na], ra[:, na:]
    Fb, Eb = rb[:, :nb], rb[:, nb:]
    ka, kb = len(keep_a), len(keep_b)
    nk = ka + kb
    # kept variables: (f_keep_a, f_keep_b, e_keep_a, e_keep_b); eliminated: (f, e)
    M_keep = np.zeros((ra.shape[0] + rb.shape[0], 2 * nk))
    M_elim = np.zeros((ra.shape[0] + rb.shape[0], 2 * c))
    top = slice(0, ra.shape[0])
    bot = slice(ra.shape[0], ra.shape[0] + rb.shape[0])
    M_keep[top, :ka] = Fa[:, keep_a]
    M_keep[top, nk : nk + ka] = Ea[:, keep_a]
    M_keep[bot, ka:nk] = Fb[:, keep_b]
    M_keep[bot, nk + ka :] = Eb[:, keep_b]
    M_elim[top, :c] = Fa[:, ia]
    M_elim[top, c:] = Ea[:, ia]
    M_elim[bot, :c] = -Fb[:, ib]
    M_elim[bot, c:] = Eb[:, ib]
    tol = max(da.tol, db.tol)
    rows = eliminate(M_keep, M_elim, tol)

    ca, cb = da.layout.coords(), db.layout.coords()
    coords = [ca[k] for k in keep_a] + [cb[k] for k in keep_b]
    layout, perm = PortLayout.from_coords(coords)
    out = DiracStructure(_plain_layout(coords), rows[:, :nk], rows[:, nk:], tol)
    return out.permuted(perm, layout)


def _plain_layout(coords) -> PortLayout:
    # one single-coordinate group per coordinate; only used transiently before permuting
    return PortLayout(tuple(PortGroup(f"__{k}", (lab,), kind) for k, (_, kind, lab) in enumerate(coords)))


def trivial(labels: Sequence[str], which: str, name: str = "port", kind: str = "other") -> DiracStructure:
    """``{f = 0}`` (``which='flows'``) or ``{e = 0}`` (``which='efforts'``)."""
    c = len(labels)
    eye, zer = np.eye(c), np.zeros((c, c))
    if which == "flows":
        F, E = eye, zer
    elif which == "efforts":
        F, E = zer, eye
    else:
        raise DiracError("which must be 'flows' or 'efforts'")
    return DiracStructure(PortLayout((PortGroup(name, tuple(labels), kind),)), F, E)


def constrain(
    d: DiracStructure, port: str, which: str, labels: Sequence[str] | None = None
) -> DiracStructure:
    """Set the flows (or efforts) of a port group, or some of its coordinates, to zero.

    Realised as composition with :func:`trivial`; the conjugate variables of
    the constrained coordinates are eliminated.
    """
    g = d.layout.group(port)
    labels = list(g.labels if labels is None else labels)
    t = trivial(labels, which, name=port, kind=g.kind)
    out = compose(d, t, port, pairs=[(lab, lab) for lab in labels])
    return DiracStructure(out.layout, out.F, out.E, d.tol, d.source)


# -- constructors ---------------------------------------------------------------


def from_linear_map(A, v_name: str = "v", w_name: str = "w") -> DiracStructure:
    """``{(v, w, v*, w*) : A v = w, v* = -A^T w*}``."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    m, n = A.shape
    layout = PortLayout(
        (
            PortGroup(v_name, tuple(f"{v_name}{k}" for k in range(n))),
            PortGroup(w_name, tuple(f"{w_name}{k}" for k in range(m))),
        )
    )
    F = np.zeros((m + n, n + m))
    E = np.zeros((m + n, n + m))
    F[:m, :n] = A
    F[:m, n:] = -np.eye(m)
    E[m:, :n] = np.eye(n)
    E[m:, n:] = A.T
    return DiracStructure(layout, F, E)


def _graph_blocks(g: OpenGraph):
    B = g.incidence().astype(float)
    Bi, Bb = B[g.internal_idx], B[g.boundary_idx]
    return B, Bi, Bb


def flow_continuous(g: OpenGraph) -> DiracStructure:
    """``B_i f1 = f0i, B_b f1 = f_b, e1 = -B_i^T e0i - B_b^T e_b``.

    Port groups: ``edge`` (M), ``internal`` (N_i), ``boundary`` (N_b).
    """
    _, Bi, Bb = _graph_blocks(g)
    M, Ni, Nb = g.n_edges, len(g.internal_idx), len(g.boundary_idx)
    n = M + Ni + Nb
    layout = PortLayout(
        (
            PortGroup(EDGE, tuple(g.edge_labels), EDGE),
            PortGroup(INTERNAL, tuple(g.internal_ids), INTERNAL),
            PortGroup(BOUNDARY, tuple(g.boundary_ids), BOUNDARY),
        )
    )
    F, E = np.zeros((n, n)), np.zeros((n, n))
    e_, i_, b_ = slice(0, M), slice(M, M + Ni), slice(M + Ni, n)
    # flow rows
    F[i_, e_] = Bi
    F[i_, i_] = -np.eye(Ni)
    F[b_, e_] = Bb
    F[b_, b_] = -np.eye(Nb)
    # effort rows
    E[e_, e_] = np.eye(M)
    E[e_, i_] = Bi.T
    E[e_, b_] = Bb.T
    return DiracStructure(layout, F, E, source=(g, "flow_continuous"))


def effort_continuous(g: OpenGraph) -> DiracStructure:
    """``B_i f1 = f0i, B_b f1 = f0b + f_b, e1 = -B^T e0, e_b = e0b``.

    Port groups: ``edge`` (M), ``vertex`` (N), ``boundary`` (N_b).
    """
    B, Bi, Bb = _graph_blocks(g)
    M, N, Nb = g.n_edges, g.n_vertices, len(g.boundary_idx)
    n = M + N + Nb
    layout = PortLayout(
        (
            PortGroup(EDGE, tuple(g.edge_labels), EDGE),
            PortGroup(VERTEX, tuple(g.vertex_ids), VERTEX),
            PortGroup(BOUNDARY, tuple(g.boundary_ids), BOUNDARY),
        )
    )
    F, E = np.zeros((n, n)), np.zeros((n, n))
    v0 = M
    bidx = g.boundary_idx
    # B f1 - f0 - [0; f_b] = 0  (one row per vertex)
    F[:N, :M] = B
    F[:N, v0 : v0 + N] = -np.eye(N)
    for k, vb in enumerate(bidx):
        F[vb, M + N + k] = -1.0
    # e1 + B^T e0 = 0
    E[N : N + M, :M] = np.eye(M)
    E[N : N + M, v0 : v0 + N] = B.T
    # e_b - e0b = 0
    for k, vb in enumerate(bidx):
        E[N + M + k, M + N + k] = 1.0
        E[N + M + k, v0 + vb] = -1.0
    return DiracStructure(layout, F, E, source=(g, "effort_continuous"))


def kirchhoff(g: OpenGraph) -> DiracStructure:
    """``B_i f1 = 0, B_b f1 = f_b, e1 = -B_i^T z - B_b^T e_b`` for some ``z``.

    Built with auxiliary internal-potential columns that are then eliminated.
    Port groups: ``edge`` (M), ``boundary`` (N_b).
    """
    _, Bi, Bb = _graph_blocks(g)
    M, Ni, Nb = g.n_edges, len(g.internal_idx), len(g.boundary_idx)
    n = M + Nb
    layout = PortLayout(
        (
            PortGroup(EDGE, tuple(g.edge_labels), EDGE),
            PortGroup(BOUNDARY, tuple(g.boundary_ids), BOUNDARY),
        )
    )
    rows = Ni + Nb + M
    keep = np.zeros((rows, 2 * n))  # (f1, f_b, e1, e_b)
    aux = np.zeros((rows, Ni))  # z = e0i
    keep[:Ni, :M] = Bi
    keep[Ni : Ni + Nb, :M] = Bb
    keep[Ni : Ni + Nb, M:n] = -np.eye(Nb)
    r = slice(Ni + Nb, rows)
    keep[r, n : n + M] = np.eye(M)
    keep[r, n + M :] = Bb.T
    aux[r, :] = Bi.T
    out = eliminate(keep, aux)
    return DiracStructure(layout, out[:, :n], out[:, n:], source=(g, "kirchhoff"))


def boundary_reduce(d: DiracStructure, graph: OpenGraph | None = None) -> DiracStructure:
    """Quotient the boundary ports of a Kirchhoff-Dirac structure.

    Per connected component the lowest-indexed boundary vertex ``r`` is the
    reference: reduced flows are ``f_b`` at the other boundary vertices and
    reduced efforts are ``e_b(v) - e_b(r)``. Each component carrying boundary
    vertices loses one flow and one effort.
    """
    if graph is None:
        if not (isinstance(d.source, tuple) and isinstance(d.source[0], OpenGraph)):
            raise DiracError("boundary_reduce needs the graph the structure was built from")
        graph = d.source[0]
    bids = graph.boundary_ids
    if not bids:
        raise DiracError("graph has no boundary vertices to reduce")
    M, Nb = graph.n_edges, len(bids)
    if d.layout.names != [EDGE, BOUNDARY] or d.n != M + Nb:
        raise DiracError("boundary_reduce expects a Kirchhoff-Dirac structure (edge, boundary)")

    pos = {v: k for k, v in enumerate(bids)}
    ref_of: dict[str, str] = {}
    for comp in graph.connected_components():
        cb = [v for v in comp if v in pos]
        if cb:
            ref = min(cb, key=graph.vertex_index)
            for v in cb:
                ref_of[v] = ref
    kept = [v for v in bids if ref_of[v] != v]
    nr = len(kept)
    S = np.zeros((nr, Nb))
    D = np.zeros((nr, Nb))
    for k, v in enumerate(kept):
        S[k, pos[v]] = 1.0
        D[k, pos[v]] = 1.0
        D[k, pos[ref_of[v]]] -= 1.0

    n_new = M + nr
    rows_d = d.rows
    Fd, Ed = rows_d[:, : d.n], rows_d[:, d.n :]
    nrow = rows_d.shape[0] + 2 * nr
    keep = np.zeros((nrow, 2 * n_new))  # (f1, f_red, e1, e_red)
    elim = np.zeros((nrow, 2 * Nb))  # (f_b, e_b)
    r0 = rows_d.shape[0]
    keep[:r0, :M] = Fd[:, :M]
    keep[:r0, n_new : n_new + M] = Ed[:, :M]
    elim[:r0, :Nb] = Fd[:, M:]
    elim[:r0, Nb:] = Ed[:, M:]
    keep[r0 : r0 + nr, M:n_new] = np.eye(nr)
    elim[r0 : r0 + nr, :Nb] = -S
    keep[r0 + nr :, n_new + M :] = np.eye(nr)
    elim[r0 + nr :, Nb:] = -D
    out = eliminate(keep, elim, d.tol)
    layout = PortLayout(
        (
            PortGroup(EDGE, tuple(graph.edge_labels), EDGE),
            PortGroup(BOUNDARY, tuple(kept), BOUNDARY),
        )
    )
    return DiracStructure(layout, out[:, :n_new], out[:, n_new:], d.tol, source=(graph, "kirchhoff_reduced"))
