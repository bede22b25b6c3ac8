"""Input-state-output port-Hamiltonian systems assembled from graphs.

Every template returns a :class:`PHSystem` of the form::

    xdot = (J - R) dH + (G - P) u - Sd D(Sd^T dH)
    y    = (G + P)^T dH + (N + S) u

with ``J`` skew, ``[[R, P], [P^T, S]]`` positive semidefinite and an optional
nonlinear damping ``D`` acting through the selector ``Sd``. The graph Dirac
structure a template is built on travels along as :class:`Provenance`, with a
map from ``(x, u)`` to the port vector so trajectories can be checked for
membership.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from . import dirac
from .constitutive import (
    DissipativeRelation,
    Hamiltonian,
    elementwise_damping,
    quadratic,
    quadratic_form,
    separable_energy,
    sum_hamiltonians,
)
from .dirac import DiracStructure, PortVector
from .graph import GraphError, OpenGraph, edge_weights


class SystemError_(ValueError):
    """Invalid template arguments."""


@dataclass(frozen=True)
class Provenance:
    graph: OpenGraph
    structure: DiracStructure
    template: str
    port_map: Callable[[np.ndarray, np.ndarray], PortVector]


@dataclass(frozen=True)
class PHSystem:
    hamiltonian: Hamiltonian
    J: np.ndarray
    R: np.ndarray
    G: np.ndarray
    P: np.ndarray | None = None
    S: np.ndarray | None = None
    N: np.ndarray | None = None
    state_labels: tuple[str, ...] = ()
    input_labels: tuple[str, ...] = ()
    output_labels: tuple[str, ...] = ()
    blocks: Mapping[str, slice] = field(default_factory=dict)
    damping: DissipativeRelation | None = None
    damping_selector: np.ndarray | None = None
    provenance: Provenance | None = None
    params: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        n = self.hamiltonian.dim
        J = np.asarray(self.J, dtype=float).reshape(n, n)
        R = np.asarray(self.R, dtype=float).reshape(n, n)
        G = np.asarray(self.G, dtype=float).reshape(n, -1)
        m = G.shape[1]
        P = np.zeros((n, m)) if self.P is None else np.asarray(self.P, dtype=float).reshape(n, m)
        S = np.zeros((m, m)) if self.S is None else np.asarray(self.S, dtype=float).reshape(m, m)
        N = np.zeros((m, m)) if self.N is None else np.asarray(self.N, dtype=float).reshape(m, m)
        for name, val in (("J", J), ("R", R), ("G", G), ("P", P), ("S", S), ("N", N)):
            val.setflags(write=False)
            object.__setattr__(self, name, val)
        if not self.state_labels:
            object.__setattr__(self, "state_labels", tuple(f"x{k}" for k in range(n)))
        if not self.input_labels:
            object.__setattr__(self, "input_labels", tuple(f"u{k}" for k in range(m)))
        if not self.output_labels:
            object.__setattr__(self, "output_labels", tuple(f"y{k}" for k in range(m)))
        if self.damping is not None:
            Sd = self.damping_selector
            Sd = np.eye(n) if Sd is None else np.asarray(Sd, dtype=float).reshape(n, self.damping.dim)
            object.__setattr__(self, "damping_selector", Sd)

    # -- sizes --------------------------------------------------------------------

    @property
    def n_states(self) -> int:
        return self.hamiltonian.dim

    @property
    def n_inputs(self) -> int:
        return self.G.shape[1]

    @property
    def is_linear(self) -> bool:
        return self.hamiltonian.is_quadratic and self.damping is None

    # -- dynamics -------------------------------------------------------------------

    def _u(self, u) -> np.ndarray:
        if u is None:
            return np.zeros(self.n_inputs)
        return np.asarray(u, dtype=float).reshape(self.n_inputs)

    def rhs(self, x, u=None) -> np.ndarray:
        u = self._u(u)
        g = self.hamiltonian.gradient(x)
        dx = (self.J - self.R) @ g + (self.G - self.P) @ u
        if self.damping is not None:
            Sd = self.damping_selector
            dx = dx - Sd @ self.damping(Sd.T @ g)
        return dx

    def output(self, x, u=None) -> np.ndarray:
        u = self._u(u)
        g = self.hamiltonian.gradient(x)
        return (self.G + self.P).T @ g + (self.N + self.S) @ u

    def supplied_power(self, x, u=None) -> float:
        u = self._u(u)
        return float(self.output(x, u) @ u)

    def dissipated_power(self, x, u=None) -> float:
        """Nonnegative power absorbed by the resistive ports."""
        u = self._u(u)
        g = self.hamiltonian.gradient(x)
        w = float(g @ self.R @ g + 2 * g @ self.P @ u + u @ self.S @ u)
        if self.damping is not None:
            e = self.damping_selector.T @ g
            w += float(e @ self.damping(e))
        return w

    def linear_matrices(self):
        """``(A, Bu, b)`` with ``xdot = A x + Bu u + b`` for quadratic, linearly damped systems."""
        if not self.is_linear:
            raise SystemError_("system is not linear (non-quadratic energy or nonlinear damping)")
        JR = self.J - self.R
        Q, c = self.hamiltonian.Q, self.hamiltonian.c
        return JR @ Q, self.G - self.P, JR @ c

    def output_matrices(self):
        """``(C, Du, y0)`` with ``y = C x + Du u + y0`` (quadratic energy only)."""
        Q, c = self.hamiltonian.Q, self.hamiltonian.c
        GP = (self.G + self.P).T
        return GP @ Q, self.N + self.S, GP @ c

    def ports(self, x, u=None) -> PortVector:
        if self.provenance is None:
            raise SystemError_("system carries no Dirac-structure provenance")
        return self.provenance.port_map(np.asarray(x, dtype=float), self._u(u))

    def structure_residual(self, x, u=None) -> float:
        pv = self.ports(x, u)
        scale = max(1.0, float(np.linalg.norm(pv.f)), float(np.linalg.norm(pv.e)))
        return self.provenance.structure.residual(pv) / scale

    def block(self, name: str) -> slice:
        return self.blocks[name]

    def replace(self, **changes) -> PHSystem:
        from dataclasses import replace

        return replace(self, **changes)


def from_io_matrices(hamiltonian: Hamiltonian, Mx, Mu, Y1, Y2, **kw) -> PHSystem:
    """Split ``[xdot; y] = [[Mx, Mu], [Y1, Y2]] [dH; u]`` into PH matrices."""
    Mx, Mu, Y1, Y2 = (np.atleast_2d(np.asarray(a, dtype=float)) for a in (Mx, Mu, Y1, Y2))
    n = hamiltonian.dim
    m = Mu.shape[1] if Mu.size else 0
    Mu, Y1, Y2 = Mu.reshape(n, m), Y1.reshape(m, n), Y2.reshape(m, m)
    J = 0.5 * (Mx - Mx.T)
    R = -0.5 * (Mx + Mx.T)
    G = 0.5 * (Mu + Y1.T)
    P = 0.5 * (Y1.T - Mu)
    N = 0.5 * (Y2 - Y2.T)
    S = 0.5 * (Y2 + Y2.T)
    return PHSystem(hamiltonian, J, R, G, P, S, N, **kw)


# -- helpers ---------------------------------------------------------------------


def weighted_gram(Bl: np.ndarray, w: np.ndarray, Br: np.ndarray) -> np.ndarray:
    """``Bl diag(w) Br^T`` with correctly rounded sums (order independent)."""
    Bl, Br = np.asarray(Bl, dtype=float), np.asarray(Br, dtype=float)
    out = np.zeros((Bl.shape[0], Br.shape[0]))
    for i in range(Bl.shape[0]):
        for j in range(Br.shape[0]):
            out[i, j] = math.fsum(Bl[i] * w * Br[j])
    return out


def boundary_selector(g: OpenGraph) -> np.ndarray:
    """``E``: one column per boundary vertex with a single 1 in its row."""
    E = np.zeros((g.n_vertices, len(g.boundary_idx)))
    for k, v in enumerate(g.boundary_idx):
        E[v, k] = 1.0
    return E


def _check_selector(E: np.ndarray, g: OpenGraph) -> np.ndarray:
    E = np.asarray(E, dtype=float)
    if not np.array_equal(E, boundary_selector(g)):
        raise SystemError_("boundary selector must have one 1 per column, in the row of its boundary vertex")
    return E


def _vertex_weights(G, n: int, what: str) -> np.ndarray:
    try:
        return edge_weights(G, n)
    except GraphError as exc:
        raise SystemError_(f"{what}: {exc}") from None


def _labels(prefix: str, names: Sequence[str]) -> tuple[str, ...]:
    return tuple(f"{prefix}[{n}]" for n in names)


# -- mass-spring -------------------------------------------------------------------


def mass_spring_closed(g: OpenGraph, K, G, hamiltonian: Hamiltonian | None = None) -> PHSystem:
    """``qdot = B^T dH/dp, pdot = -B dH/dq`` on a graph without boundary vertices."""
    if not g.is_closed:
        raise SystemError_("mass_spring_closed needs a graph without boundary vertices")
    M, N = g.n_edges, g.n_vertices
    B = g.incidence().astype(float)
    if hamiltonian is None:
        k = _vertex_weights(K, M, "spring constants")
        gm = _vertex_weights(G, N, "inverse masses")
        hamiltonian = quadratic(np.concatenate([k, gm]))
    n = M + N
    J = np.zeros((n, n))
    J[:M, M:] = B.T
    J[M:, :M] = -B
    struct = dirac.effort_continuous(g)

    def port_map(x, u):
        dH = hamiltonian.gradient(x)
        dq, dp = dH[:M], dH[M:]
        f = np.concatenate([dq, B @ dq, []])
        e = np.concatenate([-B.T @ dp, dp, []])
        return PortVector(f, e)

    return PHSystem(
        hamiltonian,
        J,
        np.zeros((n, n)),
        np.zeros((n, 0)),
        state_labels=_labels("q", g.edge_labels) + _labels("p", g.vertex_ids),
        blocks={"q": slice(0, M), "p": slice(M, n)},
        provenance=Provenance(g, struct, "mass_spring_closed", port_map),
        params={"B": B, "K": np.diag(hamiltonian.Q)[:M] if hamiltonian.is_quadratic else None},
    )


def mass_spring_boundary_masses(g: OpenGraph, K, G, E=None, hamiltonian: Hamiltonian | None = None) -> PHSystem:
    """Boundary vertices carry masses; inputs are forces, outputs velocities."""
    if g.is_closed:
        raise SystemError_("graph has no boundary vertices")
    M, N = g.n_edges, g.n_vertices
    B = g.incidence().astype(float)
    E = boundary_selector(g) if E is None else _check_selector(E, g)
    if hamiltonian is None:
        hamiltonian = quadratic(
            np.concatenate([_vertex_weights(K, M, "spring constants"), _vertex_weights(G, N, "inverse masses")])
        )
    n = M + N
    J = np.zeros((n, n))
    J[:M, M:] = B.T
    J[M:, :M] = -B
    Gin = np.zeros((n, E.shape[1]))
    Gin[M:] = E
    struct = dirac.effort_continuous(g)

    def port_map(x, u):
        dH = hamiltonian.gradient(x)
        dq, dp = dH[:M], dH[M:]
        f = np.concatenate([dq, B @ dq - E @ u, u])
        e = np.concatenate([-B.T @ dp, dp, E.T @ dp])
        return PortVector(f, e)

    return PHSystem(
        hamiltonian,
        J,
        np.zeros((n, n)),
        Gin,
        state_labels=_labels("q", g.edge_labels) + _labels("p", g.vertex_ids),
        input_labels=_labels("f_b", g.boundary_ids),
        output_labels=_labels("e_b", g.boundary_ids),
        blocks={"q": slice(0, M), "p": slice(M, n)},
        provenance=Provenance(g, struct, "mass_spring_boundary_masses", port_map),
        params={"B": B, "E": E},
    )


def mass_spring_massless_boundary(g: OpenGraph, K, G, hamiltonian: Hamiltonian | None = None) -> PHSystem:
    """Massless boundary vertices; inputs are their velocities, outputs the forces."""
    if g.is_closed:
        raise SystemError_("graph has no boundary vertices")
    M = g.n_edges
    Bi, Bb = (b.astype(float) for b in g.split_incidence())
    Ni = Bi.shape[0]
    if hamiltonian is None:
        hamiltonian = quadratic(
            np.concatenate([_vertex_weights(K, M, "spring constants"), _vertex_weights(G, Ni, "inverse masses")])
        )
    n = M + Ni
    J = np.zeros((n, n))
    J[:M, M:] = Bi.T
    J[M:, :M] = -Bi
    Gin = np.zeros((n, Bb.shape[0]))
    Gin[:M] = Bb.T
    struct = dirac.flow_continuous(g)

    def port_map(x, u):
        dH = hamiltonian.gradient(x)
        dq, dp = dH[:M], dH[M:]
        f = np.concatenate([dq, Bi @ dq, Bb @ dq])
        e = np.concatenate([-Bi.T @ dp - Bb.T @ u, dp, u])
        return PortVector(f, e)

    return PHSystem(
        hamiltonian,
        J,
        np.zeros((n, n)),
        Gin,
        state_labels=_labels("q", g.edge_labels) + _labels("p", g.internal_ids),
        input_labels=_labels("e_b", g.boundary_ids),
        output_labels=_labels("f_b", g.boundary_ids),
        blocks={"q": slice(0, M), "p": slice(M, n)},
        provenance=Provenance(g, struct, "mass_spring_massless_boundary", port_map),
        params={"Bi": Bi, "Bb": Bb},
    )


# -- mass-damper / consensus ---------------------------------------------------------


def _damper_port_map(g, hamiltonian, r, Bi, Bb):
    def port_map(x, u):
        dp = hamiltonian.gradient(x)
        e1 = -Bi.T @ dp - Bb.T @ u
        f1 = -r * e1
        return PortVector(np.concatenate([f1, Bi @ f1, Bb @ f1]), np.concatenate([e1, dp, u]))

    return port_map


def mass_damper(g: OpenGraph, R, G) -> PHSystem:
    """``pdot = -Bi R Bi^T dH - Bi R Bb^T e_b``, ``f_b = Bb R Bi^T dH + Bb R Bb^T e_b``."""
    M = g.n_edges
    r = edge_weights(R, M, allow_zero=True)
    Bi, Bb = (b.astype(float) for b in g.split_incidence())
    Ni, Nb = Bi.shape[0], Bb.shape[0]
    H = quadratic(_vertex_weights(G, Ni, "inverse masses")) if Ni else quadratic_form(np.zeros((0, 0)))
    return PHSystem(
        H,
        np.zeros((Ni, Ni)),
        weighted_gram(Bi, r, Bi),
        np.zeros((Ni, Nb)),
        P=weighted_gram(Bi, r, Bb),
        S=weighted_gram(Bb, r, Bb),
        state_labels=_labels("p", g.internal_ids),
        input_labels=_labels("e_b", g.boundary_ids),
        output_labels=_labels("f_b", g.boundary_ids),
        blocks={"p": slice(0, Ni)},
        provenance=Provenance(g, dirac.flow_continuous(g), "mass_damper", _damper_port_map(g, H, r, Bi, Bb)),
        params={"Bi": Bi, "Bb": Bb, "R": r},
    )


def consensus(g: OpenGraph, weights, leaders: Sequence[str] | None = None) -> PHSystem:
    """Leader-follower consensus ``xdot_v = -sum_w g_vw (x_v - x_w)`` for followers.

    Leaders are the boundary vertices (``leaders`` overrides the graph's own
    partition). Assembled neighbour by neighbour from the agent equations.
    """
    if leaders is not None:
        g = g.with_boundary(leaders)
    w = edge_weights(weights, g.n_edges)
    fol, lead = g.internal_idx, g.boundary_idx
    pos_f = {v: k for k, v in enumerate(fol)}
    pos_l = {v: k for k, v in enumerate(lead)}
    terms_ff: dict[tuple[int, int], list[float]] = {}
    terms_fl: dict[tuple[int, int], list[float]] = {}
    terms_ll: dict[tuple[int, int], list[float]] = {}

    def add(v, other, weight):
        # agent v sees -weight*(x_v - x_other); v's own row collects +weight on the diagonal
        for a, b, s in ((v, v, weight), (v, other, -weight)):
            if a in pos_f:
                tgt = terms_ff if b in pos_f else terms_fl
                key = (pos_f[a], pos_f[b] if b in pos_f else pos_l[b])
            else:
                if b in pos_f:
                    continue  # leader rows of the follower block are not needed
                tgt, key = terms_ll, (pos_l[a], pos_l[b])
            tgt.setdefault(key, []).append(s)

    idx = {vid: k for k, vid in enumerate(g.vertex_ids)}
    for e, we in zip(g.edges, w):
        t, h = idx[e.tail], idx[e.head]
        add(t, h, we)
        add(h, t, we)

    def dense(terms, shape):
        out = np.zeros(shape)
        for key, vals in terms.items():
            out[key] = math.fsum(vals)
        return out

    Ni, Nb = len(fol), len(lead)
    L_ff = dense(terms_ff, (Ni, Ni))
    L_fl = dense(terms_fl, (Ni, Nb))
    L_ll = dense(terms_ll, (Nb, Nb))
    H = quadratic(np.ones(Ni)) if Ni else quadratic_form(np.zeros((0, 0)))
    Bi, Bb = (b.astype(float) for b in g.split_incidence())
    return PHSystem(
        H,
        np.zeros((Ni, Ni)),
        L_ff,
        np.zeros((Ni, Nb)),
        P=L_fl,
        S=L_ll,
        state_labels=_labels("x", g.internal_ids),
        input_labels=_labels("u", g.boundary_ids),
        output_labels=_labels("y", g.boundary_ids),
        blocks={"x": slice(0, Ni)},
        provenance=Provenance(g, dirac.flow_continuous(g), "consensus", _damper_port_map(g, H, w, Bi, Bb)),
        params={"Bi": Bi, "Bb": Bb, "R": w},
    )


# -- mass-spring-damper ---------------------------------------------------------------


def split_edges(g: OpenGraph, kinds: Mapping[str, str]) -> tuple[list[str], list[str]]:
    springs, dampers = [], []
    for lab in g.edge_labels:
        kind = kinds.get(lab)
        if kind == "spring":
            springs.append(lab)
        elif kind == "damper":
            dampers.append(lab)
        else:
            raise SystemError_(f"edge {lab!r} has no spring/damper kind (got {kind!r})")
    return springs, dampers


def mass_spring_damper(
    g: OpenGraph, kinds: Mapping[str, str], K, G, R, hamiltonian: Hamiltonian | None = None
) -> PHSystem:
    """Masses at all vertices, springs and linear dampers on the edges.

    ``K`` follows the spring edges and ``R`` the damper edges in declaration
    order. Boundary vertices (if any) carry masses driven by external forces.
    """
    springs, dampers = split_edges(g, kinds)
    Ms, Md, N = len(springs), len(dampers), g.n_vertices
    Bs = g.edge_subgraph(springs).incidence().astype(float)
    Bd = g.edge_subgraph(dampers).incidence().astype(float)
    r = edge_weights(R, Md, allow_zero=True)
    if hamiltonian is None:
        k = _vertex_weights(K, Ms, "spring constants") if Ms else np.zeros(0)
        gm = _vertex_weights(G, N, "inverse masses")
        hamiltonian = quadratic_form(np.diag(np.concatenate([k, gm])))
    E = boundary_selector(g)
    n = Ms + N
    J = np.zeros((n, n))
    J[:Ms, Ms:] = Bs.T
    J[Ms:, :Ms] = -Bs
    Rm = np.zeros((n, n))
    Rm[Ms:, Ms:] = weighted_gram(Bd, r, Bd)
    Gin = np.zeros((n, E.shape[1]))
    Gin[Ms:] = E
    struct = dirac.effort_continuous(g)
    order = {lab: k for k, lab in enumerate(g.edge_labels)}
    s_idx = [order[lab] for lab in springs]
    d_idx = [order[lab] for lab in dampers]
    B = g.incidence().astype(float)

    def port_map(x, u):
        dH = hamiltonian.gradient(x)
        dq, dp = dH[:Ms], dH[Ms:]
        f1 = np.zeros(g.n_edges)
        e1 = np.zeros(g.n_edges)
        f1[s_idx] = dq
        e1[s_idx] = -Bs.T @ dp
        ed = -Bd.T @ dp
        e1[d_idx] = ed
        f1[d_idx] = -r * ed
        f = np.concatenate([f1, B @ f1 - E @ u, u])
        e = np.concatenate([e1, dp, E.T @ dp])
        return PortVector(f, e)

    return PHSystem(
        hamiltonian,
        J,
        Rm,
        Gin,
        state_labels=_labels("q", springs) + _labels("p", g.vertex_ids),
        input_labels=_labels("f_b", g.boundary_ids),
        output_labels=_labels("e_b", g.boundary_ids),
        blocks={"q": slice(0, Ms), "p": slice(Ms, n)},
        provenance=Provenance(g, struct, "mass_spring_damper", port_map),
        params={
            "graph": g,
            "kinds": dict(kinds),
            "springs": springs,
            "dampers": dampers,
            "Bs": Bs,
            "Bd": Bd,
            "K": np.asarray(K, dtype=float) if Ms else np.zeros(0),
            "G": _vertex_weights(G, N, "inverse masses"),
            "R": r,
            "E": E,
        },
    )


def mass_spring_damper_configuration(g: OpenGraph, kinds: Mapping[str, str], K, G, R) -> PHSystem:
    """The same network in vertex positions: ``(q_c, p)`` with canonical symplectic ``J``.

    ``H_c(q_c, p) = H(Bs^T q_c, p)``.
    """
    springs, dampers = split_edges(g, kinds)
    N = g.n_vertices
    Bs = g.edge_subgraph(springs).incidence().astype(float)
    Bd = g.edge_subgraph(dampers).incidence().astype(float)
    k = _vertex_weights(K, len(springs), "spring constants") if springs else np.zeros(0)
    gm = _vertex_weights(G, N, "inverse masses")
    r = edge_weights(R, len(dampers), allow_zero=True)
    Q = np.zeros((2 * N, 2 * N))
    Q[:N, :N] = (Bs * k) @ Bs.T
    Q[N:, N:] = np.diag(gm)
    H = quadratic_form(Q)
    J = np.zeros((2 * N, 2 * N))
    J[:N, N:] = np.eye(N)
    J[N:, :N] = -np.eye(N)
    Rm = np.zeros((2 * N, 2 * N))
    Rm[N:, N:] = weighted_gram(Bd, r, Bd)
    E = boundary_selector(g)
    Gin = np.zeros((2 * N, E.shape[1]))
    Gin[N:] = E
    return PHSystem(
        H,
        J,
        Rm,
        Gin,
        state_labels=_labels("qc", g.vertex_ids) + _labels("p", g.vertex_ids),
        input_labels=_labels("f_b", g.boundary_ids),
        output_labels=_labels("e_b", g.boundary_ids),
        blocks={"qc": slice(0, N), "p": slice(N, 2 * N)},
        params={
            "graph": g,
            "kinds": dict(kinds),
            "springs": springs,
            "dampers": dampers,
            "Bs": Bs,
            "Bd": Bd,
            "K": k,
            "G": gm,
            "R": r,
            "E": E,
            "configuration": True,
        },
    )


# -- clustering -----------------------------------------------------------------------


def clustering(
    g: OpenGraph,
    objective_grads: Sequence[Callable[[float], float]] | None = None,
    potentials: Sequence[tuple[Callable, Callable]] | None = None,
    stiffness=None,
) -> PHSystem:
    """``xdot_i = -J_i'(x_i) + u_i``, ``u = B dV/dz``, ``zdot = -B^T x``.

    ``H(x, z) = |x|^2 / 2 + sum V_e(z_e)``. Edge potentials are either the
    given ``(V_e, V_e')`` pairs or quadratic with ``stiffness``. Objective
    gradients act as nonlinear vertex damping; ``None`` means no damping.
    """
    if not g.is_closed:
        raise SystemError_("clustering is defined on closed graphs")
    N, M = g.n_vertices, g.n_edges
    B = g.incidence().astype(float)
    hx = quadratic(np.ones(N)) if N else quadratic_form(np.zeros((0, 0)))
    if potentials is None:
        k = edge_weights(1.0 if stiffness is None else stiffness, M)
        hz = quadratic(k) if M else quadratic_form(np.zeros((0, 0)))
    else:
        if len(potentials) != M:
            raise SystemError_("need one potential per edge")
        hz = separable_energy([p[0] for p in potentials], [p[1] for p in potentials])
    H = sum_hamiltonians([hx, hz])
    n = N + M
    J = np.zeros((n, n))
    J[:N, N:] = B
    J[N:, :N] = -B.T
    damping, Sd = None, None
    if objective_grads is not None:
        if len(objective_grads) != N:
            raise SystemError_("need one objective gradient per vertex")
        damping = elementwise_damping(objective_grads)
        Sd = np.zeros((n, N))
        Sd[:N, :N] = np.eye(N)

    def port_map(x, u):
        dH = H.gradient(x)
        dx, dz = dH[:N], dH[N:]
        f1 = -dz
        return PortVector(np.concatenate([f1, B @ f1]), np.concatenate([-B.T @ dx, dx]))

    return PHSystem(
        H,
        J,
        np.zeros((n, n)),
        np.zeros((n, 0)),
        state_labels=_labels("x", g.vertex_ids) + _labels("z", g.edge_labels),
        blocks={"x": slice(0, N), "z": slice(N, n)},
        damping=damping,
        damping_selector=Sd,
        provenance=Provenance(g, dirac.flow_continuous(g), "clustering", port_map),
        params={"B": B},
    )


# -- hydraulic networks ------------------------------------------------------------------


def hydraulic(
    g: OpenGraph,
    inertance,
    friction: DissipativeRelation | Sequence[float] | None = None,
    reservoir: Hamiltonian | Sequence[float] | None = None,
) -> PHSystem:
    """Reservoirs at the vertices, inertial pipes on the edges.

    State ``(x, phi)`` with ``phi_e = J_e nu_e``; ``xdot = -B nu + E u`` and
    ``phidot = B^T P - lambda(nu)``. Boundary vertices receive external
    inflows ``u``; outputs are their pressures.
    """
    N, M = g.n_vertices, g.n_edges
    B = g.incidence().astype(float)
    Je = edge_weights(inertance, M)
    if reservoir is None:
        reservoir = np.ones(N)
    hx = reservoir if isinstance(reservoir, Hamiltonian) else quadratic(reservoir)
    if hx.dim != N:
        raise SystemError_("reservoir energy must have one coordinate per vertex")
    H = sum_hamiltonians([hx, quadratic(1.0 / Je) if M else quadratic_form(np.zeros((0, 0)))])
    n = N + M
    J = np.zeros((n, n))
    J[:N, N:] = -B
    J[N:, :N] = B.T
    Rm = np.zeros((n, n))
    damping, Sd = None, None
    if isinstance(friction, DissipativeRelation):
        if friction.dim != M:
            raise SystemError_("friction law must have one coordinate per edge")
        if friction.is_linear:
            Rm[N:, N:] = friction.R
        else:
            damping = friction
            Sd = np.zeros((n, M))
            Sd[N:, :] = np.eye(M)
    elif friction is not None:
        Rm[N:, N:] = np.diag(edge_weights(friction, M, allow_zero=True))
    E = boundary_selector(g)
    Gin = np.zeros((n, E.shape[1]))
    Gin[:N] = E
    struct = dirac.effort_continuous(g)

    def port_map(x, u):
        dH = H.gradient(x)
        P, nu = dH[:N], dH[N:]
        f = np.concatenate([nu, B @ nu - E @ u, u])
        e = np.concatenate([-B.T @ P, P, E.T @ P])
        return PortVector(f, e)

    return PHSystem(
        H,
        J,
        Rm,
        Gin,
        state_labels=_labels("x", g.vertex_ids) + _labels("phi", g.edge_labels),
        input_labels=_labels("inflow", g.boundary_ids),
        output_labels=_labels("P", g.boundary_ids),
        blocks={"x": slice(0, N), "phi": slice(N, n)},
        damping=damping,
        damping_selector=Sd,
        provenance=Provenance(g, struct, "hydraulic", port_map),
        params={"B": B, "E": E},
    )


# -- JSON documents ----------------------------------------------------------------------

TEMPLATES = (
    "mass_spring_closed",
    "mass_spring_boundary_masses",
    "mass_spring_massless_boundary",
    "mass_damper",
    "mass_spring_damper",
    "consensus",
    "clustering",
    "hydraulic",
)


@dataclass(frozen=True)
class SystemDoc:
    """A parsed system document: the system plus its run settings."""

    system: PHSystem
    graph: OpenGraph
    template: str
    x0: np.ndarray
    input: Any = None
    T: float | None = None
    dt: float | None = None
    method: str | None = None
    doc: Mapping[str, Any] = field(default_factory=dict)


def _specs(doc: Mapping, key: str, ids: Sequence[str]) -> dict[str, Any]:
    from .constitutive import element_from_spec

    raw = doc.get("elements", {}).get(key, {})
    if not isinstance(raw, Mapping):
        raise SystemError_(f"elements.{key} must map ids to element specs")
    unknown = set(raw) - set(ids)
    if unknown:
        raise SystemError_(f"elements.{key} refers to unknown ids {sorted(unknown)}")
    return {i: element_from_spec(raw[i]) for i in ids if i in raw}


def _param(specs, ids, kind, name, what) -> np.ndarray:
    out = []
    for i in ids:
        s = specs.get(i)
        if s is None or s.kind != kind:
            raise SystemError_(f"{what} {i!r} needs a {kind!r} element")
        out.append(float(s[name]))
    return np.array(out, dtype=float)


def system_from_dict(doc: Mapping[str, Any]) -> SystemDoc:
    """Build a system from ``{"template", "graph", "elements": {"vertices", "edges"}, ...}``.

    Optional run settings: ``x0``, ``input``, ``T``, ``dt``, ``method``.
    """
    template = doc.get("template")
    if template not in TEMPLATES:
        raise SystemError_(f"unknown or missing template {template!r}; expected one of {', '.join(TEMPLATES)}")
    if "graph" not in doc:
        raise SystemError_("system document needs a 'graph'")
    g = OpenGraph.from_dict(doc["graph"])
    vs = _specs(doc, "vertices", g.vertex_ids)
    es = _specs(doc, "edges", g.edge_labels)
    mass = lambda ids: 1.0 / _param(vs, ids, "mass", "m", "vertex")  # noqa: E731

    if template == "mass_spring_closed":
        sys = mass_spring_closed(g, _param(es, g.edge_labels, "spring", "k", "edge"), mass(g.vertex_ids))
    elif template == "mass_spring_boundary_masses":
        sys = mass_spring_boundary_masses(g, _param(es, g.edge_labels, "spring", "k", "edge"), mass(g.vertex_ids))
    elif template == "mass_spring_massless_boundary":
        sys = mass_spring_massless_boundary(g, _param(es, g.edge_labels, "spring", "k", "edge"), mass(g.internal_ids))
    elif template == "mass_damper":
        sys = mass_damper(g, _param(es, g.edge_labels, "damper", "r", "edge"), mass(g.internal_ids))
    elif template == "mass_spring_damper":
        kinds = {lab: es[lab].kind if lab in es else None for lab in g.edge_labels}
        springs, dampers = split_edges(g, kinds)
        sys = mass_spring_damper(
            g,
            kinds,
            _param(es, springs, "spring", "k", "edge"),
            mass(g.vertex_ids),
            _param(es, dampers, "damper", "r", "edge"),
        )
    elif template == "consensus":
        sys = consensus(g, _param(es, g.edge_labels, "damper", "r", "edge"))
    elif template == "clustering":
        sys = clustering(g, None, None, _param(es, g.edge_labels, "spring", "k", "edge"))
    else:
        Je = _param(es, g.edge_labels, "pipe", "J", "edge")
        fr = np.array(
            [float(es[lab].get("coef", 0.0)) if es[lab].get("lambda", "linear") == "linear" else 0.0 for lab in g.edge_labels]
        )
        sys = hydraulic(g, Je, fr, _param(vs, g.vertex_ids, "reservoir", "coef", "vertex"))

    x0 = np.asarray(doc.get("x0", np.zeros(sys.n_states)), dtype=float)
    if x0.shape != (sys.n_states,):
        raise SystemError_(f"x0 must have {sys.n_states} entries ({', '.join(sys.state_labels)})")
    return SystemDoc(
        sys,
        g,
        template,
        x0,
        doc.get("input"),
        doc.get("T"),
        doc.get("dt"),
        doc.get("method"),
        doc,
    )


def load_system(path) -> SystemDoc:
    import json

    with open(path) as fh:
        return system_from_dict(json.load(fh))
