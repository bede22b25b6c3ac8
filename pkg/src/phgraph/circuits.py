"""Linear RLC circuits on the Kirchhoff-Dirac structure of their graph.

Element laws (edge current ``I``, voltage ``V``)::

    capacitor  Qdot = -I,   V = Q / C
    inductor   Phidot = V,  -I = Phi / L
    resistor   V = -R I

with Kirchhoff's laws ``Bi I = 0``, ``I_b = Bb I`` and ``V = -B^T psi``.
Terminal potentials ``psi_b`` are the inputs and terminal currents ``I_b``
the outputs; ``dH/dt = psi_b^T I_b - sum R I^2``.
"""

from __future__ import annotations

import re
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from . import dirac
from . import subspace as ss
from .constitutive import quadratic
from .dirac import DiracStructure, PortGroup, PortLayout, PortVector
from .graph import Edge, OpenGraph, Vertex
from .systems import PHSystem, Provenance, from_io_matrices

KINDS = ("C", "L", "R")


class NetlistError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line


class DegenerateCircuit(ValueError):
    """The states are algebraically dependent; ``basis`` spans the offending loops or cutsets."""

    def __init__(self, kind: str, message: str, basis: np.ndarray, labels: Sequence[str]):
        super().__init__(message)
        self.kind = kind
        self.basis = basis
        self.labels = tuple(labels)


# -- netlists ----------------------------------------------------------------------------


@dataclass(frozen=True)
class Element:
    name: str
    kind: str
    value: float


@dataclass(frozen=True)
class Netlist:
    graph: OpenGraph
    elements: tuple[Element, ...]

    def of_kind(self, kind: str) -> list[int]:
        return [k for k, el in enumerate(self.elements) if el.kind == kind]

    def values(self, kind: str) -> np.ndarray:
        return np.array([self.elements[k].value for k in self.of_kind(kind)], dtype=float)

    def labels(self, kind: str) -> list[str]:
        return [self.elements[k].name for k in self.of_kind(kind)]


_FLOAT = re.compile(r"^[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?$")


def parse_netlist(text: str) -> Netlist:
    """``name type value tail head`` per line; ``.terminal v`` flags terminals.

    Blank lines and lines starting with ``#`` or ``*`` are ignored.
    """
    order: list[str] = []
    seen: set[str] = set()
    elements: list[Element] = []
    edges: list[Edge] = []
    terminals: list[tuple[str, int]] = []
    names: set[str] = set()

    def vertex(v):
        if v not in seen:
            seen.add(v)
            order.append(v)

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line or line.startswith("*"):
            continue
        parts = line.split()
        if parts[0].lower() == ".terminal":
            if len(parts) < 2:
                raise NetlistError(".terminal needs at least one vertex", lineno)
            terminals.extend((v, lineno) for v in parts[1:])
            continue
        if len(parts) != 5:
            raise NetlistError(f"expected 'name type value tail head', got {len(parts)} fields", lineno)
        name, kind, value, tail, head = parts
        kind = kind.upper()
        if kind not in KINDS:
            raise NetlistError(f"unknown element type {parts[1]!r}", lineno)
        if name in names:
            raise NetlistError(f"duplicate element name {name!r}", lineno)
        if not _FLOAT.match(value):
            raise NetlistError(f"malformed value {value!r}", lineno)
        val = float(value)
        if kind in ("C", "L") and not val > 0:
            raise NetlistError(f"{kind} value must be positive", lineno)
        if kind == "R" and val < 0:
            raise NetlistError("resistance must be nonnegative", lineno)
        if tail == head:
            raise NetlistError("element connects a vertex to itself", lineno)
        names.add(name)
        vertex(tail)
        vertex(head)
        elements.append(Element(name, kind, val))
        edges.append(Edge(name, tail, head))
    for v, lineno in terminals:
        if v not in seen:
            raise NetlistError(f"terminal {v!r} is not connected to any element", lineno)
    tset = {v for v, _ in terminals}
    g = OpenGraph(tuple(Vertex(v, v in tset) for v in order), tuple(edges))
    return Netlist(g, tuple(elements))


def load_netlist(path) -> Netlist:
    with open(path) as fh:
        return parse_netlist(fh.read())


# -- DAE ---------------------------------------------------------------------------------


@dataclass(frozen=True)
class CircuitDAE:
    """Differential states ``(Q, Phi)``, algebraic potentials, Kirchhoff constraints."""

    netlist: Netlist
    B: np.ndarray
    Bi: np.ndarray
    Bb: np.ndarray

    @property
    def graph(self) -> OpenGraph:
        return self.netlist.graph

    @property
    def idx_C(self) -> list[int]:
        return self.netlist.of_kind("C")

    @property
    def idx_L(self) -> list[int]:
        return self.netlist.of_kind("L")

    @property
    def idx_R(self) -> list[int]:
        return self.netlist.of_kind("R")

    @property
    def n_states(self) -> int:
        return len(self.idx_C) + len(self.idx_L)

    def residuals(self, Q, Phi, Qdot, Phidot, psi, I) -> dict[str, float]:
        """Largest defect of each equation family for one sample.

        ``psi`` holds all vertex potentials and ``I`` all edge currents.
        """
        net = self.netlist
        V = -self.B.T @ psi
        cC, cL, cR = self.idx_C, self.idx_L, self.idx_R
        out = {
            "kcl": float(np.max(np.abs(self.Bi @ I), initial=0.0)),
            "C_rate": float(np.max(np.abs(Qdot + I[cC]), initial=0.0)),
            "C_law": float(np.max(np.abs(V[cC] - Q / net.values("C")), initial=0.0)),
            "L_rate": float(np.max(np.abs(Phidot - V[cL]), initial=0.0)),
            "L_law": float(np.max(np.abs(I[cL] + Phi / net.values("L")), initial=0.0)),
            "R_law": float(np.max(np.abs(V[cR] + net.values("R") * I[cR]), initial=0.0)),
        }
        return out


def assemble_dae(net: Netlist) -> CircuitDAE:
    B = net.graph.incidence().astype(float)
    Bi, Bb = (b.astype(float) for b in net.graph.split_incidence())
    return CircuitDAE(net, B, Bi, Bb)


@dataclass(frozen=True)
class CircuitModel:
    """Explicit ODE of a circuit plus the maps recovering potentials and currents."""

    system: PHSystem
    dae: CircuitDAE
    ground: tuple[int, ...]
    solve_x: np.ndarray
    solve_u: np.ndarray

    def algebraic(self, x, u=None) -> tuple[np.ndarray, np.ndarray]:
        """All vertex potentials and edge currents at state ``x`` and terminal potentials ``u``."""
        d = self.dae
        g = d.graph
        u = np.zeros(len(g.boundary_idx)) if u is None else np.asarray(u, dtype=float)
        z = self.solve_x @ np.asarray(x, dtype=float) + self.solve_u @ u
        free = [v for v in g.internal_idx if v not in self.ground]
        psi = np.zeros(g.n_vertices)
        psi[free] = z[: len(free)]
        psi[g.boundary_idx] = u
        nC, nR = len(d.idx_C), len(d.idx_R)
        I = np.zeros(g.n_edges)
        I[d.idx_C] = z[len(free) : len(free) + nC]
        I[d.idx_R] = z[len(free) + nC : len(free) + nC + nR]
        nCs = len(d.idx_C)
        I[d.idx_L] = -np.asarray(x, dtype=float)[nCs:] / d.netlist.values("L")
        return psi, I

    def dae_residual(self, x, u=None) -> float:
        psi, I = self.algebraic(x, u)
        xdot = self.system.rhs(x, u)
        nC = len(self.dae.idx_C)
        r = self.dae.residuals(np.asarray(x)[:nC], np.asarray(x)[nC:], xdot[:nC], xdot[nC:], psi, I)
        return max(r.values(), default=0.0)


def _ground_vertices(g: OpenGraph) -> list[int]:
    """Lowest-index vertex of every component without terminals."""
    bset = set(g.boundary_idx)
    out = []
    for comp in g.connected_components():
        idx = [g.vertex_index(v) for v in comp]
        if not any(i in bset for i in idx):
            out.append(min(idx))
    return out


def reduce_to_ode(dae: CircuitDAE, tol: float = 1e-10) -> CircuitModel:
    """Eliminate potentials and capacitor/resistor currents; raise :class:`DegenerateCircuit` if impossible."""
    net, g = dae.netlist, dae.graph
    cC, cL, cR = dae.idx_C, dae.idx_L, dae.idx_R
    ground = _ground_vertices(g)
    free = [v for v in g.internal_idx if v not in ground]
    B = dae.B
    Bf = B[free]  # rows of unknown potentials
    Bt = B[g.boundary_idx]
    nf, nC, nR, nL, nb = len(free), len(cC), len(cR), len(cL), len(g.boundary_idx)

    # capacitor loops: capacitor voltages fixed by other capacitors or terminals
    BfC = Bf[:, cC]
    loops = ss.kernel(BfC, tol, scale=1.0) if nC else ss.zero(0)
    if loops.dim:
        raise DegenerateCircuit(
            "capacitor-loop",
            f"capacitor loop(s) through {', '.join(_support(loops.basis, net.labels('C')))}: "
            "capacitor charges are algebraically dependent",
            loops.basis,
            net.labels("C"),
        )

    # unknowns z = (psi_free, I_C, I_R); rows: C laws, R laws, KCL at free vertices
    Cv, Rv, Lv = net.values("C"), net.values("R"), net.values("L")
    n = nf + nC + nR
    M = np.zeros((n, n))
    WQ = np.zeros((n, nC))
    WPhi = np.zeros((n, nL))
    Wb = np.zeros((n, nb))
    r = 0
    # -Bf_C^T psi_f = Q / C + Bt_C^T psi_b
    M[r : r + nC, :nf] = -BfC.T
    WQ[r : r + nC] = np.diag(1.0 / Cv) if nC else WQ[r : r + nC]
    Wb[r : r + nC] = Bt[:, cC].T
    r += nC
    # -Bf_R^T psi_f + R I_R = Bt_R^T psi_b
    M[r : r + nR, :nf] = -Bf[:, cR].T
    M[r : r + nR, nf + nC :] = np.diag(Rv) if nR else M[r : r + nR, nf + nC :]
    Wb[r : r + nR] = Bt[:, cR].T
    r += nR
    # Bf_C I_C + Bf_R I_R = -Bf_L I_L = Bf_L Phi / L
    M[r:, nf : nf + nC] = BfC
    M[r:, nf + nC :] = Bf[:, cR]
    WPhi[r:] = Bf[:, cL] / Lv if nL else WPhi[r:]

    if n:
        s = np.linalg.svd(M, compute_uv=False)
        rank = int(np.sum(s > tol * max(1.0, s[0])))
    else:
        rank = 0
    if rank < n:
        left = ss.kernel(M.T, tol, scale=1.0).basis
        kcl_part = left[nC + nR :]
        basis = np.zeros((g.n_vertices, left.shape[1]))
        basis[free] = kcl_part
        verts = _support(basis, g.vertex_ids)
        raise DegenerateCircuit(
            "inductor-cutset",
            f"vertex set(s) {{{', '.join(verts)}}} joined to the rest only through inductors "
            "(inductor cutset or floating node): inductor fluxes are algebraically dependent",
            basis,
            g.vertex_ids,
        )

    Minv = np.linalg.inv(M) if n else np.zeros((0, 0))
    solve_x = Minv @ np.hstack([WQ, WPhi])
    solve_u = Minv @ Wb

    # state derivatives: Qdot = -I_C ; Phidot = V_L = -B_L^T psi
    nx = nC + nL
    dx_dx = np.zeros((nx, nx))
    dx_du = np.zeros((nx, nb))
    dx_dx[:nC] = -solve_x[nf : nf + nC]
    dx_du[:nC] = -solve_u[nf : nf + nC]
    dx_dx[nC:] = -Bf[:, cL].T @ solve_x[:nf]
    dx_du[nC:] = -Bf[:, cL].T @ solve_u[:nf] - Bt[:, cL].T
    # outputs: I_b = Bt I
    y_dx = Bt[:, cC] @ solve_x[nf : nf + nC] + Bt[:, cR] @ solve_x[nf + nC :]
    y_du = Bt[:, cC] @ solve_u[nf : nf + nC] + Bt[:, cR] @ solve_u[nf + nC :]
    y_dx = y_dx + np.hstack([np.zeros((nb, nC)), -Bt[:, cL] / Lv if nL else np.zeros((nb, 0))])

    # express in the energy gradient (Q / C, Phi / L)
    scale = np.concatenate([Cv, Lv])
    H = _empty_or_quadratic(scale)
    labels = tuple(f"Q[{lab}]" for lab in net.labels("C")) + tuple(f"Phi[{lab}]" for lab in net.labels("L"))
    struct = dirac.kirchhoff(g)
    model_ref: dict = {}

    def port_map(x, u):
        psi, I = model_ref["m"].algebraic(x, u)
        return PortVector(np.concatenate([I, dae.Bb @ I]), np.concatenate([-B.T @ psi, psi[g.boundary_idx]]))

    sys = from_io_matrices(
        H,
        dx_dx * scale,
        dx_du,
        y_dx * scale,
        y_du,
        state_labels=labels,
        input_labels=tuple(f"psi[{v}]" for v in g.boundary_ids),
        output_labels=tuple(f"I[{v}]" for v in g.boundary_ids),
        blocks={"Q": slice(0, nC), "Phi": slice(nC, nx)},
        provenance=Provenance(g, struct, "circuit", port_map),
        params={"netlist": net},
    )
    model = CircuitModel(sys, dae, tuple(ground), solve_x, solve_u)
    model_ref["m"] = model
    return model


def _empty_or_quadratic(scale):
    from .constitutive import quadratic_form

    if len(scale) == 0:
        return quadratic_form(np.zeros((0, 0)))
    return quadratic(1.0 / scale)


def _support(basis: np.ndarray, labels: Sequence[str], tol: float = 1e-9) -> list[str]:
    mask = np.any(np.abs(basis) > tol, axis=1)
    return [lab for lab, m in zip(labels, mask) if m]


def circuit_system(text_or_netlist) -> CircuitModel:
    net = parse_netlist(text_or_netlist) if isinstance(text_or_netlist, str) else text_or_netlist
    return reduce_to_ode(assemble_dae(net))


# -- boundary flows ----------------------------------------------------------------------------


@dataclass(frozen=True)
class BoundaryFlowReport:
    components: tuple[tuple[str, ...], ...]
    sums: np.ndarray  # samples x components
    max_abs_sum: float
    scale: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.max_abs_sum <= self.tol * max(self.scale, np.finfo(float).tiny)

    @property
    def n_constraints(self) -> int:
        return len(self.components)


def boundary_flow_audit(traj, model: CircuitModel | OpenGraph, tol: float = 1e-12) -> BoundaryFlowReport:
    """Per-component sums of terminal currents along a trajectory.

    The bound is relative to the largest terminal-current norm of the run.
    """
    g = model if isinstance(model, OpenGraph) else model.dae.graph
    bpos = {v: k for k, v in enumerate(g.boundary_ids)}
    comps = []
    for comp in g.connected_components():
        terms = tuple(v for v in comp if v in bpos)
        if terms:
            comps.append(terms)
    Ib = np.atleast_2d(traj.outputs if hasattr(traj, "outputs") else traj)
    sums = np.zeros((Ib.shape[0], len(comps)))
    for k, terms in enumerate(comps):
        cols = [bpos[v] for v in terms]
        sums[:, k] = Ib[:, cols].sum(axis=1)
    scale = float(np.max(np.linalg.norm(Ib, axis=1), initial=0.0))
    worst = float(np.max(np.abs(sums), initial=0.0))
    return BoundaryFlowReport(tuple(comps), sums, worst, scale, tol)


# -- Lagrangian tree ------------------------------------------------------------------------------


@dataclass(frozen=True)
class LagrangianTree:
    graph: OpenGraph
    augmented: OpenGraph
    ground: str
    ground_edges: tuple[str, ...]

    def grounded_kirchhoff(self) -> DiracStructure:
        """Kirchhoff structure of the augmented graph with the ground effort fixed at zero."""
        d = dirac.kirchhoff(self.augmented)
        return dirac.constrain(d, dirac.BOUNDARY, "efforts", labels=[self.ground])

    def identified_effort_continuous(self) -> DiracStructure:
        """The effort-continuous structure of the original graph in augmented coordinates.

        Vertex port ``v`` becomes the ground edge ``v->g`` with
        ``f0 = -f_vg`` and ``e0 = -e_vg``.
        """
        d = dirac.effort_continuous(self.graph)
        M, N = self.graph.n_edges, self.graph.n_vertices
        nb = len(self.graph.boundary_idx)
        S = np.ones(M + N + nb)
        S[M : M + N] = -1.0
        layout = PortLayout(
            (
                PortGroup(dirac.EDGE, tuple(self.graph.edge_labels) + self.ground_edges, "edge"),
                PortGroup(dirac.BOUNDARY, tuple(self.graph.boundary_ids), "boundary"),
            )
        )
        return DiracStructure(layout, d.F * S, d.E * S, d.tol)

    def identification_residual(self) -> float:
        return dirac.same_subspace(self.identified_effort_continuous(), self.grounded_kirchhoff())

    def holds(self, tol: float = 1e-8) -> bool:
        return self.identification_residual() <= tol


def lagrangian_tree(g: OpenGraph, ground: str = "g") -> LagrangianTree:
    """Add a ground vertex and an edge ``v -> ground`` for every vertex."""
    ids = set(g.vertex_ids)
    while ground in ids:
        ground = ground + "_"
    labels = set(g.edge_labels)
    gedges = []
    for v in g.vertex_ids:
        lab = f"{v}->{ground}"
        while lab in labels:
            lab = lab + "_"
        labels.add(lab)
        gedges.append(Edge(lab, v, ground))
    aug = OpenGraph(g.vertices + (Vertex(ground, True),), g.edges + tuple(gedges))
    return LagrangianTree(g, aug, ground, tuple(e.label for e in gedges))


def mass_spring_netlist(g: OpenGraph, K, masses, ground: str = "g") -> tuple[Netlist, LagrangianTree]:
    """Closed mass-spring network as an LC circuit on its Lagrangian tree.

    Springs become inductors ``L = 1/k`` on the original edges and masses
    capacitors ``C = m`` on the vertex-to-ground edges.
    """
    if not g.is_closed:
        raise ValueError("expected a graph without boundary vertices")
    tree = lagrangian_tree(g, ground)
    K = np.broadcast_to(np.asarray(K, dtype=float), (g.n_edges,))
    m = np.broadcast_to(np.asarray(masses, dtype=float), (g.n_vertices,))
    els = [Element(e.label, "L", 1.0 / k) for e, k in zip(g.edges, K)]
    els += [Element(lab, "C", float(mi)) for lab, mi in zip(tree.ground_edges, m)]
    aug = tree.augmented.with_boundary([])
    return Netlist(aug, tuple(els)), tree


# -- two-terminal elements ----------------------------------------------------------------------------

_B = np.array([1.0, -1.0])

# storage variable, terminal flow, terminal effort names per element
_NAMES = {
    "spring": ("q", "F", "v"),
    "inductor": ("Phi", "I", "psi"),
    "capacitor": ("Q", "I", "psi"),
    "inerter": ("p", "F", "v"),
    "mass": ("p", "F", "v"),
}


@dataclass(frozen=True)
class TwoTerminal:
    """Port relations of a single-edge element between terminals ``alpha`` and ``beta``.

    The storage port uses ``f = -xdot`` and ``e = dH/dx``; ``structure`` is the
    kernel representation on (storage, terminals).
    """

    kind: str
    parameter: float
    storage: str
    structure: DiracStructure
    hamiltonian: object

    def renamed(self, mapping: dict[str, str]) -> DiracStructure:
        groups = tuple(
            PortGroup(mapping.get(gr.name, gr.name), tuple(mapping.get(lab, lab) for lab in gr.labels), gr.kind)
            for gr in self.structure.layout.groups
        )
        return DiracStructure(PortLayout(groups), self.structure.F, self.structure.E, self.structure.tol)


def _layout(kind: str, terminals: Sequence[str] = ("alpha", "beta")) -> PortLayout:
    x, f, e = _NAMES[kind]
    return PortLayout(
        (
            PortGroup("storage", (x,), "storage"),
            PortGroup("terminal", tuple(f"{f}_{t}|{e}_{t}" for t in terminals), "boundary"),
        )
    )


def two_terminal(kind: str, parameter: float) -> TwoTerminal:
    """Spring / inductor: ``xdot = b^T e_t``, ``f_t = b dH/dx``.
    Capacitor / inerter: ``b xdot = f_t``, ``dH/dx = b^T e_t``.
    Mass: one terminal, ``xdot = f_t``, ``dH/dx = e_t`` (a grounded capacitor).
    """
    if kind not in _NAMES:
        raise ValueError(f"unknown two-terminal element {kind!r}")
    if not parameter > 0:
        raise ValueError("parameter must be positive")
    H = quadratic([1.0 / parameter]) if kind in ("inductor", "capacitor", "mass", "inerter") else quadratic([parameter])
    if kind in ("spring", "inductor"):
        # f_s + b^T e_t = 0 ; f_t - b e_s = 0
        F = np.array([[1.0, 0, 0], [0, 1, 0], [0, 0, 1]])
        E = np.array([[0, _B[0], _B[1]], [-_B[0], 0, 0], [-_B[1], 0, 0]])
        layout = _layout(kind)
    elif kind in ("capacitor", "inerter"):
        # f_t + b f_s = 0 ; e_s - b^T e_t = 0
        F = np.array([[_B[0], 1.0, 0], [_B[1], 0, 1], [0, 0, 0]])
        E = np.array([[0.0, 0, 0], [0, 0, 0], [1, -_B[0], -_B[1]]])
        layout = _layout(kind)
    else:
        # f_t + f_s = 0 ; e_s - e_t = 0
        F = np.array([[1.0, 1.0], [0, 0]])
        E = np.array([[0.0, 0], [1, -1]])
        layout = _layout(kind, ("alpha",))
    d = DiracStructure(layout, F, E)
    return TwoTerminal(kind, float(parameter), _NAMES[kind][0], d, H)


def grounded(element: TwoTerminal) -> DiracStructure:
    """Pin the ``beta`` terminal effort to zero (its flow is eliminated)."""
    _, f, e = _NAMES[element.kind]
    return dirac.constrain(element.structure, "terminal", "efforts", labels=[f"{f}_beta|{e}_beta"])
