"""Equilibria, Casimirs, limit points and stability of mass-spring-damper networks."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np

from . import subspace as ss
from .constitutive import Hamiltonian, availability
from .graph import OpenGraph
from .subspace import Subspace
from .systems import PHSystem, mass_spring_damper

DEFAULT_TOL = 1e-9


class AnalysisError(ValueError):
    pass


class InfeasibleDisturbance(AnalysisError):
    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


# -- network data -----------------------------------------------------------------------


@dataclass(frozen=True)
class MSDData:
    """Incidence and parameter data of a mass-spring-damper system."""

    Bs: np.ndarray
    Bd: np.ndarray
    K: np.ndarray
    G: np.ndarray
    R: np.ndarray
    E: np.ndarray

    @property
    def n_vertices(self) -> int:
        return self.Bs.shape[0]

    @property
    def n_springs(self) -> int:
        return self.Bs.shape[1]

    @property
    def Ls(self) -> np.ndarray:
        return self.Bs @ self.K @ self.Bs.T


def _diag(a, n: int) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim <= 1:
        return np.diag(np.broadcast_to(a, (n,)).astype(float))
    return a.reshape(n, n)


def msd_data(sys: PHSystem) -> MSDData:
    p = sys.params
    if "Bs" not in p or p.get("configuration"):
        raise AnalysisError("expected a system built by mass_spring_damper")
    N = p["Bs"].shape[0]
    return MSDData(
        p["Bs"], p["Bd"], _diag(p["K"], p["Bs"].shape[1]), _diag(p["G"], N), _diag(p["R"], p["Bd"].shape[1]), p["E"]
    )


def _as_data(*args) -> MSDData:
    if len(args) == 1 and isinstance(args[0], PHSystem):
        return msd_data(args[0])
    if len(args) == 1 and isinstance(args[0], MSDData):
        return args[0]
    Bs, Bd, K, G = (np.asarray(a, dtype=float) for a in args)
    N = Bs.shape[0]
    Bs = Bs.reshape(N, -1)
    Bd = Bd.reshape(N, -1)
    return MSDData(Bs, Bd, _diag(K, Bs.shape[1]), _diag(G, N), np.eye(Bd.shape[1]), np.zeros((N, 0)))


def check_connected(data: MSDData, tol: float = DEFAULT_TOL) -> None:
    """The spring and damper edges together must connect all vertices."""
    N = data.n_vertices
    joint = ss.kernel(np.vstack([data.Bs.T, data.Bd.T]), tol)
    if joint.dim != 1:
        raise AnalysisError(
            f"spring/damper graph has {joint.dim} connected components; analyse each connected component separately"
        )
    if not joint.contains(np.ones((N, 1))):
        raise AnalysisError("unexpected kernel of the joint incidence")


# -- equilibria and Casimirs ----------------------------------------------------------------


@dataclass(frozen=True)
class EquilibriumSet:
    """``dH/dq in ker Bs`` and ``dH/dp in span 1``."""

    data: MSDData
    hamiltonian: Hamiltonian
    tol: float = DEFAULT_TOL

    @property
    def gradient_q(self) -> Subspace:
        return ss.kernel(self.data.Bs, self.tol)

    @property
    def gradient_p(self) -> Subspace:
        return ss.span(np.ones((self.data.n_vertices, 1)), self.tol)

    def conditions(self, x) -> tuple[float, float]:
        g = self.hamiltonian.gradient(x)
        M = self.data.n_springs
        return self.gradient_q.residual(g[:M]), self.gradient_p.residual(g[M:])

    def is_equilibrium(self, x, tol: float | None = None) -> bool:
        tol = 1e-10 if tol is None else tol
        g = self.hamiltonian.gradient(x)
        scale = max(1.0, float(np.max(np.abs(g))))
        return max(self.conditions(x)) <= tol * scale

    def parametrization(self) -> Subspace:
        """Basis of the equilibrium set for quadratic ``H`` with no linear term."""
        if not self.hamiltonian.is_quadratic:
            raise AnalysisError("explicit parametrization requires a quadratic Hamiltonian")
        d = self.data
        M = d.n_springs
        Kinv = np.linalg.inv(d.K) if M else np.zeros((0, 0))
        qb = Kinv @ self.gradient_q.basis
        pb = np.linalg.solve(d.G, np.ones((d.n_vertices, 1)))
        cols = np.zeros((M + d.n_vertices, qb.shape[1] + 1))
        cols[:M, : qb.shape[1]] = qb
        cols[M:, -1:] = pb
        return ss.span(cols, self.tol)

    def describe(self) -> str:
        kq = self.gradient_q
        lines = ["equilibria: dH/dq in ker Bs, dH/dp in span 1"]
        if kq.dim == 0:
            lines.append("  ker Bs = {0}: spring forces vanish at equilibrium")
        else:
            lines.append(f"  ker Bs has dimension {kq.dim}; basis columns:")
            lines.extend("    " + np.array2string(c, precision=6, suppress_small=True) for c in kq.basis.T)
        return "\n".join(lines)


def equilibria(sys: PHSystem, tol: float = DEFAULT_TOL) -> EquilibriumSet:
    data = msd_data(sys)
    check_connected(data, tol)
    return EquilibriumSet(data, sys.hamiltonian, tol)


@dataclass(frozen=True)
class CasimirBasis:
    """Rows are linear functionals on ``(q, p)``: ``1^T p`` first, then ``k^T q``."""

    functionals: np.ndarray
    names: tuple[str, ...]

    @property
    def count(self) -> int:
        return self.functionals.shape[0]

    def values(self, X) -> np.ndarray:
        return np.atleast_2d(X) @ self.functionals.T

    def drift(self, X) -> np.ndarray:
        v = self.values(X)
        return np.max(np.abs(v - v[0]), axis=0)


def _integer_like(v: np.ndarray) -> np.ndarray:
    """Rescale a kernel vector so its largest entry is 1 and clean roundoff."""
    v = v / v[np.argmax(np.abs(v))]
    r = np.round(v)
    return np.where(np.abs(v - r) < 1e-12, r, v)


def casimirs(sys: PHSystem, tol: float = DEFAULT_TOL) -> CasimirBasis:
    data = msd_data(sys)
    M, N = data.n_springs, data.n_vertices
    rows = [np.concatenate([np.zeros(M), np.ones(N)])]
    names = ["1^T p"]
    for k, vec in enumerate(ss.kernel(data.Bs, tol).basis.T):
        vec = _integer_like(vec)
        rows.append(np.concatenate([vec, np.zeros(N)]))
        names.append(f"k{k}^T q")
    return CasimirBasis(np.array(rows).reshape(len(rows), M + N), tuple(names))


@dataclass(frozen=True)
class AffineSpace:
    offset: np.ndarray
    directions: Subspace

    def residual(self, x) -> float:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return self.directions.residual((x - self.offset).T)

    def contains(self, x, tol: float = 1e-8) -> bool:
        scale = max(1.0, float(np.max(np.abs(x))))
        return self.residual(x) <= tol * scale


def invariant_affine_space(sys: PHSystem, x0, tol: float = DEFAULT_TOL) -> AffineSpace:
    """``x0 + (im Bs^T x {0}) + ({0} x ker 1^T)``."""
    data = msd_data(sys)
    M, N = data.n_springs, data.n_vertices
    cols = np.zeros((M + N, 2 * N))
    cols[:M, :N] = data.Bs.T
    cols[M:, N:] = np.eye(N) - np.ones((N, N)) / N
    return AffineSpace(np.asarray(x0, dtype=float), ss.span(cols, tol, scale=1.0))


# -- limit points --------------------------------------------------------------------------


def _diagonal_quadratic(sys: PHSystem) -> tuple[np.ndarray, np.ndarray]:
    H = sys.hamiltonian
    if not H.is_quadratic:
        raise AnalysisError("limit point requires a quadratic Hamiltonian")
    Q = H.Q
    if np.any(Q != np.diag(np.diag(Q))) or np.any(H.c != 0):
        raise AnalysisError("limit point requires a diagonal quadratic Hamiltonian")
    return np.diag(Q), H.c


def q_limit(Bs, K, q0) -> np.ndarray:
    """Split ``q0 = q_inf + Bs^T w`` with ``K q_inf in ker Bs``; return ``q_inf``."""
    Bs = np.asarray(Bs, dtype=float)
    K = np.asarray(K, dtype=float)
    q0 = np.asarray(q0, dtype=float)
    if Bs.shape[1] == 0:
        return q0.copy()
    Ls = Bs @ K @ Bs.T
    w = np.linalg.lstsq(Ls, Bs @ K @ q0, rcond=None)[0]
    return q0 - Bs.T @ w


def consensus_constant(g, p0) -> float:
    """``c`` with ``G p_inf = c 1`` from conservation of ``1^T p``."""
    g = np.asarray(g, dtype=float)
    return float(np.sum(p0) / np.sum(1.0 / g))


def consensus_constant_product(g, p0) -> float:
    """The same constant from ``c sum_i prod_{j != i} g_j = (prod_i g_i)(sum_i p0_i)``."""
    g = np.asarray(g, dtype=float)
    prods = [np.prod(np.delete(g, i)) for i in range(len(g))]
    return float(np.prod(g) * np.sum(p0) / np.sum(prods))


def limit_point(sys: PHSystem, q0, p0) -> tuple[np.ndarray, np.ndarray]:
    data = msd_data(sys)
    _diagonal_quadratic(sys)
    g = np.diag(data.G)
    c = consensus_constant(g, p0)
    return q_limit(data.Bs, data.K, q0), c / g


# -- pervasive damping --------------------------------------------------------------------


def damping_invariant_subspace(*args, tol: float = DEFAULT_TOL) -> Subspace:
    """Largest ``G Ls``-invariant subspace inside ``ker Bd^T``."""
    d = _as_data(*args)
    A = d.G @ d.Ls
    w = ss.kernel(d.Bd.T, tol) if d.Bd.shape[1] else ss.full(d.n_vertices, tol)
    return ss.largest_invariant_in(A, w)


def pervasive_damping(*args, tol: float = DEFAULT_TOL) -> bool:
    """Accepts ``(Bs, Bd, K, G)`` or a mass-spring-damper system."""
    d = _as_data(*args)
    check_connected(d, tol)
    v = damping_invariant_subspace(d, tol=tol)
    return v.dim == 1 and v.contains(np.ones((d.n_vertices, 1)))


def second_order_consensus(*args, tol: float = DEFAULT_TOL) -> bool:
    """Pervasive damping on a connected, cycle-free spring graph."""
    d = _as_data(*args)
    if ss.kernel(d.Bs.T, tol).dim != 1:
        raise AnalysisError("spring graph must be connected")
    cycle_free = ss.kernel(d.Bs, tol).dim == 0
    return pervasive_damping(d, tol=tol) and cycle_free


def slowest_rate(sys: PHSystem, tol: float = DEFAULT_TOL) -> float:
    """Smallest decay rate off the Casimir directions (0 if some mode persists)."""
    A, _, _ = sys.linear_matrices()
    T = ss.complement(ss.kernel(A.T, tol, scale=1.0)).basis
    if T.shape[1] == 0:
        return float("inf")
    return float(-np.max(np.linalg.eigvals(T.T @ A @ T).real))


# -- constant disturbances -------------------------------------------------------------------


@dataclass(frozen=True)
class DisturbanceEquilibrium:
    qbar: np.ndarray
    q_inf: np.ndarray
    p_inf: np.ndarray
    availability: Hamiltonian

    @property
    def x_inf(self) -> np.ndarray:
        return np.concatenate([self.q_inf, self.p_inf])


def disturbance_equilibrium(sys: PHSystem, fbar, q0, p0, tol: float = 1e-10) -> DisturbanceEquilibrium:
    """Limit under the constant boundary force ``fbar`` and its availability function."""
    data = msd_data(sys)
    _diagonal_quadratic(sys)
    fbar = np.asarray(fbar, dtype=float).reshape(data.E.shape[1])
    rhs = data.E @ fbar
    A = data.Bs @ data.K
    if A.shape[1] == 0:
        qbar = np.zeros(0)
        resid = float(np.linalg.norm(rhs))
    else:
        qbar = np.linalg.lstsq(A, rhs, rcond=None)[0]
        resid = float(np.linalg.norm(A @ qbar - rhs))
    if resid > tol * max(1.0, float(np.linalg.norm(rhs))):
        raise InfeasibleDisturbance(
            f"E fbar is not in im Bs (residual {resid:.3e}); no equilibrium exists for this disturbance", resid
        )
    q0 = np.asarray(q0, dtype=float)
    q_inf = qbar + q_limit(data.Bs, data.K, q0 - qbar)
    g = np.diag(data.G)
    p_inf = consensus_constant(g, p0) / g
    xbar = np.concatenate([qbar, np.zeros(data.n_vertices)])
    return DisturbanceEquilibrium(qbar, q_inf, p_inf, availability(sys.hamiltonian, xbar))


@dataclass(frozen=True)
class MassDamperEquilibrium:
    pbar: np.ndarray
    velocities: np.ndarray
    availability: Hamiltonian


def mass_damper_equilibrium(sys: PHSystem, ebar) -> MassDamperEquilibrium:
    """Unique ``pbar`` with ``0 = -Bi R Bi^T G pbar - Bi R Bb^T ebar``."""
    p = sys.params
    if "Bi" not in p:
        raise AnalysisError("expected a mass-damper or consensus system")
    Bi, Bb, r = p["Bi"], p["Bb"], np.asarray(p["R"], dtype=float)
    if Bb.shape[0] == 0:
        raise AnalysisError("at least one boundary vertex is needed to pin the equilibrium")
    full = np.vstack([Bi, Bb])
    if ss.kernel(full[:, r > 0].T).dim != 1:
        raise AnalysisError("graph of positive dampers is not connected")
    ebar = np.asarray(ebar, dtype=float).reshape(Bb.shape[0])
    Lii = (Bi * r) @ Bi.T
    v = np.linalg.solve(Lii, -(Bi * r) @ Bb.T @ ebar)
    H = sys.hamiltonian
    if not H.is_quadratic:
        raise AnalysisError("requires a quadratic Hamiltonian")
    pbar = np.linalg.solve(H.Q, v - H.c)
    return MassDamperEquilibrium(pbar, v, availability(H, pbar))


# -- symmetry reduction ---------------------------------------------------------------------------


def symmetry_reduce(config_sys: PHSystem) -> PHSystem:
    """Quotient of the vertex-position model by rigid shifts: state ``(q, p)`` with ``q = Bs^T q_c``."""
    p = config_sys.params
    if not p.get("configuration"):
        raise AnalysisError("expected a system built by mass_spring_damper_configuration")
    return mass_spring_damper(p["graph"], p["kinds"], p["K"], p["G"], p["R"])


def project(config_sys: PHSystem, x_config) -> np.ndarray:
    """Map configuration states (rows) to reduced states."""
    X = np.atleast_2d(np.asarray(x_config, dtype=float))
    N = config_sys.params["Bs"].shape[0]
    Bs = config_sys.params["Bs"]
    out = np.hstack([X[:, :N] @ Bs, X[:, N:]])
    return out[0] if np.ndim(x_config) == 1 else out


def lift(config_sys: PHSystem, x_reduced, tol: float = 1e-10) -> np.ndarray:
    """A configuration state projecting onto ``x_reduced`` (minimum-norm positions)."""
    Bs = config_sys.params["Bs"]
    M = Bs.shape[1]
    x = np.asarray(x_reduced, dtype=float)
    q, p = x[:M], x[M:]
    qc = np.linalg.lstsq(Bs.T, q, rcond=None)[0] if M else np.zeros(Bs.shape[0])
    if np.linalg.norm(Bs.T @ qc - q) > tol * max(1.0, float(np.linalg.norm(q))):
        raise AnalysisError("q is not in im Bs^T; it cannot come from vertex positions")
    return np.concatenate([qc, p])


def shift_directions(config_sys: PHSystem) -> np.ndarray:
    """Indicator vectors of the spring-graph components: one rigid shift each."""
    p = config_sys.params
    g: OpenGraph = p["graph"].edge_subgraph(p["springs"])
    comps = g.connected_components()
    D = np.zeros((g.n_vertices, len(comps)))
    for k, comp in enumerate(comps):
        for vid in comp:
            D[g.vertex_index(vid), k] = 1.0
    return D


@dataclass(frozen=True)
class FurtherReduction:
    system: PHSystem
    offset: np.ndarray
    T: np.ndarray

    def embed(self, Z) -> np.ndarray:
        Z = np.asarray(Z, dtype=float)
        return self.offset + Z @ self.T.T

    def restrict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        return (X - self.offset) @ self.T


def further_reduce(sys: PHSystem, x0, tol: float = DEFAULT_TOL) -> FurtherReduction:
    """Restrict to the Casimir level set through ``x0``, coordinates on ``im Bs^T x im Bs``.

    Inputs are carried along by projection; the level set stays invariant only
    for inputs with ``1^T E u = 0``.
    """
    data = msd_data(sys)
    M, N = data.n_springs, data.n_vertices
    if ss.kernel(data.Bs.T, tol).dim != 1:
        raise AnalysisError("spring graph must be connected")
    x0 = np.asarray(x0, dtype=float)
    Vq = ss.span(data.Bs.T, tol, scale=1.0).basis if M else np.zeros((0, 0))
    Vp = ss.complement(ss.span(np.ones((N, 1)), tol)).basis
    r = Vq.shape[1]
    T = np.zeros((M + N, r + Vp.shape[1]))
    T[:M, :r] = Vq
    T[M:, r:] = Vp
    kq = ss.kernel(data.Bs, tol)
    offset = np.concatenate([kq.project(x0[:M]), np.full(N, x0[M:].mean())])
    Hr = sys.hamiltonian.restricted(offset, T)
    red = PHSystem(
        Hr,
        T.T @ sys.J @ T,
        T.T @ sys.R @ T,
        T.T @ sys.G,
        P=T.T @ sys.P,
        S=sys.S,
        N=sys.N,
        state_labels=tuple(f"zq{k}" for k in range(r)) + tuple(f"zp{k}" for k in range(Vp.shape[1])),
        input_labels=sys.input_labels,
        output_labels=sys.output_labels,
        blocks={"zq": slice(0, r), "zp": slice(r, T.shape[1])},
    )
    return FurtherReduction(red, offset, T)


def report(sys: PHSystem, x0=None, tol: float = DEFAULT_TOL) -> dict[str, Any]:
    """Everything the command line ``analyze`` prints, as plain data."""
    data = msd_data(sys)
    out: dict[str, Any] = {"tol": tol}
    try:
        check_connected(data, tol)
        out["connected"] = True
    except AnalysisError as exc:
        out["connected"] = False
        out["connectivity_note"] = str(exc)
        return out
    cas = casimirs(sys, tol)
    out["casimirs"] = {name: row.tolist() for name, row in zip(cas.names, cas.functionals)}
    out["equilibria"] = EquilibriumSet(data, sys.hamiltonian, tol).describe()
    inv = damping_invariant_subspace(data, tol=tol)
    out["pervasive_damping"] = bool(inv.dim == 1 and inv.contains(np.ones((data.n_vertices, 1))))
    out["invariant_subspace_dim"] = inv.dim
    out["invariant_subspace_basis"] = inv.basis.T.tolist()
    if ss.kernel(data.Bs.T, tol).dim == 1:
        out["second_order_consensus"] = second_order_consensus(data, tol=tol)
    else:
        out["second_order_consensus"] = None
    if x0 is not None:
        x0 = np.asarray(x0, dtype=float)
        M = data.n_springs
        q, p = limit_point(sys, x0[:M], x0[M:])
        out["limit_point"] = {"q": q.tolist(), "p": p.tolist()}
    return out


__all__ = [
    "AnalysisError",
    "InfeasibleDisturbance",
    "MSDData",
    "msd_data",
    "EquilibriumSet",
    "equilibria",
    "CasimirBasis",
    "casimirs",
    "AffineSpace",
    "invariant_affine_space",
    "q_limit",
    "consensus_constant",
    "consensus_constant_product",
    "limit_point",
    "damping_invariant_subspace",
    "pervasive_damping",
    "second_order_consensus",
    "slowest_rate",
    "DisturbanceEquilibrium",
    "disturbance_equilibrium",
    "MassDamperEquilibrium",
    "mass_damper_equilibrium",
    "symmetry_reduce",
    "project",
    "lift",
    "shift_directions",
    "FurtherReduction",
    "further_reduce",
    "report",
]
