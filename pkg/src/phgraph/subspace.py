"""Numerically ranked linear subspaces.

A :class:`Subspace` stores an orthonormal basis; rank decisions use singular
values against ``tol * max(sigma_max, scale)`` so that matrices which are zero
up to roundoff do not acquire a spurious rank.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_TOL = 1e-9


class DimensionError(ValueError):
    pass


@dataclass(frozen=True)
class Subspace:
    ambient_dim: int
    basis: np.ndarray
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        b = np.asarray(self.basis, dtype=float)
        b = b.reshape(self.ambient_dim, b.size // self.ambient_dim if self.ambient_dim else 0)
        b.setflags(write=False)
        object.__setattr__(self, "basis", b)

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    def __repr__(self):
        return f"Subspace(dim={self.dim}, ambient={self.ambient_dim})"

    def projector(self) -> np.ndarray:
        return self.basis @ self.basis.T

    def project(self, x: np.ndarray) -> np.ndarray:
        return self.basis @ (self.basis.T @ x)

    def residual(self, x: np.ndarray) -> float:
        """Largest distance of the columns of ``x`` from the subspace."""
        x = np.asarray(x, dtype=float)
        x = x.reshape(self.ambient_dim, x.size // self.ambient_dim if self.ambient_dim else 0)
        if x.shape[1] == 0:
            return 0.0
        r = x - self.project(x)
        return float(np.max(np.linalg.norm(r, axis=0)))

    def contains(self, other: Subspace | np.ndarray, tol: float | None = None) -> bool:
        x = other.basis if isinstance(other, Subspace) else other
        scale = 1.0 if isinstance(other, Subspace) else max(1.0, float(np.max(np.abs(x), initial=0.0)))
        return self.residual(x) <= (10 * self.tol if tol is None else tol) * scale

    def equals(self, other: Subspace, tol: float | None = None) -> bool:
        _check_same(self, other)
        return self.dim == other.dim and self.contains(other, tol) and other.contains(self, tol)


def _check_same(u: Subspace, v: Subspace):
    if u.ambient_dim != v.ambient_dim:
        raise DimensionError(f"ambient dimensions differ: {u.ambient_dim} vs {v.ambient_dim}")


def _svd_rank(s: np.ndarray, tol: float, scale: float) -> int:
    if s.size == 0:
        return 0
    ref = max(float(s[0]), scale)
    if ref <= 0.0:
        return 0
    return int(np.sum(s > tol * ref))


def zero(n: int, tol: float = DEFAULT_TOL) -> Subspace:
    return Subspace(n, np.zeros((n, 0)), tol)


def full(n: int, tol: float = DEFAULT_TOL) -> Subspace:
    return Subspace(n, np.eye(n), tol)


def span(columns, tol: float | None = None, scale: float = 0.0) -> Subspace:
    """Column space of ``columns`` (n x k)."""
    tol = DEFAULT_TOL if tol is None else tol
    a = np.atleast_2d(np.asarray(columns, dtype=float))
    if np.asarray(columns).ndim == 1:
        a = a.T
    n = a.shape[0]
    if a.shape[1] == 0:
        return zero(n, tol)
    u, s, _ = np.linalg.svd(a, full_matrices=False)
    r = _svd_rank(s, tol, scale)
    return Subspace(n, u[:, :r], tol)


def kernel(A, tol: float | None = None, scale: float = 0.0) -> Subspace:
    """Null space of ``A`` (m x n) as a subspace of R^n."""
    tol = DEFAULT_TOL if tol is None else tol
    a = np.atleast_2d(np.asarray(A, dtype=float))
    n = a.shape[1]
    if a.shape[0] == 0 or n == 0:
        return full(n, tol)
    _, s, vt = np.linalg.svd(a, full_matrices=True)
    r = _svd_rank(s, tol, scale)
    return Subspace(n, vt[r:].T.copy(), tol)


def complement(u: Subspace) -> Subspace:
    """Orthogonal complement."""
    if u.dim == 0:
        return full(u.ambient_dim, u.tol)
    return kernel(u.basis.T, u.tol, scale=1.0)


def intersect(u: Subspace, v: Subspace) -> Subspace:
    _check_same(u, v)
    n = u.ambient_dim
    tol = max(u.tol, v.tol)
    if u.dim == 0 or v.dim == 0:
        return zero(n, tol)
    stacked = np.vstack([np.eye(n) - u.projector(), np.eye(n) - v.projector()])
    return kernel(stacked, tol, scale=1.0)


def sum_(u: Subspace, v: Subspace) -> Subspace:
    _check_same(u, v)
    return span(np.hstack([u.basis, v.basis]), max(u.tol, v.tol), scale=1.0)


def preimage(A, v: Subspace) -> Subspace:
    """``{x : A x in v}``."""
    a = np.atleast_2d(np.asarray(A, dtype=float))
    if a.shape[0] != v.ambient_dim:
        raise DimensionError(f"A has {a.shape[0]} rows but subspace lives in R^{v.ambient_dim}")
    p_perp = np.eye(v.ambient_dim) - v.projector()
    scale = float(np.linalg.norm(a, 2)) if a.size else 0.0
    return kernel(p_perp @ a, v.tol, scale=scale)


def invariant_iteration(A, w: Subspace) -> list[Subspace]:
    """Iterates ``V0 = W, V_{j+1} = W cap A^{-1} V_j`` until the dimension stalls."""
    a = np.asarray(A, dtype=float)
    if a.shape != (w.ambient_dim, w.ambient_dim):
        raise DimensionError("A must be square and match the ambient dimension of W")
    chain = [w]
    for _ in range(w.ambient_dim + 1):
        nxt = intersect(w, preimage(a, chain[-1]))
        chain.append(nxt)
        if nxt.dim == chain[-2].dim:
            break
    return chain


def largest_invariant_in(A, w: Subspace) -> Subspace:
    """Largest ``A``-invariant subspace contained in ``w``."""
    return invariant_iteration(A, w)[-1]


def distance(u: Subspace, v: Subspace) -> float:
    """Mutual-inclusion residual; 0 iff the subspaces coincide."""
    _check_same(u, v)
    if u.dim != v.dim:
        return float("inf")
    return max(v.residual(u.basis), u.residual(v.basis))
