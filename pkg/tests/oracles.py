"""Independent reference computations used by the tests.

Each oracle avoids the code path it checks: stability by eigenanalysis
instead of invariant-subspace iteration, limits by spectral projection
instead of the cycle/co-cycle split, and so on.
"""

import itertools

import numpy as np

from phgraph.graph import OpenGraph
from phgraph.systems import mass_spring_damper


def null_space(A, tol=1e-10):
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.shape[0] == 0:
        return np.eye(A.shape[1])
    _, s, vt = np.linalg.svd(A)
    r = int(np.sum(s > tol * max(1.0, s[0] if s.size else 0.0)))
    return vt[r:].T


def orth(A, tol=1e-10):
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.shape[1] == 0:
        return A
    u, s, _ = np.linalg.svd(A, full_matrices=False)
    r = int(np.sum(s > tol * max(1.0, s[0] if s.size else 0.0)))
    return u[:, :r]


def spectral_stability(A, margin=1e-9):
    """Largest real part of ``A`` restricted to the complement of its Casimir gradients."""
    C = null_space(A.T)
    T = null_space(C.T) if C.shape[1] else np.eye(A.shape[0])
    if T.shape[1] == 0:
        return True, -np.inf
    worst = float(np.max(np.linalg.eigvals(T.T @ A @ T).real))
    return worst < -margin, worst


def zero_projector(A):
    """Spectral projector onto ``ker A`` along ``im A`` (zero eigenvalue assumed semisimple)."""
    V = null_space(A)
    W = null_space(A.T)
    return V @ np.linalg.solve(W.T @ V, W.T)


def brute_force_invariant(A, W, tol=1e-8):
    """Largest ``A``-invariant subspace inside ``span W`` for diagonalizable ``A``.

    Enumerates conjugation-closed eigenvector subsets and keeps the span of
    every subset contained in ``W``.
    """
    lam, V = np.linalg.eig(A)
    n = len(lam)
    Pw = orth(W)
    proj = Pw @ Pw.T
    # group conjugate pairs
    groups, used = [], set()
    for i in range(n):
        if i in used:
            continue
        grp = [i]
        used.add(i)
        if abs(lam[i].imag) > 1e-12:
            j = min((k for k in range(n) if k not in used), key=lambda k: abs(lam[k] - lam[i].conj()))
            grp.append(j)
            used.add(j)
        groups.append(grp)
    keep = []
    for grp in groups:
        cols = V[:, grp]
        basis = np.hstack([cols.real, cols.imag])
        if np.linalg.norm(basis - proj @ basis) <= tol * max(1.0, np.linalg.norm(basis)):
            keep.append(basis)
    # eigenvalue multiplicities: combinations inside an eigenspace can also lie in W
    for lam0 in np.unique(np.round(lam, 8)):
        idx = [k for k in range(n) if abs(lam[k] - lam0) < 1e-7]
        if len(idx) > 1:
            E = orth(np.hstack([V[:, idx].real, V[:, idx].imag]))
            inside = orth(E @ null_space((np.eye(n) - proj) @ E))
            if inside.shape[1]:
                keep.append(inside)
    if not keep:
        return np.zeros((n, 0))
    return orth(np.hstack(keep))


def random_connected_graph(rng, n, extra):
    """Random spanning tree on ``n`` vertices plus ``extra`` random edges (parallel edges allowed)."""
    ids = [str(k) for k in range(n)]
    edges = []
    for k in range(1, n):
        j = int(rng.integers(0, k))
        edges.append((ids[j], ids[k]) if rng.random() < 0.5 else (ids[k], ids[j]))
    for _ in range(extra):
        a, b = rng.choice(n, size=2, replace=False)
        edges.append((ids[a], ids[b]))
    return OpenGraph.build(ids, edges)


def random_msd(rng, max_n=6, unit_prob=0.5):
    """Random connected mass-spring-damper network with diagonal quadratic energy."""
    n = int(rng.integers(2, max_n + 1))
    g = random_connected_graph(rng, n, int(rng.integers(0, n)))
    kinds = {lab: ("damper" if rng.random() < 0.35 else "spring") for lab in g.edge_labels}
    springs = [lab for lab in g.edge_labels if kinds[lab] == "spring"]
    dampers = [lab for lab in g.edge_labels if kinds[lab] == "damper"]
    if rng.random() < unit_prob:
        K, G, R = np.ones(len(springs)), np.ones(n), np.ones(len(dampers))
    else:
        K = rng.choice([0.5, 1.0, 2.0, 3.0], size=len(springs))
        G = rng.choice([0.5, 1.0, 2.0], size=n)
        R = rng.choice([0.5, 1.0, 2.0], size=len(dampers))
    return mass_spring_damper(g, kinds, K, G, R), (g, kinds, K, G, R)


def subsets(n):
    for r in range(n + 1):
        yield from itertools.combinations(range(n), r)
