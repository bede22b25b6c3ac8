import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from phgraph import subspace as ss
from oracles import brute_force_invariant


def test_kernel_and_span_dims():
    A = np.array([[1.0, 1.0, 0.0], [0.0, 0.0, 0.0]])
    assert ss.kernel(A).dim == 2
    assert ss.span(A.T).dim == 1
    assert ss.kernel(np.zeros((0, 3))).dim == 3


def test_roundoff_zero_matrix_has_rank_zero_with_scale():
    tiny = np.full((3, 3), 1e-17)
    assert ss.span(tiny, scale=1.0).dim == 0
    assert ss.kernel(tiny, scale=1.0).dim == 3


def test_intersection_and_sum():
    u = ss.span(np.eye(3)[:, :2])
    v = ss.span(np.eye(3)[:, 1:])
    assert ss.intersect(u, v).dim == 1
    assert ss.intersect(u, v).contains(np.array([[0.0], [1.0], [0.0]]))
    assert ss.sum_(u, v).dim == 3


def test_preimage():
    A = np.diag([1.0, 0.0, 2.0])
    v = ss.span(np.array([[1.0], [0.0], [0.0]]))
    pre = ss.preimage(A, v)
    assert pre.dim == 2  # e1 and the kernel direction e2


def test_dimension_mismatch():
    with pytest.raises(ss.DimensionError):
        ss.intersect(ss.full(2), ss.full(3))


def test_invariant_three_mass_example():
    # G Ls for the 3-mass line with unit springs; ker Bd^T for a damper between 1 and 3
    Ls = np.array([[1.0, -1, 0], [-1, 2, -1], [0, -1, 1]])
    W = ss.kernel(np.array([[1.0, 0, -1]]))
    V = ss.largest_invariant_in(Ls, W)
    assert V.dim == 2
    assert V.contains(np.array([[1.0, 1, 1], [1, -2, 1]]).T)


def test_invariant_iteration_is_decreasing_chain():
    rng = np.random.default_rng(1)
    A = rng.normal(size=(5, 5))
    W = ss.span(rng.normal(size=(5, 3)))
    chain = ss.invariant_iteration(A, W)
    dims = [c.dim for c in chain]
    assert dims == sorted(dims, reverse=True)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_invariant_matches_eigenvector_enumeration(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 6))
    A = rng.normal(size=(n, n))
    lam, V = np.linalg.eig(A)
    # a conjugation-closed eigen-subset plus random directions
    pick = [k for k in range(n) if rng.random() < 0.5]
    pick = sorted(set(pick) | {j for k in pick for j in range(n) if abs(lam[j] - lam[k].conj()) < 1e-9})
    cols = [V[:, pick].real, V[:, pick].imag, rng.normal(size=(n, int(rng.integers(0, 2))))]
    W = ss.span(np.hstack(cols), scale=1.0)
    got = ss.largest_invariant_in(A, W)
    want = brute_force_invariant(A, W.basis)
    assert got.dim == want.shape[1]
    if got.dim:
        assert got.contains(want, tol=1e-6) and ss.span(want).contains(got.basis, tol=1e-6)


def test_distance():
    u = ss.span(np.array([[1.0], [0.0]]))
    assert ss.distance(u, u) == 0.0
    assert ss.distance(u, ss.full(2)) == float("inf")
