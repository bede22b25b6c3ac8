import numpy as np
import pytest

from phgraph import kernels, sim
from phgraph import systems as sy
from phgraph.graph import OpenGraph

BACKENDS = sorted(kernels.backends())


def test_python_backend_always_available():
    assert "python" in BACKENDS
    assert kernels.BACKEND in BACKENDS


def _problem(seed=0, n=6, m=2, steps=200):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(n, n)) - 2 * np.eye(n)
    Bu = rng.normal(size=(n, m))
    U = rng.normal(size=(2 * steps + 1, m))
    return A, Bu, U, rng.normal(size=n), steps


@pytest.mark.parametrize("name", BACKENDS)
def test_rk4_backends_agree(name):
    A, Bu, U, x0, steps = _problem()
    ref = kernels.backends()["python"].rk4_affine(A, Bu, U, x0, 0.01, steps)
    got = kernels.backends()[name].rk4_affine(A, Bu, U, x0, 0.01, steps)
    np.testing.assert_allclose(got, ref, rtol=0, atol=1e-12)


@pytest.mark.parametrize("name", BACKENDS)
def test_midpoint_backends_agree(name):
    A, Bu, U, x0, steps = _problem(1)
    ref = kernels.backends()["python"].midpoint_affine(np.eye(6) + 0.01 * A, Bu, U[:steps], x0, steps)
    got = kernels.backends()[name].midpoint_affine(np.eye(6) + 0.01 * A, Bu, U[:steps], x0, steps)
    np.testing.assert_allclose(got, ref, rtol=0, atol=1e-12)


@pytest.mark.parametrize("method", ["rk4", "midpoint"])
def test_integrate_backends_agree(method):
    g = OpenGraph.build(["1", "2", "3"], [("1", "2"), ("2", "3")], boundary=["3"])
    sys = sy.mass_spring_boundary_masses(g, [1.0, 2.0], [1.0, 0.5, 2.0])
    runs = [sim.integrate(sys, np.ones(5), sim.Sinusoid((1.0,), 3.0), T=3.0, dt=0.01, method=method, backend=b) for b in BACKENDS]
    for tr, b in zip(runs, BACKENDS):
        assert tr.backend == b
        np.testing.assert_allclose(tr.states, runs[0].states, rtol=0, atol=1e-12)


def test_zero_steps():
    A, Bu, U, x0, _ = _problem()
    for mod in kernels.backends().values():
        X = mod.rk4_affine(A, Bu, U[:1], x0, 0.1, 0)
        np.testing.assert_array_equal(X, x0[None, :])
