import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from phgraph import analysis as an
from phgraph import sim
from phgraph import systems as sy
from phgraph.graph import OpenGraph
from oracles import random_msd, spectral_stability, zero_projector


def two_mass():
    g = OpenGraph.build(["1", "2"], [("s", "1", "2"), ("d", "1", "2")])
    return sy.mass_spring_damper(g, {"s": "spring", "d": "damper"}, [1.0], [1.0, 1.0], [1.0])


def three_mass_damper13(config=False):
    g = OpenGraph.build(["1", "2", "3"], [("s12", "1", "2"), ("s23", "2", "3"), ("d13", "1", "3")])
    kinds = {"s12": "spring", "s23": "spring", "d13": "damper"}
    build = sy.mass_spring_damper_configuration if config else sy.mass_spring_damper
    return build(g, kinds, [1.0, 1.0], [1.0, 1.0, 1.0], [1.0])


def triangle_msd(config=False, dampers=False):
    edges = [("s12", "1", "2"), ("s23", "2", "3"), ("s31", "3", "1")]
    kinds = {"s12": "spring", "s23": "spring", "s31": "spring"}
    if dampers:
        edges += [("d12", "1", "2"), ("d23", "2", "3"), ("d31", "3", "1")]
        kinds.update({"d12": "damper", "d23": "damper", "d31": "damper"})
    g = OpenGraph.build(["1", "2", "3"], edges)
    build = sy.mass_spring_damper_configuration if config else sy.mass_spring_damper
    return build(g, kinds, [1.0, 2.0, 3.0], [1.0, 0.5, 2.0], [1.0] * (3 if dampers else 0))


def test_pervasive_witnesses():
    assert an.pervasive_damping(two_mass())
    sys = three_mass_damper13()
    assert not an.pervasive_damping(sys)
    V = an.damping_invariant_subspace(sys)
    assert V.dim == 2 and V.contains(np.array([[1.0], [-2.0], [1.0]]))


def test_pervasive_from_matrices():
    Bs = np.array([[1.0], [-1.0]])
    assert an.pervasive_damping(Bs, Bs, [1.0], [1.0, 1.0])
    with pytest.raises(an.AnalysisError, match="components"):
        an.pervasive_damping(np.zeros((3, 0)), np.array([[1.0], [-1.0], [0.0]]), [], [1, 1, 1])


def test_second_order_consensus_examples():
    assert an.second_order_consensus(two_mass())
    assert an.pervasive_damping(triangle_msd(dampers=True))
    assert not an.second_order_consensus(triangle_msd(dampers=True))
    assert not an.second_order_consensus(three_mass_damper13())


def test_casimirs_triangle():
    sys = triangle_msd()
    cas = an.casimirs(sys)
    assert cas.count == 2
    # cycle functional over the three springs and total momentum
    rows = {tuple(np.round(r, 12)) for r in cas.functionals}
    assert (0.0, 0.0, 0.0, 1.0, 1.0, 1.0) in rows
    assert any(abs(abs(r[0]) - 1) < 1e-12 and r[0] == r[1] == r[2] for r in cas.functionals)
    tr = sim.integrate(sys, [0.3, -0.1, 0.5, 1.0, 0.0, -0.5], T=10.0, dt=0.01, method="midpoint")
    assert np.max(np.abs(cas.drift(tr.states))) < 1e-10


def test_equilibria_and_affine_space():
    sys = two_mass()
    eq = an.equilibria(sys)
    assert eq.is_equilibrium(np.array([0.0, 2.0, 2.0]))
    assert not eq.is_equilibrium(np.array([0.1, 2.0, 2.0]))
    x0 = np.array([0.5, 1.0, 3.0])
    aff = an.invariant_affine_space(sys, x0)
    assert aff.contains(x0)
    tr = sim.integrate(sys, x0, T=5.0, dt=0.01)
    assert max(aff.residual(x) for x in tr.states) < 1e-10


def test_consensus_constant_formulas_agree():
    rng = np.random.default_rng(4)
    for _ in range(20):
        g = rng.uniform(0.2, 5.0, size=5)
        p0 = rng.normal(size=5)
        a, b = an.consensus_constant(g, p0), an.consensus_constant_product(g, p0)
        assert abs(a - b) <= 1e-12 * max(1.0, abs(a))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_pervasive_matches_spectrum(seed):
    sys, _ = random_msd(np.random.default_rng(seed))
    A, _, _ = sys.linear_matrices()
    assert an.pervasive_damping(sys) == spectral_stability(A)[0]


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000))
def test_limit_point_matches_spectral_projector(seed):
    rng = np.random.default_rng(seed)
    sys, _ = random_msd(rng)
    if not an.pervasive_damping(sys):
        return
    A, _, _ = sys.linear_matrices()
    x0 = rng.normal(size=sys.n_states)
    M = an.msd_data(sys).n_springs
    q, p = an.limit_point(sys, x0[:M], x0[M:])
    np.testing.assert_allclose(np.concatenate([q, p]), zero_projector(A) @ x0, atol=1e-10)


def test_disturbance_equilibrium():
    g = OpenGraph.build(["1", "2"], [("s", "1", "2"), ("d", "1", "2")], boundary=["1", "2"])
    sys = sy.mass_spring_damper(g, {"s": "spring", "d": "damper"}, [2.0], [1.0, 1.0], [1.0])
    eq = an.disturbance_equilibrium(sys, [0.5, -0.5], [0.0], [0.0, 0.0])
    np.testing.assert_allclose(eq.qbar, [0.25])
    assert abs(eq.availability.value(np.array([0.25, 0.0, 0.0]))) < 1e-15
    with pytest.raises(an.InfeasibleDisturbance) as info:
        an.disturbance_equilibrium(sys, [1.0, 1.0], [0.0], [0.0, 0.0])
    assert info.value.residual > 0


def test_mass_damper_equilibrium():
    g = OpenGraph.build(["1", "2", "3"], [("1", "2"), ("2", "3")], boundary=["1", "3"])
    sys = sy.mass_damper(g, [1.0, 3.0], [2.0])
    eq = an.mass_damper_equilibrium(sys, [0.0, 4.0])
    np.testing.assert_allclose(eq.velocities, [3.0])
    np.testing.assert_allclose(eq.pbar, [1.5])
    np.testing.assert_allclose(sys.rhs(eq.pbar, [0.0, 4.0]), 0.0, atol=1e-14)


def test_symmetry_reduction_commutes_with_simulation():
    cfg = three_mass_damper13(config=True)
    red = an.symmetry_reduce(cfg)
    xc0 = np.array([0.1, -0.3, 0.7, 1.0, 0.0, -0.2])
    a = sim.integrate(cfg, xc0, T=5.0, dt=0.01)
    b = sim.integrate(red, an.project(cfg, xc0), T=5.0, dt=0.01)
    assert np.max(np.abs(an.project(cfg, a.states) - b.states)) < 1e-10
    np.testing.assert_allclose(an.project(cfg, an.lift(cfg, b.final)), b.final, atol=1e-12)
    assert an.shift_directions(cfg).shape == (3, 1)


def test_lift_rejects_non_gradient_q():
    cfg = triangle_msd(config=True)
    with pytest.raises(an.AnalysisError):
        an.lift(cfg, np.array([1.0, 1.0, 1.0, 0.0, 0.0, 0.0]))


def test_further_reduction_dimension_and_embedding():
    sys = triangle_msd(dampers=True)
    x0 = np.array([0.2, -0.1, 0.4, 1.0, -1.0, 0.5])
    fr = an.further_reduce(sys, x0)
    assert fr.system.n_states == 4
    full = sim.integrate(sys, x0, T=5.0, dt=0.01)
    z0 = fr.restrict(x0)
    np.testing.assert_allclose(fr.embed(z0), x0, atol=1e-14)
    red = sim.integrate(fr.system, z0, T=5.0, dt=0.01)
    assert np.max(np.abs(fr.embed(red.states) - full.states)) < 1e-8


def test_report_contents():
    out = an.report(three_mass_damper13(), np.zeros(5))
    assert out["connected"] and out["pervasive_damping"] is False
    assert out["invariant_subspace_dim"] == 2
    assert out["second_order_consensus"] is False
    assert "limit_point" in out
