import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from phgraph import dirac as dr
from phgraph.graph import OpenGraph, interconnect, random_graph, relabel


def triangle():
    return OpenGraph.build(["1", "2", "3"], [("1", "2"), ("2", "3"), ("3", "1")], boundary=["3"])


@pytest.mark.parametrize(
    "build, n", [(dr.flow_continuous, 6), (dr.effort_continuous, 7), (dr.kirchhoff, 4)]
)
def test_triangle_structures(build, n):
    d = build(triangle())
    assert d.n == n and d.dim == n
    assert dr.check(d)
    ok, K = dr.is_separable(d)
    assert ok and K is not None
    assert d.isotropy_residual() < 1e-12


def test_members_satisfy_power_balance_and_tellegen():
    rng = np.random.default_rng(0)
    d = dr.effort_continuous(triangle())
    a, b = d.random_member(rng), d.random_member(rng)
    assert d.contains(a) and d.contains(b)
    assert abs(a.power()) < 1e-12
    assert abs(dr.tellegen_check(d, a, b)) < 1e-12


def test_non_dirac_rejected():
    # {f = e} in one dimension is not isotropic
    assert not dr.is_dirac(np.array([[1.0]]), np.array([[-1.0]]))
    # too few constraints
    assert not dr.is_dirac(np.zeros((0, 2)), np.zeros((0, 2)))
    with pytest.raises(dr.DiracError):
        dr.is_separable(dr.DiracStructure(dr.PortLayout((dr.PortGroup("p", ("a",)),)), [[1.0]], [[-1.0]]))


def test_linear_map_structure_is_dirac_not_separable_in_general():
    A = np.array([[1.0, 2.0]])
    d = dr.from_linear_map(A)
    assert dr.check(d)
    assert d.layout.names == ["v", "w"]


def test_kirchhoff_equals_constrained_flow_structure():
    g = triangle()
    d = dr.constrain(dr.flow_continuous(g), dr.INTERNAL, "flows")
    assert d.layout.names == [dr.EDGE, dr.BOUNDARY]
    assert dr.same_subspace(d, dr.kirchhoff(g)) < 1e-12


def test_composition_matches_interconnection():
    ga = triangle()
    gb = relabel(OpenGraph.build(["1", "2"], [("1", "2")], boundary=["1"]), "b")
    c = dr.compose(dr.kirchhoff(ga), dr.kirchhoff(gb), dr.BOUNDARY, pairs=[("3", "b1")])
    g = interconnect(ga, gb, {"3": "b1"})
    assert dr.same_subspace(c, dr.kirchhoff(g)) < 1e-12


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_random_graph_structures_are_dirac(seed):
    g = random_graph(np.random.default_rng(seed))
    for build in (dr.flow_continuous, dr.effort_continuous, dr.kirchhoff):
        d = build(g)
        assert d.dim == d.n and dr.check(d)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_random_composition_matches_interconnection(seed):
    rng = np.random.default_rng(seed)
    ga = random_graph(rng, min_vertices=2, prefix="a")
    gb = random_graph(rng, min_vertices=2, prefix="b")
    ba, bb = ga.boundary_ids, gb.boundary_ids
    k = min(len(ba), len(bb))
    if k == 0:
        return
    pairing = dict(zip(ba[:k], bb[:k]))
    c = dr.compose(dr.kirchhoff(ga), dr.kirchhoff(gb), dr.BOUNDARY, pairs=list(pairing.items()))
    g = interconnect(ga, gb, pairing, retain=False)
    assert dr.same_subspace(c, dr.kirchhoff(g)) < 1e-9


def test_boundary_reduce_dimension():
    g = OpenGraph.build(["1", "2", "3"], [("1", "2"), ("2", "3")], boundary=["1", "3"])
    r = dr.boundary_reduce(dr.kirchhoff(g))
    assert r.n == g.n_edges + 1
    assert dr.check(r)
    with pytest.raises(dr.DiracError):
        dr.boundary_reduce(dr.kirchhoff(OpenGraph.build(["1", "2"], [("1", "2")])))


def test_compose_dimension_mismatch():
    with pytest.raises(dr.DiracError):
        dr.compose(dr.trivial(["a"], "flows"), dr.trivial(["a", "b"], "flows"), "port")
