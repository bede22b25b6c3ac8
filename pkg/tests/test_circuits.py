from pathlib import Path

import numpy as np
import pytest

from phgraph import circuits as ci
from phgraph import dirac as dr
from phgraph import sim
from phgraph import systems as sy
from phgraph.graph import OpenGraph

DATA = Path(__file__).resolve().parents[1] / "data"


def period(times, signal):
    s = np.asarray(signal)
    k = np.nonzero((s[:-1] < 0) & (s[1:] >= 0))[0]
    cross = times[k] - s[k] * (times[k + 1] - times[k]) / (s[k + 1] - s[k])
    return float(np.mean(np.diff(cross)))


def lc(L, C):
    return f"C1 C {C} a b\nL1 L {L} a b\n"


@pytest.mark.parametrize("L, C", [(1.0, 1.0), (0.5, 2.0), (2.0, 0.5)])
def test_lc_period(L, C):
    model = ci.circuit_system(lc(L, C))
    T0 = 2 * np.pi * np.sqrt(L * C)
    tr = sim.integrate(model.system, [1.0, 0.0], T=round(5 * T0, 2), dt=1e-3)
    assert abs(period(tr.times, tr.states[:, 0]) - T0) / T0 < 1e-3


def test_rc_relaxation():
    model = ci.circuit_system(ci.load_netlist(DATA / "rc_driven.cir"))
    # drive terminal a at 1 V against c at 0 V; the edge voltage is psi_head - psi_tail = -1
    tr = sim.integrate(model.system, [0.0], [1.0, 0.0], T=5.0, dt=1e-3)
    assert abs(tr.states[-1, 0] + (1 - np.exp(-5.0))) < 1e-9
    assert max(model.dae_residual(x, u) for x, u in zip(tr.states[::100], tr.inputs[::100])) < 1e-12
    led = sim.power_ledger(tr, model.system)
    assert led.balance_residual < 1e-9
    rep = ci.boundary_flow_audit(tr, model)
    assert rep.passed and rep.n_constraints == 1


def test_lc_tank_file_energy_is_conserved_by_midpoint():
    model = ci.circuit_system(ci.load_netlist(DATA / "lc_tank.cir"))
    tr = sim.integrate(model.system, [1.0, 0.5], T=20.0, dt=0.01, method="midpoint")
    H = model.system.hamiltonian.values(tr.states)
    assert np.max(np.abs(H - H[0])) < 1e-12


def test_capacitor_loop_detected():
    with pytest.raises(ci.DegenerateCircuit) as info:
        ci.circuit_system("C1 C 1 a b\nC2 C 1 b c\nC3 C 1 c a\n")
    assert info.value.kind == "capacitor-loop"
    assert set(info.value.labels) == {"C1", "C2", "C3"}


def test_inductor_cutset_detected():
    with pytest.raises(ci.DegenerateCircuit) as info:
        ci.circuit_system("L1 L 1 a b\nL2 L 1 b c\nC1 C 1 a c\n")
    assert info.value.kind == "inductor-cutset"


@pytest.mark.parametrize(
    "text, line",
    [
        ("C1 C 1 a\n", 1),
        ("* ok\nX1 Q 1 a b\n", 2),
        ("C1 C 1 a b\nC1 C 1 b c\n", 2),
        ("C1 C -1 a b\n", 1),
        ("C1 C 1..0 a b\n", 1),
        ("R1 R 1 a a\n", 1),
        ("C1 C 1 a b\n.terminal z\n", 2),
    ],
)
def test_netlist_errors_carry_line_numbers(text, line):
    with pytest.raises(ci.NetlistError) as info:
        ci.parse_netlist(text)
    assert info.value.line == line


def test_netlist_comments_and_terminals():
    net = ci.parse_netlist("# header\nR1 R 2 a b  # inline\n\nC1 C 1e-3 b c\n.terminal a c\n")
    assert net.graph.boundary_ids == ["a", "c"]
    assert net.values("C").tolist() == [1e-3]
    assert net.labels("R") == ["R1"]


def test_lagrangian_tree_identification():
    g = OpenGraph.build(["1", "2", "3"], [("1", "2"), ("2", "3"), ("3", "1")])
    tree = ci.lagrangian_tree(g)
    assert tree.holds(1e-12)
    assert tree.augmented.n_vertices == 4 and len(tree.ground_edges) == 3


def test_mass_spring_is_an_lc_circuit():
    g = OpenGraph.build(["1", "2", "3"], [("1", "2"), ("2", "3")])
    k, m = np.array([1.0, 2.0]), np.array([1.0, 2.0, 0.5])
    msys = sy.mass_spring_closed(g, k, 1.0 / m)
    net, _ = ci.mass_spring_netlist(g, k, m)
    model = ci.circuit_system(net)
    # circuit state: capacitor charges on ground edges, then inductor fluxes on springs
    q0, p0 = np.array([0.3, -0.2]), np.array([0.1, 0.0, -0.4])
    a = sim.integrate(msys, np.concatenate([q0, p0]), T=5.0, dt=1e-3)
    b = sim.integrate(model.system, np.concatenate([p0, q0]), T=5.0, dt=1e-3)
    np.testing.assert_allclose(b.states[:, 3:], a.states[:, :2], atol=1e-12)
    np.testing.assert_allclose(b.states[:, :3], a.states[:, 2:], atol=1e-12)


@pytest.mark.parametrize("a, b", [("spring", "inductor"), ("inerter", "capacitor")])
def test_analogous_elements_have_equal_kernels(a, b):
    ea, eb = ci.two_terminal(a, 2.0), ci.two_terminal(b, 2.0)
    mapping = {ea.storage: eb.storage}
    for t in ("alpha", "beta"):
        mapping[f"F_{t}|v_{t}"] = f"I_{t}|psi_{t}"
    ra = ea.renamed(mapping)
    assert ra.layout == eb.structure.layout
    assert np.array_equal(ra.F, eb.structure.F) and np.array_equal(ra.E, eb.structure.E)
    assert dr.check(eb.structure)


def test_mass_is_grounded_inerter():
    m = ci.two_terminal("mass", 1.0).structure
    gi = ci.grounded(ci.two_terminal("inerter", 1.0))
    assert dr.same_subspace(m, gi, align=False) < 1e-12
    with pytest.raises(ValueError):
        ci.two_terminal("memristor", 1.0)
