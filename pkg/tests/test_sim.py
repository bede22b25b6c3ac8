import io

import numpy as np
import pytest

from phgraph import sim
from phgraph import systems as sy
from phgraph.graph import OpenGraph
from phgraph.constitutive import saturating_potential


def oscillator():
    g = OpenGraph.build(["1", "2"], [("1", "2")])
    return sy.mass_spring_closed(g, [1.0], [1.0, 1.0])


def test_cumulative_integral_is_fourth_order():
    errs = []
    for n in (41, 81):
        t = np.linspace(0.0, 2.0, n)
        got = sim.cumulative_integral(np.exp(t), t[1] - t[0])
        errs.append(np.max(np.abs(got - (np.exp(t) - 1))))
    assert 12 < errs[0] / errs[1] < 20
    np.testing.assert_array_equal(sim.cumulative_integral(np.ones(3), 0.5), [0, 0.5, 1.0])
    # exact for cubics
    t = np.linspace(0, 1, 11)
    np.testing.assert_allclose(sim.cumulative_integral(t**3, 0.1), t**4 / 4, atol=1e-15)


def test_rk4_oscillator_matches_closed_form():
    sys = oscillator()
    # relative coordinate oscillates with omega^2 = k (1/m1 + 1/m2) = 2
    tr = sim.integrate(sys, [1.0, 0.0, 0.0], T=2.0, dt=1e-3)
    np.testing.assert_allclose(tr.states[:, 0], np.cos(np.sqrt(2) * tr.times), atol=1e-11)


@pytest.mark.parametrize("method, tol", [("rk4", 1e-9), ("midpoint", 1e-5)])
def test_energy_ledger_closes(method, tol):
    sys = sy.mass_damper(OpenGraph.build(["1", "2", "3"], [("1", "2"), ("2", "3")], boundary=["3"]), [1.0, 0.5], [1.0, 2.0])
    u = sim.Sinusoid((1.0,), 2.0)
    tr = sim.integrate(sys, [1.0, -1.0], u, T=5.0, dt=1e-3, method=method)
    led = sim.power_ledger(tr, sys)
    assert led.balance_residual < tol
    assert led.passivity_violation() < 1e-9


def test_midpoint_preserves_quadratic_energy():
    sys = oscillator()
    tr = sim.integrate(sys, [1.0, 0.3, -0.1], T=50.0, dt=0.05, method="midpoint")
    H = sys.hamiltonian.values(tr.states)
    assert np.max(np.abs(H - H[0])) < 1e-12


def test_nonlinear_midpoint_and_rk4_agree():
    g = OpenGraph.build(["1", "2", "3"], [("1", "2"), ("2", "3")])
    V, dV = saturating_potential(1.0)
    sys = sy.clustering(g, [np.tanh] * 3, [(V, dV)] * 2)
    x0 = [1.0, 0.0, -1.0, 0.5, 0.2]
    a = sim.integrate(sys, x0, T=1.0, dt=1e-3, method="rk4")
    b = sim.integrate(sys, x0, T=1.0, dt=1e-3, method="midpoint")
    assert a.backend == "python"
    np.testing.assert_allclose(a.final, b.final, atol=1e-6)
    led = sim.power_ledger(b, sys)
    assert led.passivity_violation() < 1e-12


def test_signals():
    s = sim.signal_from_spec({"type": "schedule", "times": [0, 1], "values": [[1.0], [2.0]]}, 1)
    assert s(0.5)[0] == 1.0 and s(1.0)[0] == 2.0
    assert sim.signal_from_spec(3.0, 2)(0.0).tolist() == [3.0, 3.0]
    w = sim.signal_from_spec({"type": "sinusoid", "amplitude": 2.0, "omega": 1.0, "offset": 1.0}, 1)
    assert w(np.pi / 2)[0] == 3.0
    with pytest.raises(ValueError):
        sim.signal_from_spec({"type": "noise"}, 1)


def test_argument_errors():
    sys = oscillator()
    with pytest.raises(sim.SimulationError, match="whole number"):
        sim.integrate(sys, np.zeros(3), T=1.0, dt=0.3)
    with pytest.raises(sim.SimulationError):
        sim.integrate(sys, np.zeros(3), dt=0.0)
    with pytest.raises(sim.SimulationError, match="method"):
        sim.integrate(sys, np.zeros(3), method="euler")


def test_blowup_is_reported():
    g = OpenGraph.build(["1", "2"], [("1", "2")])
    sys = sy.mass_spring_closed(g, [1e6], [1e6, 1e6])
    with pytest.raises(sim.SimulationError, match="non-finite"):
        sim.integrate(sys, [1.0, 0.0, 0.0], T=200.0, dt=0.5)


def test_dirac_residual_along_trajectory():
    sys = oscillator()
    tr = sim.integrate(sys, [1.0, 0.0, 0.0], T=1.0, dt=0.01)
    assert sim.dirac_residual(tr, sys) < 1e-12


def test_csv_is_deterministic():
    sys = oscillator()
    tr = sim.integrate(sys, [1.0, 0.0, 0.0], T=0.1, dt=0.01)
    a = sim.write_csv(tr, sys, header_comment={"b": "2", "a": "1"})
    buf = io.StringIO()
    b = sim.write_csv(sim.integrate(sys, [1.0, 0.0, 0.0], T=0.1, dt=0.01), sys, buf, {"a": "1", "b": "2"})
    assert a == b == buf.getvalue()
    lines = a.splitlines()
    assert lines[:2] == ["# a=1", "# b=2"]
    assert lines[2].split(",")[-3:] == ["H", "supplied", "dissipated"]
    assert len(lines) == 3 + 11
