"""Fixed-step simulation with energy bookkeeping."""

from __future__ import annotations

import csv
import io
from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass

import numpy as np

from . import kernels
from .systems import PHSystem

STAGE_TOL = 1e-12
MAX_FIXED_POINT = 50


class SimulationError(RuntimeError):
    pass


# -- input signals ------------------------------------------------------------------


@dataclass(frozen=True)
class Constant:
    value: tuple[float, ...]

    def __call__(self, t):
        return np.asarray(self.value, dtype=float)


@dataclass(frozen=True)
class Schedule:
    """Piecewise constant: ``values[k]`` holds on ``[times[k], times[k+1])``."""

    times: tuple[float, ...]
    values: tuple[tuple[float, ...], ...]

    def __call__(self, t):
        k = int(np.searchsorted(self.times, t, side="right")) - 1
        return np.asarray(self.values[max(k, 0)], dtype=float)


@dataclass(frozen=True)
class Sinusoid:
    amplitude: tuple[float, ...]
    omega: float
    phase: float = 0.0
    offset: tuple[float, ...] | None = None

    def __call__(self, t):
        a = np.asarray(self.amplitude, dtype=float)
        base = np.zeros_like(a) if self.offset is None else np.asarray(self.offset, dtype=float)
        return base + a * np.sin(self.omega * t + self.phase)


def signal_from_spec(doc, m: int):
    """Input signal from a JSON fragment (or a bare number / list for constants)."""
    if doc is None:
        return Constant(tuple([0.0] * m))
    if isinstance(doc, (int, float)):
        return Constant(tuple([float(doc)] * m))
    if isinstance(doc, np.ndarray) or isinstance(doc, Sequence) and not isinstance(doc, str):
        return Constant(tuple(float(v) for v in doc))
    kind = doc.get("type", "constant")
    if kind == "constant":
        return signal_from_spec(doc.get("value", 0.0), m)
    if kind == "schedule":
        return Schedule(
            tuple(float(t) for t in doc["times"]),
            tuple(tuple(float(v) for v in np.broadcast_to(row, (m,))) for row in doc["values"]),
        )
    if kind == "sinusoid":
        amp = tuple(float(v) for v in np.broadcast_to(doc["amplitude"], (m,)))
        off = doc.get("offset")
        off = None if off is None else tuple(float(v) for v in np.broadcast_to(off, (m,)))
        return Sinusoid(amp, float(doc["omega"]), float(doc.get("phase", 0.0)), off)
    raise ValueError(f"unknown input signal type {kind!r}")


def _as_signal(u, m: int) -> Callable[[float], np.ndarray]:
    if u is None or not callable(u):
        return signal_from_spec(u, m)
    return u


# -- trajectories -----------------------------------------------------------------


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    inputs: np.ndarray
    outputs: np.ndarray
    dt: float
    method: str
    flows: np.ndarray | None = None
    efforts: np.ndarray | None = None
    backend: str = "python"

    @property
    def n_samples(self) -> int:
        return len(self.times)

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


def _sample_inputs(sig, times) -> np.ndarray:
    return np.array([np.asarray(sig(t), dtype=float).reshape(-1) for t in times]).reshape(len(times), -1)


def integrate(
    sys: PHSystem,
    x0,
    u=None,
    T: float = 1.0,
    dt: float = 1e-2,
    method: str = "rk4",
    t0: float = 0.0,
    record_ports: bool = True,
    backend: str | None = None,
) -> Trajectory:
    """Fixed-step integration on ``t0, t0 + dt, ..., t0 + T``.

    ``method`` is ``"rk4"`` or ``"midpoint"`` (implicit midpoint). Linear
    systems run through the compiled loops; others step in Python.
    """
    if not dt > 0:
        raise SimulationError("dt must be positive")
    if T < 0:
        raise SimulationError("T must be nonnegative")
    if method in ("implicit_midpoint", "mid"):
        method = "midpoint"
    if method not in ("rk4", "midpoint"):
        raise SimulationError(f"unknown method {method!r}")
    n, m = sys.n_states, sys.n_inputs
    x0 = np.asarray(x0, dtype=float).reshape(n)
    nsteps = int(round(T / dt))
    if abs(nsteps * dt - T) > 1e-9 * max(1.0, T):
        raise SimulationError(f"T={T} is not a whole number of steps of dt={dt}")
    sig = _as_signal(u, m)
    times = t0 + dt * np.arange(nsteps + 1)

    impl = kernels if backend is None else kernels.backends()[backend]
    used = kernels.BACKEND if backend is None else backend
    if sys.is_linear:
        A, Bu, b = sys.linear_matrices()
        Ba = np.hstack([Bu, b[:, None]])
        if method == "rk4":
            half = t0 + 0.5 * dt * np.arange(2 * nsteps + 1)
            U = np.hstack([_sample_inputs(sig, half), np.ones((len(half), 1))]) if m else np.ones((len(half), 1))
            X = impl.rk4_affine(A, Ba, U, x0, dt, nsteps)
        else:
            mids = times[:-1] + 0.5 * dt
            Um = _sample_inputs(sig, mids) if m else np.zeros((nsteps, 0))
            Um = np.hstack([Um, np.ones((nsteps, 1))])
            lhs = np.eye(n) - 0.5 * dt * A
            P = np.linalg.solve(lhs, np.eye(n) + 0.5 * dt * A)
            Qm = np.linalg.solve(lhs, dt * Ba)
            X = impl.midpoint_affine(P, Qm, Um, x0, nsteps)
            _check_midpoint_linear(X, A, Ba, Um, dt)
    else:
        used = "python"
        X = _rk4_python(sys, sig, x0, t0, dt, nsteps) if method == "rk4" else _midpoint_python(sys, sig, x0, t0, dt, nsteps)
    if not np.all(np.isfinite(X)):
        bad = int(np.argmax(~np.all(np.isfinite(X), axis=1)))
        raise SimulationError(f"non-finite state at step {bad} (t={times[bad]:.6g}); reduce dt or check parameters")

    Us = _sample_inputs(sig, times) if m else np.zeros((len(times), 0))
    if sys.hamiltonian.is_quadratic:
        C, Du, y0 = sys.output_matrices()
        Y = X @ C.T + Us @ Du.T + y0
    else:
        Y = np.array([sys.output(x, uu) for x, uu in zip(X, Us)]).reshape(len(times), m)
    flows = efforts = None
    if record_ports and sys.provenance is not None:
        pvs = [sys.ports(x, uu) for x, uu in zip(X, Us)]
        flows = np.array([p.f for p in pvs])
        efforts = np.array([p.e for p in pvs])
    return Trajectory(times, X, Us, Y, dt, method, flows, efforts, used)


def _check_midpoint_linear(X, A, Ba, Um, dt):
    if len(X) < 2:
        return
    mid = 0.5 * (X[1:] + X[:-1])
    res = X[1:] - X[:-1] - dt * (mid @ A.T + Um @ Ba.T)
    scale = max(1.0, float(np.max(np.abs(X))))
    worst = float(np.max(np.abs(res)))
    # the stage equation is solved directly; a large defect means an ill-conditioned step matrix
    if worst > STAGE_TOL * scale * max(1.0, dt * float(np.linalg.norm(A, 1))) * 100:
        raise SimulationError(f"midpoint stage residual {worst:.3e} exceeds tolerance")


def _rk4_python(sys, sig, x, t0, dt, nsteps):
    X = np.empty((nsteps + 1, x.size))
    X[0] = x
    f = sys.rhs
    for s in range(nsteps):
        t = t0 + s * dt
        ua, um, ub = sig(t), sig(t + 0.5 * dt), sig(t + dt)
        k1 = f(x, ua)
        k2 = f(x + 0.5 * dt * k1, um)
        k3 = f(x + 0.5 * dt * k2, um)
        k4 = f(x + dt * k3, ub)
        x = x + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        X[s + 1] = x
    return X


def _midpoint_python(sys, sig, x, t0, dt, nsteps):
    """Implicit midpoint by damped fixed-point iteration on the stage equation."""
    X = np.empty((nsteps + 1, x.size))
    X[0] = x
    f = sys.rhs
    for s in range(nsteps):
        um = sig(t0 + (s + 0.5) * dt)
        guess = x + dt * f(x, um)
        omega = 1.0
        prev = np.inf
        for _ in range(MAX_FIXED_POINT):
            res = guess - x - dt * f(0.5 * (x + guess), um)
            r = float(np.max(np.abs(res)))
            if r <= STAGE_TOL * max(1.0, float(np.max(np.abs(guess)))):
                break
            if r > prev:
                omega *= 0.5
            prev = r
            guess = guess - omega * res
        else:
            raise SimulationError(f"implicit midpoint did not converge at step {s} (residual {r:.3e})")
        x = guess
        X[s + 1] = x
    return X


# -- energy bookkeeping -------------------------------------------------------------


def cumulative_integral(values: np.ndarray, dt: float) -> np.ndarray:
    """Running integral of uniformly sampled values, fourth order when 4+ samples.

    Each step integrates the cubic through the four nearest samples
    (trapezoidal for shorter series).
    """
    v = np.asarray(values, dtype=float)
    n = len(v)
    out = np.zeros(n)
    if n < 2:
        return out
    if n < 4:
        out[1:] = np.cumsum(0.5 * dt * (v[1:] + v[:-1]))
        return out
    steps = np.empty(n - 1)
    steps[0] = dt / 24.0 * (9 * v[0] + 19 * v[1] - 5 * v[2] + v[3])
    steps[-1] = dt / 24.0 * (9 * v[-1] + 19 * v[-2] - 5 * v[-3] + v[-4])
    if n > 4:
        steps[1:-1] = dt / 24.0 * (-v[:-3] + 13 * v[1:-2] + 13 * v[2:-1] - v[3:])
    out[1:] = np.cumsum(steps)
    return out


@dataclass(frozen=True)
class PowerLedger:
    times: np.ndarray
    H: np.ndarray
    supplied: np.ndarray
    dissipated: np.ndarray
    supplied_power: np.ndarray
    dissipated_power: np.ndarray

    @property
    def balance(self) -> np.ndarray:
        """``H(t) - H(0) - supplied(t) + dissipated(t)``; zero for the exact flow."""
        return self.H - self.H[0] - self.supplied + self.dissipated

    @property
    def balance_residual(self) -> float:
        return float(np.max(np.abs(self.balance)))

    @property
    def final_residual(self) -> float:
        return float(abs(self.balance[-1]))

    def passivity_violation(self) -> float:
        """Largest per-step excess of ``Delta H`` over the supplied energy."""
        dH = np.diff(self.H)
        dS = np.diff(self.supplied)
        return float(np.max(dH - dS, initial=0.0))


def power_ledger(traj: Trajectory, sys: PHSystem) -> PowerLedger:
    H = sys.hamiltonian.values(traj.states)
    sp = np.array([sys.supplied_power(x, u) for x, u in zip(traj.states, traj.inputs)])
    dp = np.array([sys.dissipated_power(x, u) for x, u in zip(traj.states, traj.inputs)])
    return PowerLedger(
        traj.times, H, cumulative_integral(sp, traj.dt), cumulative_integral(dp, traj.dt), sp, dp
    )


def dirac_residual(traj: Trajectory, sys: PHSystem) -> float:
    """Worst relative membership defect of the recorded port vectors."""
    if sys.provenance is None:
        raise SimulationError("system has no Dirac-structure provenance")
    if traj.flows is None:
        return max(sys.structure_residual(x, u) for x, u in zip(traj.states, traj.inputs))
    from .dirac import PortVector

    d = sys.provenance.structure
    worst = 0.0
    for f, e in zip(traj.flows, traj.efforts):
        scale = max(1.0, float(np.linalg.norm(f)), float(np.linalg.norm(e)))
        worst = max(worst, d.residual(PortVector(f, e)) / scale)
    return worst


# -- output ----------------------------------------------------------------------------


def write_csv(traj: Trajectory, sys: PHSystem, dest=None, header_comment: Mapping[str, str] | None = None) -> str:
    """CSV with columns ``t, states..., outputs..., H, supplied, dissipated``.

    Floats use ``repr`` so identical runs produce identical bytes. Returns the
    text and writes it to ``dest`` (path or file object) when given.
    """
    led = power_ledger(traj, sys)
    buf = io.StringIO()
    if header_comment:
        for k in sorted(header_comment):
            buf.write(f"# {k}={header_comment[k]}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", *sys.state_labels, *sys.output_labels, "H", "supplied", "dissipated"])
    for k in range(traj.n_samples):
        row = [traj.times[k], *traj.states[k], *traj.outputs[k], led.H[k], led.supplied[k], led.dissipated[k]]
        w.writerow([repr(float(v)) for v in row])
    text = buf.getvalue()
    if dest is not None:
        if hasattr(dest, "write"):
            dest.write(text)
        else:
            with open(dest, "w", newline="") as fh:
                fh.write(text)
    return text
