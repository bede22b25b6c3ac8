"""Energy-storing and dissipative constitutive relations."""

from __future__ import annotations

from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass
from typing import Any

import numpy as np


class ConstitutiveError(ValueError):
    pass


@dataclass(frozen=True)
class Hamiltonian:
    """Stored energy on a ``dim``-dimensional state.

    Quadratic energies ``1/2 x^T Q x + c^T x + h0`` keep ``Q``/``c`` so the
    simulator can use the linear kernels; anything else is a pair of
    value/gradient callbacks.
    """

    dim: int
    value_fn: Callable[[np.ndarray], float] | None = None
    grad_fn: Callable[[np.ndarray], np.ndarray] | None = None
    Q: np.ndarray | None = None
    c: np.ndarray | None = None
    h0: float = 0.0

    def __post_init__(self):
        if self.Q is None and (self.value_fn is None or self.grad_fn is None):
            raise ConstitutiveError("non-quadratic Hamiltonians need value and gradient callbacks")
        if self.Q is not None:
            Q = np.asarray(self.Q, dtype=float).reshape(self.dim, self.dim)
            if not np.array_equal(Q, Q.T):
                Q = 0.5 * (Q + Q.T)
            Q.setflags(write=False)
            object.__setattr__(self, "Q", Q)
            c = np.zeros(self.dim) if self.c is None else np.asarray(self.c, dtype=float).reshape(self.dim)
            c.setflags(write=False)
            object.__setattr__(self, "c", c)

    @property
    def is_quadratic(self) -> bool:
        return self.Q is not None

    def __call__(self, x) -> float:
        return self.value(x)

    def value(self, x) -> float:
        x = np.asarray(x, dtype=float)
        if self.Q is not None:
            return float(0.5 * x @ self.Q @ x + self.c @ x + self.h0)
        return float(self.value_fn(x))

    def gradient(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.Q is not None:
            return self.Q @ x + self.c
        return np.asarray(self.grad_fn(x), dtype=float)

    def values(self, X: np.ndarray) -> np.ndarray:
        """Row-wise evaluation over a trajectory array (T x dim)."""
        X = np.asarray(X, dtype=float)
        if self.Q is not None:
            return 0.5 * np.einsum("ti,ij,tj->t", X, self.Q, X) + X @ self.c + self.h0
        return np.array([self.value_fn(x) for x in X])

    def gradients(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if self.Q is not None:
            return X @ self.Q + self.c
        return np.array([self.grad_fn(x) for x in X]).reshape(len(X), self.dim)

    def restricted(self, offset: np.ndarray, T: np.ndarray) -> Hamiltonian:
        """``z -> H(offset + T z)``."""
        offset = np.asarray(offset, dtype=float)
        T = np.asarray(T, dtype=float)
        if self.Q is not None:
            return Hamiltonian(
                T.shape[1],
                Q=T.T @ self.Q @ T,
                c=T.T @ (self.Q @ offset + self.c),
                h0=self.value(offset),
            )
        return Hamiltonian(
            T.shape[1],
            value_fn=lambda z: self.value(offset + T @ z),
            grad_fn=lambda z: T.T @ self.gradient(offset + T @ z),
        )


def quadratic(q_diag) -> Hamiltonian:
    """``1/2 sum q_i x_i^2`` with strictly positive ``q_i``."""
    q = np.atleast_1d(np.asarray(q_diag, dtype=float))
    if np.any(q <= 0):
        raise ConstitutiveError("quadratic Hamiltonian needs strictly positive coefficients")
    return Hamiltonian(q.size, Q=np.diag(q))


def quadratic_form(Q, c=None, h0: float = 0.0) -> Hamiltonian:
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    return Hamiltonian(Q.shape[0], Q=Q, c=c, h0=h0)


def from_callbacks(dim: int, value, grad) -> Hamiltonian:
    return Hamiltonian(dim, value_fn=value, grad_fn=grad)


def zero_hamiltonian(dim: int) -> Hamiltonian:
    return Hamiltonian(dim, Q=np.zeros((dim, dim)))


def sum_hamiltonians(parts: Sequence[Hamiltonian]) -> Hamiltonian:
    """Block-concatenated state, additive energy."""
    parts = list(parts)
    dims = [p.dim for p in parts]
    n = sum(dims)
    if all(p.is_quadratic for p in parts):
        Q = np.zeros((n, n))
        c = np.zeros(n)
        k = 0
        for p in parts:
            Q[k : k + p.dim, k : k + p.dim] = p.Q
            c[k : k + p.dim] = p.c
            k += p.dim
        return Hamiltonian(n, Q=Q, c=c, h0=sum(p.h0 for p in parts))
    cuts = np.cumsum([0] + dims)

    def value(x):
        return sum(p.value(x[cuts[i] : cuts[i + 1]]) for i, p in enumerate(parts))

    def grad(x):
        return np.concatenate([p.gradient(x[cuts[i] : cuts[i + 1]]) for i, p in enumerate(parts)])

    return Hamiltonian(n, value_fn=value, grad_fn=grad)


def availability(H: Hamiltonian, xbar) -> Hamiltonian:
    """``H(x) - (x - xbar)^T dH(xbar) - H(xbar)``: zero with zero gradient at ``xbar``."""
    xbar = np.asarray(xbar, dtype=float)
    g0, h0 = H.gradient(xbar), H.value(xbar)
    if H.is_quadratic:
        return Hamiltonian(H.dim, Q=H.Q, c=H.c - g0, h0=H.h0 - h0 + float(xbar @ g0))
    return Hamiltonian(
        H.dim,
        value_fn=lambda x: H.value(x) - (x - xbar) @ g0 - h0,
        grad_fn=lambda x: H.gradient(x) - g0,
    )


def gradient_check(H: Hamiltonian, rng: np.random.Generator, probes: int = 100, scale: float = 1.0) -> float:
    """Worst relative error of ``gradient`` against central differences."""
    worst = 0.0
    for _ in range(probes):
        x = scale * rng.standard_normal(H.dim)
        d = rng.standard_normal(H.dim)
        d /= max(np.linalg.norm(d), 1e-300)
        h = 1e-5 * max(1.0, np.linalg.norm(x))
        fd = (H.value(x + h * d) - H.value(x - h * d)) / (2 * h)
        an = float(H.gradient(x) @ d)
        worst = max(worst, abs(fd - an) / max(1.0, abs(an), np.linalg.norm(H.gradient(x))))
    return worst


# -- storage -------------------------------------------------------------------


@dataclass(frozen=True)
class StorageElement:
    """``xdot = -f, e = dH`` (``flow``) or ``xdot = e, f = -dH`` (``effort``)."""

    hamiltonian: Hamiltonian
    orientation: str = "flow"

    def __post_init__(self):
        if self.orientation not in ("flow", "effort"):
            raise ConstitutiveError("orientation must be 'flow' or 'effort'")

    def ports(self, x, xdot) -> tuple[np.ndarray, np.ndarray]:
        g = self.hamiltonian.gradient(x)
        xdot = np.asarray(xdot, dtype=float)
        if self.orientation == "flow":
            return -xdot, g
        return -g, xdot


# -- dissipation ---------------------------------------------------------------


@dataclass(frozen=True)
class DissipativeRelation:
    """``f = -D(e)`` with ``e^T D(e) >= 0``."""

    dim: int
    fn: Callable[[np.ndarray], np.ndarray] | None = None
    R: np.ndarray | None = None

    def __post_init__(self):
        if self.R is None and self.fn is None:
            raise ConstitutiveError("need a matrix R or a callback")
        if self.R is not None:
            R = np.asarray(self.R, dtype=float)
            if R.ndim == 1:
                R = np.diag(R)
            object.__setattr__(self, "R", R.reshape(self.dim, self.dim))

    @property
    def is_linear(self) -> bool:
        return self.R is not None

    def __call__(self, e) -> np.ndarray:
        e = np.asarray(e, dtype=float)
        if self.R is not None:
            return self.R @ e
        return np.asarray(self.fn(e), dtype=float).reshape(e.shape)

    def flow(self, e) -> np.ndarray:
        return -self(e)


def linear_damping(r) -> DissipativeRelation:
    r = np.atleast_1d(np.asarray(r, dtype=float))
    if np.any(r < 0):
        raise ConstitutiveError("damping coefficients must be nonnegative")
    return DissipativeRelation(r.size, R=np.diag(r))


def elementwise_damping(fns: Sequence[Callable[[float], float]]) -> DissipativeRelation:
    fns = list(fns)

    def apply(e):
        return np.array([fn(float(v)) for fn, v in zip(fns, e)])

    return DissipativeRelation(len(fns), fn=apply)


@dataclass(frozen=True)
class PassivityReport:
    samples: int
    min_power: float
    witness: np.ndarray | None
    passed: bool


def passivity_audit(
    rel: DissipativeRelation, samples: int = 1000, rng: np.random.Generator | None = None, scale: float = 1.0
) -> PassivityReport:
    """Sample ``e^T D(e)`` and report the smallest value."""
    if samples < 1:
        raise ConstitutiveError("samples must be >= 1")
    rng = np.random.default_rng(0) if rng is None else rng
    worst, witness = np.inf, None
    for _ in range(samples):
        e = scale * rng.standard_normal(rel.dim)
        p = float(e @ rel(e))
        if p < worst:
            worst, witness = p, e
    tol = 1e-12 * scale * scale
    return PassivityReport(samples, worst, witness if worst < -tol else None, worst >= -tol)


# -- edge potentials -----------------------------------------------------------


def saturating_potential(a: float) -> tuple[Callable[[float], float], Callable[[float], float]]:
    """``V(z) = a sqrt(1 + z^2)``; the force ``a z / sqrt(1 + z^2)`` is bounded by ``a``."""
    if a <= 0:
        raise ConstitutiveError("saturation level must be positive")
    return (lambda z: a * np.sqrt(1.0 + z * z)), (lambda z: a * z / np.sqrt(1.0 + z * z))


def separable_energy(values: Sequence[Callable], grads: Sequence[Callable]) -> Hamiltonian:
    """``sum_k V_k(x_k)`` from scalar value/derivative pairs."""
    values, grads = list(values), list(grads)

    def value(x):
        return float(sum(v(float(xi)) for v, xi in zip(values, x)))

    def grad(x):
        return np.array([g(float(xi)) for g, xi in zip(grads, x)])

    return Hamiltonian(len(values), value_fn=value, grad_fn=grad)


# -- JSON element specs -----------------------------------------------------------

_ELEMENT_PARAMS = {
    "spring": ("k",),
    "damper": ("r",),
    "mass": ("m",),
    "capacitor": ("C",),
    "inductor": ("L",),
    "resistor": ("R",),
    "pipe": ("J",),
    "reservoir": ("coef",),
    "inerter": ("b",),
}


@dataclass(frozen=True)
class ElementSpec:
    kind: str
    params: Mapping[str, Any]

    def __getitem__(self, key):
        return self.params[key]

    def get(self, key, default=None):
        return self.params.get(key, default)


def element_from_spec(doc: Mapping) -> ElementSpec:
    try:
        kind = str(doc["type"])
    except (KeyError, TypeError):
        raise ConstitutiveError(f"element spec needs a 'type': {doc!r}") from None
    if kind not in _ELEMENT_PARAMS:
        raise ConstitutiveError(f"unknown element type {kind!r}")
    params = {k: v for k, v in doc.items() if k != "type"}
    for p in _ELEMENT_PARAMS[kind]:
        if p not in params:
            raise ConstitutiveError(f"{kind} element needs parameter {p!r}")
        val = float(params[p])
        if kind == "resistor" and val < 0 or kind != "resistor" and val <= 0:
            raise ConstitutiveError(f"{kind} parameter {p}={val} out of range")
    if kind == "pipe":
        lam = params.get("lambda", "linear")
        if lam not in ("linear", "none"):
            raise ConstitutiveError(f"unsupported pipe friction law {lam!r}")
        if lam == "linear" and float(params.get("coef", 0.0)) < 0:
            raise ConstitutiveError("pipe friction coefficient must be nonnegative")
    if kind == "reservoir" and params.get("H", "quadratic") != "quadratic":
        raise ConstitutiveError("only quadratic reservoir energies are supported in JSON specs")
    return ElementSpec(kind, params)
