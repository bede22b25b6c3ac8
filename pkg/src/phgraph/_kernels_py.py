"""Pure numpy versions of the compiled loops in ``_kernels.pyx``."""

import numpy as np


def rk4_affine(A, Bu, U_halfsteps, x0, dt, nsteps):
    A = np.ascontiguousarray(A, dtype=float)
    Bu = np.ascontiguousarray(Bu, dtype=float)
    U = np.ascontiguousarray(U_halfsteps, dtype=float)
    # input contributions at every half step in one product
    F = U @ Bu.T
    X = np.empty((nsteps + 1, A.shape[0]))
    x = np.array(x0, dtype=float).reshape(A.shape[0])
    X[0] = x
    h2, h6 = 0.5 * dt, dt / 6.0
    # overflow is reported by the caller's finiteness check, as with the compiled loop
    with np.errstate(over="ignore", invalid="ignore"):
        for s in range(nsteps):
            k1 = A @ x + F[2 * s]
            k2 = A @ (x + h2 * k1) + F[2 * s + 1]
            k3 = A @ (x + h2 * k2) + F[2 * s + 1]
            k4 = A @ (x + dt * k3) + F[2 * s + 2]
            x = x + h6 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            X[s + 1] = x
    return X


def midpoint_affine(P, Qm, Umid, x0, nsteps):
    P = np.ascontiguousarray(P, dtype=float)
    F = np.ascontiguousarray(Umid, dtype=float) @ np.asarray(Qm, dtype=float).T
    X = np.empty((nsteps + 1, P.shape[0]))
    x = np.array(x0, dtype=float).reshape(P.shape[0])
    X[0] = x
    with np.errstate(over="ignore", invalid="ignore"):
        for s in range(nsteps):
            x = P @ x + F[s]
            X[s + 1] = x
    return X
