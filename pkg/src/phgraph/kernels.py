"""Backend selection for the fixed-step affine loops.

The compiled extension is used when it was built; otherwise the numpy
fallback. Set ``PHGRAPH_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _kernels_py

try:
    if os.environ.get("PHGRAPH_PURE_PYTHON"):
        raise ImportError("pure Python requested")
    from . import _kernels as _compiled
except ImportError:
    _compiled = None

BACKEND = "cython" if _compiled is not None else "python"
_impl = _compiled if _compiled is not None else _kernels_py


def rk4_affine(A, Bu, U_halfsteps, x0, dt, nsteps):
    return _impl.rk4_affine(A, Bu, U_halfsteps, x0, float(dt), int(nsteps))


def midpoint_affine(P, Qm, Umid, x0, nsteps):
    return _impl.midpoint_affine(P, Qm, Umid, x0, int(nsteps))


def backends():
    """Available implementations keyed by name."""
    out = {"python": _kernels_py}
    if _compiled is not None:
        out["cython"] = _compiled
    return out
