"""Kernel backend selection.

The hot stencil sweeps (Hessian-power energy for the capacity minimization and
the Laplacian for Newton-CG) have a compiled Cython core for full 3-D grids.
If the extension is missing the numpy reference backend handles everything;
results agree to rounding and tests exercise both.
"""

import numpy as np

from . import reference
from .reference import (
    cross_diff,
    first_diff,
    first_diff_even_T,
    lap_diag,
    lap_weighted,
    second_diff,
    spow_m68,
)

try:  # pragma: no cover - depends on the build
    from . import _core

    HAVE_COMPILED = True
except ImportError:  # pragma: no cover
    _core = None
    HAVE_COMPILED = False

BACKEND = "compiled" if HAVE_COMPILED else "reference"


def _compiled_ok(arr):
    return (
        _core is not None
        and arr.ndim == 3
        and arr.dtype == np.float64
        and arr.flags.c_contiguous
    )


def hess_power_full(phi, h, qprime, n, need_grad=False):
    """Unweighted Hessian-power energy sum and gradient on a full Cartesian grid."""
    if _compiled_ok(phi) and n in (3, 4, 5):
        return _core.hess_power_3d(phi, h, n, bool(need_grad))
    return reference.hess_power_full(phi, h, qprime, n, need_grad)


def lap_full(u, h):
    """Zero-padded Laplacian on a full Cartesian grid."""
    if _compiled_ok(u):
        return _core.lap_3d(u, h)
    return reference.lap_full(u, h)


def quad_apply_full(phi, rho, h):
    """Weighted Hessian-square operator sum_k mult_k L_k^T(rho L_k phi), full grids."""
    if _compiled_ok(phi) and phi.shape == rho.shape and rho.flags.c_contiguous:
        return _core.quad_apply_3d(phi, rho, h)
    out = np.zeros_like(phi)
    d = phi.ndim
    for a in range(d):
        out += reference.second_diff(rho * reference.second_diff(phi, a, h), a, h)
    for a in range(d):
        for b in range(a + 1, d):
            out += 2.0 * reference.cross_diff(
                rho * reference.cross_diff(phi, a, b, h), a, b, h
            )
    return out
