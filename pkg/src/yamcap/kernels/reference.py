"""Pure-numpy stencil kernels (reference backend).

All operators act on cell-centered fields with zero extension outside the
grid; grids with an r = 0 (or s = 0) symmetry face use even/odd reflection
ghosts there.  Adjoints are hand-derived and checked by tests.
"""

import numpy as np


def _shift(u, axis, offset):
    """u shifted by `offset` cells along axis, zero-filled."""
    out = np.zeros_like(u)
    src = [slice(None)] * u.ndim
    dst = [slice(None)] * u.ndim
    if offset > 0:
        src[axis] = slice(0, u.shape[axis] - offset)
        dst[axis] = slice(offset, None)
    elif offset < 0:
        src[axis] = slice(-offset, None)
        dst[axis] = slice(0, u.shape[axis] + offset)
    else:
        return u.copy()
    out[tuple(dst)] = u[tuple(src)]
    return out


def _edge(u, axis, last=False):
    sl = [slice(None)] * u.ndim
    sl[axis] = -1 if last else 0
    return u[tuple(sl)]


def second_diff(u, axis, h, reflect_low=False):
    """(u_{i+1} - 2 u_i + u_{i-1}) / h^2, zero-padded; optional even reflection
    at the low face (ghost u_{-1} = u_0).  Symmetric as a matrix."""
    out = _shift(u, axis, 1) + _shift(u, axis, -1) - 2.0 * u
    if reflect_low:
        sl = [slice(None)] * u.ndim
        sl[axis] = 0
        out[tuple(sl)] += _edge(u, axis)
    return out / (h * h)


def first_diff(u, axis, h, reflect="none"):
    """Central difference (u_{i+1} - u_{i-1}) / 2h, zero-padded, with an even
    or odd reflection ghost u_{-1} = +/- u_0 at the low face."""
    out = _shift(u, axis, -1) - _shift(u, axis, 1)
    if reflect != "none":
        sl = [slice(None)] * u.ndim
        sl[axis] = 0
        if reflect == "even":
            out[tuple(sl)] -= _edge(u, axis)
        else:
            out[tuple(sl)] += _edge(u, axis)
    return out / (2.0 * h)


def first_diff_even_T(v, axis, h):
    """Transpose of first_diff(..., reflect='even'): equals -first_diff with an
    odd reflection ghost."""
    return -first_diff(v, axis, h, reflect="odd")


def cross_diff(u, a, b, h):
    """Mixed second difference along axes a, b (zero-padded); self-adjoint."""
    pp = _shift(_shift(u, a, 1), b, 1)
    mm = _shift(_shift(u, a, -1), b, -1)
    pm = _shift(_shift(u, a, 1), b, -1)
    mp = _shift(_shift(u, a, -1), b, 1)
    return (pp + mm - pm - mp) / (4.0 * h * h)


def spow_m68(s, n):
    """s^((n-6)/8) with the convention 0^(negative) = 0, via sqrt chains.

    This is |H|^(q'-2) evaluated on s = |H|^2 for q' = (n+2)/4.
    """
    r2 = np.sqrt(s)
    r4 = np.sqrt(r2)
    r8 = np.sqrt(r4)
    safe = np.where(s > 0, s, 1.0)
    if n == 3:  # s^(-3/8) = s^(1/8) / s^(1/2)
        out = r8 / np.where(s > 0, r2, 1.0)
    elif n == 4:  # s^(-1/4)
        out = 1.0 / np.where(s > 0, r4, 1.0)
    elif n == 5:  # s^(-1/8)
        out = 1.0 / np.where(s > 0, r8, 1.0)
    else:
        out = safe ** ((n - 6) / 8.0)
    return np.where(s > 0, out, 0.0)


def hess_power_full(phi, h, qprime, n, need_grad=False):
    """Sum_cells |D^2 phi|_F^{q'} (unit cell measure) and its gradient on a full
    Cartesian grid; the caller folds in the h^dim volume factor."""
    d = phi.ndim
    diag = [second_diff(phi, a, h) for a in range(d)]
    cross = {(a, b): cross_diff(phi, a, b, h) for a in range(d) for b in range(a + 1, d)}
    s = np.zeros_like(phi)
    for c in diag:
        s += c * c
    for c in cross.values():
        s += 2.0 * (c * c)
    t = spow_m68(s, n)  # s^{(q'-2)/2}
    obj = float(np.sum(s * t))  # s^{q'/2}
    if not need_grad:
        return obj, None
    grad = np.zeros_like(phi)
    for a, c in enumerate(diag):
        grad += second_diff(qprime * t * c, a, h)
    for (a, b), c in cross.items():
        grad += cross_diff(2.0 * qprime * t * c, a, b, h)
    return obj, grad


def lap_full(u, h):
    """Zero-padded Laplacian stencil on a full Cartesian grid."""
    out = -2.0 * u.ndim * u.copy()
    for a in range(u.ndim):
        out += _shift(u, a, 1) + _shift(u, a, -1)
    return out / (h * h)


def lap_weighted(u, grid):
    """Conservative reduced Laplacian div(w grad u)/w with the grid's metric
    face weights; zero-padded at outer faces, natural (zero-flux) at r = s = 0."""
    h = grid.h
    wcell = grid.cell_metric_weight()
    out = np.zeros_like(u)
    for axis in range(u.ndim):
        wf = grid.face_metric_weight(axis)
        lo_face = [slice(None)] * u.ndim
        hi_face = [slice(None)] * u.ndim
        lo_face[axis] = slice(0, u.shape[axis])
        hi_face[axis] = slice(1, u.shape[axis] + 1)
        w_lo = wf[tuple(lo_face)]
        w_hi = wf[tuple(hi_face)]
        flux_hi = w_hi * (_shift(u, axis, -1) - u)   # u_{i+1} - u_i sits at face i+1/2
        flux_lo = w_lo * (u - _shift(u, axis, 1))
        # zero-pad: outermost high face flux uses u_outside = 0, consistent with _shift
        out += flux_hi - flux_lo
    return out / (wcell * h * h)


def lap_diag(grid):
    """Diagonal of lap_weighted as a linear operator (for Jacobi preconditioning)."""
    h = grid.h
    wcell = grid.cell_metric_weight()
    diag = np.zeros(grid.shape)
    for axis in range(grid.ndim):
        wf = grid.face_metric_weight(axis)
        lo_face = [slice(None)] * grid.ndim
        hi_face = [slice(None)] * grid.ndim
        lo_face[axis] = slice(0, grid.shape[axis])
        hi_face[axis] = slice(1, grid.shape[axis] + 1)
        diag += -(wf[tuple(hi_face)] + wf[tuple(lo_face)])
    return diag / (wcell * h * h)
