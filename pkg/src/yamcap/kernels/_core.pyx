# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled stencil kernels for full 3-D grids (hot paths of the capacity
minimizer and the Newton-CG solver).  Semantics match kernels.reference."""

import numpy as np

cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()


cdef inline double _at(double[:, :, ::1] p, Py_ssize_t i, Py_ssize_t j, Py_ssize_t k,
                       Py_ssize_t ni, Py_ssize_t nj, Py_ssize_t nk) nogil:
    if i < 0 or j < 0 or k < 0 or i >= ni or j >= nj or k >= nk:
        return 0.0
    return p[i, j, k]


def lap_3d(double[:, :, ::1] u, double h):
    """Zero-padded 7-point Laplacian."""
    cdef Py_ssize_t ni = u.shape[0], nj = u.shape[1], nk = u.shape[2]
    out_arr = np.empty((ni, nj, nk), dtype=np.float64)
    cdef double[:, :, ::1] out = out_arr
    cdef double ih2 = 1.0 / (h * h)
    cdef Py_ssize_t i, j, k
    cdef double acc
    with nogil:
        for i in range(ni):
            for j in range(nj):
                for k in range(nk):
                    acc = -6.0 * u[i, j, k]
                    if i > 0:
                        acc += u[i - 1, j, k]
                    if i < ni - 1:
                        acc += u[i + 1, j, k]
                    if j > 0:
                        acc += u[i, j - 1, k]
                    if j < nj - 1:
                        acc += u[i, j + 1, k]
                    if k > 0:
                        acc += u[i, j, k - 1]
                    if k < nk - 1:
                        acc += u[i, j, k + 1]
                    out[i, j, k] = acc * ih2
    return out_arr


cdef inline double _spow(double s, int n) nogil:
    """s^((n-6)/8) with 0^negative treated as 0."""
    cdef double r2, r4, r8
    if s <= 0.0:
        return 0.0
    r2 = sqrt(s)
    r4 = sqrt(r2)
    r8 = sqrt(r4)
    if n == 3:
        return r8 / r2
    elif n == 4:
        return 1.0 / r4
    return 1.0 / r8


def hess_power_3d(double[:, :, ::1] p, double h, int n, bint need_grad):
    """(sum_cells |D^2 p|_F^(q'), gradient) with q' = (n+2)/4, unit cell measure."""
    cdef Py_ssize_t ni = p.shape[0], nj = p.shape[1], nk = p.shape[2]
    cdef double ih2 = 1.0 / (h * h)
    cdef double iq2 = 0.25 * ih2
    cdef double qprime = (n + 2) / 4.0
    cdef double obj = 0.0
    cdef Py_ssize_t i, j, k
    cdef double dxx, dyy, dzz, dxy, dxz, dyz, s, t, c, acc

    cdef double[:, :, ::1] wxx = None, wyy = None, wzz = None
    cdef double[:, :, ::1] wxy = None, wxz = None, wyz = None
    arrs = None
    if need_grad:
        arrs = [np.empty((ni, nj, nk), dtype=np.float64) for _ in range(6)]
        wxx, wyy, wzz, wxy, wxz, wyz = arrs

    with nogil:
        for i in range(ni):
            for j in range(nj):
                for k in range(nk):
                    c = p[i, j, k]
                    dxx = (_at(p, i + 1, j, k, ni, nj, nk) - 2.0 * c + _at(p, i - 1, j, k, ni, nj, nk)) * ih2
                    dyy = (_at(p, i, j + 1, k, ni, nj, nk) - 2.0 * c + _at(p, i, j - 1, k, ni, nj, nk)) * ih2
                    dzz = (_at(p, i, j, k + 1, ni, nj, nk) - 2.0 * c + _at(p, i, j, k - 1, ni, nj, nk)) * ih2
                    dxy = (_at(p, i + 1, j + 1, k, ni, nj, nk) - _at(p, i + 1, j - 1, k, ni, nj, nk)
                           - _at(p, i - 1, j + 1, k, ni, nj, nk) + _at(p, i - 1, j - 1, k, ni, nj, nk)) * iq2
                    dxz = (_at(p, i + 1, j, k + 1, ni, nj, nk) - _at(p, i + 1, j, k - 1, ni, nj, nk)
                           - _at(p, i - 1, j, k + 1, ni, nj, nk) + _at(p, i - 1, j, k - 1, ni, nj, nk)) * iq2
                    dyz = (_at(p, i, j + 1, k + 1, ni, nj, nk) - _at(p, i, j + 1, k - 1, ni, nj, nk)
                           - _at(p, i, j - 1, k + 1, ni, nj, nk) + _at(p, i, j - 1, k - 1, ni, nj, nk)) * iq2
                    s = dxx * dxx + dyy * dyy + dzz * dzz + 2.0 * (dxy * dxy + dxz * dxz + dyz * dyz)
                    t = _spow(s, n)
                    obj += s * t
                    if need_grad:
                        t *= qprime
                        wxx[i, j, k] = t * dxx
                        wyy[i, j, k] = t * dyy
                        wzz[i, j, k] = t * dzz
                        wxy[i, j, k] = 2.0 * t * dxy
                        wxz[i, j, k] = 2.0 * t * dxz
                        wyz[i, j, k] = 2.0 * t * dyz
    if not need_grad:
        return obj, None

    grad_arr = np.empty((ni, nj, nk), dtype=np.float64)
    cdef double[:, :, ::1] g = grad_arr
    with nogil:
        for i in range(ni):
            for j in range(nj):
                for k in range(nk):
                    acc = (_at(wxx, i + 1, j, k, ni, nj, nk) - 2.0 * wxx[i, j, k] + _at(wxx, i - 1, j, k, ni, nj, nk)) * ih2
                    acc += (_at(wyy, i, j + 1, k, ni, nj, nk) - 2.0 * wyy[i, j, k] + _at(wyy, i, j - 1, k, ni, nj, nk)) * ih2
                    acc += (_at(wzz, i, j, k + 1, ni, nj, nk) - 2.0 * wzz[i, j, k] + _at(wzz, i, j, k - 1, ni, nj, nk)) * ih2
                    acc += (_at(wxy, i + 1, j + 1, k, ni, nj, nk) - _at(wxy, i + 1, j - 1, k, ni, nj, nk)
                            - _at(wxy, i - 1, j + 1, k, ni, nj, nk) + _at(wxy, i - 1, j - 1, k, ni, nj, nk)) * iq2
                    acc += (_at(wxz, i + 1, j, k + 1, ni, nj, nk) - _at(wxz, i + 1, j, k - 1, ni, nj, nk)
                            - _at(wxz, i - 1, j, k + 1, ni, nj, nk) + _at(wxz, i - 1, j, k - 1, ni, nj, nk)) * iq2
                    acc += (_at(wyz, i, j + 1, k + 1, ni, nj, nk) - _at(wyz, i, j + 1, k - 1, ni, nj, nk)
                            - _at(wyz, i, j - 1, k + 1, ni, nj, nk) + _at(wyz, i, j - 1, k - 1, ni, nj, nk)) * iq2
                    g[i, j, k] = acc
    return obj, grad_arr


def quad_apply_3d(double[:, :, ::1] p, double[:, :, ::1] rho, double h):
    """A_rho p = sum_k mult_k L_k^T(rho L_k p) for the full 3-D Hessian components."""
    cdef Py_ssize_t ni = p.shape[0], nj = p.shape[1], nk = p.shape[2]
    cdef double ih2 = 1.0 / (h * h)
    cdef double iq2 = 0.25 * ih2
    cdef Py_ssize_t i, j, k
    cdef double dxx, dyy, dzz, dxy, dxz, dyz, c, r, acc

    arrs = [np.empty((ni, nj, nk), dtype=np.float64) for _ in range(6)]
    cdef double[:, :, ::1] wxx = arrs[0]
    cdef double[:, :, ::1] wyy = arrs[1]
    cdef double[:, :, ::1] wzz = arrs[2]
    cdef double[:, :, ::1] wxy = arrs[3]
    cdef double[:, :, ::1] wxz = arrs[4]
    cdef double[:, :, ::1] wyz = arrs[5]

    with nogil:
        for i in range(ni):
            for j in range(nj):
                for k in range(nk):
                    c = p[i, j, k]
                    r = rho[i, j, k]
                    dxx = (_at(p, i + 1, j, k, ni, nj, nk) - 2.0 * c + _at(p, i - 1, j, k, ni, nj, nk)) * ih2
                    dyy = (_at(p, i, j + 1, k, ni, nj, nk) - 2.0 * c + _at(p, i, j - 1, k, ni, nj, nk)) * ih2
                    dzz = (_at(p, i, j, k + 1, ni, nj, nk) - 2.0 * c + _at(p, i, j, k - 1, ni, nj, nk)) * ih2
                    dxy = (_at(p, i + 1, j + 1, k, ni, nj, nk) - _at(p, i + 1, j - 1, k, ni, nj, nk)
                           - _at(p, i - 1, j + 1, k, ni, nj, nk) + _at(p, i - 1, j - 1, k, ni, nj, nk)) * iq2
                    dxz = (_at(p, i + 1, j, k + 1, ni, nj, nk) - _at(p, i + 1, j, k - 1, ni, nj, nk)
                           - _at(p, i - 1, j, k + 1, ni, nj, nk) + _at(p, i - 1, j, k - 1, ni, nj, nk)) * iq2
                    dyz = (_at(p, i, j + 1, k + 1, ni, nj, nk) - _at(p, i, j + 1, k - 1, ni, nj, nk)
                           - _at(p, i, j - 1, k + 1, ni, nj, nk) + _at(p, i, j - 1, k - 1, ni, nj, nk)) * iq2
                    wxx[i, j, k] = r * dxx
                    wyy[i, j, k] = r * dyy
                    wzz[i, j, k] = r * dzz
                    wxy[i, j, k] = 2.0 * r * dxy
                    wxz[i, j, k] = 2.0 * r * dxz
                    wyz[i, j, k] = 2.0 * r * dyz

    out_arr = np.empty((ni, nj, nk), dtype=np.float64)
    cdef double[:, :, ::1] g = out_arr
    with nogil:
        for i in range(ni):
            for j in range(nj):
                for k in range(nk):
                    acc = (_at(wxx, i + 1, j, k, ni, nj, nk) - 2.0 * wxx[i, j, k] + _at(wxx, i - 1, j, k, ni, nj, nk)) * ih2
                    acc += (_at(wyy, i, j + 1, k, ni, nj, nk) - 2.0 * wyy[i, j, k] + _at(wyy, i, j - 1, k, ni, nj, nk)) * ih2
                    acc += (_at(wzz, i, j, k + 1, ni, nj, nk) - 2.0 * wzz[i, j, k] + _at(wzz, i, j, k - 1, ni, nj, nk)) * ih2
                    acc += (_at(wxy, i + 1, j + 1, k, ni, nj, nk) - _at(wxy, i + 1, j - 1, k, ni, nj, nk)
                            - _at(wxy, i - 1, j + 1, k, ni, nj, nk) + _at(wxy, i - 1, j - 1, k, ni, nj, nk)) * iq2
                    acc += (_at(wxz, i + 1, j, k + 1, ni, nj, nk) - _at(wxz, i + 1, j, k - 1, ni, nj, nk)
                            - _at(wxz, i - 1, j, k + 1, ni, nj, nk) + _at(wxz, i - 1, j, k - 1, ni, nj, nk)) * iq2
                    acc += (_at(wyz, i, j + 1, k + 1, ni, nj, nk) - _at(wyz, i, j + 1, k - 1, ni, nj, nk)
                            - _at(wyz, i, j - 1, k + 1, ni, nj, nk) + _at(wyz, i, j - 1, k - 1, ni, nj, nk)) * iq2
                    g[i, j, k] = acc
    return out_arr
