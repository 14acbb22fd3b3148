"""Sphere <-> plane transfer of solutions through the stereographic chart.

Sphere fields are sample-based (point lists); the sphere is only ever a
source or target of transfer, never a solve domain.  The plane-side
normalization is lap(u) = u^q; the sphere-side constant is absorbed by the
correspondence u(x) = Upsilon(x) v(chart_inv(x)).
"""

import json
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .exponents import Exponents
from .grids import ScalarField
from .sphere import conformal_factor, north_pole, stereo_inv


@dataclass
class SphereSamples:
    """Sphere field as parallel arrays of unit points (N, n+1) and values (N,)."""

    points: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        norms = np.linalg.norm(self.points, axis=-1)
        if np.any(np.abs(norms - 1.0) > 1e-10):
            raise ValueError("sphere sample points must have unit norm to 1e-10")
        if self.points.shape[0] != self.values.shape[0]:
            raise ValueError("points and values must align")

    @classmethod
    def load(cls, path):
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        pts = np.array([rec["point"] for rec in doc], dtype=float)
        vals = np.array([rec["value"] for rec in doc], dtype=float)
        return cls(pts, vals)

    def dump(self, path):
        doc = [
            {"point": [float(c) for c in p], "value": float(v)}
            for p, v in zip(self.points, self.values)
        ]
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=1)


@dataclass
class TransferredSolution:
    plane_field: ScalarField
    sphere_samples: SphereSamples
    factor_used: np.ndarray
    flags: dict = field(default_factory=dict)


def pull_to_plane(samples, grid, expo=None, residual_check=True):
    """Plane field u(x) = Upsilon(x) v(chart_inv(x)) from sphere samples that sit
    at the chart preimages of the grid's cell centers."""
    expo = expo or Exponents.for_dimension(grid.ambient_dim)
    n = expo.n
    centers = grid.ambient_centers().reshape(-1, n)
    expected = stereo_inv(centers)
    got = samples.points.reshape(-1, n + 1)
    if got.shape[0] != centers.shape[0] or np.max(np.linalg.norm(got - expected, axis=-1)) > 1e-8:
        raise ValueError("samples must sit at the chart preimages of the grid cell centers")
    ups = conformal_factor(centers, n)
    u = (ups * samples.values).reshape(grid.shape)
    field_u = ScalarField(grid, u)
    out = TransferredSolution(field_u, samples, ups.reshape(grid.shape))
    if residual_check:
        interior = np.ones(grid.shape, bool)
        for a in range(grid.ndim):
            sl = [slice(None)] * grid.ndim
            sl[a] = 0
            interior[tuple(sl)] = False
            sl[a] = -1
            interior[tuple(sl)] = False
        lap = kernels.lap_full(np.ascontiguousarray(u), grid.h) if grid.reduction in (
            "full", "planar1d") else kernels.lap_weighted(u, grid)
        res = np.abs(lap - np.power(np.maximum(u, 0.0), expo.qf))
        out.flags["interior_residual"] = float(np.max(res[interior])) if np.any(interior) else 0.0
    return out


def push_to_sphere(sol, pole_from_far_field=True):
    """Sphere samples v = u / Upsilon at the chart preimages of the grid centers;
    the value at the pole comes from the fitted far-field coefficient."""
    grid = sol.grid
    expo = sol.expo or Exponents.for_dimension(grid.ambient_dim)
    n = expo.n
    if pole_from_far_field and sol.far_field_coefficient is None:
        raise ValueError("far-field coefficient required to define the pole value")
    centers = grid.ambient_centers().reshape(-1, n)
    pts = stereo_inv(centers)
    ups = conformal_factor(centers, n)
    vals = sol.u.values.reshape(-1) / ups
    flags = {}
    if pole_from_far_field:
        A = sol.far_field_coefficient
        pole_value = A * 2.0 ** (-(n - 2) / 2.0)
        pts = np.concatenate([pts, north_pole(n)[None, :]], axis=0)
        vals = np.concatenate([vals, [pole_value]])
        if pole_value <= 0.0:
            flags["nonpositive_pole_value"] = pole_value
    out = SphereSamples(pts, vals)
    return out, flags


def pole_continuity_gap(samples, n, shells=(0.3, 0.2, 0.1)):
    """Deviation of near-pole sample values from the pole value on shrinking
    chart-distance neighborhoods of the north pole."""
    N = north_pole(n)
    at_pole = np.linalg.norm(samples.points - N, axis=-1) < 1e-14
    if not np.any(at_pole):
        raise ValueError("samples do not include the pole")
    pole_value = float(samples.values[at_pole][0])
    gaps = []
    dist = np.linalg.norm(samples.points - N, axis=-1)
    for rho in shells:
        near = (~at_pole) & (dist <= rho)
        if not np.any(near):
            gaps.append(None)
            continue
        gaps.append(float(np.max(np.abs(samples.values[near] - pole_value))))
    return pole_value, gaps


def conformal_laplacian_apply(grid, factor, v, expo, scalar_curvature=0.0):
    """Conformal Laplacian of v in the metric factor^(4/(n-2)) * euclidean,
    discretized through the conformal-change formulas."""
    n = expo.n
    a = 4.0 * (n - 1) / (n - 2)
    h = grid.h

    def lap(f):
        return kernels.lap_full(np.ascontiguousarray(f), h)

    def grad_dot(f, g):
        out = np.zeros(grid.shape)
        for ax in range(grid.ndim):
            out += kernels.first_diff(f, ax, h) * kernels.first_diff(g, ax, h)
        return out

    # R(g_hat) = factor^(-q) L_euclid(factor) with R(euclid) = 0
    r_hat = factor ** (-expo.qf) * (-a * lap(factor) + scalar_curvature * factor)
    lap_hat = factor ** (-4.0 / (n - 2)) * (lap(v) + 2.0 * grad_dot(np.log(factor), v))
    return -a * lap_hat + r_hat * v


def conformal_laplacian_defect(grid, factor, v, expo):
    """Max interior mismatch between L_ghat(v) and factor^(-q) L_g(factor v),
    the two discrete routes to the same operator; O(h^2) for smooth data."""
    n = expo.n
    a = 4.0 * (n - 1) / (n - 2)
    lhs = conformal_laplacian_apply(grid, factor, v, expo)
    rhs = factor ** (-expo.qf) * (
        -a * (kernels.lap_full(np.ascontiguousarray(factor * v), grid.h))
    )
    interior = np.ones(grid.shape, bool)
    for ax in range(grid.ndim):
        sl = [slice(None)] * grid.ndim
        sl[ax] = slice(0, 2)
        interior[tuple(sl)] = False
        sl[ax] = slice(-2, None)
        interior[tuple(sl)] = False
    scale = float(np.max(np.abs(rhs[interior]))) if np.any(interior) else 1.0
    gap = np.abs(lhs - rhs)
    return float(np.max(gap[interior])) / max(scale, 1e-300)
