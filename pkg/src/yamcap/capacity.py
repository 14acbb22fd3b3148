"""Second-order capacity by discretized convex minimization.

The capacity of a compactum K inside the unit ball is the infimum of the
Hessian-power energy  sum |D^2 phi|_F^(q') * cellvol  over grid fields that
are >= 1 on the cells of K and vanish outside B(0, 2).

The integrand is convex but only C^1 (q' in (1, 2]), and the operator is
fourth order, so plain first-order descent stalls on fine grids.  The solver
therefore runs majorize-minimize sweeps — each step solves the weighted
quadratic  sum rho |D^2 phi|^2  exactly (banded solve in 1-D) or by
preconditioned CG — and finishes with the monotone accelerated projected
descent, whose backtracking line search needs no Lipschitz constant, to
honour the inequality constraint and certify a nonincreasing objective.

Absolute values are mesh-dependent; every consumer works with ratios or
scaling slopes, and results always carry their mesh.
"""

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.fft
import scipy.linalg

from . import kernels
from .exponents import Exponents
from .geometry import CompactSetSpec, rasterize
from .grids import ScalarField, sphere_area
from .sphere import plane_image_primitive, rotate_to_cap


def _dot(a, b):
    # np.sum keeps reductions deterministic regardless of BLAS threading
    return float(np.sum(a * b))


def hess_energy(grid, phi, expo, need_grad=False):
    """Volume-weighted Hessian-power energy on any supported grid reduction."""
    n = expo.n
    qp = expo.q_primef
    h = grid.h
    if grid.reduction == "full":
        obj, grad = kernels.hess_power_full(phi, h, qp, n, need_grad)
        vol = h**n
        return obj * vol, (None if grad is None else grad * vol)
    if grid.reduction == "radial1d":
        r = grid.axis_centers(0)
        w = sphere_area(n - 1) * r ** (n - 1) * h
        A = kernels.second_diff(phi, 0, h, reflect_low=True)
        M = kernels.first_diff(phi, 0, h, reflect="even") / r
        s = A * A + (n - 1) * (M * M)
        t = kernels.spow_m68(s, n)
        obj = _dot(w, s * t)
        if not need_grad:
            return obj, None
        grad = kernels.second_diff(qp * w * t * A, 0, h, reflect_low=True)
        grad += kernels.first_diff_even_T((n - 1) * qp * w * t * M / r, 0, h)
        return obj, grad
    if grid.reduction == "axisym2d":
        s_ax = grid.axis_centers(0)[:, None]
        w = sphere_area(n - 2) * s_ax ** (n - 2) * h**2
        A_ss = kernels.second_diff(phi, 0, h, reflect_low=True)
        A_zz = kernels.second_diff(phi, 1, h)
        C = kernels.first_diff(kernels.first_diff(phi, 1, h), 0, h, reflect="even")
        M = kernels.first_diff(phi, 0, h, reflect="even") / s_ax
        s = A_ss * A_ss + A_zz * A_zz + 2.0 * C * C + (n - 2) * (M * M)
        t = kernels.spow_m68(s, n)
        obj = _dot(w, s * t)
        if not need_grad:
            return obj, None
        grad = kernels.second_diff(qp * w * t * A_ss, 0, h, reflect_low=True)
        grad += kernels.second_diff(qp * w * t * A_zz, 1, h)
        # C = Ds_even Dz, so C^T = Dz^T Ds_even^T = (-Dz)(first_diff_even_T)
        grad -= kernels.first_diff(
            kernels.first_diff_even_T(2.0 * qp * w * t * C, 0, h), 1, h
        )
        grad += kernels.first_diff_even_T((n - 2) * qp * w * t * M / s_ax, 0, h)
        return obj, grad
    raise ValueError(f"capacity solves not supported on {grid.reduction} grids")


def _components(grid, expo):
    """Hessian component operators as (forward, adjoint, multiplicity) triples.

    sum_k mult_k * fwd_k(phi)^2 equals |D^2 phi|_F^2 pointwise on the grid.
    """
    n = expo.n
    h = grid.h
    if grid.reduction == "full":
        ops = []
        d = grid.ndim
        for a in range(d):
            ops.append(
                (
                    lambda u, a=a: kernels.second_diff(u, a, h),
                    lambda v, a=a: kernels.second_diff(v, a, h),
                    1.0,
                )
            )
        for a in range(d):
            for b in range(a + 1, d):
                ops.append(
                    (
                        lambda u, a=a, b=b: kernels.cross_diff(u, a, b, h),
                        lambda v, a=a, b=b: kernels.cross_diff(v, a, b, h),
                        2.0,
                    )
                )
        return ops
    if grid.reduction == "radial1d":
        r = grid.axis_centers(0)
        return [
            (
                lambda u: kernels.second_diff(u, 0, h, reflect_low=True),
                lambda v: kernels.second_diff(v, 0, h, reflect_low=True),
                1.0,
            ),
            (
                lambda u: kernels.first_diff(u, 0, h, reflect="even") / r,
                lambda v: kernels.first_diff_even_T(v / r, 0, h),
                float(n - 1),
            ),
        ]
    if grid.reduction == "axisym2d":
        s_ax = grid.axis_centers(0)[:, None]
        return [
            (
                lambda u: kernels.second_diff(u, 0, h, reflect_low=True),
                lambda v: kernels.second_diff(v, 0, h, reflect_low=True),
                1.0,
            ),
            (
                lambda u: kernels.second_diff(u, 1, h),
                lambda v: kernels.second_diff(v, 1, h),
                1.0,
            ),
            (
                lambda u: kernels.first_diff(kernels.first_diff(u, 1, h), 0, h, reflect="even"),
                lambda v: -kernels.first_diff(kernels.first_diff_even_T(v, 0, h), 1, h),
                2.0,
            ),
            (
                lambda u: kernels.first_diff(u, 0, h, reflect="even") / s_ax,
                lambda v: kernels.first_diff_even_T(v / s_ax, 0, h),
                float(n - 2),
            ),
        ]
    raise ValueError(f"capacity solves not supported on {grid.reduction} grids")


def quad_apply(grid, expo, rho, phi):
    """Apply A_rho phi = sum_k mult_k adj_k(rho fwd_k(phi)); phi^T A phi = sum rho s."""
    if grid.reduction == "full":
        return kernels.quad_apply_full(
            np.ascontiguousarray(phi), np.ascontiguousarray(rho), grid.h
        )
    out = np.zeros(grid.shape)
    for fwd, adj, mult in _components(grid, expo):
        out += mult * adj(rho * fwd(phi))
    return out


def _shifted_sum(arr, axis, offsets_weights):
    from .kernels.reference import _shift

    out = np.zeros_like(arr)
    for off, wgt in offsets_weights:
        out += wgt * _shift(arr, axis, -off)
    return out


def quad_diag(grid, expo, rho):
    """Approximate diagonal of A_rho (boundary reflections ignored) for Jacobi."""
    n = expo.n
    h = grid.h
    h4 = h**4
    diag = np.zeros(grid.shape)
    if grid.reduction == "full":
        for a in range(grid.ndim):
            diag += _shifted_sum(rho, a, [(-1, 1.0), (0, 4.0), (1, 1.0)]) / h4
        for a in range(grid.ndim):
            for b in range(a + 1, grid.ndim):
                part = _shifted_sum(rho, a, [(-1, 1.0), (1, 1.0)])
                part = _shifted_sum(part, b, [(-1, 1.0), (1, 1.0)])
                diag += 2.0 * part / (16.0 * h4)
        return diag
    if grid.reduction == "radial1d":
        r = grid.axis_centers(0)
        diag += _shifted_sum(rho, 0, [(-1, 1.0), (0, 4.0), (1, 1.0)]) / h4
        diag += (n - 1) * _shifted_sum(rho / r**2, 0, [(-1, 1.0), (1, 1.0)]) / (4.0 * h * h)
        return diag
    if grid.reduction == "axisym2d":
        s_ax = grid.axis_centers(0)[:, None]
        diag += _shifted_sum(rho, 0, [(-1, 1.0), (0, 4.0), (1, 1.0)]) / h4
        diag += _shifted_sum(rho, 1, [(-1, 1.0), (0, 4.0), (1, 1.0)]) / h4
        part = _shifted_sum(rho, 0, [(-1, 1.0), (1, 1.0)])
        part = _shifted_sum(part, 1, [(-1, 1.0), (1, 1.0)])
        diag += 2.0 * part / (16.0 * h4)
        diag += (n - 2) * _shifted_sum(rho / s_ax**2, 0, [(-1, 1.0), (1, 1.0)]) / (4.0 * h * h)
        return diag
    raise ValueError(grid.reduction)


@dataclass
class CapacitySolveConfig:
    max_iterations: int = 20000
    rel_tol: float = 1e-7
    window: int = 50
    support_radius: float = 2.0
    step_growth: float = 0.9  # multiplies L each iteration to re-test longer steps
    mm_steps: int = 30
    mm_inner_iterations: int = 250
    mm_inner_tol: float = 1e-9
    eps_start_quantile: float = 0.9
    eps_floor: float = 1e-9
    polish_iterations: int = 400


@dataclass
class CapacityResult:
    value: float
    extremal: ScalarField
    mesh_spacing: float
    iterations: int
    objective_history: list
    constraint_violation: float
    converged: bool = True
    coarse: bool = False
    notes: dict = field(default_factory=dict)

    @property
    def at_floor(self):
        return self.notes.get("at_floor", False)


def _project(phi, kmask, support):
    phi = np.where(support, phi, 0.0)
    if kmask is not None and np.any(kmask):
        phi = np.where(kmask & (phi < 1.0), 1.0, phi)
    return phi


def _energy_weights(grid, expo):
    n = expo.n
    h = grid.h
    if grid.reduction == "full":
        return np.full(grid.shape, h**n)
    if grid.reduction == "radial1d":
        r = grid.axis_centers(0)
        return sphere_area(n - 1) * r ** (n - 1) * h
    s_ax = grid.axis_centers(0)[:, None]
    return np.broadcast_to(sphere_area(n - 2) * s_ax ** (n - 2) * h**2, grid.shape).copy()


def _s_field(grid, expo, phi):
    s = np.zeros(grid.shape)
    for fwd, _, mult in _components(grid, expo):
        c = fwd(phi)
        s += mult * (c * c)
    return s


def _banded_solve_1d(grid, expo, rho, free, pin_values):
    """Exact minimizer of sum rho*s(phi) with pinned cells, via a symmetric
    pentadiagonal solve (1-D grids only)."""
    N = grid.cells[0]
    h = grid.h
    n = expo.n
    rows = []
    # coefficient arrays a_o[c] of phi_{c+o} in each operator row c
    a_m1 = np.ones(N) / h**2
    a_0 = -2.0 * np.ones(N) / h**2
    a_p1 = np.ones(N) / h**2
    a_m1[0] = 0.0
    a_0[0] = -1.0 / h**2  # even reflection at the r=0 face
    a_p1[N - 1] = 0.0
    rows.append(({-1: a_m1, 0: a_0, 1: a_p1}, 1.0))
    if grid.reduction == "radial1d":
        r = grid.axis_centers(0)
        g = 1.0 / (2.0 * h * r)
        b_m1 = -g.copy()
        b_0 = np.zeros(N)
        b_p1 = g.copy()
        b_m1[0] = 0.0
        b_0[0] = -g[0]
        b_p1[N - 1] = 0.0
        rows.append(({-1: b_m1, 0: b_0, 1: b_p1}, float(n - 1)))
    bands = {d: np.zeros(N) for d in (0, 1, 2)}
    from .kernels.reference import _shift

    for coeffs, mult in rows:
        for o1, c1 in coeffs.items():
            for o2, c2 in coeffs.items():
                d = o2 - o1
                if d < 0:
                    continue
                contrib = mult * rho * c1 * c2
                bands[d] += _shift(contrib, 0, o1)
    idx = np.flatnonzero(free)
    nf = idx.size
    if nf == 0:
        return pin_values.copy()
    ab = np.zeros((3, nf))  # upper banded storage for solveh_banded
    pos = -np.ones(N, dtype=int)
    pos[idx] = np.arange(nf)
    for d in (0, 1, 2):
        cols = idx + d
        ok = cols < N
        rows_i = idx[ok]
        cols_i = cols[ok]
        both = free[cols_i]
        p = pos[rows_i[both]]
        q = pos[cols_i[both]]
        ab[2 - (q - p), q] = bands[d][rows_i[both]]
    rhs_full = -quad_apply(grid, expo, rho, pin_values)
    rhs = rhs_full[idx]
    x = scipy.linalg.solveh_banded(ab, rhs, lower=False)
    out = pin_values.copy()
    out[idx] = x
    return out


def _dst_symbol(grid):
    """Eigenvalues of the constant-coefficient Hessian-square operator in the
    tensor sine basis matching zero-padded stencils (full grids)."""
    h = grid.h
    lams, mus = [], []
    for a in range(grid.ndim):
        N = grid.cells[a]
        theta = np.pi * np.arange(1, N + 1) / (N + 1)
        lams.append((2.0 - 2.0 * np.cos(theta)) / h**2)
        mus.append((np.sin(theta) / h) ** 2)
    sym = np.zeros(grid.shape)
    for a in range(grid.ndim):
        shape = [1] * grid.ndim
        shape[a] = -1
        sym = sym + lams[a].reshape(shape) ** 2
    for a in range(grid.ndim):
        for b in range(a + 1, grid.ndim):
            sa = [1] * grid.ndim
            sa[a] = -1
            sb = [1] * grid.ndim
            sb[b] = -1
            sym = sym + 2.0 * mus[a].reshape(sa) * mus[b].reshape(sb)
    return sym


def _pcg_free(grid, expo, rho, free, pin_values, x0, max_iter, tol):
    """Preconditioned CG for the pinned weighted-quadratic subproblem.

    Full grids use an exact constant-coefficient inverse in the sine basis as
    the preconditioner (fictitious-domain restriction); reduced grids use
    Jacobi.
    """
    apply_free = lambda v: quad_apply(grid, expo, rho, np.where(free, v, 0.0)) * free
    if grid.reduction == "full":
        sym = _dst_symbol(grid)
        logs = np.log(rho[rho > 0])
        rho_bar = float(np.exp(np.mean(logs))) if logs.size else 1.0

        def minv(r):
            rhat = scipy.fft.dstn(np.where(free, r, 0.0), type=1)
            return np.where(free, scipy.fft.idstn(rhat / (rho_bar * sym), type=1), 0.0)

    else:
        diag = np.maximum(quad_diag(grid, expo, rho), 1e-300)

        def minv(r):
            return np.where(free, r / diag, 0.0)

    b = -quad_apply(grid, expo, rho, pin_values) * free
    x = np.where(free, x0, 0.0)
    r = b - apply_free(x)
    z = minv(r)
    p = z.copy()
    rz = _dot(r, z)
    bnorm = math.sqrt(_dot(b, b))
    if bnorm == 0.0:
        return pin_values.copy()
    for _ in range(max_iter):
        Ap = apply_free(p)
        pAp = _dot(p, Ap)
        if pAp <= 0:
            break
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        if math.sqrt(_dot(r, r)) <= tol * bnorm:
            break
        z = minv(r)
        rz_new = _dot(r, z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    out = pin_values.copy()
    out[free] = x[free]
    return out


def _accelerated_descent(grid, expo, kmask, support, x0, cfg, budget, history):
    """Monotone accelerated projected descent with backtracking (polish stage)."""
    x = _project(np.asarray(x0, dtype=float), kmask, support)
    f_x, _ = hess_energy(grid, x, expo, need_grad=False)
    if history and f_x > history[-1]:
        f_x = history[-1]  # projection of an already-feasible iterate cannot increase F
    y = x.copy()
    t_mom = 1.0
    L = None
    converged = False
    for _ in range(budget):
        f_y, g = hess_energy(grid, y, expo, need_grad=True)
        if L is None:
            gn = math.sqrt(_dot(g, g))
            L = max(gn / max(math.sqrt(_dot(x, x)), 1e-12), 1.0)
        else:
            L *= cfg.step_growth
        while True:
            cand = _project(y - g / L, kmask, support)
            f_c, _ = hess_energy(grid, cand, expo, need_grad=False)
            diff = cand - y
            quad = f_y + _dot(g, diff) + 0.5 * L * _dot(diff, diff)
            if f_c <= quad + 1e-12 * (1.0 + abs(f_y)) or L > 1e19:
                break
            L *= 2.0
        if f_c <= f_x:
            t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t_mom * t_mom))
            y = _project(cand + ((t_mom - 1.0) / t_next) * (cand - x), kmask, support)
            x, f_x = cand, f_c
            t_mom = t_next
        else:
            y = x.copy()
            t_mom = 1.0
        history.append(f_x)
        w = cfg.window
        if len(history) > w + 10:
            drop = history[-w - 1] - history[-1]
            if drop <= cfg.rel_tol * max(abs(history[-1]), 1e-300):
                converged = True
                break
    return x, f_x, converged


def minimize_hess_energy(grid, expo, kmask, cfg=None, phi0=None):
    """Capacity energy minimizer: majorize-minimize sweeps with inner weighted
    quadratic solves, then a monotone accelerated projected-descent polish."""
    cfg = cfg or CapacitySolveConfig()
    support = grid.radius_field() <= cfg.support_radius
    if kmask is None or not np.any(kmask):
        zero = ScalarField(grid, np.zeros(grid.shape))
        return CapacityResult(0.0, zero, grid.h, 0, [0.0], 0.0)
    if np.any(kmask & ~support):
        raise ValueError("constraint cells fall outside the admissible support ball")

    if phi0 is None:
        phi0 = np.where(kmask, 1.0, 0.0)
    x = _project(np.asarray(phi0, dtype=float), kmask, support)
    f_x, _ = hess_energy(grid, x, expo, need_grad=False)
    history = [f_x]
    w_cell = _energy_weights(grid, expo)
    qp = expo.q_primef

    s = _s_field(grid, expo, x)
    pos = s[s > 1e-300]
    scale = float(np.quantile(pos, cfg.eps_start_quantile)) if pos.size else 1.0
    eps = scale
    eps_floor = scale * cfg.eps_floor
    # active set on the obstacle phi >= 1: K cells whose KKT multiplier wants
    # the extremal above 1 get released into the free set
    released = np.zeros(grid.shape, dtype=bool)
    for _ in range(cfg.mm_steps):
        rho = w_cell * (0.5 * qp) * (s + eps) ** ((qp - 2.0) / 2.0)
        pinned_k = kmask & ~released
        free = support & ~pinned_k
        pin_values = np.where(pinned_k, 1.0, 0.0)
        if grid.ndim == 1:
            cand = _banded_solve_1d(grid, expo, rho, free, pin_values)
        else:
            cand = _pcg_free(
                grid, expo, rho, free, pin_values, x, cfg.mm_inner_iterations, cfg.mm_inner_tol
            )
        cand = _project(cand, kmask, support)
        grad_quad = quad_apply(grid, expo, rho, cand)
        released = (released & (cand > 1.0 + 1e-12)) | (kmask & (grad_quad < 0.0))
        f_c, _ = hess_energy(grid, cand, expo, need_grad=False)
        if f_c <= f_x:
            x, f_x = cand, f_c
            s = _s_field(grid, expo, x)
        history.append(f_x)
        if eps <= eps_floor and len(history) >= 3 and (
            history[-3] - history[-1] <= cfg.rel_tol * max(abs(f_x), 1e-300)
        ):
            break
        eps = max(eps * 0.2, eps_floor)

    budget = min(cfg.polish_iterations, cfg.max_iterations)
    x, f_x, converged = _accelerated_descent(
        grid, expo, kmask, support, x, cfg, budget, history
    )
    viol = max(0.0, 1.0 - float(np.min(x[kmask])))
    return CapacityResult(
        value=f_x,
        extremal=ScalarField(grid, x),
        mesh_spacing=grid.h,
        iterations=len(history) - 1,
        objective_history=history,
        constraint_violation=viol,
        converged=converged,
    )


def estimate_capacity(spec, grid, cfg=None, expo=None):
    """Capacity of a plane compactum K inside B(0,1) on the given grid."""
    expo = expo or Exponents.for_dimension(spec.dimension)
    support_radius = (cfg or CapacitySolveConfig()).support_radius
    if float(grid.radius_field().max()) < support_radius:
        raise ValueError(f"grid box must contain the support ball B(0, {support_radius})")
    raster = rasterize(spec, grid)
    if not spec.is_empty:
        R = spec.bounding_radius()
        if R > 1.0 + grid.h:
            raise ValueError(f"K must sit inside B(0,1); bounding radius {R:.3f}")
    result = minimize_hess_energy(grid, expo, raster.mask, cfg, phi0=_initial_guess(spec, grid))
    result.coarse = raster.coarse
    result.notes["snapped"] = raster.snapped
    result.notes["k_cells"] = int(np.sum(raster.mask))
    return result


def _initial_guess(spec, grid):
    if spec.is_empty:
        return np.zeros(grid.shape)
    centers = grid.ambient_centers()
    sd = spec.as_primitive().signed_distance(centers)
    gap = max(2.0 - min(spec.bounding_radius(), 1.0), 0.5)
    return np.clip(1.0 - np.maximum(sd, 0.0) / (0.9 * gap), 0.0, 1.0)


def calibrated_capacity(spec, grid, cfg=None, expo=None):
    """Capacity at the calibrated mesh: rescale K to unit size, solve there, and
    map back through the exact scaling exponent (n-2)/2.  Returns (value, raw
    unit-scale result)."""
    expo = expo or Exponents.for_dimension(spec.dimension)
    t = spec.bounding_radius()
    if spec.is_empty or t <= 0.0:
        return 0.0, None
    unit = spec.rescale(1.0 / t)
    res = estimate_capacity(unit, grid, cfg, expo)
    return res.value * t ** float(expo.capacity_scale_exp), res


_FLOOR_CACHE = {}


def capacity_floor(grid, expo, cfg=None):
    """Capacity of a single central cell on this grid: values at or below
    1.5x this level are indistinguishable from capacity zero at this mesh."""
    key = (grid.lo, grid.hi, grid.cells, grid.reduction, grid.ambient_dim, expo.n)
    if key not in _FLOOR_CACHE:
        mask = np.zeros(grid.shape, dtype=bool)
        idx = grid.cell_index_of_ambient(np.zeros((1, grid.ambient_dim)))[0]
        idx = np.clip(idx, 0, np.asarray(grid.shape) - 1)
        mask[tuple(idx)] = True
        res = minimize_hess_energy(grid, expo, mask, cfg)
        _FLOOR_CACHE[key] = 1.5 * res.value
    return _FLOOR_CACHE[key]


def capacity_on_sphere(sphere_set, grid, cfg=None):
    """Capacity of a sphere compactum: rotate into the polar cap, project to the
    plane (image lands inside B(0, 99/100)), then run the plane estimate."""
    n = sphere_set.n
    expo = Exponents.for_dimension(n)
    rotation = rotate_to_cap(sphere_set)
    prim = plane_image_primitive(sphere_set, rotation)
    spec = CompactSetSpec(dimension=n, primitives=(prim,))
    result = estimate_capacity(spec, grid, cfg, expo)
    result.notes["rotation"] = rotation
    return result


# ---------------------------------------------------------------------------
# cutoff pair
# ---------------------------------------------------------------------------


def smoothstep(t, lo=1.0 / 3.0, hi=0.5):
    """Quintic smoothstep: 0 below lo, 1 above hi, C^2 across the joints."""
    s = np.clip((np.asarray(t, dtype=float) - lo) / (hi - lo), 0.0, 1.0)
    return s * s * s * (10.0 + s * (-15.0 + 6.0 * s))


@dataclass
class CutoffPair:
    phi: ScalarField
    eta: ScalarField
    m: float
    hessian_budget: float
    capacity: CapacityResult

    @property
    def budget_ratio(self):
        if self.capacity.value <= 0:
            return math.inf
        return self.hessian_budget / self.capacity.value


def build_cutoff(spec, m, grid, cfg=None, capacity_result=None, expo=None):
    """Cutoff pair: phi = smoothstep(extremal) equal to 1 near K and supported in
    B(0,2); eta = (1 - phi)^m.  The Hessian budget of phi is reported against the
    capacity value."""
    expo = expo or Exponents.for_dimension(spec.dimension)
    if m < float(expo.n + 2) / 2.0:
        raise ValueError(f"cutoff exponent m must be >= (n+2)/2 = {(expo.n + 2) / 2}")
    cap = capacity_result or estimate_capacity(spec, grid, cfg, expo)
    if cap.constraint_violation > 1e-6:
        raise ValueError(
            f"capacity extremal violates the K-constraint by {cap.constraint_violation:.2e}"
        )
    phi = smoothstep(cap.extremal.values)
    eta = (1.0 - phi) ** m
    budget, _ = hess_energy(grid, phi, expo, need_grad=False)
    return CutoffPair(
        phi=ScalarField(grid, phi),
        eta=ScalarField(grid, eta),
        m=float(m),
        hessian_budget=budget,
        capacity=cap,
    )


def gradient_magnitude(grid, values):
    h = grid.h
    if grid.reduction in ("radial1d", "planar1d"):
        return np.abs(kernels.first_diff(values, 0, h, reflect="even"))
    comps = []
    for a in range(grid.ndim):
        reflect = "even" if (grid.reduction == "axisym2d" and a == 0) else "none"
        comps.append(kernels.first_diff(values, a, h, reflect=reflect))
    return np.sqrt(sum(c * c for c in comps))


def cutoff_integral_checks(pair, u_field):
    """Lemma-style integrals of a solution against the cutoff:
    I_grad = int u (|D eta| + |lap eta|), I_power = int u^q eta."""
    grid = pair.eta.grid
    expo = Exponents.for_dimension(grid.ambient_dim)
    eta = pair.eta.values
    if np.any((eta > 1e-14) & ~u_field.defined_mask):
        raise ValueError("solution field undefined on cells where the cutoff is active")
    u = np.where(u_field.defined_mask, u_field.values, 0.0)
    w = grid.volume_weights()
    grad_eta = gradient_magnitude(grid, eta)
    lap_eta = np.abs(kernels.lap_weighted(eta, grid))
    i_grad = _dot(w, u * (grad_eta + lap_eta))
    i_power = _dot(w, np.where(u > 0, u, 0.0) ** expo.qf * eta)
    cap = pair.capacity.value
    return {
        "I_grad": i_grad,
        "I_power": i_power,
        "I_grad_over_capacity": i_grad / cap if cap > 0 else math.inf,
        "I_power_over_capacity": i_power / cap if cap > 0 else math.inf,
    }


# ---------------------------------------------------------------------------
# closed forms
# ---------------------------------------------------------------------------


def closed_form_capacity(shape, n, **params):
    """Catalog values: for 'ball' the normalized capacity r^((n-2)/2); for
    'cylinder' (cross-section half-width delta, height scale r, 4 delta < r)
    the ratio to the capacity of the ball of radius r."""
    if shape == "ball":
        r = params["r"]
        if r < 0:
            raise ValueError("radius must be nonnegative")
        return r ** ((n - 2) / 2.0)
    if shape == "cylinder":
        delta, r = params["delta"], params["r"]
        if 4.0 * delta > r:
            raise ValueError("cylinder requires 4*delta <= r")
        if n == 3:
            return 1.0
        if n == 4:
            return 1.0 / math.log(r / delta)
        return (delta / r) ** ((n - 4) / 2.0)
    raise ValueError(f"unknown catalog shape {shape!r}")
