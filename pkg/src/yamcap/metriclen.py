"""Lengths of curves in the conformal metric u^(4/(n-2)) g_E, dyadic shell
lower bounds, straight-ray probes, and desk-scale completeness verdicts.

"Infinite length" is operationalized as non-decaying shell contributions plus
refinement stability: true divergence is unobservable on a grid, so verdicts
are trend-based with Inconclusive as a first-class outcome.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .capacity import CapacitySolveConfig, capacity_floor, smoothstep
from .exponents import Exponents
from .geometry import CompactSetSpec, rasterize
from .grids import GridSpec
from .pde import SolveConfig, maximal_solution
from .wiener import unit_rescaled_intersection, _solve_cached


@dataclass
class Curve:
    """Ordered polyline samples approaching `closed_end`."""

    samples: np.ndarray
    closed_end: np.ndarray = None

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)
        if self.samples.ndim != 2 or self.samples.shape[0] < 2:
            raise ValueError("curve needs at least two samples")
        seg = np.linalg.norm(np.diff(self.samples, axis=0), axis=1)
        if np.any(seg == 0.0):
            raise ValueError("consecutive curve samples must be distinct")
        if self.closed_end is not None:
            self.closed_end = np.asarray(self.closed_end, dtype=float)


@dataclass
class LengthReport:
    curve: Curve
    total_length: float
    divergent: bool
    per_shell: list          # (j, contribution) over S_j = {r_j < |x-p| <= r_{j-1}}
    outside_dyadic: float
    cutoff_radius: float
    skipped_segments: int
    refinement_trend: list = field(default_factory=list)


def ray_curve(p, direction, length=1.0, step=None, h=None, r_stop=0.0):
    """Straight ray from p + length*direction down toward p, sampled densely."""
    p = np.asarray(p, dtype=float)
    w = np.asarray(direction, dtype=float)
    w = w / np.linalg.norm(w)
    step = step or (h / 2.0 if h else length / 2000.0)
    ts = [length]
    t = length
    while t > max(r_stop, step):
        t = max(t - step, max(r_stop, 1e-12))
        ts.append(t)
    pts = p + np.asarray(ts)[:, None] * w
    return Curve(samples=pts, closed_end=p)


def conformal_length(sol, curve, p=None, expo=None):
    """Composite midpoint quadrature of u^(2/(n-2)) along the polyline, with
    per-shell accumulation toward the approach point."""
    expo = expo or sol.expo or Exponents.for_dimension(sol.grid.ambient_dim)
    power = float(expo.length_exp)
    p = np.asarray(p if p is not None else curve.closed_end, dtype=float)
    mids = 0.5 * (curve.samples[:-1] + curve.samples[1:])
    seg = np.linalg.norm(np.diff(curve.samples, axis=0), axis=1)
    uvals, valid = sol.u.grid.interpolate(sol.u.values, mids, sol.u.defined_mask)
    dist = np.linalg.norm(mids - p, axis=1)
    # invalid samples are tolerated only as the terminal approach to closed_end
    bad = ~valid
    if np.any(bad):
        first_bad = int(np.argmax(bad))
        if np.any(valid[first_bad:]):
            inner_bad = first_bad + int(np.argmax(valid[first_bad:]))
            raise ValueError(f"curve leaves the defined region at segment {first_bad}")
    contrib = np.where(valid, np.maximum(uvals, 0.0) ** power * seg, 0.0)
    with np.errstate(divide="ignore"):
        jbin = np.ceil(-np.log2(np.maximum(dist, 1e-300))).astype(int)
    shells = {}
    outside = 0.0
    for c, j, ok in zip(contrib, jbin, valid):
        if not ok:
            continue
        if j < 1:
            outside += float(c)
        else:
            shells[int(j)] = shells.get(int(j), 0.0) + float(c)
    per_shell = sorted(shells.items())
    total = outside + sum(v for _, v in per_shell)
    cut = float(dist[valid].min()) if np.any(valid) else math.inf
    # trend over complete shells only (the one holding the cutoff is partial),
    # non-decreasing up to the per-shell quadrature wiggle
    complete = [v for j, v in per_shell if 2.0**-j >= cut - 1e-15]
    tail = complete[-5:]
    divergent = len(tail) == 5 and all(
        tail[i + 1] >= 0.9 * tail[i] for i in range(4)
    )
    return LengthReport(
        curve=curve, total_length=float(total), divergent=divergent,
        per_shell=per_shell, outside_dyadic=float(outside),
        cutoff_radius=cut, skipped_segments=int(np.sum(bad)),
    )


@dataclass
class ShellBoundSeries:
    terms: list            # (j, b_j)
    partial_sums: list
    at_floor: list
    measured_length: float = None
    comparison_constant: float = None


def shell_lower_bound(spec, p, j_range, oracle_grid, cfg=None, expo=None,
                      measured_report=None):
    """Series b_j = r_j (cap(K ∩ B(p, r_{j+2})) / r_j^(n-2))^(2/(n-2)): each term
    lower-bounds (up to constants) the conformal length inside shell S_j of any
    curve converging to p."""
    expo = expo or Exponents.for_dimension(spec.dimension)
    cfg = cfg or CapacitySolveConfig()
    j_min, j_max = j_range
    p = np.asarray(p, dtype=float)
    cache = {}
    floor = capacity_floor(oracle_grid, expo, cfg)
    scale_exp = float(expo.capacity_scale_exp)
    length_exp = float(expo.length_exp)
    # absolute capacity values are mesh-normalized; divide by the unit-ball
    # value at the same mesh so the series is a dimensionless ratio trend
    from .geometry import Ball as _Ball

    unit_ball = CompactSetSpec(spec.dimension, (_Ball(center=(0.0,) * spec.dimension, radius=1.0),))
    unit_cap = _solve_cached(unit_ball, oracle_grid, cfg, expo, cache).value
    terms = []
    floors = []
    for j in range(j_min, j_max + 1):
        r_j = 2.0**-j
        rr = 2.0 ** -(j + 2)
        piece = unit_rescaled_intersection(spec, p, rr)
        res = _solve_cached(piece, oracle_grid, cfg, expo, cache)
        at_floor = res.value <= floor or res.coarse
        cap_val = 0.0 if at_floor else (res.value / unit_cap) * rr**scale_exp
        b_j = r_j * (cap_val / r_j ** (expo.n - 2)) ** length_exp if cap_val > 0 else 0.0
        terms.append((j, float(b_j)))
        floors.append(bool(at_floor))
    sums = list(np.cumsum([b for _, b in terms]))
    series = ShellBoundSeries(terms=terms, partial_sums=sums, at_floor=floors)
    if measured_report is not None and sums and sums[-1] > 0:
        series.measured_length = measured_report.total_length
        series.comparison_constant = measured_report.total_length / sums[-1]
    return series


@dataclass
class RadialProbe:
    sigma_mask: np.ndarray
    grid: GridSpec
    directions: np.ndarray
    survivors: np.ndarray          # indices into directions
    ray_lengths: dict              # direction index -> LengthReport
    chosen_direction: int = None
    ray_length: float = None
    blocked_fraction: float = None
    flags: dict = field(default_factory=dict)


def sample_directions(n, count, axisym=False):
    """Deterministic low-discrepancy directions on S^(n-1) (no seed needed).

    For axisymmetric scenes returns polar angles from the +z axis embedded as
    (s, z)-plane unit vectors."""
    if axisym:
        k = np.arange(count, dtype=float)
        theta = np.arccos(1.0 - 2.0 * (k + 0.5) / count)
        return np.stack([np.sin(theta), np.cos(theta)], axis=1)
    if n == 3:
        k = np.arange(count, dtype=float)
        golden = math.pi * (3.0 - math.sqrt(5.0))
        z = 1.0 - 2.0 * (k + 0.5) / count
        r = np.sqrt(np.maximum(1.0 - z * z, 0.0))
        th = golden * k
        return np.stack([r * np.cos(th), r * np.sin(th), z], axis=1)
    # Halton points mapped through the inverse normal CDF, then normalized
    from scipy.stats import qmc, norm

    eng = qmc.Halton(d=n, scramble=False)
    pts = eng.random(count + 1)[1:]
    gauss = norm.ppf(np.clip(pts, 1e-12, 1.0 - 1e-12))
    return gauss / np.linalg.norm(gauss, axis=1, keepdims=True)


def build_radial_probe(spec, p, sol, j_range, oracle_grid, cfg=None, expo=None,
                       n_directions=None, cutoff_m=None, threshold=0.99):
    """Compactum Sigma from per-shell cutoff level sets {phi_j >= 99/100} plus K,
    and the set of directions whose straight rays avoid it.

    Rays are marched from |x-p| = 1 down to an endpoint-exclusion radius of a
    few cells (the quadrature truncation scale), and the surviving direction of
    least measured conformal length is returned."""
    expo = expo or Exponents.for_dimension(spec.dimension)
    cfg = cfg or CapacitySolveConfig()
    p = np.asarray(p, dtype=float)
    grid = sol.grid
    h = grid.h
    j_min, j_max = j_range
    r_stop = max(4.0 * h, 2.0 ** -(j_max + 1))

    centers = grid.ambient_centers()
    dist = np.linalg.norm(centers - p, axis=-1)
    sigma = rasterize(spec, grid).mask.copy()
    cache = {}
    m = cutoff_m if cutoff_m is not None else (expo.n + 2) / 2.0
    floor = capacity_floor(oracle_grid, expo, cfg)
    shells_used = []
    for j in range(j_min, j_max + 1):
        r_scale = 2.0 ** -(j - 3)  # cutoff built at the enclosing dyadic scale
        if 2.0**-j < 4.0 * h:
            break
        piece = unit_rescaled_intersection(spec, p, 2.0 ** -(j - 2))
        res = _solve_cached(piece, oracle_grid, cfg, expo, cache)
        if res.value <= floor or res.coarse:
            continue  # capacity floor: cutoff degenerates to the K cells already in sigma
        phi = smoothstep(res.extremal.values)
        shell = (dist > 2.0**-j) & (dist <= 2.0 ** -(j - 1))
        if not np.any(shell):
            continue
        pts = (centers[shell] - p) / (2.0 ** -(j - 2))
        vals, valid = res.extremal.grid.interpolate(phi, pts)
        hit = np.zeros(vals.shape, bool)
        hit[valid] = vals[valid] >= threshold
        tmp = np.zeros(grid.shape, bool)
        tmp[shell] = hit
        sigma |= tmp
        shells_used.append(j)

    axisym = grid.reduction == "axisym2d"
    if grid.reduction == "radial1d":
        dirs = np.zeros((1, grid.ambient_dim))
        dirs[0, 0] = 1.0
    else:
        count = n_directions or (10000 if expo.n == 3 and grid.reduction == "full" else 2000)
        dirs = sample_directions(expo.n, count, axisym=axisym)

    step = h / 2.0
    survivors = []
    lengths = {}
    blocked = 0
    for idx in range(dirs.shape[0]):
        w = dirs[idx]
        if axisym:
            amb = np.zeros(grid.ambient_dim)
            amb[0], amb[-1] = w[0], w[1]
        else:
            amb = w
        ts = np.arange(r_stop, 1.0 + step, step)[::-1]
        pts = p + ts[:, None] * amb
        red = grid.reduce_points(pts)
        idxs = np.floor((red - np.asarray(grid.lo)) / h).astype(int)
        inb = np.all((idxs >= 0) & (idxs < np.asarray(grid.shape)), axis=1)
        cells = tuple(np.moveaxis(idxs[inb], -1, 0))
        if np.any(sigma[cells]):
            blocked += 1
            continue
        sd = spec.as_primitive().signed_distance(pts[inb])
        if np.any(sd <= 0.0):
            blocked += 1
            continue
        survivors.append(idx)
    survivors = np.asarray(survivors, dtype=int)

    probe = RadialProbe(
        sigma_mask=sigma, grid=grid, directions=dirs, survivors=survivors,
        ray_lengths={}, blocked_fraction=blocked / max(dirs.shape[0], 1),
    )
    probe.flags["r_stop"] = r_stop
    probe.flags["shells_with_cutoff"] = shells_used
    if survivors.size == 0:
        return probe
    best = None
    for idx in survivors[: 512 if survivors.size > 512 else survivors.size]:
        w = dirs[idx]
        if axisym:
            amb = np.zeros(grid.ambient_dim)
            amb[0], amb[-1] = w[0], w[1]
        else:
            amb = w
        curve = ray_curve(p, amb, length=1.0, h=h, r_stop=0.0)
        try:
            rep = conformal_length(sol, curve, p=p, expo=expo)
        except ValueError:
            continue
        probe.ray_lengths[int(idx)] = rep
        if best is None or rep.total_length < best[1]:
            best = (int(idx), rep.total_length)
    if best is not None:
        probe.chosen_direction, probe.ray_length = best
    return probe


def completeness_probe(spec, p, sol_grids, oracle_grid, pde_cfg=None, cap_cfg=None,
                       expo=None, j_range=(1, 7)):
    """Two-resolution orchestration of the completeness criteria.

    CompleteTrend: shell-bound partial sums grow without geometric decay and no
    finite ray is found.  IncompleteTrend: some surviving ray's length is stable
    (< 10% change) under refinement.  Otherwise Inconclusive.
    """
    expo = expo or Exponents.for_dimension(spec.dimension)
    pde_cfg = pde_cfg or SolveConfig()
    cap_cfg = cap_cfg or CapacitySolveConfig()
    runs = []
    for grid in sol_grids:
        sol = maximal_solution(spec, grid, pde_cfg, expo)
        probe = build_radial_probe(
            spec, p, sol, j_range, oracle_grid, cap_cfg, expo,
        )
        runs.append((sol, probe))
    bounds = shell_lower_bound(spec, p, j_range, oracle_grid, cap_cfg, expo)

    details = {
        "shell_bounds": bounds,
        "probes": [pr for _, pr in runs],
        "ray_lengths": [pr.ray_length for _, pr in runs],
        "flags": {},
    }
    for i, (sol, _) in enumerate(runs):
        if sol.flags.get("stagnated") and sol.residual_norm > 1e-6:
            details["flags"][f"solver_flag_run{i}"] = sol.residual_norm

    lens = [pr.ray_length for _, pr in runs]
    stable_ray = (
        all(v is not None for v in lens)
        and lens[0] > 0
        and abs(lens[1] - lens[0]) < 0.10 * lens[0]
    )
    b_vals = [b for _, b in bounds.terms][-5:]
    growing = False
    if len(b_vals) == 5 and min(b_vals) > 0:
        ratio = math.exp(float(np.polyfit(np.arange(5), np.log(b_vals), 1)[0]))
        growing = ratio >= 0.9
    no_finite_ray = all(
        pr.survivors.size == 0 for _, pr in runs
    ) or (
        all(v is not None for v in lens) and lens[0] > 0 and (lens[1] - lens[0]) >= 0.10 * lens[0]
    )
    if details["flags"]:
        return "Inconclusive", details
    if stable_ray:
        return "IncompleteTrend", details
    if growing and no_finite_ray:
        return "CompleteTrend", details
    return "Inconclusive", details
