"""Dyadic Hausdorff-content estimates.

Upper bound: dynamic programming over the dyadic cube tree (a cube is covered
by its circumscribed ball or by the best covers of its children, whichever is
cheaper).  Lower bound: a volume-packing argument from cubes fully inside the
set; weak for thin sets but rigorous.
"""

import math
from dataclasses import dataclass

import numpy as np


@dataclass
class HausdorffContentEstimate:
    alpha: float
    upper_bound: float
    lower_bound: float
    covers_used: int
    depth: int


def _unit_ball_volume(d):
    return math.pi ** (d / 2.0) / math.gamma(d / 2.0 + 1.0)


def hausdorff_content(spec, alpha, depth=8):
    """Estimate the alpha-content of the compactum by dyadic covers up to `depth`."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    if depth > 12:
        raise ValueError("depth capped at 12 dyadic levels")
    d = spec.dimension
    if spec.is_empty:
        return HausdorffContentEstimate(alpha, 0.0, 0.0, 0, depth)
    R = spec.bounding_radius()
    if R == 0.0:
        R = 1e-9
    sq = math.sqrt(d)
    prim = spec.as_primitive()

    # top-down: keep only cubes that can meet K; the root is slightly inflated
    # and shifted off dyadic alignment so zero-size sets do not sit on cube
    # corners at every level
    centers_per_level = []
    parents_per_level = []
    root_shift = R * 0.0137813 * (1.0 + np.arange(d) / 7.0)
    centers = root_shift[None, :].copy()
    half = R * 1.05
    inside_best = 0.0
    offsets = np.array(
        [[(1 if (c >> a) & 1 else -1) for a in range(d)] for c in range(2**d)], dtype=float
    )
    for lev in range(depth + 1):
        sd = prim.signed_distance(centers)
        rad = half * sq
        keep = sd <= rad
        centers = centers[keep]
        if lev > 0:
            parents_per_level.append(parents[keep])
        if centers.shape[0] == 0:
            break
        centers_per_level.append(centers)
        n_inside = int(np.sum(sd[keep] <= -rad))
        if n_inside:
            vol = n_inside * (2.0 * half) ** d
            diam = 2.0 * R * sq
            inside_best = max(
                inside_best, min(diam**alpha, vol / (_unit_ball_volume(d) * diam ** (d - alpha)))
            )
        if lev == depth:
            break
        children = (centers[:, None, :] + (half / 2.0) * offsets[None, :, :]).reshape(-1, d)
        parents = np.repeat(np.arange(centers.shape[0]), 2**d)
        centers = children
        half /= 2.0

    if not centers_per_level:
        return HausdorffContentEstimate(alpha, 0.0, 0.0, 0, depth)

    # bottom-up: best cover cost and cube count per node
    deepest = len(centers_per_level) - 1
    half = R / 2.0**deepest
    cost = np.full(centers_per_level[deepest].shape[0], (half * sq) ** alpha)
    count = np.ones_like(cost, dtype=int)
    for lev in range(deepest - 1, -1, -1):
        half *= 2.0
        n_par = centers_per_level[lev].shape[0]
        child_cost = np.zeros(n_par)
        child_count = np.zeros(n_par, dtype=int)
        np.add.at(child_cost, parents_per_level[lev], cost)
        np.add.at(child_count, parents_per_level[lev], count)
        own = (half * sq) ** alpha
        use_own = own <= child_cost
        cost = np.where(use_own, own, child_cost)
        count = np.where(use_own, 1, child_count)
    return HausdorffContentEstimate(
        alpha=alpha,
        upper_bound=float(cost[0]),
        lower_bound=float(inside_best),
        covers_used=int(count[0]),
        depth=depth,
    )
