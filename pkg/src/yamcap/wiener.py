"""Dyadic Wiener test, the series/integral bridge, and the closed-form
classifier catalog.

Divergence of an infinite series is numerically undecidable, so the numeric
verdicts follow explicit conservative rules (fixed increment floor for
divergence, geometric-decay fit for convergence, Inconclusive otherwise), and
a catalog verdict, when one applies, is never overridden by numerics.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .capacity import CapacitySolveConfig, capacity_floor, minimize_hess_energy
from .exponents import Exponents
from .geometry import Ball, CompactSetSpec, SceneError, rasterize

INCREMENT_FLOOR = 0.02
GEOMETRIC_RATIO = 0.9


@dataclass
class WienerTerm:
    j: int
    r_j: float
    cap_ratio: float = None
    term: float = None
    missing: bool = False
    at_floor: bool = False


@dataclass
class WienerReport:
    base_point: tuple
    terms: list
    partial_sums: list
    tail_slope: float
    verdict: str
    catalog_verdict: str = None
    notes: dict = field(default_factory=dict)


def unit_rescaled_intersection(spec, p, r):
    """The set (K intersect closed-ball(p, r) - p)/r, living inside B(0,1)."""
    clipped = spec.clip_to_ball(p, r)
    return clipped.rescale(1.0 / r, shift=tuple(-np.asarray(p, float) / r))


def _solve_cached(spec, grid, cfg, expo, cache):
    raster = rasterize(spec, grid)
    key = raster.mask.tobytes()
    if key not in cache:
        res = minimize_hess_energy(grid, expo, raster.mask, cfg)
        res.coarse = raster.coarse
        cache[key] = res
    return cache[key]


def wiener_terms(spec, p, j_range, grid, cfg=None, expo=None, catalog_verdict=None,
                 oracle=None):
    """Per-scale normalized capacity ratios term_j = (cap(B(p,r_j) ∩ K)/cap(B(p,r_j)))^(2/(n-2)).

    Each scale is rescaled to unit size before the solve (the scaling law makes
    the ratio invariant), so every solve runs at the calibrated mesh.  `oracle`
    may replace the variational solver with a closed-form callable
    oracle(spec_unit, is_ball) -> value.
    """
    expo = expo or Exponents.for_dimension(spec.dimension)
    cfg = cfg or CapacitySolveConfig()
    j_min, j_max = j_range
    if j_max > 10:
        raise ValueError("scales below 2^-10 exceed the solve budget")
    p = np.asarray(p, dtype=float)
    if float(spec.signed_distance(p)) > grid.h:
        raise ValueError("base point must lie in K")

    cache = {}
    unit_ball = CompactSetSpec(spec.dimension, (Ball(center=(0.0,) * spec.dimension, radius=1.0),))
    if oracle is None:
        ball_res = _solve_cached(unit_ball, grid, cfg, expo, cache)
        ball_value = ball_res.value
        floor = capacity_floor(grid, expo, cfg)
    else:
        ball_value = oracle(unit_ball, True)
        floor = 0.0

    exponent = float(expo.length_exp)
    terms = []
    for j in range(j_min, j_max + 1):
        r_j = 2.0**-j
        piece = unit_rescaled_intersection(spec, p, r_j)
        if oracle is not None:
            value = oracle(piece, False)
            coarse = False
        else:
            res = _solve_cached(piece, grid, cfg, expo, cache)
            value, coarse = res.value, res.coarse
        t = WienerTerm(j=j, r_j=r_j)
        if coarse:
            t.missing = True
        else:
            t.cap_ratio = min(value / ball_value, 1.0 + 5.0 * grid.h) if ball_value > 0 else 0.0
            if value <= floor:
                t.at_floor = True
                t.term = 0.0
            else:
                t.term = t.cap_ratio**exponent
        terms.append(t)

    usable = [t for t in terms if not t.missing]
    sums = []
    acc = 0.0
    for t in usable:
        acc += t.term
        sums.append(acc)
    verdict, slope = _numeric_verdict(terms, usable, sums)
    report = WienerReport(
        base_point=tuple(p), terms=terms, partial_sums=sums, tail_slope=slope,
        verdict=verdict, catalog_verdict=catalog_verdict,
    )
    report.notes["missing_scales"] = [t.j for t in terms if t.missing]
    report.notes["oracle"] = "closed_form" if oracle is not None else "variational"
    return report


def _numeric_verdict(terms, usable, sums):
    window = usable[-5:]
    slope = None
    if len(sums) >= 3:
        j_idx = np.arange(1, len(sums) + 1, dtype=float)[-5:]
        s = np.asarray(sums[-5:])
        if np.all(s > 0):
            slope = float(np.polyfit(np.log(j_idx), np.log(s), 1)[0])
    if len(window) < 5 or len(terms) - len(usable) >= 2:
        return "Inconclusive", slope
    vals = np.array([t.term for t in window])
    if np.min(vals) > INCREMENT_FLOOR:
        return "DivergesNumerically", slope
    if np.all(vals <= INCREMENT_FLOOR):
        return "ConvergesNumerically", slope
    pos = vals[vals > 1e-300]
    if len(pos) >= 3:
        ratio = math.exp(float(np.polyfit(np.arange(len(pos)), np.log(pos), 1)[0]))
        if ratio < GEOMETRIC_RATIO and vals[-1] <= vals[0]:
            return "ConvergesNumerically", slope
    return "Inconclusive", slope


@dataclass
class BridgeResult:
    lower_sum: float
    upper_sum: float
    integral_estimate: float
    lower_constant: float
    upper_constant: float
    divergent: bool
    partial_sums: list


def dyadic_bridge(zeta_samples, kappa, J):
    """Bracket the integral of zeta(r) r^kappa dr/r over (0, r_J] between the
    dyadic sums sum_{j>=J+1} and sum_{j>=J} of zeta(r_j) r_j^kappa.

    zeta must be sampled at r_j = 2^-j for j = J, J+1, ... and monotone; the
    tail below the last sample is completed by constant extension of zeta.
    """
    zeta = np.asarray(zeta_samples, dtype=float)
    if zeta.ndim != 1 or zeta.size < 2:
        raise ValueError("need at least two dyadic samples")
    diffs = np.diff(zeta)
    if np.any(diffs > 1e-12) and np.any(diffs < -1e-12):
        k = int(np.argmax(np.abs(np.diff(np.sign(diffs + 0.0))) > 0)) + 1
        raise ValueError(f"zeta samples must be monotone; first violation at index {k}")
    r = 2.0 ** -(J + np.arange(zeta.size, dtype=float))
    terms = zeta * r**kappa
    partial = list(np.cumsum(terms))
    tail_zeta = float(zeta[-1])
    # tail below the last sample: continue zeta geometrically at its empirical
    # dyadic ratio (1 for constant samples); the tail converges iff that ratio
    # times 2^-kappa stays below 1
    if tail_zeta <= 0.0:
        tail_sum = tail_int = 0.0
        divergent = False
    else:
        ratio_z = tail_zeta / float(zeta[-2]) if zeta[-2] > 0 else 1.0
        q = ratio_z * 2.0**-kappa
        if q < 0.999:
            tail_sum = terms[-1] * q / (1.0 - q)
            tail_int = tail_sum
            divergent = False
        else:
            divergent = True
    if divergent:
        return BridgeResult(math.inf, math.inf, math.inf, 1.0, 1.0, True, partial)
    upper = float(np.sum(terms)) + tail_sum
    lower = float(np.sum(terms[1:])) + tail_sum
    # trapezoid of zeta r^(kappa-1) on the dyadic partition, plus the analytic tail
    integrand = zeta * r ** (kappa - 1.0)
    widths = r[:-1] - r[1:]
    integral = float(np.sum(0.5 * (integrand[:-1] + integrand[1:]) * widths)) + tail_int
    return BridgeResult(
        lower_sum=lower, upper_sum=upper, integral_estimate=integral,
        lower_constant=lower / integral if integral > 0 else math.nan,
        upper_constant=upper / integral if integral > 0 else math.nan,
        divergent=False, partial_sums=partial,
    )


# ---------------------------------------------------------------------------
# closed-form classifier catalog
# ---------------------------------------------------------------------------

METRIC_EXISTS = "MetricExists"
NO_METRIC = "NoMetric"
INCONCLUSIVE = "Inconclusive"


def classify_catalog(shape):
    """Closed-form existence verdicts for the example catalog.

    `shape` is a dict: {kind: submanifold|density_set|finite_measure_set|cusp, n, ...}.
    Cusps use the profile family h(r) = c r^a log^b(1/r) decided symbolically;
    other profiles go through extrapolated quadrature and may be Inconclusive.
    """
    kind = shape.get("kind")
    n = shape.get("n")
    if not isinstance(n, int) or n < 3:
        raise SceneError("n must be an integer >= 3", "/n")
    half = (n - 2) / 2.0
    if kind == "submanifold":
        k = shape.get("k")  # k = n covers solid regions (manifolds with boundary)
        if not isinstance(k, int) or not 0 <= k <= n:
            raise SceneError(f"k must be an integer in [0, {n}]", "/k")
        # k <= (n-2)/2 gives finite H^((n-2)/2), hence zero capacity
        return METRIC_EXISTS if k > half else NO_METRIC
    if kind == "density_set":
        d = float(shape.get("d"))
        if d <= half:
            raise SceneError(f"density criterion needs d > (n-2)/2 = {half}", "/d")
        return METRIC_EXISTS
    if kind == "finite_measure_set":
        return NO_METRIC
    if kind == "cusp":
        prof = shape.get("profile", {})
        if callable(prof):
            return _classify_cusp_numeric(prof, n)
        c = float(prof.get("c", 1.0))
        a = float(prof.get("a", 2.0))
        b = float(prof.get("b", 0.0))
        if a < 1.0 or (a == 1.0 and b > 0.0):
            raise SceneError("profile must satisfy h(r) = O(r)", "/profile")
        if n == 3:
            return METRIC_EXISTS
        if n == 4:
            # integrand 1/(r log(r/h)); log(r/h) grows at most like log(1/r),
            # so the integral diverges throughout the power-log family
            return METRIC_EXISTS
        beta = (n - 4.0) / (n - 2.0)
        if a > 1.0:
            return NO_METRIC  # (h/r)^beta ~ r^((a-1)beta): power-law convergence
        return METRIC_EXISTS if b * beta >= -1.0 else NO_METRIC
    raise SceneError(f"unknown catalog shape kind {kind!r}", "/kind")


def _classify_cusp_numeric(h, n, levels=range(4, 13)):
    """Quadrature fallback for profiles outside the shipped family."""
    if n == 3:
        return METRIC_EXISTS
    vals = []
    for k in levels:
        lo = 2.0**-k
        r = np.geomspace(lo, 1.0, 4097)
        hr = np.asarray([float(h(x)) for x in r])
        if n == 4:
            integ = 1.0 / (r * np.log(np.maximum(r / np.maximum(hr, 1e-300), 1.0 + 1e-12)))
        else:
            beta = (n - 4.0) / (n - 2.0)
            integ = (hr / r) ** beta / r
        vals.append(float(np.trapezoid(integ, r)))
    inc = np.diff(vals)
    if np.all(inc <= 0):
        return INCONCLUSIVE
    ratios = inc[1:] / np.maximum(inc[:-1], 1e-300)
    if np.all(ratios[-4:] <= 0.95):
        return NO_METRIC  # geometric-decay increments: the improper integral converges
    if np.all(ratios[-4:] >= 0.97):
        return METRIC_EXISTS  # non-decaying increments: log-type divergence
    return INCONCLUSIVE


def catalog_to_thinness(verdict):
    if verdict == METRIC_EXISTS:
        return "NotThin"
    if verdict == NO_METRIC:
        return "Thin"
    return None


def load_shape(path):
    """Load a classifier shape descriptor, either bare or embedded in a scene's
    `catalog` key."""
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict):
        raise SceneError("shape file must be a JSON object")
    if "catalog" in doc and "kind" not in doc:
        doc = doc["catalog"]
        if not isinstance(doc, dict):
            raise SceneError("catalog must be an object", "/catalog")
    allowed = {"kind", "n", "k", "d", "constant", "profile", "height"}
    for key in doc:
        if key not in allowed:
            raise SceneError(f"unknown key '{key}'", f"/{key}")
    return doc
