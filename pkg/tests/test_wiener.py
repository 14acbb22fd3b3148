import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from yamcap.capacity import CapacitySolveConfig
from yamcap.geometry import Ball, CompactSetSpec, Point, SceneError
from yamcap.wiener import (
    classify_catalog,
    catalog_to_thinness,
    dyadic_bridge,
    unit_rescaled_intersection,
    wiener_terms,
)


def test_bridge_geometric_case_exact():
    res = dyadic_bridge(np.ones(40), kappa=1.0, J=0)
    assert res.lower_sum == pytest.approx(1.0)
    assert res.upper_sum == pytest.approx(2.0)
    assert res.integral_estimate == pytest.approx(1.0)
    assert not res.divergent


def test_bridge_linear_zeta():
    J = 0
    zeta = 2.0 ** -(J + np.arange(40.0))  # zeta(r) = r sampled dyadically
    res = dyadic_bridge(zeta, kappa=0.0, J=J)
    # integral of r dr/r over (0,1) = 1; sums bracket it
    assert res.lower_sum <= res.integral_estimate <= res.upper_sum
    assert res.integral_estimate == pytest.approx(1.0, rel=0.15)


def test_bridge_divergent_flagged():
    res = dyadic_bridge(np.ones(10), kappa=0.0, J=0)
    assert res.divergent
    assert res.lower_sum == np.inf
    assert len(res.partial_sums) == 10


def test_bridge_rejects_non_monotone():
    with pytest.raises(ValueError):
        dyadic_bridge(np.array([1.0, 2.0, 1.5, 3.0]), kappa=1.0, J=0)


@given(st.lists(st.floats(0.01, 10.0), min_size=5, max_size=30), st.floats(0.25, 2.0))
@settings(max_examples=40, deadline=None)
def test_bridge_bracket_property(vals, kappa):
    zeta = np.sort(np.asarray(vals))[::-1]  # nonincreasing in j
    res = dyadic_bridge(zeta, kappa=kappa, J=0)
    # the bracket holds with kappa-dependent equivalence constants
    C = 4.0 * (1.0 + kappa) * 2.0**kappa
    assert res.lower_sum <= res.upper_sum * (1.0 + 1e-9)
    assert res.lower_sum <= C * res.integral_estimate
    assert res.integral_estimate <= C * res.upper_sum
    assert res.lower_constant == res.lower_sum / res.integral_estimate


def test_classifier_examples():
    assert classify_catalog({"kind": "submanifold", "k": 1, "n": 3}) == "MetricExists"
    assert classify_catalog({"kind": "submanifold", "k": 1, "n": 5}) == "NoMetric"
    assert classify_catalog({"kind": "density_set", "d": 1.0, "n": 3}) == "MetricExists"
    assert classify_catalog({"kind": "finite_measure_set", "n": 4}) == "NoMetric"
    # cusp branches for h(r) = r^2
    prof = {"c": 1.0, "a": 2.0, "b": 0.0}
    assert classify_catalog({"kind": "cusp", "n": 3, "profile": prof}) == "MetricExists"
    assert classify_catalog({"kind": "cusp", "n": 4, "profile": prof}) == "MetricExists"
    assert classify_catalog({"kind": "cusp", "n": 5, "profile": prof}) == "NoMetric"


def test_classifier_cusp_log_profiles():
    # a = 1 with negative b: h = r log^b(1/r); for n > 4 existence iff b*beta >= -1
    assert classify_catalog(
        {"kind": "cusp", "n": 5, "profile": {"c": 0.5, "a": 1.0, "b": -2.0}}
    ) == "MetricExists"
    assert classify_catalog(
        {"kind": "cusp", "n": 5, "profile": {"c": 0.5, "a": 1.0, "b": -4.0}}
    ) == "NoMetric"


def test_classifier_numeric_fallback_matches_symbolic():
    h2 = lambda r: r**2
    assert classify_catalog({"kind": "cusp", "n": 5, "profile": h2}) == "NoMetric"
    assert classify_catalog({"kind": "cusp", "n": 4, "profile": h2}) == "MetricExists"


def test_classifier_rejects_bad_inputs():
    with pytest.raises(SceneError):
        classify_catalog({"kind": "density_set", "d": 0.4, "n": 3})
    with pytest.raises(SceneError):
        classify_catalog({"kind": "nope", "n": 3})
    with pytest.raises(SceneError):
        classify_catalog({"kind": "cusp", "n": 4, "profile": {"a": 0.5}})


def test_catalog_to_thinness():
    assert catalog_to_thinness("MetricExists") == "NotThin"
    assert catalog_to_thinness("NoMetric") == "Thin"
    assert catalog_to_thinness("Inconclusive") is None


def test_unit_rescaled_intersection_geometry():
    spec = CompactSetSpec(3, (Ball(center=(0, 0, 0), radius=0.25),))
    piece = unit_rescaled_intersection(spec, np.zeros(3), 0.125)
    # K contains the ball of the scale: the rescaled piece is the unit ball
    assert piece.membership(np.array([0.99, 0.0, 0.0]))
    assert not piece.membership(np.array([1.01, 0.0, 0.0]))


def test_wiener_ball_leading_terms_one(radial_grid3, ball_quarter):
    rep = wiener_terms(ball_quarter, (0, 0, 0), (1, 8), radial_grid3, CapacitySolveConfig())
    assert rep.verdict == "DivergesNumerically"
    for t in rep.terms:
        if t.r_j <= 0.25:
            assert t.term == pytest.approx(1.0, abs=1e-9)
        assert t.term <= 1.0 + 5.0 * radial_grid3.h
    assert rep.partial_sums == sorted(rep.partial_sums)


def test_wiener_point_converges(radial_grid3):
    spec = CompactSetSpec(3, (Point(center=(0.0, 0.0, 0.0)),))
    rep = wiener_terms(spec, (0, 0, 0), (1, 8), radial_grid3, CapacitySolveConfig())
    assert rep.verdict == "ConvergesNumerically"
    assert all(t.at_floor for t in rep.terms)


def test_wiener_monotone_in_set(radial_grid3):
    small = CompactSetSpec(3, (Ball(center=(0, 0, 0), radius=0.15),))
    big = CompactSetSpec(3, (Ball(center=(0, 0, 0), radius=0.35),))
    cfg = CapacitySolveConfig()
    rs = wiener_terms(small, (0, 0, 0), (1, 6), radial_grid3, cfg)
    rb = wiener_terms(big, (0, 0, 0), (1, 6), radial_grid3, cfg)
    for ts, tb in zip(rs.terms, rb.terms):
        assert tb.term >= ts.term - 0.05


def test_wiener_ball_closed_form_oracle(radial_grid3, ball_quarter, expo3):
    from yamcap.capacity import closed_form_capacity

    def oracle(piece, is_ball):
        return closed_form_capacity("ball", expo3.n, r=min(piece.bounding_radius(), 1.0))

    rep = wiener_terms(
        ball_quarter, (0, 0, 0), (1, 8), radial_grid3, CapacitySolveConfig(), oracle=oracle
    )
    assert rep.verdict == "DivergesNumerically"
    for t in rep.terms:
        if t.r_j <= 0.25:
            assert t.term == pytest.approx(1.0)
    assert rep.notes["oracle"] == "closed_form"


def test_wiener_requires_point_in_k(radial_grid3, ball_quarter):
    with pytest.raises(ValueError):
        wiener_terms(ball_quarter, (0.9, 0, 0), (1, 6), radial_grid3, CapacitySolveConfig())


def test_wiener_budget_limit(radial_grid3, ball_quarter):
    with pytest.raises(ValueError):
        wiener_terms(ball_quarter, (0, 0, 0), (1, 11), radial_grid3, CapacitySolveConfig())
