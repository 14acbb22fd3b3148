import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from yamcap.sphere import (
    SphereCap,
    SphereSetSpec,
    conformal_factor,
    geodesic_distance,
    north_pole,
    rotate_to_cap,
    rotation_taking,
    south_pole,
    stereo,
    stereo_inv,
)


def test_south_pole_maps_to_origin():
    assert np.allclose(stereo(south_pole(3)), np.zeros(3), atol=1e-15)


def test_equator_fixed_by_chart():
    p = np.array([1.0, 0.0, 0.0, 0.0])
    assert np.allclose(stereo(p), [1.0, 0.0, 0.0], atol=1e-15)


def test_round_trip_random_points(rng):
    x = rng.standard_normal((10000, 3)) * rng.uniform(0.01, 1000.0, size=(10000, 1))
    x2 = stereo(stereo_inv(x))
    rel = np.linalg.norm(x2 - x, axis=1) / np.maximum(np.linalg.norm(x, axis=1), 1e-300)
    assert np.max(rel) < 1e-12


def test_stereo_inv_origin_is_south_pole():
    assert np.allclose(stereo_inv(np.zeros(3)), south_pole(3), atol=1e-15)


def test_north_pole_rejected():
    with pytest.raises(ValueError):
        stereo(north_pole(3))
    with pytest.raises(ValueError):
        stereo(np.array([0.0, 0.0, 1.1]))


def test_conformal_factor_values():
    assert conformal_factor(np.zeros(3), 3) == pytest.approx(math.sqrt(2.0))
    assert conformal_factor(np.zeros(4), 4) == pytest.approx(2.0)
    assert conformal_factor(np.array([1.0, 0, 0]), 3) == pytest.approx(1.0)


def test_conformal_factor_bounds_on_b10():
    x = np.random.default_rng(1).uniform(-10, 10, size=(2000, 3))
    x = x[np.linalg.norm(x, axis=1) <= 10.0]
    ups = conformal_factor(x, 3)
    lo = 2.0 ** (1 / 2) / 101.0 ** (1 / 2)
    hi = 2.0 ** (1 / 2)
    assert np.all(ups >= lo - 1e-12) and np.all(ups <= hi + 1e-12)


@given(st.integers(0, 10**6))
@settings(max_examples=30, deadline=None)
def test_rotation_isometry(seed):
    rng = np.random.default_rng(seed)
    u = rng.standard_normal(4)
    v = rng.standard_normal(4)
    u /= np.linalg.norm(u)
    v /= np.linalg.norm(v)
    R = rotation_taking(u, v)
    assert np.allclose(R @ u, v, atol=1e-12)
    p = rng.standard_normal(4)
    q = rng.standard_normal(4)
    p /= np.linalg.norm(p)
    q /= np.linalg.norm(q)
    assert geodesic_distance(R @ p, R @ q) == pytest.approx(
        float(geodesic_distance(p, q)), abs=1e-12
    )


def test_metric_density_matches_conformal_weight(rng):
    """|d(stereo_inv) v| / |v| = Upsilon^(2/(n-2)) by finite differences."""
    n = 3
    for _ in range(20):
        x = rng.uniform(-2, 2, size=n)
        v = rng.standard_normal(n)
        v /= np.linalg.norm(v)
        eps = 1e-6
        dp = (stereo_inv(x + eps * v) - stereo_inv(x - eps * v)) / (2 * eps)
        expect = conformal_factor(x, n) ** (2.0 / (n - 2))
        assert np.linalg.norm(dp) == pytest.approx(expect, rel=1e-8)


def test_rotate_to_cap_identity_for_polar_set():
    S = south_pole(3)
    ss = SphereSetSpec(3, (SphereCap(center=tuple(S), radius=math.pi / 12),))
    R = rotate_to_cap(ss)
    assert np.allclose(R, np.eye(4), atol=1e-12)


def test_rotate_to_cap_moves_north_cap():
    N = north_pole(3)
    ss = SphereSetSpec(3, (SphereCap(center=tuple(N), radius=math.pi / 12),))
    R = rotate_to_cap(ss)
    moved = ss.rotated(R)
    S = south_pole(3)
    # sampled check: rotated cap sits inside the polar cap of radius pi/3
    rng = np.random.default_rng(7)
    for _ in range(200):
        v = rng.standard_normal(4)
        v /= np.linalg.norm(v)
        axis = np.asarray(moved.caps[0].center)
        # points of the cap: rotate axis toward v by at most the cap radius
        t = rng.uniform(0, math.pi / 12)
        w = v - np.dot(v, axis) * axis
        if np.linalg.norm(w) < 1e-12:
            continue
        w /= np.linalg.norm(w)
        pt = math.cos(t) * axis + math.sin(t) * w
        assert geodesic_distance(pt, S) <= math.pi / 3 + 1e-9


def test_rotate_to_cap_rejects_large_sets():
    caps = (
        SphereCap(center=tuple(south_pole(3)), radius=math.pi / 4),
        SphereCap(center=(1.0, 0.0, 0.0, 0.0), radius=math.pi / 4),
    )
    with pytest.raises(ValueError) as exc:
        rotate_to_cap(SphereSetSpec(3, caps))
    assert "diameter" in str(exc.value)
