import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from yamcap.geometry import (
    Ball,
    Box,
    CompactSetSpec,
    Point,
    SceneError,
    SegmentTube,
    load_scene,
    parse_scene,
    rasterize,
    signed_distance,
)
from yamcap.grids import GridSpec


def ball_spec(center, radius, dim=3):
    return CompactSetSpec(dim, (Ball(center=tuple(center), radius=radius),))


def test_signed_distance_ball_examples():
    spec = ball_spec((0, 0, 0), 1.0)
    assert signed_distance(spec, np.zeros(3)) == pytest.approx(-1.0)
    assert signed_distance(spec, np.array([2.0, 0, 0])) == pytest.approx(1.0)


def test_union_distance_is_min_of_members():
    spec = CompactSetSpec(
        3, (Ball(center=(0, 0, 0), radius=1.0), Ball(center=(3, 0, 0), radius=1.0))
    )
    # derived: min over the two exact ball distances at the midpoint
    assert signed_distance(spec, np.array([1.5, 0, 0])) == pytest.approx(0.5)


@given(
    st.lists(
        st.tuples(
            st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1), st.floats(0.05, 0.5)
        ),
        min_size=1,
        max_size=4,
    ),
    st.tuples(st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2)),
)
@settings(max_examples=50, deadline=None)
def test_union_equals_min_over_members(balls, probe):
    prims = [Ball(center=(x, y, z), radius=r) for x, y, z, r in balls]
    spec = CompactSetSpec(3, tuple(prims))
    x = np.asarray(probe)
    expected = min(float(p.signed_distance(x[None, :])[0]) for p in prims)
    assert float(spec.signed_distance(x)) == pytest.approx(expected, abs=1e-12)


def test_membership_iff_nonpositive_distance(rng):
    prims = (
        Ball(center=(0.2, 0, 0), radius=0.3),
        Box(lo=(-0.5, -0.5, -0.5), hi=(-0.1, 0.1, 0.2)),
        SegmentTube(a=(0, 0, -0.5), b=(0, 0, 0.5), thickness=0.05),
    )
    spec = CompactSetSpec(3, prims)
    pts = rng.uniform(-1, 1, size=(500, 3))
    sd = spec.signed_distance(pts)
    member = spec.membership(pts)
    assert np.array_equal(member, sd <= 0.0)


def test_signed_distance_lipschitz_along_segments(rng):
    spec = CompactSetSpec(
        3,
        (
            Ball(center=(0.2, 0, 0), radius=0.3),
            Box(lo=(-0.6, -0.4, -0.4), hi=(-0.2, 0.4, 0.4)),
        ),
    )
    for _ in range(20):
        a = rng.uniform(-1, 1, size=3)
        b = rng.uniform(-1, 1, size=3)
        t = np.linspace(0, 1, 64)[:, None]
        pts = a + t * (b - a)
        sd = spec.signed_distance(pts)
        step = np.linalg.norm(b - a) / 63.0
        assert np.max(np.abs(np.diff(sd))) <= step * (1.0 + 1e-9)


def test_box_distance_exact_outside():
    spec = CompactSetSpec(3, (Box(lo=(-1, -1, -1), hi=(1, 1, 1)),))
    assert signed_distance(spec, np.array([2.0, 2.0, 2.0])) == pytest.approx(np.sqrt(3.0))
    assert signed_distance(spec, np.array([0.0, 0.0, 0.0])) == pytest.approx(-1.0)


def test_rasterize_ball_volume():
    grid = GridSpec.cube(1.0, 64, 3)
    spec = ball_spec((0, 0, 0), 0.5)
    res = rasterize(spec, grid)
    vol = res.mask.sum() * grid.h**3
    exact = 4.0 / 3.0 * np.pi * 0.5**3
    assert abs(vol - exact) / exact < 0.05
    assert not res.coarse


def test_rasterize_point_snaps_one_cell():
    grid = GridSpec.cube(1.0, 16, 3)
    spec = CompactSetSpec(3, (Point(center=(0.03, -0.2, 0.4)),))
    res = rasterize(spec, grid)
    assert res.mask.sum() == 1
    assert res.snapped


def test_rasterize_empty_union_all_false():
    grid = GridSpec.cube(1.0, 8, 3)
    spec = CompactSetSpec(3, ())
    res = rasterize(spec, grid)
    assert not res.mask.any()


def test_rasterize_flags_unresolved_thin_set():
    grid = GridSpec.cube(1.0, 8, 3)  # h = 0.25 cannot resolve thickness 0.01
    spec = CompactSetSpec(3, (SegmentTube(a=(0, 0, -0.5), b=(0, 0, 0.5), thickness=0.01),))
    res = rasterize(spec, grid)
    assert res.coarse


def test_scale_and_clip_combinators():
    spec = ball_spec((0.5, 0, 0), 0.25)
    clipped = spec.clip_to_ball(np.array([0.5, 0, 0]), 0.1)
    assert clipped.membership(np.array([0.55, 0, 0]))
    assert not clipped.membership(np.array([0.7, 0, 0]))  # in ball but outside clip
    scaled = spec.rescale(2.0)
    assert scaled.membership(np.array([1.0, 0, 0]))
    assert scaled.bounding_radius() == pytest.approx(1.5)


def test_scene_schema_rejects_unknown_keys():
    doc = {"dimension": 3, "primitives": [], "grid": {"cells": 8, "hi": 2.05}, "bogus": 1}
    with pytest.raises(SceneError) as exc:
        parse_scene(doc)
    assert "bogus" in str(exc.value)


def test_scene_schema_negative_radius_pointer():
    doc = {
        "dimension": 3,
        "primitives": [{"type": "ball", "center": [0, 0, 0], "radius": -0.5}],
    }
    with pytest.raises(SceneError) as exc:
        parse_scene(doc)
    assert exc.value.pointer == "/primitives/0/radius"


def test_shipped_scenes_parse(tmp_path):
    from conftest import scene_path

    for name in (
        "point_n3", "ball_n3", "segment_tube_n3", "density_set_n3",
        "submanifold_tube_n4", "cusp_n3", "cusp_n4", "cusp_n5",
    ):
        spec, grid, catalog = load_scene(scene_path(name))
        assert spec.dimension in (3, 4, 5)
        assert grid is not None
        assert catalog is not None
        # every primitive sits inside the declared bounding ball
        assert spec.bounding_radius() <= 1.0 + 1e-9
