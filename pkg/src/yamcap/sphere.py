"""Round sphere utilities: stereographic chart, conformal weight, rotations.

Chart convention: projection from the north pole N = e_(n+1),
sigma(p) = (p_1, ..., p_n) / (1 - p_(n+1)), so the south pole maps to the
origin and the equator is fixed pointwise.
"""

import math
from dataclasses import dataclass

import numpy as np

UNIT_NORM_TOL = 1e-10


def _check_on_sphere(p):
    p = np.asarray(p, dtype=float)
    norms = np.linalg.norm(p, axis=-1)
    if np.any(np.abs(norms - 1.0) > UNIT_NORM_TOL):
        raise ValueError("point not on the unit sphere")
    return p


def north_pole(n):
    e = np.zeros(n + 1)
    e[-1] = 1.0
    return e


def south_pole(n):
    return -north_pole(n)


def stereo(p):
    """Plane image of a sphere point (north pole excluded).

    Near the pole 1 - p_last cancels catastrophically, so the equivalent form
    p' (1 + p_last) / |p'|^2 is used there.
    """
    p = _check_on_sphere(p)
    last = p[..., -1]
    body = p[..., :-1]
    body_sq = np.sum(body * body, axis=-1)
    if np.any((1.0 - last < 1e-12) & (body_sq < 1e-24)):
        raise ValueError("north pole excluded from the chart")
    near_north = last > 0.0
    denom_south = np.where(near_north, 1.0, 1.0 - last)
    with np.errstate(divide="ignore", invalid="ignore"):
        north_form = body * ((1.0 + last) / np.where(body_sq > 0, body_sq, 1.0))[..., None]
    south_form = body / denom_south[..., None]
    return np.where(near_north[..., None], north_form, south_form)

def stereo_inv(x):
    """Sphere point with plane image x; the origin maps to the south pole."""
    x = np.asarray(x, dtype=float)
    r2 = np.sum(x**2, axis=-1)
    denom = 1.0 + r2
    p = np.concatenate([2.0 * x, (r2 - 1.0)[..., None]], axis=-1)
    return p / denom[..., None]


def conformal_factor(x, n):
    """Weight (2 / (1 + |x|^2))^((n-2)/2) of the chart at plane point x."""
    x = np.asarray(x, dtype=float)
    r2 = np.sum(x**2, axis=-1)
    return (2.0 / (1.0 + r2)) ** ((n - 2) / 2.0)


def geodesic_distance(p, q):
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    dot = np.clip(np.sum(p * q, axis=-1), -1.0, 1.0)
    return np.arccos(dot)


def rotation_taking(u, v):
    """Rotation matrix in R^(n+1) mapping unit vector u to unit vector v,
    acting in span(u, v) and fixing its orthogonal complement."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    u = u / np.linalg.norm(u)
    v = v / np.linalg.norm(v)
    c = float(np.dot(u, v))
    if c > 1.0 - 1e-14:
        return np.eye(len(u))
    if c < -1.0 + 1e-14:
        # antipodal: rotate by pi in any plane containing u
        w = np.zeros(len(u))
        w[int(np.argmin(np.abs(u)))] = 1.0
        w = w - np.dot(w, u) * u
        w /= np.linalg.norm(w)
        return _plane_rotation(u, w, math.pi)
    w = v - c * u
    w /= np.linalg.norm(w)
    return _plane_rotation(u, w, math.acos(c))


def _plane_rotation(e1, e2, angle):
    """Rotation by `angle` in the oriented plane spanned by orthonormal e1, e2."""
    eye = np.eye(len(e1))
    p11 = np.outer(e1, e1)
    p22 = np.outer(e2, e2)
    p12 = np.outer(e2, e1)
    p21 = np.outer(e1, e2)
    return eye + (math.cos(angle) - 1.0) * (p11 + p22) + math.sin(angle) * (p12 - p21)


@dataclass(frozen=True)
class SphereCap:
    """Geodesic cap {d(center, x) <= radius} on S^n."""

    center: tuple
    radius: float

    def contains(self, p):
        return geodesic_distance(np.asarray(p), np.asarray(self.center)) <= self.radius


@dataclass(frozen=True)
class SphereSetSpec:
    """Finite union of geodesic caps on S^n (n = ambient sphere dimension)."""

    n: int
    caps: tuple

    def __post_init__(self):
        for cap in self.caps:
            _check_on_sphere(np.asarray(cap.center))

    def contains(self, p):
        p = np.asarray(p, dtype=float)
        out = np.zeros(p.shape[:-1], dtype=bool)
        for cap in self.caps:
            out |= geodesic_distance(p, np.asarray(cap.center)) <= cap.radius
        return out

    def geodesic_sdist(self, p):
        """Signed geodesic distance (negative inside), min over caps."""
        p = np.asarray(p, dtype=float)
        d = np.full(p.shape[:-1], np.inf)
        for cap in self.caps:
            np.minimum(d, geodesic_distance(p, np.asarray(cap.center)) - cap.radius, out=d)
        return d

    def diameter(self):
        """Geodesic diameter (exact for unions of caps)."""
        best = 0.0
        for ci in self.caps:
            for cj in self.caps:
                d = float(geodesic_distance(np.asarray(ci.center), np.asarray(cj.center)))
                best = max(best, d + ci.radius + cj.radius)
        return min(best, math.pi)

    def barycenter(self):
        if not self.caps:
            raise ValueError("empty sphere set has no barycenter")
        m = np.zeros(self.n + 1)
        for cap in self.caps:
            m += np.asarray(cap.center)
        norm = np.linalg.norm(m)
        if norm < 1e-12:
            raise ValueError("degenerate barycenter (antipodal configuration)")
        return m / norm

    def rotated(self, rotation):
        return SphereSetSpec(
            self.n,
            tuple(
                SphereCap(center=tuple(rotation @ np.asarray(c.center)), radius=c.radius)
                for c in self.caps
            ),
        )


CAP_DIAMETER_LIMIT = math.pi / 3.0


def rotate_to_cap(sphere_set):
    """Rotation placing the set inside the polar cap {d(S, x) <= pi/3} by sending
    its barycenter to the south pole; rejects sets of geodesic diameter > pi/3."""
    diam = sphere_set.diameter()
    if diam > CAP_DIAMETER_LIMIT + 1e-12:
        raise ValueError(
            f"set diameter {diam:.6f} exceeds the admissible pi/3 = {CAP_DIAMETER_LIMIT:.6f}"
        )
    S = south_pole(sphere_set.n)
    b = sphere_set.barycenter()
    rot = rotation_taking(b, S)
    moved = sphere_set.rotated(rot)
    # touch-up: the barycenter-to-pole map keeps everything within diam of S
    for cap in moved.caps:
        if geodesic_distance(np.asarray(cap.center), S) + cap.radius > CAP_DIAMETER_LIMIT + 1e-9:
            raise ValueError("rotated set does not fit the polar cap; diameter check too lax")
    return rot


def plane_image_primitive(sphere_set, rotation):
    """Planar compactum sigma(rotation(K)) as a geometry primitive.

    Membership is exact via the chart pullback; the distance field is the
    geodesic one (quasi-isometric to the Euclidean distance on the southern
    region, which is all the downstream consumers need).
    """
    from .geometry import Primitive

    class _SpherePullback(Primitive):
        zero_size = all(cap.radius == 0.0 for cap in sphere_set.caps)

        def signed_distance(self, pts):
            p = stereo_inv(pts)
            moved = sphere_set.rotated(rotation)
            return moved.geodesic_sdist(p)

        def bound_radius(self):
            # sets inside the pi/3 polar cap land inside B(0, tan(pi/6)) < 99/100
            return math.tan(CAP_DIAMETER_LIMIT / 2.0)

        def snap_points(self, step):
            if not self.zero_size:
                return None
            moved = sphere_set.rotated(rotation)
            return np.array([stereo(np.asarray(c.center)) for c in moved.caps])

    return _SpherePullback()
