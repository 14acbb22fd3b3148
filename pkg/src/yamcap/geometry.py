"""Compact scene sets: primitives with exact membership and signed-distance queries.

Signed distances are negative inside, positive outside.  For unions the
distance is the min over members: membership is exact, the outside distance is
a lower bound on the true distance (sufficient for the collar widths and
rasterizations consumed downstream).
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np


class SceneError(ValueError):
    """Scene/shape input rejected; `pointer` is the JSON pointer of the offending field."""

    def __init__(self, message, pointer=""):
        super().__init__(f"{pointer or '/'}: {message}")
        self.pointer = pointer
        self.message = message


def _as_points(x, dim):
    pts = np.asarray(x, dtype=float)
    if pts.ndim == 1:
        pts = pts[None, :]
    if pts.shape[-1] != dim:
        raise ValueError(f"expected points of dimension {dim}, got shape {pts.shape}")
    return pts


class Primitive:
    zero_size = False

    def signed_distance(self, pts):
        raise NotImplementedError

    def bound_radius(self):
        """Radius of a ball at the origin containing the primitive."""
        raise NotImplementedError

    def snap_points(self, step):
        """Representative points for zero-size primitives (used by rasterize)."""
        return None


@dataclass(frozen=True)
class Ball(Primitive):
    center: tuple
    radius: float

    def signed_distance(self, pts):
        return np.linalg.norm(pts - np.asarray(self.center), axis=-1) - self.radius

    def bound_radius(self):
        return float(np.linalg.norm(self.center)) + self.radius


@dataclass(frozen=True)
class Box(Primitive):
    lo: tuple
    hi: tuple

    def signed_distance(self, pts):
        lo = np.asarray(self.lo, dtype=float)
        hi = np.asarray(self.hi, dtype=float)
        mid = 0.5 * (lo + hi)
        half = 0.5 * (hi - lo)
        q = np.abs(pts - mid) - half
        outside = np.linalg.norm(np.maximum(q, 0.0), axis=-1)
        inside = np.minimum(np.max(q, axis=-1), 0.0)
        return outside + inside

    def bound_radius(self):
        lo = np.asarray(self.lo, dtype=float)
        hi = np.asarray(self.hi, dtype=float)
        corner = np.maximum(np.abs(lo), np.abs(hi))
        return float(np.linalg.norm(corner))


@dataclass(frozen=True)
class Point(Primitive):
    center: tuple
    zero_size = True

    def signed_distance(self, pts):
        return np.linalg.norm(pts - np.asarray(self.center), axis=-1)

    def bound_radius(self):
        return float(np.linalg.norm(self.center))

    def snap_points(self, step):
        return np.asarray(self.center, dtype=float)[None, :]


@dataclass(frozen=True)
class SegmentTube(Primitive):
    a: tuple
    b: tuple
    thickness: float

    @property
    def zero_size(self):
        return self.thickness == 0.0

    def _dist_to_segment(self, pts):
        a = np.asarray(self.a, dtype=float)
        b = np.asarray(self.b, dtype=float)
        ab = b - a
        denom = float(np.dot(ab, ab))
        if denom == 0.0:
            return np.linalg.norm(pts - a, axis=-1)
        t = np.clip(np.einsum("...i,i->...", pts - a, ab) / denom, 0.0, 1.0)
        proj = a + t[..., None] * ab
        return np.linalg.norm(pts - proj, axis=-1)

    def signed_distance(self, pts):
        return self._dist_to_segment(pts) - self.thickness

    def bound_radius(self):
        return max(float(np.linalg.norm(self.a)), float(np.linalg.norm(self.b))) + self.thickness

    def snap_points(self, step):
        a = np.asarray(self.a, dtype=float)
        b = np.asarray(self.b, dtype=float)
        length = float(np.linalg.norm(b - a))
        m = max(2, int(math.ceil(length / max(step, 1e-30))) + 1)
        t = np.linspace(0.0, 1.0, m)
        return a + t[:, None] * (b - a)


@dataclass(frozen=True)
class SubmanifoldTube(Primitive):
    """Thickened patch of the axis-aligned k-plane spanned by the first k coordinates.

    The core set is {|x_i - c_i| <= extent for i < k, x_j = c_j for j >= k};
    the tube is its `thickness`-neighbourhood.
    """

    k: int
    extent: float
    thickness: float
    center: tuple = None

    @property
    def zero_size(self):
        return self.thickness == 0.0

    def _core_distance(self, pts):
        c = np.zeros(pts.shape[-1]) if self.center is None else np.asarray(self.center, dtype=float)
        y = pts - c
        inplane = y[..., : self.k]
        offplane = y[..., self.k:]
        over = np.maximum(np.abs(inplane) - self.extent, 0.0)
        return np.sqrt(np.sum(over**2, axis=-1) + np.sum(offplane**2, axis=-1))

    def signed_distance(self, pts):
        return self._core_distance(pts) - self.thickness

    def bound_radius(self):
        c = 0.0 if self.center is None else float(np.linalg.norm(self.center))
        return c + self.extent * math.sqrt(self.k) + self.thickness


@dataclass(frozen=True)
class CuspProfile:
    """Profile family h(r) = c * r^a * log(1/r)^b, positive and nondecreasing near 0."""

    c: float = 1.0
    a: float = 2.0
    b: float = 0.0

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        out = np.zeros_like(r)
        pos = r > 0
        rp = np.clip(r[pos], 1e-300, None)
        log_term = np.ones_like(rp) if self.b == 0.0 else np.log(1.0 / np.minimum(rp, 0.5)) ** self.b
        out[pos] = self.c * rp**self.a * log_term
        return out


@dataclass(frozen=True)
class Cusp(Primitive):
    """Axisymmetric spike {0 <= z <= height, |x'| <= h(z)} with z along the last axis."""

    height: float
    profile: CuspProfile = field(default_factory=CuspProfile)
    _n_boundary_samples: int = 257

    def _cylindrical(self, pts):
        z = pts[..., -1]
        s = np.linalg.norm(pts[..., :-1], axis=-1)
        return s, z

    def signed_distance(self, pts):
        s, z = self._cylindrical(pts)
        inside = (z >= 0.0) & (z <= self.height) & (s <= self.profile(z))
        # distance to the boundary polyline of the 2-D region in the (s, z) half-plane
        zs = np.linspace(0.0, self.height, self._n_boundary_samples)
        hs = self.profile(zs)
        verts = [(hs[i], zs[i]) for i in range(len(zs))]
        verts.append((0.0, self.height))  # top cap back to the axis
        d = np.full(s.shape, np.inf)
        for (s0, z0), (s1, z1) in zip(verts[:-1], verts[1:]):
            ds, dz = s1 - s0, z1 - z0
            denom = ds * ds + dz * dz
            if denom == 0.0:
                dd = np.hypot(s - s0, z - z0)
            else:
                t = np.clip(((s - s0) * ds + (z - z0) * dz) / denom, 0.0, 1.0)
                dd = np.hypot(s - (s0 + t * ds), z - (z0 + t * dz))
            np.minimum(d, dd, out=d)
        # apex point (h(0) = 0 for the shipped family)
        np.minimum(d, np.hypot(s - 0.0, z - 0.0), out=d)
        return np.where(inside, -d, d)

    def bound_radius(self):
        return float(np.hypot(self.height, float(self.profile(self.height))))


@dataclass(frozen=True)
class Union(Primitive):
    members: tuple

    @property
    def zero_size(self):
        return all(m.zero_size for m in self.members)

    def signed_distance(self, pts):
        if not self.members:
            return np.full(pts.shape[:-1], np.inf)
        d = self.members[0].signed_distance(pts)
        for m in self.members[1:]:
            np.minimum(d, m.signed_distance(pts), out=d)
        return d

    def bound_radius(self):
        return max((m.bound_radius() for m in self.members), default=0.0)

    def snap_points(self, step):
        pts = [m.snap_points(step) for m in self.members if m.zero_size]
        pts = [p for p in pts if p is not None]
        return np.concatenate(pts, axis=0) if pts else None


@dataclass(frozen=True)
class Intersection(Primitive):
    """Intersection of members; exact membership, distance is a lower bound outside."""

    members: tuple

    def signed_distance(self, pts):
        d = self.members[0].signed_distance(pts)
        for m in self.members[1:]:
            np.maximum(d, m.signed_distance(pts), out=d)
        return d

    def bound_radius(self):
        return min(m.bound_radius() for m in self.members)

    @property
    def zero_size(self):
        return any(m.zero_size for m in self.members)

    def snap_points(self, step):
        for m in self.members:
            if m.zero_size:
                pts = m.snap_points(step)
                if pts is None:
                    return None
                others = [o for o in self.members if o is not m]
                keep = np.ones(len(pts), dtype=bool)
                for o in others:
                    keep &= o.signed_distance(pts) <= 1e-12
                return pts[keep] if np.any(keep) else None
        return None


@dataclass(frozen=True)
class Rescaled(Primitive):
    """Image of `inner` under x -> (x - shift)/scale mapped back, i.e. the set
    scale*inner + shift; signed distance scales exactly."""

    inner: Primitive
    scale: float = 1.0
    shift: tuple = None

    @property
    def zero_size(self):
        return self.inner.zero_size

    def signed_distance(self, pts):
        sh = 0.0 if self.shift is None else np.asarray(self.shift, dtype=float)
        return self.inner.signed_distance((pts - sh) / self.scale) * self.scale

    def bound_radius(self):
        sh = 0.0 if self.shift is None else float(np.linalg.norm(self.shift))
        return self.inner.bound_radius() * self.scale + sh

    def snap_points(self, step):
        pts = self.inner.snap_points(step / self.scale)
        if pts is None:
            return None
        sh = 0.0 if self.shift is None else np.asarray(self.shift, dtype=float)
        return pts * self.scale + sh


@dataclass(frozen=True)
class CompactSetSpec:
    """Constructive compactum: a finite union of primitives in R^dimension."""

    dimension: int
    primitives: tuple

    def __post_init__(self):
        object.__setattr__(self, "primitives", tuple(self.primitives))

    @property
    def is_empty(self):
        return len(self.primitives) == 0

    def as_primitive(self):
        return Union(members=self.primitives)

    def signed_distance(self, x):
        pts = _as_points(x, self.dimension)
        d = self.as_primitive().signed_distance(pts)
        return d[0] if np.ndim(x) == 1 else d

    def membership(self, x):
        sd = self.signed_distance(x)
        return sd <= 0.0

    def bounding_radius(self):
        return self.as_primitive().bound_radius()

    def translate(self, shift):
        shift = np.asarray(shift, dtype=float)
        return CompactSetSpec(
            self.dimension,
            (Rescaled(self.as_primitive(), scale=1.0, shift=tuple(shift)),),
        )

    def rescale(self, scale, shift=None):
        """The set scale*K + shift."""
        sh = None if shift is None else tuple(np.asarray(shift, dtype=float))
        return CompactSetSpec(
            self.dimension, (Rescaled(self.as_primitive(), scale=float(scale), shift=sh),)
        )

    def clip_to_ball(self, center, radius):
        ball = Ball(center=tuple(np.broadcast_to(center, (self.dimension,))), radius=float(radius))
        return CompactSetSpec(
            self.dimension, (Intersection(members=(self.as_primitive(), ball)),)
        )


def signed_distance(spec, x):
    """Signed distance of a probe point to the compactum (op-level wrapper)."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != spec.dimension:
        raise SceneError(
            f"point dimension {x.shape[-1]} does not match scene dimension {spec.dimension}"
        )
    return spec.signed_distance(x)


@dataclass
class RasterizeResult:
    mask: np.ndarray
    coarse: bool
    snapped: bool

    def __iter__(self):  # allow mask, flags unpacking in older call sites
        yield self.mask
        yield self.coarse


def rasterize(spec, grid):
    """Cell mask of the compactum on a grid: a cell is inside iff its center has
    signed distance <= 0.  Zero-size primitives (points, bare segments) are
    snapped to the cells containing them so downstream solves stay well posed;
    `coarse` flags scenes with positive-size primitives that mark no cell.
    """
    if spec.is_empty:
        return RasterizeResult(np.zeros(grid.shape, dtype=bool), False, False)
    centers = grid.ambient_centers()
    sd = spec.as_primitive().signed_distance(centers)
    mask = sd <= 0.0

    snapped = False
    snap = spec.as_primitive().snap_points(grid.h / 3.0)
    if snap is not None and len(snap):
        idx = grid.cell_index_of_ambient(snap)
        ok = idx is not None
        if ok:
            inside = np.all((idx >= 0) & (idx < np.asarray(grid.shape)), axis=1)
            for ij in idx[inside]:
                if not mask[tuple(ij)]:
                    mask[tuple(ij)] = True
                    snapped = True

    # positive-size members that no cell resolved
    coarse = False
    for prim in spec.primitives:
        if prim.zero_size:
            continue
        d = prim.signed_distance(centers)
        if not np.any(d <= 0.0):
            coarse = True
        elif float(np.min(d)) > -0.5 * grid.h:
            coarse = True  # thinner than a cell: membership only grazed
    return RasterizeResult(mask, coarse, snapped)


# ---------------------------------------------------------------------------
# scene JSON schema
# ---------------------------------------------------------------------------

_PRIM_KEYS = {
    "ball": {"type", "center", "radius"},
    "box": {"type", "lo", "hi"},
    "point": {"type", "center"},
    "segment_tube": {"type", "endpoints", "thickness"},
    "submanifold_tube": {"type", "k", "extent", "thickness", "center"},
    "cusp": {"type", "height", "profile"},
    "union": {"type", "members"},
}


def _require_keys(obj, allowed, required, pointer):
    for key in obj:
        if key not in allowed:
            raise SceneError(f"unknown key '{key}'", f"{pointer}/{key}")
    for key in required:
        if key not in obj:
            raise SceneError(f"missing key '{key}'", pointer)


def _positive(value, pointer, strict=True):
    if not isinstance(value, (int, float)) or (value <= 0 if strict else value < 0):
        raise SceneError("must be a positive number" if strict else "must be nonnegative", pointer)
    return float(value)


def _vector(value, dim, pointer):
    if not isinstance(value, (list, tuple)) or len(value) != dim:
        raise SceneError(f"must be a list of {dim} numbers", pointer)
    try:
        return tuple(float(v) for v in value)
    except (TypeError, ValueError):
        raise SceneError("entries must be numbers", pointer)


def parse_primitive(obj, dim, pointer):
    if not isinstance(obj, dict):
        raise SceneError("primitive must be an object", pointer)
    kind = obj.get("type")
    if kind not in _PRIM_KEYS:
        raise SceneError(f"unknown primitive type {kind!r}", f"{pointer}/type")
    _require_keys(obj, _PRIM_KEYS[kind], _PRIM_KEYS[kind] - {"center"}, pointer)
    if kind == "ball":
        return Ball(
            center=_vector(obj["center"], dim, f"{pointer}/center"),
            radius=_positive(obj["radius"], f"{pointer}/radius"),
        )
    if kind == "box":
        lo = _vector(obj["lo"], dim, f"{pointer}/lo")
        hi = _vector(obj["hi"], dim, f"{pointer}/hi")
        if any(h <= l for l, h in zip(lo, hi)):
            raise SceneError("hi must exceed lo on every axis", f"{pointer}/hi")
        return Box(lo=lo, hi=hi)
    if kind == "point":
        return Point(center=_vector(obj["center"], dim, f"{pointer}/center"))
    if kind == "segment_tube":
        eps = obj["endpoints"]
        if not isinstance(eps, (list, tuple)) or len(eps) != 2:
            raise SceneError("endpoints must be a pair of points", f"{pointer}/endpoints")
        return SegmentTube(
            a=_vector(eps[0], dim, f"{pointer}/endpoints/0"),
            b=_vector(eps[1], dim, f"{pointer}/endpoints/1"),
            thickness=_positive(obj["thickness"], f"{pointer}/thickness", strict=False),
        )
    if kind == "submanifold_tube":
        k = obj["k"]
        if not isinstance(k, int) or not 1 <= k < dim:
            raise SceneError(f"k must be an integer in [1, {dim - 1}]", f"{pointer}/k")
        center = obj.get("center")
        return SubmanifoldTube(
            k=k,
            extent=_positive(obj["extent"], f"{pointer}/extent"),
            thickness=_positive(obj["thickness"], f"{pointer}/thickness", strict=False),
            center=None if center is None else _vector(center, dim, f"{pointer}/center"),
        )
    if kind == "cusp":
        prof = obj.get("profile", {})
        _require_keys(prof, {"c", "a", "b"}, set(), f"{pointer}/profile")
        profile = CuspProfile(
            c=float(prof.get("c", 1.0)), a=float(prof.get("a", 2.0)), b=float(prof.get("b", 0.0))
        )
        if profile.a < 1.0:
            raise SceneError("profile must satisfy h(r) = O(r): need a >= 1", f"{pointer}/profile/a")
        return Cusp(height=_positive(obj["height"], f"{pointer}/height"), profile=profile)
    members = obj["members"]
    if not isinstance(members, (list, tuple)):
        raise SceneError("members must be a list", f"{pointer}/members")
    return Union(
        members=tuple(
            parse_primitive(m, dim, f"{pointer}/members/{i}") for i, m in enumerate(members)
        )
    )


def parse_scene(doc):
    """Parse a scene document {dimension, primitives, grid[, catalog]} into
    (CompactSetSpec, grid dict, catalog dict or None).  Unknown keys rejected."""
    from .grids import parse_grid  # deferred to avoid a cycle

    if not isinstance(doc, dict):
        raise SceneError("scene must be a JSON object")
    _require_keys(doc, {"dimension", "primitives", "grid", "catalog"}, {"dimension", "primitives"}, "")
    dim = doc["dimension"]
    if not isinstance(dim, int) or not 3 <= dim <= 5:
        raise SceneError("dimension must be an integer in [3, 5]", "/dimension")
    prims = doc["primitives"]
    if not isinstance(prims, list):
        raise SceneError("primitives must be a list", "/primitives")
    spec = CompactSetSpec(
        dimension=dim,
        primitives=tuple(
            parse_primitive(p, dim, f"/primitives/{i}") for i, p in enumerate(prims)
        ),
    )
    grid = None
    if "grid" in doc:
        grid = parse_grid(doc["grid"], dim, "/grid")
    return spec, grid, doc.get("catalog")


def load_scene(path):
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SceneError(f"invalid JSON: {exc}")
    return parse_scene(doc)
