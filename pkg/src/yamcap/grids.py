"""Uniform grids with optional symmetry reductions, and scalar fields on them.

Reductions carried by a grid:

* ``full``      — Cartesian grid in the ambient dimension.
* ``planar1d``  — 1-D grid along the last ambient axis (translation-invariant scenes).
* ``radial1d``  — 1-D grid in r = |x - center| (rotation-invariant scenes).
* ``axisym2d``  — 2-D grid in (s, z), s = distance to the symmetry axis through
                  `center` along the last ambient axis.

A reduction is declared by the scene and trusted; the grid only supplies the
matching metric weights.  Cell centers sit at lo + (i + 1/2) h with one common
spacing h on every axis.
"""

import math
from dataclasses import dataclass

import numpy as np

from .geometry import SceneError

REDUCTIONS = ("full", "planar1d", "radial1d", "axisym2d")


def sphere_area(k):
    """Surface area of the unit k-sphere S^k embedded in R^(k+1)."""
    return 2.0 * math.pi ** ((k + 1) / 2.0) / math.gamma((k + 1) / 2.0)


@dataclass(frozen=True)
class GridSpec:
    lo: tuple
    hi: tuple
    cells: tuple
    reduction: str = "full"
    ambient_dim: int = None
    center: tuple = None

    def __post_init__(self):
        lo = tuple(float(v) for v in np.atleast_1d(self.lo))
        hi = tuple(float(v) for v in np.atleast_1d(self.hi))
        cells = tuple(int(v) for v in np.atleast_1d(self.cells))
        if not len(lo) == len(hi) == len(cells):
            raise ValueError("lo, hi, cells must have matching lengths")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "cells", cells)
        if self.reduction not in REDUCTIONS:
            raise ValueError(f"unknown reduction {self.reduction!r}")
        amb = self.ambient_dim if self.ambient_dim is not None else len(lo)
        object.__setattr__(self, "ambient_dim", int(amb))
        if self.center is not None:
            object.__setattr__(self, "center", tuple(float(v) for v in self.center))
        hs = [(h - l) / c for l, h, c in zip(lo, hi, cells)]
        if max(hs) - min(hs) > 1e-9 * max(hs):
            raise ValueError(f"spacing must be identical on all axes, got {hs}")
        if self.reduction == "full" and len(lo) != self.ambient_dim:
            raise ValueError("full grids must match the ambient dimension")
        if self.reduction in ("planar1d", "radial1d") and len(lo) != 1:
            raise ValueError(f"{self.reduction} grids are one-dimensional")
        if self.reduction == "axisym2d" and len(lo) != 2:
            raise ValueError("axisym2d grids are two-dimensional")

    # -- constructors ------------------------------------------------------
    @classmethod
    def cube(cls, half_extent, cells, dim, center=None):
        lo = tuple(-half_extent for _ in range(dim))
        hi = tuple(half_extent for _ in range(dim))
        return cls(lo=lo, hi=hi, cells=(cells,) * dim, ambient_dim=dim, center=center)

    @classmethod
    def radial(cls, rmax, cells, ambient_dim, center=None):
        return cls(
            lo=(0.0,), hi=(rmax,), cells=(cells,), reduction="radial1d",
            ambient_dim=ambient_dim, center=center,
        )

    @classmethod
    def planar(cls, zmax, cells, ambient_dim, zmin=0.0):
        return cls(
            lo=(zmin,), hi=(zmax,), cells=(cells,), reduction="planar1d",
            ambient_dim=ambient_dim,
        )

    @classmethod
    def axisym(cls, smax, zlo, zhi, cells_s, ambient_dim, center=None):
        h = smax / cells_s
        cells_z = int(round((zhi - zlo) / h))
        zhi = zlo + cells_z * h
        return cls(
            lo=(0.0, zlo), hi=(smax, zhi), cells=(cells_s, cells_z),
            reduction="axisym2d", ambient_dim=ambient_dim, center=center,
        )

    # -- basic geometry ----------------------------------------------------
    @property
    def ndim(self):
        return len(self.cells)

    @property
    def shape(self):
        return self.cells

    @property
    def h(self):
        return (self.hi[0] - self.lo[0]) / self.cells[0]

    @property
    def n_cells(self):
        return int(np.prod(self.cells))

    def axis_centers(self, axis):
        return self.lo[axis] + (np.arange(self.cells[axis]) + 0.5) * self.h

    def meshes(self):
        return np.meshgrid(*[self.axis_centers(a) for a in range(self.ndim)], indexing="ij")

    def _center_vec(self):
        if self.center is not None:
            return np.asarray(self.center, dtype=float)
        return np.zeros(self.ambient_dim)

    def ambient_centers(self):
        """Cell centers lifted to ambient coordinates, shape (*shape, ambient_dim)."""
        c = self._center_vec()
        out = np.zeros(self.shape + (self.ambient_dim,))
        out[:] = c
        if self.reduction == "full":
            for a, m in enumerate(self.meshes()):
                out[..., a] = m
        elif self.reduction == "planar1d":
            out[..., -1] = c[-1] + self.axis_centers(0)
        elif self.reduction == "radial1d":
            out[..., 0] = c[0] + self.axis_centers(0)
        else:  # axisym2d: s along e_0, z along the last axis
            s, z = self.meshes()
            out[..., 0] = c[0] + s
            out[..., -1] = c[-1] + z
        return out

    def reduce_points(self, pts):
        """Map ambient points to reduced grid coordinates, shape (..., ndim)."""
        pts = np.asarray(pts, dtype=float)
        c = self._center_vec()
        if self.reduction == "full":
            return pts - 0.0
        if self.reduction == "planar1d":
            return (pts[..., -1] - c[-1])[..., None]
        if self.reduction == "radial1d":
            return np.linalg.norm(pts - c, axis=-1)[..., None]
        y = pts - c
        s = np.linalg.norm(y[..., :-1], axis=-1)
        return np.stack([s, y[..., -1]], axis=-1)

    def cell_index_of_ambient(self, pts):
        red = self.reduce_points(pts)
        lo = np.asarray(self.lo)
        return np.floor((red - lo) / self.h).astype(int)

    def radius_field(self, point=None):
        """|x - point| at every cell (ambient distance), default point = origin."""
        centers = self.ambient_centers()
        p = np.zeros(self.ambient_dim) if point is None else np.asarray(point, dtype=float)
        return np.linalg.norm(centers - p, axis=-1)

    def inscribed_radius(self):
        """Largest ball about the origin guaranteed inside the grid's region."""
        if self.reduction in ("radial1d", "planar1d"):
            return float(self.hi[0])
        if self.reduction == "axisym2d":
            return float(min(self.hi[0], self.hi[1], -self.lo[1]))
        return float(min(min(h, -l) for l, h in zip(self.lo, self.hi)))

    # -- measures and operators -------------------------------------------
    def volume_weights(self):
        """Ambient n-volume carried by each cell (per unit cross-section for planar1d)."""
        n = self.ambient_dim
        if self.reduction == "full":
            return np.full(self.shape, self.h**n)
        if self.reduction == "planar1d":
            return np.full(self.shape, self.h)
        if self.reduction == "radial1d":
            r = self.axis_centers(0)
            return sphere_area(n - 1) * r ** (n - 1) * self.h
        s = self.axis_centers(0)
        w = sphere_area(n - 2) * s ** (n - 2) * self.h**2
        return np.broadcast_to(w[:, None], self.shape).copy()

    def cell_metric_weight(self):
        """Dimensionless cell weight making the reduced Laplacian self-adjoint."""
        n = self.ambient_dim
        if self.reduction == "full" or self.reduction == "planar1d":
            return np.ones(self.shape)
        if self.reduction == "radial1d":
            r = self.axis_centers(0)
            return r ** (n - 1)
        s = self.axis_centers(0)
        return np.broadcast_to((s ** (n - 2))[:, None], self.shape).copy()

    def face_metric_weight(self, axis):
        """Weights at cell faces i+1/2 along `axis`; shape = cells + 1 on that axis."""
        n = self.ambient_dim
        shape = list(self.cells)
        shape[axis] += 1
        if self.reduction == "radial1d":
            faces = self.lo[0] + np.arange(self.cells[0] + 1) * self.h
            return faces ** (n - 1)
        if self.reduction == "axisym2d":
            if axis == 0:
                faces = self.lo[0] + np.arange(self.cells[0] + 1) * self.h
                return np.broadcast_to((faces ** (n - 2))[:, None], shape).copy()
            # z-axis faces carry the s-weight of their cell column
            s = self.axis_centers(0) ** (n - 2)
            return np.broadcast_to(s[:, None], shape).copy()
        return np.ones(shape)

    def refined(self, factor=2):
        return GridSpec(
            lo=self.lo, hi=self.hi, cells=tuple(c * factor for c in self.cells),
            reduction=self.reduction, ambient_dim=self.ambient_dim, center=self.center,
        )

    def interpolate(self, values, pts_ambient, defined_mask=None, fill=np.nan):
        """Multilinear interpolation of cell values at ambient points.

        Returns (values, valid) where valid is False outside the grid or where
        any participating cell is undefined.
        """
        red = self.reduce_points(np.asarray(pts_ambient, dtype=float))
        lo = np.asarray(self.lo)
        t = (red - lo) / self.h - 0.5
        base = np.floor(t).astype(int)
        frac = t - base
        shape = np.asarray(self.shape)
        # the r = 0 / s = 0 face is a symmetry plane: indices below it clamp to cell 0
        sym_axis0 = self.reduction in ("radial1d", "axisym2d")
        valid = np.ones(red.shape[:-1], dtype=bool)
        out = np.zeros(red.shape[:-1])
        for corner in range(2**self.ndim):
            idx = base.copy()
            w = np.ones(red.shape[:-1])
            for a in range(self.ndim):
                bit = (corner >> a) & 1
                idx[..., a] = base[..., a] + bit
                w = w * np.where(bit, frac[..., a], 1.0 - frac[..., a])
            inb = np.ones(red.shape[:-1], dtype=bool)
            for a in range(self.ndim):
                ia = idx[..., a]
                low_ok = (ia >= 0) | (sym_axis0 and a == 0)
                inb &= low_ok & (ia < shape[a])
            clipped = np.clip(idx, 0, shape - 1)
            vals = values[tuple(np.moveaxis(clipped, -1, 0))]
            if defined_mask is not None:
                dm = defined_mask[tuple(np.moveaxis(clipped, -1, 0))]
                valid &= np.where(w > 1e-12, dm, True)
            out += w * vals
            valid &= inb | (w <= 1e-12)
        return np.where(valid, out, fill), valid


@dataclass
class ScalarField:
    """Values on a grid with a defined-cells mask (False inside excised sets)."""

    grid: GridSpec
    values: np.ndarray
    defined_mask: np.ndarray = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != tuple(self.grid.shape):
            raise ValueError(
                f"values shape {self.values.shape} does not match grid {self.grid.shape}"
            )
        if self.defined_mask is None:
            self.defined_mask = np.ones(self.grid.shape, dtype=bool)
        else:
            self.defined_mask = np.asarray(self.defined_mask, dtype=bool)

    def finite_on_defined(self):
        return bool(np.all(np.isfinite(self.values[self.defined_mask])))

    def sample(self, pts_ambient):
        return self.grid.interpolate(self.values, pts_ambient, self.defined_mask)

    def copy(self):
        return ScalarField(self.grid, self.values.copy(), self.defined_mask.copy())


def parse_grid(obj, ambient_dim, pointer="/grid"):
    if not isinstance(obj, dict):
        raise SceneError("grid must be an object", pointer)
    allowed = {"lo", "hi", "cells", "reduction", "center"}
    for key in obj:
        if key not in allowed:
            raise SceneError(f"unknown key '{key}'", f"{pointer}/{key}")
    for key in ("cells",):
        if key not in obj:
            raise SceneError("missing key 'cells'", pointer)
    reduction = obj.get("reduction", "full")
    if reduction not in REDUCTIONS:
        raise SceneError(f"reduction must be one of {REDUCTIONS}", f"{pointer}/reduction")
    cells = obj["cells"]
    if not isinstance(cells, int) or cells <= 0:
        raise SceneError("cells must be a positive integer", f"{pointer}/cells")
    center = obj.get("center")
    if center is not None:
        if not isinstance(center, (list, tuple)) or len(center) != ambient_dim:
            raise SceneError(f"center must be a list of {ambient_dim} numbers", f"{pointer}/center")
        center = tuple(float(v) for v in center)
    lo, hi = obj.get("lo"), obj.get("hi")
    try:
        if reduction == "full":
            half = float(hi if hi is not None else 2.1)
            return GridSpec.cube(half, cells, ambient_dim, center=center)
        if reduction == "planar1d":
            return GridSpec.planar(float(hi), cells, ambient_dim, zmin=float(lo or 0.0))
        if reduction == "radial1d":
            return GridSpec.radial(float(hi), cells, ambient_dim, center=center)
        lo = [0.0, -float(hi)] if lo is None else [float(v) for v in np.atleast_1d(lo)]
        smax = float(hi if np.isscalar(hi) else np.atleast_1d(hi)[0])
        zhi = float(hi if np.isscalar(hi) else np.atleast_1d(hi)[-1])
        return GridSpec.axisym(smax, lo[-1], zhi, cells, ambient_dim, center=center)
    except (TypeError, ValueError) as exc:
        raise SceneError(f"invalid grid geometry: {exc}", pointer)
