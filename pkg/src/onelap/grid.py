"""Rasterized planar domains and the discrete BV calculus on them.

Fields live on a uniform cell-centered grid.  Every :class:`GridDomain`
carries at least one ring of exterior cells around the mask, so that a
field extended by zero outside the mask is fully represented by the array.
The forward-difference gradient of that zero extension therefore contains
the jump across the domain boundary, and the isotropic total variation of
a field equals its interior variation plus the boundary trace term.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Tuple, Union

import numpy as np
from scipy import ndimage

from .cheeger import ConvexPolygon

__all__ = [
    "Disk",
    "Rectangle",
    "GridDomain",
    "ScalarField",
    "VectorField",
    "rasterize",
    "gradient",
    "divergence",
    "integrate",
    "total_variation",
    "inner",
    "shift",
    "grad_arrays",
    "div_arrays",
]


@dataclass(frozen=True)
class Disk:
    radius: float
    center: Tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"disk radius must be positive, got {self.radius}")


@dataclass(frozen=True)
class Rectangle:
    """Axis-aligned rectangle ``[x0, x0 + a] x [y0, y0 + b]``."""

    a: float
    b: float
    origin: Tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise ValueError(f"rectangle sides must be positive, got {self.a}, {self.b}")


Shape = Union[Disk, Rectangle, ConvexPolygon]


@dataclass(frozen=True, eq=False)
class GridDomain:
    """Boolean cell mask on a uniform grid of spacing ``h``.

    ``mask[i, j]`` refers to the cell with center
    ``(ox + (i + 0.5) h, oy + (j + 0.5) h)``.  The outermost ring of cells
    must lie outside the mask; use :meth:`from_mask` to pad an arbitrary
    mask.
    """

    mask: np.ndarray
    h: float
    origin: Tuple[float, float] = (0.0, 0.0)
    _boundary: np.ndarray = field(init=False, repr=False)
    _support: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        mask = np.array(self.mask, dtype=bool)
        if mask.ndim != 2:
            raise ValueError("mask must be two-dimensional")
        if not (self.h > 0 and math.isfinite(self.h)):
            raise ValueError(f"grid spacing must be positive, got {self.h}")
        if not mask.any():
            raise ValueError("empty rasterization: no cell center lies inside the shape")
        if mask[0].any() or mask[-1].any() or mask[:, 0].any() or mask[:, -1].any():
            raise ValueError(
                "mask touches the array border; build the domain with GridDomain.from_mask"
            )
        _, ncomp = ndimage.label(mask)
        if ncomp != 1:
            raise ValueError(f"mask is not 4-connected ({ncomp} components)")
        mask.setflags(write=False)
        object.__setattr__(self, "mask", mask)
        object.__setattr__(self, "h", float(self.h))
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))
        interior = ndimage.binary_erosion(mask, structure=ndimage.generate_binary_structure(2, 1))
        boundary = mask & ~interior
        boundary.setflags(write=False)
        object.__setattr__(self, "_boundary", boundary)
        support = mask.copy()
        support[:-1] |= mask[1:]
        support[:, :-1] |= mask[:, 1:]
        support.setflags(write=False)
        object.__setattr__(self, "_support", support)

    @classmethod
    def from_mask(cls, mask, h: float, origin: Tuple[float, float] = (0.0, 0.0), pad: int = 1):
        """Wrap ``mask`` in ``pad`` rings of exterior cells.

        ``origin`` is the lower-left corner of the unpadded mask; the
        returned domain's origin is shifted accordingly.
        """
        mask = np.pad(np.asarray(mask, dtype=bool), pad, constant_values=False)
        ox, oy = origin
        return cls(mask, h, (ox - pad * h, oy - pad * h))

    @property
    def nx(self) -> int:
        return self.mask.shape[0]

    @property
    def ny(self) -> int:
        return self.mask.shape[1]

    @property
    def shape(self) -> Tuple[int, int]:
        return self.mask.shape

    @property
    def boundary_cells(self) -> np.ndarray:
        """Mask cells with at least one exterior 4-neighbour."""
        return self._boundary

    @property
    def stencil_support(self) -> np.ndarray:
        """Cells whose forward-difference stencil touches the mask."""
        return self._support

    @property
    def cell_count(self) -> int:
        return int(self.mask.sum())

    @property
    def area(self) -> float:
        return self.cell_count * self.h**2

    def centers(self) -> Tuple[np.ndarray, np.ndarray]:
        """Cell-center coordinate arrays ``(X, Y)`` of shape ``(nx, ny)``."""
        ox, oy = self.origin
        x = ox + (np.arange(self.nx) + 0.5) * self.h
        y = oy + (np.arange(self.ny) + 0.5) * self.h
        return np.meshgrid(x, y, indexing="ij")

    def field(self, values) -> "ScalarField":
        """Scalar field from an array, zeroed outside the mask."""
        arr = np.where(self.mask, np.asarray(values, dtype=float), 0.0)
        return ScalarField(self, arr)

    def indicator(self, sub=None) -> "ScalarField":
        """Indicator of ``sub`` (a boolean array, default the whole mask)."""
        sub = self.mask if sub is None else np.asarray(sub, dtype=bool) & self.mask
        return ScalarField(self, sub.astype(float))

    def zeros(self) -> "ScalarField":
        return ScalarField(self, np.zeros(self.shape))

    def same_grid(self, other: "GridDomain") -> bool:
        return (
            self is other
            or (
                self.h == other.h
                and self.origin == other.origin
                and np.array_equal(self.mask, other.mask)
            )
        )


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Cell values on a domain, identically zero outside the mask."""

    domain: GridDomain
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != self.domain.shape:
            raise ValueError(f"field shape {v.shape} does not match domain {self.domain.shape}")
        if not np.isfinite(v).all():
            raise ValueError("scalar field contains non-finite values")
        if np.any(v[~self.domain.mask] != 0.0):
            raise ValueError("scalar field must vanish outside the domain mask")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __mul__(self, t: float) -> "ScalarField":
        return ScalarField(self.domain, self.values * float(t))

    __rmul__ = __mul__

    def max(self) -> float:
        return float(self.values.max())

    def min(self) -> float:
        return float(self.values.min())


@dataclass(frozen=True, eq=False)
class VectorField:
    """Forward-difference edge pair ``(vx, vy)`` anchored at every cell."""

    domain: GridDomain
    vx: np.ndarray
    vy: np.ndarray

    def __post_init__(self):
        vx = np.array(self.vx, dtype=float)
        vy = np.array(self.vy, dtype=float)
        if vx.shape != self.domain.shape or vy.shape != self.domain.shape:
            raise ValueError("vector field components must match the domain shape")
        if not (np.isfinite(vx).all() and np.isfinite(vy).all()):
            raise ValueError("vector field contains non-finite values")
        vx.setflags(write=False)
        vy.setflags(write=False)
        object.__setattr__(self, "vx", vx)
        object.__setattr__(self, "vy", vy)

    def magnitude(self) -> np.ndarray:
        return np.hypot(self.vx, self.vy)


# -- array kernels -----------------------------------------------------------
# The solver works on raw arrays; the field-level API below wraps these.


def grad_arrays(u: np.ndarray, h: float) -> Tuple[np.ndarray, np.ndarray]:
    """Forward differences, reading zero beyond the array edge."""
    gx = np.empty_like(u)
    gy = np.empty_like(u)
    gx[:-1] = u[1:] - u[:-1]
    gx[-1] = -u[-1]
    gy[:, :-1] = u[:, 1:] - u[:, :-1]
    gy[:, -1] = -u[:, -1]
    gx /= h
    gy /= h
    return gx, gy


def div_arrays(sx: np.ndarray, sy: np.ndarray, h: float) -> np.ndarray:
    """Negative adjoint of :func:`grad_arrays` (backward differences)."""
    d = sx.copy()
    d[1:] -= sx[:-1]
    d[:, 1:] += sy[:, 1:] - sy[:, :-1]
    d[:, 0] += sy[:, 0]
    d /= h
    return d


def _check_domain(a, b):
    if not a.domain.same_grid(b.domain):
        raise ValueError("fields live on different domains")


def gradient(u: ScalarField) -> VectorField:
    """Forward-difference gradient of the zero extension of ``u``."""
    gx, gy = grad_arrays(u.values, u.domain.h)
    return VectorField(u.domain, gx, gy)


def divergence(s: VectorField) -> ScalarField:
    """Discrete divergence, restricted to the mask.

    Satisfies ``inner(gradient(u), s) + inner(u, divergence(s)) == 0`` for
    every scalar field ``u`` on the same domain.
    """
    d = div_arrays(s.vx, s.vy, s.domain.h)
    return ScalarField(s.domain, np.where(s.domain.mask, d, 0.0))


def inner(a, b) -> float:
    """h^2-weighted pairing of two scalar fields or two vector fields."""
    _check_domain(a, b)
    h2 = a.domain.h**2
    if isinstance(a, ScalarField) and isinstance(b, ScalarField):
        return h2 * float(np.sum(a.values * b.values))
    if isinstance(a, VectorField) and isinstance(b, VectorField):
        return h2 * float(np.sum(a.vx * b.vx) + np.sum(a.vy * b.vy))
    raise TypeError("inner() pairs two ScalarFields or two VectorFields")


# Reductions run over the relevant cells in raster order, so the result does
# not depend on how much exterior padding surrounds the mask.


def integrate(u: ScalarField) -> float:
    return u.domain.h**2 * float(np.sum(u.values[u.domain.mask]))


def total_variation(u: ScalarField) -> float:
    """Isotropic TV of the zero extension, boundary jump included."""
    gx, gy = grad_arrays(u.values, u.domain.h)
    sup = u.domain.stencil_support
    return u.domain.h**2 * float(np.sum(np.hypot(gx[sup], gy[sup])))


# -- rasterization -----------------------------------------------------------


def _shape_bbox(shape: Shape) -> Tuple[float, float, float, float]:
    if isinstance(shape, Disk):
        cx, cy = shape.center
        r = shape.radius
        return cx - r, cy - r, cx + r, cy + r
    if isinstance(shape, Rectangle):
        x0, y0 = shape.origin
        return x0, y0, x0 + shape.a, y0 + shape.b
    if isinstance(shape, ConvexPolygon):
        v = shape.array
        return v[:, 0].min(), v[:, 1].min(), v[:, 0].max(), v[:, 1].max()
    raise TypeError(f"unsupported shape descriptor {shape!r}")


def _inside(shape: Shape, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    if isinstance(shape, Disk):
        cx, cy = shape.center
        return (X - cx) ** 2 + (Y - cy) ** 2 < shape.radius**2
    if isinstance(shape, Rectangle):
        x0, y0 = shape.origin
        return (X > x0) & (X < x0 + shape.a) & (Y > y0) & (Y < y0 + shape.b)
    v = shape.array
    inside = np.ones(X.shape, dtype=bool)
    for p, q in zip(v, np.roll(v, -1, axis=0)):
        inside &= (q[0] - p[0]) * (Y - p[1]) - (q[1] - p[1]) * (X - p[0]) > 0
    return inside


def rasterize(shape: Shape, resolution: float) -> GridDomain:
    """Mark the cells whose centers lie inside ``shape``.

    ``resolution`` is the number of cells per unit length, so the grid
    spacing is ``1 / resolution``.  The bounding box is covered by whole
    cells starting at its lower-left corner, then padded by one exterior
    ring.
    """
    if not (resolution > 0 and math.isfinite(resolution)):
        raise ValueError(f"resolution must be a positive number, got {resolution}")
    h = 1.0 / resolution
    x0, y0, x1, y1 = _shape_bbox(shape)
    nx = max(1, math.ceil((x1 - x0) / h - 1e-9))
    ny = max(1, math.ceil((y1 - y0) / h - 1e-9))
    x = x0 + (np.arange(nx) + 0.5) * h
    y = y0 + (np.arange(ny) + 0.5) * h
    X, Y = np.meshgrid(x, y, indexing="ij")
    mask = _inside(shape, X, Y)
    if not mask.any():
        raise ValueError(
            f"empty rasterization: {shape!r} contains no cell center at resolution {resolution}"
        )
    return GridDomain.from_mask(mask, h, (x0, y0))


def shift(u: ScalarField, di: int, dj: int) -> ScalarField:
    """Translate a field and its mask by ``(di, dj) >= 0`` whole cells."""
    if di < 0 or dj < 0:
        raise ValueError("shift offsets must be non-negative")
    dom = u.domain
    pad = ((di, 0), (dj, 0))
    return ScalarField(GridDomain(np.pad(dom.mask, pad), dom.h, dom.origin), np.pad(u.values, pad))
