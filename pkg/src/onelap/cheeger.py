"""Cheeger constants of convex planar domains, without any PDE solve.

For a convex planar domain the Cheeger set is the union of all disks of
radius ``r`` contained in it, where ``r`` is the unique radius at which the
inner parallel body ``{x : dist(x, boundary) > r}`` has area ``pi r^2``.
The Cheeger constant is then ``1 / r``.  Inner parallel bodies of a convex
polygon are intersections of inward-shifted edge half-planes, which we
compute exactly by successive clipping.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.optimize import linprog

__all__ = [
    "ConvexPolygon",
    "CheegerResult",
    "inner_parallel_polygon",
    "inner_parallel_area",
    "inradius",
    "cheeger_constant",
    "cheeger_constant_disk",
    "read_polygon",
]


def _shoelace(v: np.ndarray) -> float:
    if len(v) < 3:
        return 0.0
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def _perimeter(v: np.ndarray) -> float:
    if len(v) < 2:
        return 0.0
    return float(np.sum(np.hypot(*(np.roll(v, -1, axis=0) - v).T)))


@dataclass(frozen=True, eq=False)
class ConvexPolygon:
    """Strictly convex polygon, vertices stored counter-clockwise.

    Clockwise input is reversed.  Collinear triples, repeated vertices and
    self-intersecting vertex orders are rejected.
    """

    vertices: Sequence[Sequence[float]]
    array: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        v = np.array(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or len(v) < 3:
            raise ValueError("a polygon needs at least 3 vertices given as (x, y) pairs")
        if not np.isfinite(v).all():
            raise ValueError("polygon vertices must be finite")
        if _shoelace(v) < 0:
            v = v[::-1].copy()
        e = np.roll(v, -1, axis=0) - v
        lengths = np.hypot(e[:, 0], e[:, 1])
        if np.any(lengths <= 1e-12 * max(1.0, float(np.abs(v).max()))):
            raise ValueError("polygon has repeated vertices")
        en = np.roll(e, -1, axis=0)
        cross = e[:, 0] * en[:, 1] - e[:, 1] * en[:, 0]
        scale = lengths * np.roll(lengths, -1)
        if np.any(cross <= 1e-12 * scale):
            raise ValueError("polygon is degenerate or not strictly convex (collinear or reflex vertex)")
        # strictly convex turns with total turning 2*pi means a simple polygon
        turning = np.sum(np.arctan2(cross, np.sum(e * en, axis=1)))
        if abs(turning - 2 * math.pi) > 1e-6:
            raise ValueError("polygon vertex order is self-intersecting")
        v.setflags(write=False)
        object.__setattr__(self, "vertices", tuple(map(tuple, v.tolist())))
        object.__setattr__(self, "array", v)

    @classmethod
    def rectangle(cls, a: float, b: float) -> "ConvexPolygon":
        return cls([(0.0, 0.0), (a, 0.0), (a, b), (0.0, b)])

    @classmethod
    def regular(cls, n: int, radius: float = 1.0) -> "ConvexPolygon":
        """Regular ``n``-gon inscribed in the circle of the given radius."""
        t = 2 * np.pi * np.arange(n) / n
        return cls(np.column_stack([radius * np.cos(t), radius * np.sin(t)]))

    def scaled(self, s: float) -> "ConvexPolygon":
        return ConvexPolygon(self.array * s)

    @property
    def area(self) -> float:
        return _shoelace(self.array)

    @property
    def perimeter(self) -> float:
        return _perimeter(self.array)

    def contains(self, other: "ConvexPolygon") -> bool:
        """True when every vertex of ``other`` lies in the closed polygon."""
        v = self.array
        for p, q in zip(v, np.roll(v, -1, axis=0)):
            w = other.array - p
            if np.any((q[0] - p[0]) * w[:, 1] - (q[1] - p[1]) * w[:, 0] < -1e-12):
                return False
        return True


@dataclass(frozen=True)
class CheegerResult:
    h: float
    r: float
    area: float
    perimeter: float
    inner_area: float
    iterations: int


def _clip(poly: np.ndarray, normal: np.ndarray, offset: float) -> np.ndarray:
    """Keep the part of a convex polygon where ``normal . x >= offset``."""
    if len(poly) == 0:
        return poly
    d = poly @ normal - offset
    out = []
    n = len(poly)
    for k in range(n):
        p, q = poly[k], poly[(k + 1) % n]
        dp, dq = d[k], d[(k + 1) % n]
        if dp >= 0:
            out.append(p)
        if (dp >= 0) != (dq >= 0):
            t = dp / (dp - dq)
            out.append(p + t * (q - p))
    return np.array(out).reshape(-1, 2)


def _inward_halfplanes(poly: ConvexPolygon):
    v = poly.array
    e = np.roll(v, -1, axis=0) - v
    normals = np.column_stack([-e[:, 1], e[:, 0]]) / np.hypot(e[:, 0], e[:, 1])[:, None]
    offsets = np.sum(normals * v, axis=1)
    return normals, offsets


def inner_parallel_polygon(poly: ConvexPolygon, r: float) -> np.ndarray:
    """Vertices of ``{x in poly : dist(x, boundary) >= r}`` (possibly empty)."""
    if r < 0:
        raise ValueError(f"offset distance must be non-negative, got {r}")
    normals, offsets = _inward_halfplanes(poly)
    body = poly.array.copy()
    for nrm, off in zip(normals, offsets):
        body = _clip(body, nrm, off + r)
        if len(body) < 3:
            return np.empty((0, 2))
    return body


def inner_parallel_area(poly: ConvexPolygon, r: float) -> float:
    """Area of the inner parallel body at distance ``r``; 0 past the inradius."""
    body = inner_parallel_polygon(poly, r)
    return max(_shoelace(body), 0.0)


def inradius(poly: ConvexPolygon) -> float:
    """Radius of the largest inscribed disk (a small linear program)."""
    normals, offsets = _inward_halfplanes(poly)
    # maximize t subject to  normal_k . x - t >= offset_k
    a_ub = np.column_stack([-normals, np.ones(len(normals))])
    res = linprog(
        c=[0.0, 0.0, -1.0],
        A_ub=a_ub,
        b_ub=-offsets,
        bounds=[(None, None), (None, None), (0, None)],
        method="highs",
    )
    if not res.success:
        raise RuntimeError(f"inradius linear program failed: {res.message}")
    return float(res.x[2])


def cheeger_constant(poly: ConvexPolygon, max_iter: int = 200) -> CheegerResult:
    """Solve ``inner_parallel_area(poly, r) = pi r^2`` by bisection."""
    area = poly.area
    lo, hi = 0.0, inradius(poly)

    def f(r):
        return inner_parallel_area(poly, r) - math.pi * r * r

    if not (f(lo) > 0 and f(hi) < 0):
        raise RuntimeError("Cheeger bisection bracket failed; polygon must be convex")
    tol = 1e-12 * area
    it = 0
    r = 0.5 * (lo + hi)
    fr = f(r)
    while abs(fr) > tol and it < max_iter:
        if fr > 0:
            lo = r
        else:
            hi = r
        r = 0.5 * (lo + hi)
        fr = f(r)
        it += 1
        if hi - lo <= 4 * np.finfo(float).eps * hi:
            break
    body = inner_parallel_polygon(poly, r)
    inner_area = max(_shoelace(body), 0.0)
    inner_perim = _perimeter(body) if len(body) else 0.0
    # Minkowski sum of the inner body with the radius-r disk
    rounded_area = inner_area + r * inner_perim + math.pi * r * r
    rounded_perim = inner_perim + 2 * math.pi * r
    return CheegerResult(
        h=1.0 / r,
        r=r,
        area=rounded_area,
        perimeter=rounded_perim,
        inner_area=inner_area,
        iterations=it,
    )


def cheeger_constant_disk(radius: float) -> float:
    if not radius > 0:
        raise ValueError(f"disk radius must be positive, got {radius}")
    return 2.0 / radius


def read_polygon(path) -> ConvexPolygon:
    """Read ``x y`` pairs, one per line; ``#`` starts a comment."""
    pts = []
    text = Path(path).read_text()
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"{path}:{lineno}: expected 'x y', got {line!r}")
        try:
            pts.append((float(parts[0]), float(parts[1])))
        except ValueError:
            raise ValueError(f"{path}:{lineno}: non-numeric coordinate in {line!r}") from None
    return ConvexPolygon(pts)
