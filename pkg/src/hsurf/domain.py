"""Planar domains, Dirichlet data and the masked Cartesian grid."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np
from scipy import ndimage
import shapely.geometry

from .expr import Expression

# Nodes closer than this fraction of h (along a grid line) to the boundary
# are not unknowns; their neighbours' arms run through them to the boundary.
ARM_MARGIN = 1e-2

# direction index -> (axis, sign)
DIRECTIONS = ((0, 1), (0, -1), (1, 1), (1, -1))
EAST, WEST, NORTH, SOUTH = range(4)


class InvalidDomain(ValueError):
    pass


class MaskTooThin(InvalidDomain):
    pass


@dataclass(frozen=True)
class PlanarDomain:
    """A disc or simple polygon with a uniform grid spacing ``spacing``."""

    kind: str
    spacing: float
    center: tuple[float, float] = (0.0, 0.0)
    radius: float = 0.0
    vertices: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        if not self.spacing > 0:
            raise InvalidDomain("grid spacing must be positive")
        if self.kind == "disc":
            if not self.radius > 0:
                raise InvalidDomain("disc radius must be positive")
        elif self.kind == "polygon":
            verts = np.asarray(self.vertices, dtype=float)
            if verts.ndim != 2 or verts.shape[1] != 2 or len(verts) < 3:
                raise InvalidDomain("polygon needs at least three 2-D vertices")
            poly = shapely.geometry.Polygon(verts)
            if not poly.is_valid or not shapely.geometry.LinearRing(verts).is_simple:
                raise InvalidDomain("polygon is not simple")
            if _signed_area(verts) < 0:
                verts = verts[::-1]
            object.__setattr__(self, "vertices", tuple(map(tuple, verts)))
        else:
            raise InvalidDomain(f"unknown domain kind {self.kind!r}")

    @classmethod
    def disc(cls, radius: float, spacing: float, center=(0.0, 0.0)) -> "PlanarDomain":
        return cls("disc", float(spacing), center=tuple(map(float, center)), radius=float(radius))

    @classmethod
    def polygon(cls, vertices, spacing: float) -> "PlanarDomain":
        return cls("polygon", float(spacing), vertices=tuple(map(tuple, np.asarray(vertices, float))))

    def with_spacing(self, spacing: float) -> "PlanarDomain":
        return PlanarDomain(self.kind, float(spacing), self.center, self.radius, self.vertices)

    # geometry ---------------------------------------------------------
    @property
    def bounds(self) -> tuple[float, float, float, float]:
        if self.kind == "disc":
            cx, cy = self.center
            r = self.radius
            return cx - r, cx + r, cy - r, cy + r
        v = np.asarray(self.vertices)
        return v[:, 0].min(), v[:, 0].max(), v[:, 1].min(), v[:, 1].max()

    @property
    def perimeter(self) -> float:
        if self.kind == "disc":
            return 2 * np.pi * self.radius
        v = np.asarray(self.vertices)
        return float(np.sum(np.linalg.norm(np.roll(v, -1, axis=0) - v, axis=1)))

    @property
    def area(self) -> float:
        if self.kind == "disc":
            return np.pi * self.radius**2
        return float(_signed_area(np.asarray(self.vertices)))

    @property
    def is_convex(self) -> bool:
        if self.kind == "disc":
            return True
        v = np.asarray(self.vertices)
        e = np.roll(v, -1, axis=0) - v
        cross = e[:, 0] * np.roll(e, -1, axis=0)[:, 1] - e[:, 1] * np.roll(e, -1, axis=0)[:, 0]
        return bool(np.all(cross >= -1e-14))

    def as_shapely(self) -> shapely.geometry.Polygon:
        if self.kind == "disc":
            return shapely.geometry.Point(self.center).buffer(self.radius, quad_segs=1024)
        return shapely.geometry.Polygon(self.vertices)

    def boundary_points(self, n: int = 720) -> np.ndarray:
        """``n`` points along the boundary curve (polygon vertices included)."""
        if self.kind == "disc":
            a = 2 * np.pi * np.arange(n) / n
            return np.column_stack([self.center[0] + self.radius * np.cos(a),
                                    self.center[1] + self.radius * np.sin(a)])
        v = np.asarray(self.vertices)
        seg = np.linalg.norm(np.roll(v, -1, axis=0) - v, axis=1)
        out = []
        for k in range(len(v)):
            m = max(1, int(round(n * seg[k] / seg.sum())))
            s = np.arange(m)[:, None] / m
            out.append(v[k] + s * (v[(k + 1) % len(v)] - v[k]))
        return np.vstack(out)

    def contains(self, pts) -> np.ndarray:
        """Strict interior test."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        if self.kind == "disc":
            d = pts - np.asarray(self.center)
            return np.einsum("ij,ij->i", d, d) < self.radius**2
        scale = max(1.0, float(np.max(np.abs(self.vertices))))
        return _point_in_polygon(pts, np.asarray(self.vertices)) & (self.distance(pts) > 1e-12 * scale)

    def distance(self, pts) -> np.ndarray:
        """Euclidean distance to the boundary curve."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        if self.kind == "disc":
            return np.abs(np.linalg.norm(pts - np.asarray(self.center), axis=1) - self.radius)
        v = np.asarray(self.vertices)
        a, b = v, np.roll(v, -1, axis=0)
        ab = b - a
        t = np.einsum("nmk,mk->nm", pts[:, None, :] - a[None], ab) / np.einsum("mk,mk->m", ab, ab)
        t = np.clip(t, 0.0, 1.0)
        proj = a[None] + t[..., None] * ab[None]
        return np.min(np.linalg.norm(pts[:, None, :] - proj, axis=2), axis=1)

    def hit_distance(self, pts, direction: int) -> np.ndarray:
        """Distance from interior ``pts`` to the first boundary crossing along a grid direction."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        axis, sign = DIRECTIONS[direction]
        if self.kind == "disc":
            c = np.asarray(self.center)
            other = pts[:, 1 - axis] - c[1 - axis]
            half = np.sqrt(np.maximum(self.radius**2 - other**2, 0.0))
            return c[axis] + sign * half - pts[:, axis] if sign > 0 else pts[:, axis] - (c[axis] - half)
        d = np.zeros(2)
        d[axis] = sign
        v = np.asarray(self.vertices)
        a, b = v, np.roll(v, -1, axis=0)
        e = b - a
        denom = d[0] * e[:, 1] - d[1] * e[:, 0]
        rel = a[None] - pts[:, None, :]
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (rel[..., 0] * e[:, 1] - rel[..., 1] * e[:, 0]) / denom
            s = (rel[..., 0] * d[1] - rel[..., 1] * d[0]) / denom
        ok = (np.abs(denom) > 0) & (s >= 0) & (s <= 1) & (t > 0)
        t = np.where(ok, t, np.inf)
        return np.min(t, axis=1)

    def is_symmetric(self, normal, offset: float, tol: float = 1e-12) -> bool:
        """True when the domain is invariant under reflection in ``<x, normal> = offset``."""
        n = np.asarray(normal, float) / np.linalg.norm(normal)
        if self.kind == "disc":
            return abs(float(np.dot(self.center, n)) - offset) <= tol
        v = np.asarray(self.vertices)
        r = v - 2.0 * ((v @ n) - offset)[:, None] * n
        dist = np.linalg.norm(v[:, None, :] - r[None], axis=2)
        return bool(np.all(dist.min(axis=1) <= tol * max(1.0, np.abs(v).max())))

    def to_config(self) -> dict:
        if self.kind == "disc":
            return {"shape": "disc", "radius": self.radius, "center": list(self.center), "spacing": self.spacing}
        return {"shape": "polygon", "vertices": [list(p) for p in self.vertices], "spacing": self.spacing}

    @cached_property
    def grid(self) -> "Grid":
        return Grid.build(self)


def _signed_area(v: np.ndarray) -> float:
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _point_in_polygon(pts: np.ndarray, v: np.ndarray) -> np.ndarray:
    x, y = pts[:, 0:1], pts[:, 1:2]
    a, b = v[None, :, :], np.roll(v, -1, axis=0)[None, :, :]
    cond = (a[..., 1] > y) != (b[..., 1] > y)
    with np.errstate(divide="ignore", invalid="ignore"):
        xint = a[..., 0] + (y - a[..., 1]) * (b[..., 0] - a[..., 0]) / (b[..., 1] - a[..., 1])
    crossings = cond & (x < xint)
    return (np.sum(crossings, axis=1) % 2) == 1


@dataclass
class Grid:
    """Masked uniform grid with Shortley-Weller arms.

    Nodes sit at integer multiples of ``h``.  ``arm[d]`` holds, for every
    interior node, the distance to the neighbour (``h``) or to the
    boundary crossing along direction ``d``; ``nbr[d]`` is the neighbour's
    unknown index or -1 when the arm ends on the boundary.
    """

    domain: PlanarDomain
    xs: np.ndarray
    ys: np.ndarray
    mask: np.ndarray
    ids: np.ndarray
    points: np.ndarray
    ij: np.ndarray
    arm: list[np.ndarray] = field(default_factory=list)
    nbr: list[np.ndarray] = field(default_factory=list)
    bpoint: list[np.ndarray] = field(default_factory=list)

    @property
    def h(self) -> float:
        return self.domain.spacing

    @property
    def n(self) -> int:
        return len(self.points)

    @classmethod
    def build(cls, domain: PlanarDomain) -> "Grid":
        h = domain.spacing
        xmin, xmax, ymin, ymax = domain.bounds
        xs = np.arange(int(np.floor(xmin / h)) - 1, int(np.ceil(xmax / h)) + 2) * h
        ys = np.arange(int(np.floor(ymin / h)) - 1, int(np.ceil(ymax / h)) + 2) * h
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        allpts = np.column_stack([X.ravel(), Y.ravel()])
        inside = domain.contains(allpts)
        hits = np.full((4, len(allpts)), np.inf)
        for d in range(4):
            hits[d, inside] = domain.hit_distance(allpts[inside], d)
        mask_flat = inside & (np.min(hits, axis=0) >= ARM_MARGIN * h)
        mask = mask_flat.reshape(X.shape)
        n = int(mask.sum())
        if n < 2:
            raise InvalidDomain(f"grid mask has {n} interior node(s); refine the spacing")
        _, ncomp = ndimage.label(mask)
        if ncomp != 1:
            raise InvalidDomain(f"interior mask is not edge-connected ({ncomp} components)")
        ids = np.full(X.shape, -1, dtype=np.int64)
        ids[mask] = np.arange(n)
        ij = np.argwhere(mask)
        points = np.column_stack([xs[ij[:, 0]], ys[ij[:, 1]]])
        hit_int = hits[:, mask_flat]
        grid = cls(domain, xs, ys, mask, ids, points, ij)
        for d, (axis, sign) in enumerate(DIRECTIONS):
            off = np.zeros(2, dtype=np.int64)
            off[axis] = sign
            nij = ij + off
            nid = ids[nij[:, 0], nij[:, 1]]
            to_boundary = (nid < 0) | (hit_int[d] < h)
            arm = np.where(to_boundary, hit_int[d], h)
            if not np.all(np.isfinite(arm)) or np.any(arm <= 0):
                raise MaskTooThin("interior node without a complete 4-neighbour stencil")
            nid = np.where(to_boundary, -1, nid)
            bp = points.copy()
            bp[:, axis] += sign * arm
            grid.arm.append(arm)
            grid.nbr.append(nid)
            grid.bpoint.append(np.where(to_boundary[:, None], bp, np.nan))
        return grid

    @cached_property
    def boundary_layer(self) -> np.ndarray:
        """Interior nodes with at least one arm ending on the boundary."""
        return np.any(np.stack(self.nbr) < 0, axis=0)

    def boundary_trace_points(self) -> np.ndarray:
        pts = [self.bpoint[d][self.nbr[d] < 0] for d in range(4)]
        return np.vstack(pts)


@dataclass(frozen=True)
class DirichletData:
    """Boundary values ``g(x1, x2)``; ``text`` is kept for reports and configs."""

    fn: Callable[[np.ndarray, np.ndarray], np.ndarray]
    text: str = ""
    constant: float | None = None

    @classmethod
    def const(cls, c: float = 0.0) -> "DirichletData":
        c = float(c)
        return cls(lambda x1, x2: np.full(np.shape(x1), c), text=repr(c), constant=c)

    @classmethod
    def from_text(cls, text: str) -> "DirichletData":
        e = Expression(text, ("x1", "x2", "x", "y"))
        if e.is_constant():
            return cls.const(float(e(0.0, 0.0, 0.0, 0.0)))
        return cls(lambda x1, x2: e(x1, x2, x1, x2), text=text)

    @property
    def is_zero(self) -> bool:
        return self.constant == 0.0

    def __call__(self, pts) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        return np.asarray(self.fn(pts[:, 0], pts[:, 1]), dtype=float)
