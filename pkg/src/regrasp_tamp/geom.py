"""Planar rigid-body geometry: poses, convex polygons and composite shapes."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from . import kernels

GEOM_EPS = 1e-9
TWO_PI = 2.0 * math.pi


def wrap_angle(theta: float) -> float:
    """Map an angle onto (-pi, pi]."""
    a = math.remainder(theta, TWO_PI)
    if a <= -math.pi:
        a += TWO_PI
    return a


@dataclass(frozen=True)
class Pose2:
    x: float = 0.0
    y: float = 0.0
    theta: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))
        object.__setattr__(self, "theta", wrap_angle(float(self.theta)))

    def __matmul__(self, other: "Pose2") -> "Pose2":
        return compose(self, other)

    def inverse(self) -> "Pose2":
        return inverse(self)

    def apply(self, points) -> np.ndarray:
        """Map body-frame points (N, 2) into this pose's parent frame."""
        pts = np.asarray(points, dtype=float)
        c, s = math.cos(self.theta), math.sin(self.theta)
        rot = np.array([[c, -s], [s, c]])
        return pts @ rot.T + np.array([self.x, self.y])

    def apply_point(self, px: float, py: float) -> tuple[float, float]:
        c, s = math.cos(self.theta), math.sin(self.theta)
        return self.x + c * px - s * py, self.y + s * px + c * py

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.x, self.y, self.theta)

    def close_to(self, other: "Pose2", tol: float = 1e-9) -> bool:
        return (
            abs(self.x - other.x) <= tol
            and abs(self.y - other.y) <= tol
            and abs(wrap_angle(self.theta - other.theta)) <= tol
        )


IDENTITY = Pose2()


def compose(a: Pose2, b: Pose2) -> Pose2:
    """Return a∘b: the pose b expressed in a's frame, mapped to a's parent."""
    c, s = math.cos(a.theta), math.sin(a.theta)
    return Pose2(a.x + c * b.x - s * b.y, a.y + s * b.x + c * b.y, a.theta + b.theta)


def inverse(p: Pose2) -> Pose2:
    c, s = math.cos(p.theta), math.sin(p.theta)
    return Pose2(-c * p.x - s * p.y, s * p.x - c * p.y, -p.theta)


def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


@dataclass(frozen=True, eq=False)
class ConvexPolygon:
    """Strictly convex polygon with counter-clockwise vertices."""

    vertices: tuple[tuple[float, float], ...]

    def __post_init__(self):
        verts = tuple((float(x), float(y)) for x, y in self.vertices)
        object.__setattr__(self, "vertices", verts)
        n = len(verts)
        if n < 3:
            raise ValueError("convex polygon needs at least 3 vertices")
        for i in range(n):
            for j in range(i + 1, n):
                if math.dist(verts[i], verts[j]) <= GEOM_EPS:
                    raise ValueError(f"duplicate vertices {i} and {j}")
        for i in range(n):
            if _cross(verts[i], verts[(i + 1) % n], verts[(i + 2) % n]) <= 0.0:
                raise ValueError("vertices must be strictly convex and counter-clockwise")

    @classmethod
    def box(cls, x0: float, y0: float, x1: float, y1: float) -> "ConvexPolygon":
        return cls(((x0, y0), (x1, y0), (x1, y1), (x0, y1)))

    @classmethod
    def hull(cls, points: Iterable[Sequence[float]]) -> "ConvexPolygon":
        """Convex hull (monotone chain) of a point cloud, collinear points dropped."""
        pts = sorted(set((float(p[0]), float(p[1])) for p in points))
        if len(pts) < 3:
            raise ValueError("hull needs at least 3 distinct points")
        lower: list = []
        for p in pts:
            while len(lower) >= 2 and _cross(lower[-2], lower[-1], p) <= 0:
                lower.pop()
            lower.append(p)
        upper: list = []
        for p in reversed(pts):
            while len(upper) >= 2 and _cross(upper[-2], upper[-1], p) <= 0:
                upper.pop()
            upper.append(p)
        return cls(tuple(lower[:-1] + upper[:-1]))

    @cached_property
    def array(self) -> np.ndarray:
        arr = np.ascontiguousarray(np.array(self.vertices, dtype=float))
        arr.setflags(write=False)
        return arr

    @cached_property
    def area(self) -> float:
        v = self.array
        x, y = v[:, 0], v[:, 1]
        return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))

    @cached_property
    def centroid(self) -> tuple[float, float]:
        v = self.array
        x, y = v[:, 0], v[:, 1]
        xn, yn = np.roll(x, -1), np.roll(y, -1)
        cr = x * yn - xn * y
        a6 = 3.0 * float(np.sum(cr))
        return float(np.sum((x + xn) * cr)) / a6, float(np.sum((y + yn) * cr)) / a6

    def transformed(self, pose: Pose2) -> "ConvexPolygon":
        return ConvexPolygon(tuple(map(tuple, pose.apply(self.array))))

    def contains(self, point, strict: bool = True, tol: float = GEOM_EPS) -> bool:
        v = self.array
        e = np.roll(v, -1, axis=0) - v
        rel = np.asarray(point, dtype=float) - v
        cross = e[:, 0] * rel[:, 1] - e[:, 1] * rel[:, 0]
        lengths = np.hypot(e[:, 0], e[:, 1])
        signed = cross / lengths
        return bool(np.all(signed > tol)) if strict else bool(np.all(signed >= -tol))

    def edges(self):
        """Yield (start, end, outward unit normal) per edge."""
        v = self.vertices
        n = len(v)
        for i in range(n):
            a, b = v[i], v[(i + 1) % n]
            dx, dy = b[0] - a[0], b[1] - a[1]
            ln = math.hypot(dx, dy)
            yield a, b, (dy / ln, -dx / ln)


@dataclass(frozen=True, eq=False)
class Shape2:
    """Union of convex parts in a common body frame with uniform areal density."""

    parts: tuple[ConvexPolygon, ...]
    density: float = 1.0
    name: str = field(default="", compare=False)

    def __post_init__(self):
        parts = tuple(self.parts)
        object.__setattr__(self, "parts", parts)
        if not parts:
            raise ValueError("shape needs at least one part")
        if self.density <= 0 or not math.isfinite(self.density):
            raise ValueError("density must be positive")
        if self.area <= 0:
            raise ValueError("shape area must be positive")

    @cached_property
    def area(self) -> float:
        return sum(p.area for p in self.parts)

    @cached_property
    def mass(self) -> float:
        return self.density * self.area

    @cached_property
    def vertex_array(self) -> np.ndarray:
        return np.concatenate([p.array for p in self.parts], axis=0)

    @cached_property
    def local_bounds(self) -> tuple[float, float, float, float]:
        v = self.vertex_array
        return float(v[:, 0].min()), float(v[:, 1].min()), float(v[:, 0].max()), float(v[:, 1].max())

    @cached_property
    def radius(self) -> float:
        """Largest distance of any vertex from the body origin."""
        return float(np.max(np.hypot(self.vertex_array[:, 0], self.vertex_array[:, 1])))

    def world_parts(self, pose: Pose2) -> list[np.ndarray]:
        c, s = math.cos(pose.theta), math.sin(pose.theta)
        rot = np.array([[c, s], [-s, c]])
        t = np.array([pose.x, pose.y])
        return [np.ascontiguousarray(p.array @ rot + t) for p in self.parts]

    def transformed(self, pose: Pose2) -> "Shape2":
        return Shape2(tuple(p.transformed(pose) for p in self.parts), self.density, self.name)

    def bottom_offset(self, theta: float) -> float:
        """Lowest body-frame vertex height after rotating by theta."""
        v = self.vertex_array
        return float(np.min(math.sin(theta) * v[:, 0] + math.cos(theta) * v[:, 1]))

    def world_bounds(self, pose: Pose2) -> tuple[float, float, float, float]:
        pts = pose.apply(self.vertex_array)
        return float(pts[:, 0].min()), float(pts[:, 1].min()), float(pts[:, 0].max()), float(pts[:, 1].max())

    def contains(self, point, strict: bool = True) -> bool:
        return any(p.contains(point, strict=strict) for p in self.parts)


def centroid_and_mass(s: Shape2) -> tuple[tuple[float, float], float]:
    """Area-weighted centroid of the parts and total mass."""
    total = s.area
    cx = sum(p.area * p.centroid[0] for p in s.parts) / total
    cy = sum(p.area * p.centroid[1] for p in s.parts) / total
    return (cx, cy), s.mass


def shapes_intersect(s1: Shape2, pose1: Pose2, s2: Shape2, pose2: Pose2, margin: float = 0.0) -> bool:
    """True iff some part pair is separated by less than ``margin``.

    With ``margin == 0`` this is a strict overlap test: touching boundaries
    do not count.
    """
    if margin < 0:
        raise ValueError("margin must be non-negative")
    return kernels.parts_collide(s1.world_parts(pose1), s2.world_parts(pose2), margin, GEOM_EPS)


def box_shape(width: float, height: float, density: float = 1.0, x0: float = 0.0, y0: float = 0.0, name: str = "") -> Shape2:
    return Shape2((ConvexPolygon.box(x0, y0, x0 + width, y0 + height),), density, name)
