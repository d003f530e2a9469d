"""Analytic obstacle worlds: spheres and axis-aligned boxes.

Distances are exact signed distances (negative inside). An empty world
reports +inf everywhere. Occlusion tests treat landmarks on an obstacle
surface as visible from the outside: the last sliver of the sight line
next to the landmark is excluded before testing penetration.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

_END_GAP = 1e-6  # fraction of the sight line excluded at the landmark end


@dataclass(frozen=True)
class Sphere:
    center: np.ndarray
    radius: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "center", np.asarray(self.center, dtype=np.float64).reshape(3))
        object.__setattr__(self, "radius", float(self.radius))
        if self.radius <= 0:
            raise ValueError("sphere radius must be positive")


@dataclass(frozen=True)
class Box:
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self) -> None:
        lo = np.asarray(self.lo, dtype=np.float64).reshape(3)
        hi = np.asarray(self.hi, dtype=np.float64).reshape(3)
        if (hi <= lo).any():
            raise ValueError("box hi must exceed lo on every axis")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)


@dataclass
class ObstacleWorld:
    spheres: list = field(default_factory=list)
    boxes: list = field(default_factory=list)

    def add_sphere(self, center, radius) -> None:
        self.spheres.append(Sphere(center, radius))

    def add_box(self, lo, hi) -> None:
        self.boxes.append(Box(lo, hi))

    @property
    def is_empty(self) -> bool:
        return not self.spheres and not self.boxes

    def distance(self, position) -> float:
        return float(self.distance_batch(np.asarray(position, dtype=np.float64).reshape(1, 3))[0])

    def distance_batch(self, points: np.ndarray) -> np.ndarray:
        """Signed distance to the nearest obstacle for each point, +inf if none."""
        points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        d = np.full(points.shape[0], np.inf)
        for s in self.spheres:
            d = np.minimum(d, np.linalg.norm(points - s.center, axis=1) - s.radius)
        for b in self.boxes:
            center = (b.lo + b.hi) / 2
            half = (b.hi - b.lo) / 2
            q = np.abs(points - center) - half
            outside = np.linalg.norm(np.maximum(q, 0.0), axis=1)
            inside = np.minimum(q.max(axis=1), 0.0)
            d = np.minimum(d, outside + inside)
        return d

    def to_dict(self) -> dict:
        return {
            "spheres": [{"center": s.center.tolist(), "radius": s.radius} for s in self.spheres],
            "boxes": [{"lo": b.lo.tolist(), "hi": b.hi.tolist()} for b in self.boxes],
        }

    @staticmethod
    def from_dict(d: dict) -> "ObstacleWorld":
        w = ObstacleWorld()
        for s in d.get("spheres", []):
            w.add_sphere(s["center"], s["radius"])
        for b in d.get("boxes", []):
            w.add_box(b["lo"], b["hi"])
        return w


def obstacle_distance(world: ObstacleWorld, position) -> float:
    return world.distance(position)


def segment_blocked(world: ObstacleWorld, start, ends: np.ndarray) -> np.ndarray:
    """Whether the sight line from start to each end point is blocked.

    Returns a bool array over ends. The interval tested is t in
    [0, 1 - _END_GAP] so an end point lying on an obstacle surface does
    not block itself.
    """
    start = np.asarray(start, dtype=np.float64).reshape(3)
    ends = np.asarray(ends, dtype=np.float64).reshape(-1, 3)
    n = ends.shape[0]
    blocked = np.zeros(n, dtype=bool)
    if world.is_empty:
        return blocked
    seg = ends - start
    t_hi = 1.0 - _END_GAP

    for s in world.spheres:
        rel = start - s.center
        a = np.einsum("ij,ij->i", seg, seg)
        b = 2.0 * seg @ rel
        # closest parameter of the infinite line, clipped to the interval
        t = np.where(a > 0, np.clip(-b / (2 * np.maximum(a, 1e-300)), 0.0, t_hi), 0.0)
        closest = start + t[:, None] * seg
        dist = np.linalg.norm(closest - s.center, axis=1)
        blocked |= dist < s.radius - 1e-9

    for bx in world.boxes:
        lo = bx.lo + 1e-9
        hi = bx.hi - 1e-9
        with np.errstate(divide="ignore", invalid="ignore"):
            inv = np.where(seg != 0.0, 1.0 / seg, np.inf)
        t0 = (lo - start) * inv
        t1 = (hi - start) * inv
        tmin = np.minimum(t0, t1)
        tmax = np.maximum(t0, t1)
        # degenerate axes: inside the slab iff start is between the faces
        flat = seg == 0.0
        inside_flat = (start >= lo) & (start <= hi)
        tmin = np.where(flat, np.where(inside_flat, -np.inf, np.inf), tmin)
        tmax = np.where(flat, np.where(inside_flat, np.inf, -np.inf), tmax)
        enter = tmin.max(axis=1)
        leave = tmax.min(axis=1)
        blocked |= (enter < leave) & (leave > 0.0) & (enter < t_hi)

    return blocked
