"""Planar poses, object footprints and pairwise collision predicates.

Two footprint families are supported: discs and (rotatable) rectangles.
Overlap is strict: two footprints collide only when they penetrate by more
than ``EPS``, so touching objects are legal neighbours.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

EPS = 1e-9
TWO_PI = 2.0 * math.pi


def normalize_angle(theta: float) -> float:
    t = math.fmod(theta, TWO_PI)
    if t < 0.0:
        t += TWO_PI
    # fmod of values just below 0 can round up to exactly 2*pi
    return 0.0 if t >= TWO_PI else t


@dataclass(frozen=True)
class Pose:
    x: float
    y: float
    theta: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y) and math.isfinite(self.theta)):
            raise ValueError(f"non-finite pose {self.x}, {self.y}, {self.theta}")
        object.__setattr__(self, "theta", normalize_angle(self.theta))

    def as_list(self) -> list[float]:
        return [self.x, self.y, self.theta]


@dataclass(frozen=True)
class Disc:
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("disc radius must be positive")

    @property
    def area(self) -> float:
        return math.pi * self.radius * self.radius

    def half_extents(self, theta: float) -> tuple[float, float]:
        return self.radius, self.radius


@dataclass(frozen=True)
class Rect:
    width: float
    height: float

    def __post_init__(self):
        if not (self.width > 0 and self.height > 0):
            raise ValueError("rectangle dimensions must be positive")

    @property
    def area(self) -> float:
        return self.width * self.height

    def half_extents(self, theta: float) -> tuple[float, float]:
        """Half-size of the axis-aligned bounding box when rotated by theta."""
        c, s = abs(math.cos(theta)), abs(math.sin(theta))
        hw, hh = 0.5 * self.width, 0.5 * self.height
        return hw * c + hh * s, hw * s + hh * c


Shape = Union[Disc, Rect]


@dataclass(frozen=True)
class Workspace:
    width: float
    height: float

    def __post_init__(self):
        if not (self.width > 0 and self.height > 0):
            raise ValueError("workspace dimensions must be positive")

    @property
    def area(self) -> float:
        return self.width * self.height


class CheckCounter:
    """Counts pairwise collision queries made within one solve."""

    __slots__ = ("count",)

    def __init__(self, count: int = 0):
        self.count = count

    def add(self, k: int = 1) -> None:
        self.count += k

    def __repr__(self) -> str:
        return f"CheckCounter({self.count})"


def rect_corners(rect: Rect, pose: Pose) -> list[tuple[float, float]]:
    c, s = math.cos(pose.theta), math.sin(pose.theta)
    hw, hh = 0.5 * rect.width, 0.5 * rect.height
    pts = []
    for dx, dy in ((-hw, -hh), (hw, -hh), (hw, hh), (-hw, hh)):
        pts.append((pose.x + c * dx - s * dy, pose.y + s * dx + c * dy))
    return pts


def _rect_axes(pose: Pose) -> tuple[tuple[float, float], tuple[float, float]]:
    c, s = math.cos(pose.theta), math.sin(pose.theta)
    return (c, s), (-s, c)


def _disc_disc(ra: float, pa: Pose, rb: float, pb: Pose) -> bool:
    dx, dy = pa.x - pb.x, pa.y - pb.y
    return math.hypot(dx, dy) < ra + rb - EPS


def _rect_rect(a: Rect, pa: Pose, b: Rect, pb: Pose) -> bool:
    ca, cb = rect_corners(a, pa), rect_corners(b, pb)
    for ax, ay in _rect_axes(pa) + _rect_axes(pb):
        pa_ = [x * ax + y * ay for x, y in ca]
        pb_ = [x * ax + y * ay for x, y in cb]
        overlap = min(max(pa_), max(pb_)) - max(min(pa_), min(pb_))
        if overlap <= EPS:
            return False
    return True


def _disc_rect(r: float, pd: Pose, rect: Rect, pr: Pose) -> bool:
    # disc centre in the rectangle frame
    c, s = math.cos(pr.theta), math.sin(pr.theta)
    dx, dy = pd.x - pr.x, pd.y - pr.y
    lx, ly = c * dx + s * dy, -s * dx + c * dy
    hw, hh = 0.5 * rect.width, 0.5 * rect.height
    qx = min(max(lx, -hw), hw)
    qy = min(max(ly, -hh), hh)
    if qx == lx and qy == ly:
        # centre inside the rectangle: penetration is at least r
        return True
    return math.hypot(lx - qx, ly - qy) < r - EPS


def collides(shape_a: Shape, pose_a: Pose, shape_b: Shape, pose_b: Pose,
             counter: CheckCounter | None = None) -> bool:
    """True iff the two placed footprints overlap by more than EPS."""
    if counter is not None:
        counter.count += 1
    if isinstance(shape_a, Disc):
        if isinstance(shape_b, Disc):
            return _disc_disc(shape_a.radius, pose_a, shape_b.radius, pose_b)
        return _disc_rect(shape_a.radius, pose_a, shape_b, pose_b)
    if isinstance(shape_b, Disc):
        return _disc_rect(shape_b.radius, pose_b, shape_a, pose_a)
    return _rect_rect(shape_a, pose_a, shape_b, pose_b)


def contained(shape: Shape, pose: Pose, ws: Workspace) -> bool:
    """True iff the footprint lies inside the workspace; boundary contact is allowed."""
    if isinstance(shape, Disc):
        ex = ey = shape.radius
    else:
        ex, ey = shape.half_extents(pose.theta)
    return (pose.x - ex >= -EPS and pose.x + ex <= ws.width + EPS
            and pose.y - ey >= -EPS and pose.y + ey <= ws.height + EPS)


def bounding_radius(shape: Shape) -> float:
    if isinstance(shape, Disc):
        return shape.radius
    return 0.5 * math.hypot(shape.width, shape.height)


def same_pose(shape: Shape, a: Pose, b: Pose, tol: float = 1e-6) -> bool:
    """Pose equality up to tol; orientation is ignored for discs."""
    if abs(a.x - b.x) > tol or abs(a.y - b.y) > tol:
        return False
    if isinstance(shape, Disc):
        return True
    d = abs(a.theta - b.theta)
    return min(d, TWO_PI - d) <= tol
