"""RECIST annotations and their quarter-ellipse pseudo masks.

Coordinates are continuous image pixels with x to the right and y down.
Integer pixel ``(i, j)`` covers ``[i, i+1) x [j, j+1)`` and its center is
``(i + 0.5, j + 0.5)``.

Pixel membership is evaluated in a local frame anchored at an integer pixel
near the annotation, so shifting all endpoints by an integer vector shifts
the rasterized mask by exactly that vector.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import DegenerateArm, InvalidRecist, ParallelDiameters, ZeroLengthDiameter

# Geometric degeneracy tolerance, in pixels (or unit-vector cross product).
EPS = 1e-6


class Point2(NamedTuple):
    x: float
    y: float


def _as_point(p) -> Point2:
    x, y = float(p[0]), float(p[1])
    if not (math.isfinite(x) and math.isfinite(y)):
        raise InvalidRecist(f"non-finite coordinate {p!r}")
    return Point2(x, y)


def _cross(ax: float, ay: float, bx: float, by: float) -> float:
    return ax * by - ay * bx


@dataclass(frozen=True)
class RecistAnnotation:
    """Long and short RECIST diameters, each given by two endpoints.

    Build instances with :func:`normalize_recist` (or
    :meth:`from_segments`), which orders the diameters and their endpoints
    canonically so that relabeled inputs give identical annotations.
    """

    long_p1: Point2
    long_p2: Point2
    short_p1: Point2
    short_p2: Point2

    def __post_init__(self):
        if self.short_length < EPS:
            raise ZeroLengthDiameter("short diameter has zero length")
        if self.long_length < self.short_length:
            raise InvalidRecist("long diameter is shorter than short diameter")
        if abs(_unit_cross(self.long_p1, self.long_p2, self.short_p1, self.short_p2)) < EPS:
            raise ParallelDiameters("diameters are parallel")

    @classmethod
    def from_segments(cls, p1a, p1b, p2a, p2b) -> "RecistAnnotation":
        return normalize_recist(p1a, p1b, p2a, p2b)

    @property
    def long_length(self) -> float:
        return math.hypot(self.long_p2.x - self.long_p1.x, self.long_p2.y - self.long_p1.y)

    @property
    def short_length(self) -> float:
        return math.hypot(self.short_p2.x - self.short_p1.x, self.short_p2.y - self.short_p1.y)

    def endpoints(self) -> tuple[Point2, Point2, Point2, Point2]:
        return (self.long_p1, self.long_p2, self.short_p1, self.short_p2)

    def anchor(self) -> tuple[int, int]:
        """Integer pixel used as the origin of the local evaluation frame."""
        return math.floor(self.long_p1.x), math.floor(self.long_p1.y)

    def shifted(self, dx: float, dy: float) -> "RecistAnnotation":
        return RecistAnnotation(*(Point2(p.x + dx, p.y + dy) for p in self.endpoints()))


def _unit_cross(a1: Point2, a2: Point2, b1: Point2, b2: Point2) -> float:
    dx, dy = a2.x - a1.x, a2.y - a1.y
    ex, ey = b2.x - b1.x, b2.y - b1.y
    return _cross(dx, dy, ex, ey) / (math.hypot(dx, dy) * math.hypot(ex, ey))


def normalize_recist(p1a, p1b, p2a, p2b) -> RecistAnnotation:
    """Order two measured segments into a :class:`RecistAnnotation`.

    The longer segment becomes the long diameter. Within each diameter the
    lexicographically smaller endpoint comes first; equal-length segments are
    ordered the same way. Raises :class:`ZeroLengthDiameter` or
    :class:`ParallelDiameters` for degenerate input.
    """
    seg1 = tuple(sorted((_as_point(p1a), _as_point(p1b))))
    seg2 = tuple(sorted((_as_point(p2a), _as_point(p2b))))
    len1 = math.hypot(seg1[1].x - seg1[0].x, seg1[1].y - seg1[0].y)
    len2 = math.hypot(seg2[1].x - seg2[0].x, seg2[1].y - seg2[0].y)
    if len1 < EPS or len2 < EPS:
        raise ZeroLengthDiameter(f"diameter lengths {len1:g} and {len2:g} px")
    if abs(_unit_cross(*seg1, *seg2)) < EPS:
        raise ParallelDiameters("diameters are parallel")
    if len2 > len1 or (len2 == len1 and seg2 < seg1):
        seg1, seg2 = seg2, seg1
    return RecistAnnotation(seg1[0], seg1[1], seg2[0], seg2[1])


def _local_endpoints(r: RecistAnnotation) -> list[tuple[float, float]]:
    ax, ay = r.anchor()
    return [(p.x - ax, p.y - ay) for p in r.endpoints()]


def _crossing(pts: Sequence[tuple[float, float]]) -> tuple[float, float, float, float]:
    """Return (t, s, cx, cy): line parameters on each diameter and the crossing point."""
    (x1, y1), (x2, y2), (x3, y3), (x4, y4) = pts
    dx, dy = x2 - x1, y2 - y1
    ex, ey = x4 - x3, y4 - y3
    denom = _cross(dx, dy, ex, ey)
    wx, wy = x3 - x1, y3 - y1
    t = _cross(wx, wy, ex, ey) / denom
    s = _cross(wx, wy, dx, dy) / denom
    return t, s, x1 + t * dx, y1 + t * dy


def crossing_parameters(r: RecistAnnotation) -> tuple[float, float]:
    """Position of the crossing point along each diameter (0..1 means on the segment)."""
    t, s, _, _ = _crossing(_local_endpoints(r))
    return t, s


def diameter_center(r: RecistAnnotation) -> Point2:
    """Intersection of the infinite lines through both diameters."""
    ax, ay = r.anchor()
    _, _, cx, cy = _crossing(_local_endpoints(r))
    return Point2(cx + ax, cy + ay)


@dataclass(frozen=True)
class QuarterRegion:
    """The set ``{center + u*arm_a + v*arm_b : u, v >= 0, u^2 + v^2 <= 1}``.

    ``anchor`` is an integer pixel offset and ``local_center`` the center
    relative to it; membership tests work in that local frame.
    """

    anchor: tuple[int, int]
    local_center: tuple[float, float]
    arm_a: tuple[float, float]
    arm_b: tuple[float, float]

    @property
    def center(self) -> Point2:
        return Point2(self.local_center[0] + self.anchor[0], self.local_center[1] + self.anchor[1])

    @property
    def determinant(self) -> float:
        return _cross(*self.arm_a, *self.arm_b)

    def _uv_local(self, dx, dy):
        (ax, ay), (bx, by) = self.arm_a, self.arm_b
        det = ax * by - ay * bx
        u = (dx * by - dy * bx) / det
        v = (ax * dy - ay * dx) / det
        return u, v

    def coordinates(self, x, y):
        """Solve ``p - center = u*arm_a + v*arm_b`` for image points (x, y)."""
        dx = (np.asarray(x, dtype=float) - self.anchor[0]) - self.local_center[0]
        dy = (np.asarray(y, dtype=float) - self.anchor[1]) - self.local_center[1]
        return self._uv_local(dx, dy)

    def contains(self, x, y):
        u, v = self.coordinates(x, y)
        return (u >= 0) & (v >= 0) & (u * u + v * v <= 1)

    def pixel_membership(self, ix0: int, iy0: int, width: int, height: int) -> np.ndarray:
        """Boolean (height, width) grid: pixel center of (ix0+i, iy0+j) lies in the region."""
        cols = np.arange(width, dtype=float) + float(ix0 - self.anchor[0]) + 0.5
        rows = np.arange(height, dtype=float) + float(iy0 - self.anchor[1]) + 0.5
        dx = cols[None, :] - self.local_center[0]
        dy = rows[:, None] - self.local_center[1]
        u, v = self._uv_local(dx, dy)
        return (u >= 0) & (v >= 0) & (u * u + v * v <= 1)

    def extent(self) -> tuple[float, float, float, float]:
        """Exact (x_min, y_min, x_max, y_max) of the region in image coordinates."""
        lo, hi = [], []
        for k in range(2):
            a, b = self.arm_a[k], self.arm_b[k]
            c = self.local_center[k] + self.anchor[k]
            hi.append(c + math.hypot(max(a, 0.0), max(b, 0.0)))
            lo.append(c - math.hypot(max(-a, 0.0), max(-b, 0.0)))
        return lo[0], lo[1], hi[0], hi[1]

    def pixel_window(self) -> tuple[int, int, int, int]:
        """Integer (x0, y0, x1, y1) pixel window, end-exclusive, with a 1 px margin."""
        x_min, y_min, x_max, y_max = self.extent()
        return (
            math.floor(x_min) - 1,
            math.floor(y_min) - 1,
            math.ceil(x_max) + 1,
            math.ceil(y_max) + 1,
        )


def quarter_regions(r: RecistAnnotation) -> list[QuarterRegion]:
    """The four quarter regions pairing each long endpoint with each short endpoint.

    Order: (long_p1, short_p1), (long_p1, short_p2), (long_p2, short_p1),
    (long_p2, short_p2).
    """
    anchor = r.anchor()
    pts = _local_endpoints(r)
    _, _, cx, cy = _crossing(pts)
    arms = []
    for px, py in pts:
        arm = (px - cx, py - cy)
        if math.hypot(*arm) < EPS:
            raise DegenerateArm(f"endpoint ({px + anchor[0]}, {py + anchor[1]}) lies on the crossing point")
        arms.append(arm)
    la1, la2, sa1, sa2 = arms
    return [
        QuarterRegion(anchor, (cx, cy), a, b)
        for a in (la1, la2)
        for b in (sa1, sa2)
    ]


@dataclass(frozen=True, eq=False)
class BinaryMask:
    """Boolean pixel grid placed at integer offset (origin_x, origin_y) in the image.

    ``bits`` has shape (height, width), row-major, and is made read-only.
    """

    origin_x: int
    origin_y: int
    bits: np.ndarray

    def __post_init__(self):
        bits = np.array(self.bits, dtype=bool, copy=True)
        if bits.ndim != 2 or bits.shape[0] <= 0 or bits.shape[1] <= 0:
            raise ValueError(f"mask bits must be a non-empty 2-D grid, got shape {bits.shape}")
        bits.setflags(write=False)
        object.__setattr__(self, "bits", bits)
        object.__setattr__(self, "origin_x", int(self.origin_x))
        object.__setattr__(self, "origin_y", int(self.origin_y))

    @classmethod
    def zeros(cls, origin_x: int, origin_y: int, width: int, height: int) -> "BinaryMask":
        return cls(origin_x, origin_y, np.zeros((height, width), dtype=bool))

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    def area(self) -> int:
        return int(np.count_nonzero(self.bits))

    def window(self) -> tuple[int, int, int, int]:
        return self.origin_x, self.origin_y, self.origin_x + self.width, self.origin_y + self.height

    def translated(self, dx: int, dy: int) -> "BinaryMask":
        return BinaryMask(self.origin_x + dx, self.origin_y + dy, self.bits)

    def pixels(self) -> set[tuple[int, int]]:
        """Set of (x, y) image pixels that are on."""
        ys, xs = np.nonzero(self.bits)
        return set(zip((xs + self.origin_x).tolist(), (ys + self.origin_y).tolist()))

    def crop(self, x0: int, y0: int, x1: int, y1: int) -> np.ndarray:
        """Bits on the image window [x0, x1) x [y0, y1); outside pixels read as off."""
        out = np.zeros((y1 - y0, x1 - x0), dtype=bool)
        sx0, sy0 = max(x0, self.origin_x), max(y0, self.origin_y)
        sx1, sy1 = min(x1, self.origin_x + self.width), min(y1, self.origin_y + self.height)
        if sx0 < sx1 and sy0 < sy1:
            out[sy0 - y0:sy1 - y0, sx0 - x0:sx1 - x0] = self.bits[
                sy0 - self.origin_y:sy1 - self.origin_y, sx0 - self.origin_x:sx1 - self.origin_x
            ]
        return out

    def union(self, other: "BinaryMask") -> "BinaryMask":
        x0 = min(self.origin_x, other.origin_x)
        y0 = min(self.origin_y, other.origin_y)
        x1 = max(self.origin_x + self.width, other.origin_x + other.width)
        y1 = max(self.origin_y + self.height, other.origin_y + other.height)
        return BinaryMask(x0, y0, self.crop(x0, y0, x1, y1) | other.crop(x0, y0, x1, y1))

    def tight_bounds(self) -> tuple[int, int, int, int] | None:
        """Pixel-edge bounds (x_min, y_min, x_max, y_max) of the on pixels, or None."""
        ys, xs = np.nonzero(self.bits)
        if xs.size == 0:
            return None
        return (
            self.origin_x + int(xs.min()),
            self.origin_y + int(ys.min()),
            self.origin_x + int(xs.max()) + 1,
            self.origin_y + int(ys.max()) + 1,
        )

    def __eq__(self, other):
        if not isinstance(other, BinaryMask):
            return NotImplemented
        return (
            self.origin_x == other.origin_x
            and self.origin_y == other.origin_y
            and self.bits.shape == other.bits.shape
            and bool(np.array_equal(self.bits, other.bits))
        )

    __hash__ = None

    def __repr__(self):
        return (
            f"BinaryMask(origin=({self.origin_x}, {self.origin_y}), "
            f"size={self.width}x{self.height}, area={self.area()})"
        )


def mask_area(m: BinaryMask) -> int:
    return m.area()


def _joint_window(regions: Iterable[QuarterRegion]) -> tuple[int, int, int, int]:
    wins = [q.pixel_window() for q in regions]
    return (
        min(w[0] for w in wins),
        min(w[1] for w in wins),
        max(w[2] for w in wins),
        max(w[3] for w in wins),
    )


def rasterize_region(q: QuarterRegion) -> BinaryMask:
    """Rasterize a single quarter region on its own bounding window."""
    x0, y0, x1, y1 = q.pixel_window()
    return BinaryMask(x0, y0, q.pixel_membership(x0, y0, x1 - x0, y1 - y0))


def rasterize_regions(regions: Sequence[QuarterRegion]) -> BinaryMask:
    """Union of regions on their joint bounding window (1 px margin)."""
    x0, y0, x1, y1 = _joint_window(regions)
    w, h = x1 - x0, y1 - y0
    bits = np.zeros((h, w), dtype=bool)
    for q in regions:
        bits |= q.pixel_membership(x0, y0, w, h)
    return BinaryMask(x0, y0, bits)


def rasterize_pseudo_mask(r: RecistAnnotation) -> BinaryMask:
    """Pseudo mask of a lesion: pixels whose centers lie in any of the four quarters."""
    return rasterize_regions(quarter_regions(r))


def perpendicular_recist(
    center: tuple[float, float],
    angle: float,
    arms: tuple[float, float, float, float],
) -> RecistAnnotation:
    """Build a RECIST cross from a center, long-axis angle (radians) and arm lengths.

    ``arms = (a1, a2, b1, b2)``: a1/a2 run along +/- the long axis and b1/b2
    along +/- the perpendicular axis.
    """
    a1, a2, b1, b2 = arms
    cx, cy = center
    ux, uy = math.cos(angle), math.sin(angle)
    vx, vy = -uy, ux
    return normalize_recist(
        (cx + a1 * ux, cy + a1 * uy),
        (cx - a2 * ux, cy - a2 * uy),
        (cx + b1 * vx, cy + b1 * vy),
        (cx - b2 * vx, cy - b2 * vy),
    )
