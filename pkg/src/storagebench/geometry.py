"""Pixel-space geometric primitives: polygons, boxes, IoU, simplification, directions.

Screen coordinates throughout: x grows to the right, y grows downward, so the
top-left corner of an image is (0, 0) and "below" means larger y.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple, Sequence, Union

import numpy as np

from .errors import (
    DegenerateResultError,
    InvalidGeometryError,
    UndefinedDirectionError,
)

# Rasterization limits: fall back to a 512x512 grid when no image frame is
# bound, never allocate more than a 2048-per-side grid.
UNBOUND_GRID = 512
MAX_GRID = 2048


class Point(NamedTuple):
    x: float
    y: float


class Direction(str, Enum):
    """Eight compass-style relations, named from the perspective of the
    moved-to point: ``direction_and_distance(a, b)`` reports where ``b``
    sits relative to ``a``."""

    LEFT_OF = "left-of"
    RIGHT_OF = "right-of"
    ABOVE = "above"
    BELOW = "below"
    TOP_LEFT_OF = "top-left-of"
    TOP_RIGHT_OF = "top-right-of"
    BOTTOM_LEFT_OF = "bottom-left-of"
    BOTTOM_RIGHT_OF = "bottom-right-of"


# Sector index (angle / 45 degrees, screen coords) -> direction. Diagonals
# sit at odd indices; boundary angles round toward them.
_SECTORS = (
    Direction.RIGHT_OF,
    Direction.BOTTOM_RIGHT_OF,
    Direction.BELOW,
    Direction.BOTTOM_LEFT_OF,
    Direction.LEFT_OF,
    Direction.TOP_LEFT_OF,
    Direction.ABOVE,
    Direction.TOP_RIGHT_OF,
)


@dataclass(frozen=True)
class BBox:
    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise InvalidGeometryError(
                f"degenerate bbox [{self.x_min}, {self.y_min}, {self.x_max}, {self.y_max}]"
            )

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def center(self) -> Point:
        return Point((self.x_min + self.x_max) / 2, (self.y_min + self.y_max) / 2)

    def as_polygon(self) -> "Polygon":
        return Polygon(
            (
                Point(self.x_min, self.y_min),
                Point(self.x_max, self.y_min),
                Point(self.x_max, self.y_max),
                Point(self.x_min, self.y_max),
            )
        )

    def to_list(self) -> list[float]:
        return [self.x_min, self.y_min, self.x_max, self.y_max]


@dataclass(frozen=True)
class Polygon:
    vertices: tuple[Point, ...]

    def __post_init__(self):
        if len(self.vertices) < 3:
            raise InvalidGeometryError(
                f"polygon needs at least 3 vertices, got {len(self.vertices)}"
            )
        pts = tuple(Point(float(p[0]), float(p[1])) for p in self.vertices)
        for a, b in zip(pts, pts[1:] + pts[:1]):
            if a == b:
                raise InvalidGeometryError(f"consecutive duplicate vertex {a}")
        object.__setattr__(self, "vertices", pts)

    @classmethod
    def from_points(cls, points: Sequence[Sequence[float]]) -> "Polygon":
        """Build from raw [[x, y], ...] data, dropping a closing duplicate vertex."""
        pts = [Point(float(x), float(y)) for x, y in points]
        if len(pts) > 1 and pts[0] == pts[-1]:
            pts = pts[:-1]
        return cls(tuple(pts))

    @property
    def bbox(self) -> BBox:
        xs = [p.x for p in self.vertices]
        ys = [p.y for p in self.vertices]
        return BBox(min(xs), min(ys), max(xs), max(ys))

    def perimeter(self) -> float:
        pts = self.vertices
        return sum(math.dist(a, b) for a, b in zip(pts, pts[1:] + pts[:1]))

    def translated(self, dx: float, dy: float) -> "Polygon":
        return Polygon(tuple(Point(p.x + dx, p.y + dy) for p in self.vertices))

    def to_list(self) -> list[list[float]]:
        return [[p.x, p.y] for p in self.vertices]


Region = Union[Polygon, BBox]


def polygon_area(polygon: Polygon) -> float:
    """Absolute shoelace area; independent of vertex orientation."""
    pts = polygon.vertices
    acc = 0.0
    for a, b in zip(pts, pts[1:] + pts[:1]):
        acc += a.x * b.y - b.x * a.y
    return abs(acc) / 2.0


def centroid(polygon: Polygon) -> Point:
    """Area-weighted polygon centroid.

    Raises InvalidGeometryError for zero-area (degenerate) polygons.
    """
    pts = polygon.vertices
    acc = 0.0
    cx = 0.0
    cy = 0.0
    for a, b in zip(pts, pts[1:] + pts[:1]):
        cross = a.x * b.y - b.x * a.y
        acc += cross
        cx += (a.x + b.x) * cross
        cy += (a.y + b.y) * cross
    if acc == 0.0:
        raise InvalidGeometryError("centroid of zero-area polygon is undefined")
    return Point(cx / (3.0 * acc), cy / (3.0 * acc))


def direction_and_distance(origin: Point, target: Point) -> tuple[Direction, float]:
    """Where ``target`` lies relative to ``origin``, plus Euclidean distance.

    The angle is binned into eight 45-degree sectors centered on the compass
    axes (screen coordinates, y down). A point exactly on a 22.5-degree
    sector boundary rounds toward the diagonal sector.
    """
    dx = target.x - origin.x
    dy = target.y - origin.y
    if dx == 0.0 and dy == 0.0:
        raise UndefinedDirectionError("direction between identical points is undefined")
    angle = math.degrees(math.atan2(dy, dx)) % 360.0
    scaled = angle / 45.0
    lo = int(math.floor(scaled)) % 8
    hi = (lo + 1) % 8
    frac = scaled - math.floor(scaled)
    if frac > 0.5:
        idx = hi
    elif frac < 0.5:
        idx = lo
    else:
        idx = lo if lo % 2 == 1 else hi  # boundary: prefer the diagonal sector
    return _SECTORS[idx], math.hypot(dx, dy)


def bbox_gap(a: BBox, b: BBox) -> float:
    """Minimum distance between two boxes; 0 when they touch or overlap."""
    dx = max(a.x_min - b.x_max, b.x_min - a.x_max, 0.0)
    dy = max(a.y_min - b.y_max, b.y_min - a.y_max, 0.0)
    return math.hypot(dx, dy)


def _validate_region(region: Region) -> None:
    if isinstance(region, Polygon):
        if polygon_area(region) <= 0.0:
            raise InvalidGeometryError("zero-area polygon region")
    # BBox validity is enforced at construction.


def _bbox_iou(a: BBox, b: BBox) -> float:
    ix = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    iy = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    if ix <= 0.0 or iy <= 0.0:
        return 0.0
    inter = ix * iy
    return inter / (a.area + b.area - inter)


def rasterize(
    region: Region,
    x0: float,
    y0: float,
    cell_w: float,
    cell_h: float,
    grid_w: int,
    grid_h: int,
) -> np.ndarray:
    """Even-odd scanline rasterization onto a grid of cell centers.

    A cell belongs to the region iff its center lies inside (crossing-number
    rule). Returns a boolean (grid_h, grid_w) mask.
    """
    polygon = region.as_polygon() if isinstance(region, BBox) else region
    verts = np.asarray(polygon.vertices, dtype=np.float64)
    x1s = verts[:, 0]
    y1s = verts[:, 1]
    x2s = np.roll(x1s, -1)
    y2s = np.roll(y1s, -1)
    keep = y1s != y2s  # horizontal edges never cross a scanline
    x1s, y1s, x2s, y2s = x1s[keep], y1s[keep], x2s[keep], y2s[keep]

    centers_x = x0 + (np.arange(grid_w) + 0.5) * cell_w
    centers_y = y0 + (np.arange(grid_h) + 0.5) * cell_h
    mask = np.zeros((grid_h, grid_w), dtype=bool)
    if x1s.size == 0:
        return mask

    lo_y = np.minimum(y1s, y2s)
    hi_y = np.maximum(y1s, y2s)
    slopes = (x2s - x1s) / (y2s - y1s)
    for row, cy in enumerate(centers_y):
        crossing = (lo_y <= cy) & (cy < hi_y)  # half-open: shared vertices count once
        if not crossing.any():
            continue
        xs = x1s[crossing] + (cy - y1s[crossing]) * slopes[crossing]
        xs.sort()
        mask[row] = np.searchsorted(xs, centers_x, side="right") % 2 == 1
    return mask


def _raster_grid(
    a: Region, b: Region, image_size: tuple[int, int] | None
) -> tuple[float, float, float, float, int, int]:
    """Shared grid spec (origin, cell size, cell counts) for a pair of regions."""
    if image_size is not None:
        width, height = image_size
        if width <= 0 or height <= 0:
            raise InvalidGeometryError(f"bad image size {width}x{height}")
        scale = min(1.0, MAX_GRID / max(width, height))
        grid_w = max(1, round(width * scale))
        grid_h = max(1, round(height * scale))
        return 0.0, 0.0, width / grid_w, height / grid_h, grid_w, grid_h
    boxes = [r.bbox if isinstance(r, Polygon) else r for r in (a, b)]
    x0 = min(box.x_min for box in boxes)
    y0 = min(box.y_min for box in boxes)
    x1 = max(box.x_max for box in boxes)
    y1 = max(box.y_max for box in boxes)
    return x0, y0, (x1 - x0) / UNBOUND_GRID, (y1 - y0) / UNBOUND_GRID, UNBOUND_GRID, UNBOUND_GRID


def iou(a: Region, b: Region, image_size: tuple[int, int] | None = None) -> float:
    """Intersection over union of two regions, in [0, 1].

    Axis-aligned box pairs use the exact analytic formula. Any pair involving
    a polygon rasterizes both regions onto a shared grid (the image frame at
    source resolution when ``image_size`` is given, otherwise a 512x512 grid
    over the joint extent) and counts cells.
    """
    _validate_region(a)
    _validate_region(b)
    if isinstance(a, BBox) and isinstance(b, BBox):
        return _bbox_iou(a, b)
    x0, y0, cw, ch, gw, gh = _raster_grid(a, b, image_size)
    mask_a = rasterize(a, x0, y0, cw, ch, gw, gh)
    mask_b = rasterize(b, x0, y0, cw, ch, gw, gh)
    union = np.count_nonzero(mask_a | mask_b)
    if union == 0:
        return 0.0
    return np.count_nonzero(mask_a & mask_b) / union


def _perpendicular_distance(p: Point, a: Point, b: Point) -> float:
    if a == b:
        return math.dist(p, a)
    n = abs((b.x - a.x) * (a.y - p.y) - (a.x - p.x) * (b.y - a.y))
    return n / math.dist(a, b)


def _rdp_chain(points: list[Point], tolerance: float) -> list[Point]:
    """Iterative Ramer-Douglas-Peucker on an open chain; keeps both endpoints."""
    n = len(points)
    keep = [False] * n
    keep[0] = keep[-1] = True
    stack = [(0, n - 1)]
    while stack:
        first, last = stack.pop()
        max_dist = tolerance
        index = None
        for i in range(first + 1, last):
            d = _perpendicular_distance(points[i], points[first], points[last])
            if d > max_dist:
                index = i
                max_dist = d
        if index is not None:
            keep[index] = True
            stack.append((first, index))
            stack.append((index, last))
    return [p for p, k in zip(points, keep) if k]


def _farthest_pair(points: Sequence[Point]) -> tuple[int, int]:
    best = (0, 1)
    best_d = -1.0
    for i in range(len(points)):
        for j in range(i + 1, len(points)):
            d = math.dist(points[i], points[j])
            if d > best_d:
                best_d = d
                best = (i, j)
    return best


def simplify_rdp(polygon: Polygon, epsilon_fraction: float = 0.02) -> Polygon:
    """Ramer-Douglas-Peucker simplification of a closed polygon.

    Tolerance is ``epsilon_fraction`` times the closed perimeter. The ring is
    split at its two farthest-apart vertices (which are always kept) and each
    open chain is simplified independently, so every removed vertex lies
    within tolerance of the output boundary.
    """
    if epsilon_fraction <= 0.0:
        raise ValueError("epsilon_fraction must be positive")
    tolerance = epsilon_fraction * polygon.perimeter()
    pts = list(polygon.vertices)
    i, j = _farthest_pair(pts)
    ring = pts[i:] + pts[:i]  # rotate so anchor i is first
    split = j - i
    chain_a = ring[: split + 1]
    chain_b = ring[split:] + [ring[0]]
    kept = _rdp_chain(chain_a, tolerance)[:-1] + _rdp_chain(chain_b, tolerance)[:-1]
    # Removing vertices can make formerly non-adjacent duplicates adjacent.
    deduped: list[Point] = []
    for p in kept:
        if not deduped or p != deduped[-1]:
            deduped.append(p)
    if len(deduped) > 1 and deduped[0] == deduped[-1]:
        deduped.pop()
    kept = deduped
    if len(kept) < 3:
        raise DegenerateResultError(
            f"simplification collapsed polygon to {len(kept)} vertices"
        )
    return Polygon(tuple(kept))
