"""Bounding boxes to points on a single vehicle-centred polar plane.

Image convention: normalized coordinates, origin top-left, y grows downward.
A box's "bottom-left" corner is (x1, y1) and its "top-right" corner is
(x2, y2), so x1 <= x2 and y2 <= y1.

Merged plane: angle in degrees, 0 = receiver forward, counterclockwise.
The two 180-degree images map linearly onto it:

    front:  angle = 90 - 180 * x      (x = 0 -> 90, x = 1 -> 270)
    back:   angle = 90 + 180 * x      (x = 0 -> 90, x = 1 -> 270)

so both image seams (90 and 270 degrees) are continuous.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import InputError

REFERENCE = (0.5, 1.0)  # bottom-centre of the image
MAX_IMAGE_RADIUS = math.hypot(0.5, 1.0)


def wrap_deg(angle):
    a = math.fmod(angle, 360.0)
    if a < 0:
        a += 360.0
    # fmod of e.g. -1e-17 + 360 rounds to 360
    return 0.0 if a >= 360.0 else a


def angle_diff_deg(a, b):
    """Signed smallest difference a - b in (-180, 180]."""
    d = wrap_deg(a - b)
    return d - 360.0 if d > 180.0 else d


@dataclass(frozen=True)
class BoundingBox:
    image_side: str
    x1: float
    y1: float
    x2: float
    y2: float
    truth_vehicle_id: Optional[int] = None

    def __post_init__(self):
        if self.image_side not in ("front", "back"):
            raise InputError(f"unknown image side {self.image_side!r}")
        if not (self.x1 <= self.x2 and self.y2 <= self.y1):
            raise InputError("box corners violate bottom-left / top-right ordering")
        for v in (self.x1, self.y1, self.x2, self.y2):
            if not 0.0 <= v <= 1.0:
                raise InputError("box coordinates must be normalized to [0, 1]")

    def to_list(self):
        return [self.image_side, self.x1, self.y1, self.x2, self.y2, self.truth_vehicle_id]

    @classmethod
    def from_list(cls, row):
        side, x1, y1, x2, y2, tid = row
        return cls(side, x1, y1, x2, y2, tid)


@dataclass(frozen=True)
class PolarPoint:
    radius: float
    angle: float  # degrees, [0, 360)

    def __post_init__(self):
        if self.radius < 0 or not 0.0 <= self.angle < 360.0:
            raise InputError(f"invalid polar point ({self.radius}, {self.angle})")

    @classmethod
    def make(cls, radius, angle):
        return cls(float(radius), wrap_deg(float(angle)))

    def cartesian(self):
        return polar_to_cartesian(self)


@dataclass
class DetectionSet:
    points: list = field(default_factory=list)
    source_ids: list = field(default_factory=list)

    def __len__(self):
        return len(self.points)

    def flat(self):
        """Interleaved (radius, angle) vector of length 2 * number of objects."""
        return np.array([v for p in self.points for v in (p.radius, p.angle)], dtype=np.float64)

    def cartesian(self):
        if not self.points:
            return np.zeros((0, 2))
        return np.array([polar_to_cartesian(p) for p in self.points])


def box_center(box: BoundingBox):
    return (0.5 * (box.x1 + box.x2), 0.5 * (box.y1 + box.y2))


def image_polar(center):
    """(radius, angle in degrees) of a centre w.r.t. the bottom-centre reference.

    The vector is taken up-positive, so valid centres give angles in [0, 180].
    The reference point itself maps to angle 0.
    """
    dx = center[0] - REFERENCE[0]
    dy = REFERENCE[1] - center[1]
    r = math.hypot(dx, dy)
    if r == 0.0:
        return 0.0, 0.0
    return r, math.degrees(math.atan2(dy, dx))


def image_x_to_angle(side, x):
    if side == "front":
        return wrap_deg(90.0 - 180.0 * x)
    if side == "back":
        return wrap_deg(90.0 + 180.0 * x)
    raise InputError(f"unknown image side {side!r}")


def angle_to_image(angle):
    """Inverse of the merged maps: which image shows ``angle`` and at what x.

    Angles in (-90, 90] (i.e. [0, 90] and (270, 360)) belong to the front image.
    """
    a = wrap_deg(angle)
    if a <= 90.0 or a > 270.0:
        return "front", (90.0 - (a if a <= 90.0 else a - 360.0)) / 180.0
    return "back", (a - 90.0) / 180.0


def polar_to_cartesian(p: PolarPoint):
    t = math.radians(p.angle)
    return (p.radius * math.cos(t), p.radius * math.sin(t))


def cartesian_to_polar(uv):
    u, v = uv
    r = math.hypot(u, v)
    if r == 0.0:
        return PolarPoint(0.0, 0.0)
    return PolarPoint.make(r, math.degrees(math.atan2(v, u)))


def _circular_mean_deg(angles):
    s = sum(math.sin(math.radians(a)) for a in angles)
    c = sum(math.cos(math.radians(a)) for a in angles)
    return wrap_deg(math.degrees(math.atan2(s, c)))


def box_to_point(box: BoundingBox):
    radius, _ = image_polar(box_center(box))
    return PolarPoint.make(radius, image_x_to_angle(box.image_side, box_center(box)[0]))


def merge_to_plane(front_boxes, back_boxes, angle_tol=5.0, radius_tol=0.1):
    """Map front and back detections onto the merged plane.

    A front/back pair closer than both tolerances is taken to be one vehicle
    split across the seam and becomes a single point (circular-mean angle,
    mean radius). Pairs are merged greedily, closest first, each box at most
    once. Boxes from the same image are never merged with each other.
    """
    if angle_tol < 0 or radius_tol < 0:
        raise InputError("merge tolerances must be nonnegative")
    front = [(box_to_point(b), b.truth_vehicle_id) for b in front_boxes]
    back = [(box_to_point(b), b.truth_vehicle_id) for b in back_boxes]

    candidates = []
    for i, (pf, _) in enumerate(front):
        for j, (pb, _) in enumerate(back):
            da = abs(angle_diff_deg(pf.angle, pb.angle))
            dr = abs(pf.radius - pb.radius)
            if da <= angle_tol and dr <= radius_tol:
                candidates.append((da, dr, i, j))
    candidates.sort()

    used_f, used_b = set(), set()
    merged = []
    for _, _, i, j in candidates:
        if i in used_f or j in used_b:
            continue
        used_f.add(i)
        used_b.add(j)
        (pf, idf), (pb, idb) = front[i], back[j]
        point = PolarPoint.make(0.5 * (pf.radius + pb.radius), _circular_mean_deg([pf.angle, pb.angle]))
        merged.append((point, idf if idf is not None else idb))
    merged += [front[i] for i in range(len(front)) if i not in used_f]
    merged += [back[j] for j in range(len(back)) if j not in used_b]
    merged.sort(key=lambda item: (item[0].angle, item[0].radius))
    return DetectionSet([p for p, _ in merged], [sid for _, sid in merged])
