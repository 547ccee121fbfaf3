"""Core value types (boxes, fixations, scenes, rankings) and elementary geometry.

Everything here is immutable after construction and all operations are pure,
so values can be shared freely across threads and processes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import InvariantViolation


@dataclass(frozen=True)
class BBox:
    """Axis-aligned rectangle in pixel coordinates, origin top-left."""

    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self):
        if not (self.x1 < self.x2 and self.y1 < self.y2):
            raise InvariantViolation("box", "x1<x2 and y1<y2 required")
        if min(self.x1, self.y1) < 0:
            raise InvariantViolation("box", "coordinates must be >= 0")

    @property
    def width(self) -> float:
        return self.x2 - self.x1

    @property
    def height(self) -> float:
        return self.y2 - self.y1

    @property
    def area(self) -> float:
        return self.width * self.height


@dataclass(frozen=True)
class FixationPoint:
    u: int
    v: int
    observer_id: int = 0

    def __post_init__(self):
        if self.observer_id < 0:
            raise InvariantViolation("observer_id", "must be non-negative")


@dataclass(frozen=True)
class GrayMap:
    """Row-major grayscale raster with values in [0, 255]."""

    width: int
    height: int
    values: bytes

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise InvariantViolation("graymap", "width and height must be positive")
        if len(self.values) != self.width * self.height:
            raise InvariantViolation(
                "graymap", f"expected {self.width * self.height} values, got {len(self.values)}"
            )

    def at(self, u: int, v: int) -> int:
        return self.values[v * self.width + u]


@dataclass(frozen=True)
class Proposal:
    id: int
    box: BBox | None
    detector_confidence: float = 1.0
    is_dummy: bool = False

    def __post_init__(self):
        if self.is_dummy:
            if self.box is not None:
                raise InvariantViolation("proposal", "dummy proposals carry no box")
        else:
            if self.box is None:
                raise InvariantViolation("proposal", "real proposals require a box")
            if not 0.0 <= self.detector_confidence <= 1.0:
                raise InvariantViolation("confidence", "must lie in [0,1]")


@dataclass(frozen=True)
class Scene:
    scene_id: str
    width: int
    height: int
    proposals: tuple[Proposal, ...]
    fixations: tuple[FixationPoint, ...] = ()
    fixation_map: GrayMap | None = None

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise InvariantViolation("scene", "image dimensions must be positive")
        ids = [p.id for p in self.proposals]
        if len(set(ids)) != len(ids):
            raise InvariantViolation("proposals", "proposal ids must be unique")
        for p in self.proposals:
            if p.box is not None and not (
                p.box.x2 <= self.width and p.box.y2 <= self.height
            ):
                raise InvariantViolation("box", f"proposal {p.id} exceeds image bounds")
        for f in self.fixations:
            if not (0 <= f.u < self.width and 0 <= f.v < self.height):
                raise InvariantViolation("fixation", f"point ({f.u},{f.v}) outside image")

    @property
    def real_proposals(self) -> tuple[Proposal, ...]:
        return tuple(p for p in self.proposals if not p.is_dummy)


@dataclass(frozen=True)
class Ranking:
    """Per-proposal saliency orders: 0 = non-salient, 1 = most salient.

    Non-zero orders must form a contiguous duplicate-free set {1..k}.
    """

    labels: dict[int, int] = field(default_factory=dict)

    def __post_init__(self):
        nonzero = sorted(o for o in self.labels.values() if o != 0)
        if any(o < 0 for o in self.labels.values()):
            raise InvariantViolation("ranking", "orders must be non-negative")
        if nonzero != list(range(1, len(nonzero) + 1)):
            raise InvariantViolation(
                "ranking", f"non-zero orders must be a permutation of 1..k, got {nonzero}"
            )

    def order_of(self, proposal_id: int) -> int:
        return self.labels[proposal_id]


def iou(a: BBox, b: BBox) -> float:
    """Intersection-over-union of two boxes; symmetric, 0 when disjoint."""
    ix = min(a.x2, b.x2) - max(a.x1, b.x1)
    iy = min(a.y2, b.y2) - max(a.y1, b.y1)
    if ix <= 0 or iy <= 0:
        return 0.0
    inter = ix * iy
    return inter / (a.area + b.area - inter)


def sqrt_size(b: BBox) -> float:
    return math.sqrt(b.area)


def count_fixations(b: BBox, pts) -> int:
    """Number of fixation points inside the box under the half-open rule.

    Containment is [x1,x2) x [y1,y2) so tiling boxes never double-count.
    """
    return sum(1 for p in pts if b.x1 <= p.u < b.x2 and b.y1 <= p.v < b.y2)
