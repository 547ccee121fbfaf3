"""Ground-truth saliency rank-order generation.

Four methods: raw fixation-point counting, fixation-map max/avg statistics,
binarized-map white-pixel ratios, and the relationship-aware combined score
(fixation share plus a size-dependent exponential bonus).  Also provides the
threshold-discrepancy analysis between adjacent GT thresholds.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .domain import Ranking, Scene, count_fixations, sqrt_size
from .errors import DegenerateScene, MissingFixationMap


class GtMethod(Enum):
    FIX_POINTS = "fixpoints"
    MAP_MAX = "mapmax"
    MAP_AVG = "mapavg"
    BINARIZED_MAP = "binmap"
    RA_SRGT = "rasrgt"


@dataclass(frozen=True)
class GtConfig:
    gamma: float = 0.2
    beta: float = 0.5
    method: GtMethod = GtMethod.RA_SRGT
    # Raw (un-normalized) penalty e^(beta*sqrt(area)) overflows for realistic
    # boxes; the normalized form is canonical, the raw one kept for sensitivity
    # studies on tiny scenes.
    raw_penalty: bool = False
    binary_threshold: float = 128.0

    def __post_init__(self):
        if self.gamma <= 0 or self.beta <= 0:
            raise ValueError("gamma and beta must be positive")


def ranking_from_scores(scores: dict[int, float]) -> Ranking:
    """Descending score -> orders 1..k; zero score -> order 0; ties by ascending id."""
    salient = sorted(
        (pid for pid, s in scores.items() if s > 0), key=lambda pid: (-scores[pid], pid)
    )
    labels = {pid: 0 for pid in scores}
    for order, pid in enumerate(salient, start=1):
        labels[pid] = order
    return Ranking(labels)


def rank_fixation_points(scene: Scene) -> Ranking:
    scores = {
        p.id: count_fixations(p.box, scene.fixations) / sqrt_size(p.box)
        for p in scene.real_proposals
    }
    return ranking_from_scores(scores)


def _box_pixels(scene: Scene, box):
    """Integer pixel index bounds covered by a box under the half-open rule."""
    u0 = max(0, math.ceil(box.x1))
    u1 = min(scene.width, math.ceil(box.x2))
    v0 = max(0, math.ceil(box.y1))
    v1 = min(scene.height, math.ceil(box.y2))
    return u0, u1, v0, v1


def map_region(scene: Scene, box) -> np.ndarray:
    """Pixel values of the fixation map covered by a box (possibly empty)."""
    gmap = scene.fixation_map
    u0, u1, v0, v1 = _box_pixels(scene, box)
    grid = np.frombuffer(gmap.values, dtype=np.uint8).reshape(gmap.height, gmap.width)
    return grid[v0:v1, u0:u1]


def rank_fixation_map(scene: Scene, mode: str = "max") -> Ranking:
    if scene.fixation_map is None:
        raise MissingFixationMap(scene.scene_id)
    if mode not in ("max", "avg"):
        raise ValueError(f"mode must be 'max' or 'avg', got {mode!r}")
    scores = {}
    for p in scene.real_proposals:
        vals = map_region(scene, p.box)
        if vals.size == 0:
            scores[p.id] = 0.0
        elif mode == "max":
            scores[p.id] = float(vals.max())
        else:
            scores[p.id] = float(vals.mean())
    return ranking_from_scores(scores)


def rank_binarized_map(scene: Scene, binary_threshold: float) -> Ranking:
    if scene.fixation_map is None:
        raise MissingFixationMap(scene.scene_id)
    if not 0 < binary_threshold < 255:
        raise ValueError("binary_threshold must lie in (0, 255)")
    image_sqrt = math.sqrt(scene.width * scene.height)
    scores = {}
    for p in scene.real_proposals:
        vals = map_region(scene, p.box)
        white = int((vals > binary_threshold).sum())
        if vals.size == 0 or white == 0:
            scores[p.id] = 0.0
        else:
            scores[p.id] = (white / vals.size) * (sqrt_size(p.box) / image_sqrt)
    return ranking_from_scores(scores)


def rasrgt_score(scene: Scene, proposal, cfg: GtConfig) -> float:
    """Combined score: fixation share plus gamma * e^(beta * size ratio).

    Zero fixations inside the box means zero score regardless of size.
    """
    n_i = count_fixations(proposal.box, scene.fixations)
    if n_i == 0:
        return 0.0
    total = len(scene.fixations)
    if total == 0:
        raise DegenerateScene(
            f"{scene.scene_id}: proposal has fixations but scene total is zero"
        )
    if cfg.raw_penalty:
        return n_i + cfg.gamma * math.exp(cfg.beta * sqrt_size(proposal.box))
    size_ratio = sqrt_size(proposal.box) / math.sqrt(scene.width * scene.height)
    return n_i / total + cfg.gamma * math.exp(cfg.beta * size_ratio)


def rasrgt_rank(scene: Scene, cfg: GtConfig | None = None) -> Ranking:
    cfg = cfg or GtConfig()
    scores = {p.id: rasrgt_score(scene, p, cfg) for p in scene.real_proposals}
    return ranking_from_scores(scores)


def generate_ranking(scene: Scene, cfg: GtConfig) -> Ranking:
    """Dispatch on cfg.method."""
    if cfg.method is GtMethod.FIX_POINTS:
        return rank_fixation_points(scene)
    if cfg.method is GtMethod.MAP_MAX:
        return rank_fixation_map(scene, "max")
    if cfg.method is GtMethod.MAP_AVG:
        return rank_fixation_map(scene, "avg")
    if cfg.method is GtMethod.BINARIZED_MAP:
        return rank_binarized_map(scene, cfg.binary_threshold)
    return rasrgt_rank(scene, cfg)


def discrepancy_offsets(scenes, cfg_base: GtConfig, thresholds) -> list[tuple[float, int]]:
    """Total rank-order change between each pair of adjacent GT thresholds.

    For each consecutive threshold pair (t_prev, t) sums |order_t - order_t_prev|
    over every proposal of every scene.
    """
    thresholds = list(thresholds)
    rank_cache = []
    for t in thresholds:
        cfg = replace(cfg_base, gamma=t)
        rank_cache.append([rasrgt_rank(s, cfg) for s in scenes])
    out = []
    for idx in range(1, len(thresholds)):
        total = 0
        for prev, cur in zip(rank_cache[idx - 1], rank_cache[idx]):
            for pid in cur.labels:
                total += abs(cur.labels[pid] - prev.labels[pid])
        out.append((thresholds[idx], total))
    return out
