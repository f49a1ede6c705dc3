"""Oriented anchor grid, offset encoding and the grid-cell matching rule.

Anchors are tiled one set per grid cell, ``k`` angles per set, all with the
same size. Slot indices run row-major over cells, then by angle index, so
slot ``(row * grid_n + col) * k + a`` is anchor ``a`` of cell ``(row, col)``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from ._backend import kernels
from .geometry import OrientedRect, normalize_angle, rects_to_array

log = logging.getLogger(__name__)


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class AnchorGridConfig:
    input_size: int = 320
    grid_n: int = 10
    k: int = 6
    anchor_w: float = 54.0
    anchor_h: float = 54.0

    def __post_init__(self):
        if self.grid_n < 1 or self.k < 1:
            raise ConfigError("grid_n and k must be >= 1")
        if self.input_size <= 0 or self.input_size % self.grid_n:
            raise ConfigError(
                f"input_size {self.input_size} is not divisible by grid_n {self.grid_n}")
        if not (self.anchor_w > 0 and self.anchor_h > 0):
            raise ConfigError("anchor sides must be positive")

    @property
    def stride(self) -> float:
        return self.input_size / self.grid_n

    @property
    def bin_width(self) -> float:
        return 180.0 / self.k

    @property
    def num_anchors(self) -> int:
        return self.grid_n * self.grid_n * self.k

    def anchor_angles(self) -> np.ndarray:
        """Default angle per angle index: bin centers, descending from 90."""
        return 90.0 - (np.arange(self.k) + 0.5) * self.bin_width


@dataclass(frozen=True)
class AnchorBox:
    cell_row: int
    cell_col: int
    angle_index: int
    x_a: float
    y_a: float
    w_a: float
    h_a: float
    theta_a: float

    def slot(self, config: AnchorGridConfig) -> int:
        return (self.cell_row * config.grid_n + self.cell_col) * config.k + self.angle_index

    def as_rect(self) -> OrientedRect:
        return OrientedRect(self.x_a, self.y_a, self.w_a, self.h_a, self.theta_a)


@lru_cache(maxsize=8192)
def _anchor_at(config: AnchorGridConfig, slot: int) -> AnchorBox:
    cell, a = divmod(int(slot), config.k)
    row, col = divmod(cell, config.grid_n)
    s = config.stride
    # same arithmetic as anchor_angles(), without building the array
    theta_a = 90.0 - (a + 0.5) * config.bin_width
    return AnchorBox(row, col, a, (col + 0.5) * s, (row + 0.5) * s,
                     config.anchor_w, config.anchor_h, theta_a)


def anchor_at(config: AnchorGridConfig, slot: int) -> AnchorBox:
    return _anchor_at(config, int(slot))


def build_grid(config: AnchorGridConfig) -> list[AnchorBox]:
    return [anchor_at(config, i) for i in range(config.num_anchors)]


def anchor_array(config: AnchorGridConfig) -> np.ndarray:
    """All anchors as a (num_anchors, 5) array of (x, y, w, h, theta)."""
    n, k, s = config.grid_n, config.k, config.stride
    rows, cols, ang = np.meshgrid(np.arange(n), np.arange(n), np.arange(k), indexing="ij")
    out = np.empty((n, n, k, 5))
    out[..., 0] = (cols + 0.5) * s
    out[..., 1] = (rows + 0.5) * s
    out[..., 2] = config.anchor_w
    out[..., 3] = config.anchor_h
    out[..., 4] = config.anchor_angles()[ang]
    return out.reshape(-1, 5)


@dataclass(frozen=True)
class OffsetVector:
    t_x: float
    t_y: float
    t_w: float
    t_h: float
    t_theta: float

    def as_array(self) -> np.ndarray:
        return np.array([self.t_x, self.t_y, self.t_w, self.t_h, self.t_theta])


def encode(gt: OrientedRect, anchor: AnchorBox, k: int) -> OffsetVector:
    if not (gt.w > 0 and gt.h > 0):
        raise ValueError("ground-truth width and height must be positive")
    return OffsetVector(
        (gt.x - anchor.x_a) / anchor.w_a,
        (gt.y - anchor.y_a) / anchor.h_a,
        math.log(gt.w / anchor.w_a),
        math.log(gt.h / anchor.h_a),
        (gt.theta - anchor.theta_a) / (180.0 / k),
    )


def decode(offsets: OffsetVector, anchor: AnchorBox, k: int) -> OrientedRect:
    return OrientedRect(
        offsets.t_x * anchor.w_a + anchor.x_a,
        offsets.t_y * anchor.h_a + anchor.y_a,
        anchor.w_a * math.exp(offsets.t_w),
        anchor.h_a * math.exp(offsets.t_h),
        normalize_angle(offsets.t_theta * (180.0 / k) + anchor.theta_a),
    )


def encode_array(gts: np.ndarray, anchors: np.ndarray, k: int) -> np.ndarray:
    """Vectorized encode over paired rows of (m, 5) arrays."""
    g, a = np.asarray(gts, dtype=np.float64), np.asarray(anchors, dtype=np.float64)
    out = np.empty_like(g)
    out[:, 0] = (g[:, 0] - a[:, 0]) / a[:, 2]
    out[:, 1] = (g[:, 1] - a[:, 1]) / a[:, 3]
    out[:, 2] = np.log(g[:, 2] / a[:, 2])
    out[:, 3] = np.log(g[:, 3] / a[:, 3])
    out[:, 4] = (g[:, 4] - a[:, 4]) / (180.0 / k)
    return out


def decode_array(offsets: np.ndarray, anchors: np.ndarray, k: int) -> np.ndarray:
    """Vectorized decode; returns (m, 5) rectangles with canonical angles."""
    t, a = np.asarray(offsets, dtype=np.float64), np.asarray(anchors, dtype=np.float64)
    out = np.empty_like(t)
    out[:, 0] = t[:, 0] * a[:, 2] + a[:, 0]
    out[:, 1] = t[:, 1] * a[:, 3] + a[:, 1]
    out[:, 2] = a[:, 2] * np.exp(t[:, 2])
    out[:, 3] = a[:, 3] * np.exp(t[:, 3])
    th = t[:, 4] * (180.0 / k) + a[:, 4]
    th = np.mod(th + 90.0, 180.0) - 90.0
    out[:, 4] = np.where(th >= 90.0, th - 180.0, th)
    return out


@dataclass(frozen=True)
class Positive:
    anchor: AnchorBox
    gt_index: int
    target: OffsetVector
    slot: int


@dataclass
class MatchResult:
    positives: list[Positive]
    num_anchors: int
    skipped: int = 0

    @property
    def num_positive(self) -> int:
        return len(self.positives)

    @property
    def slots(self) -> np.ndarray:
        return np.array([p.slot for p in self.positives], dtype=np.int64)

    @property
    def targets(self) -> np.ndarray:
        if not self.positives:
            return np.zeros((0, 5))
        return np.array([p.target.as_array() for p in self.positives])

    def positive_mask(self) -> np.ndarray:
        m = np.zeros(self.num_anchors, dtype=bool)
        m[self.slots] = True
        return m


def match_slots(gts: Sequence[OrientedRect], config: AnchorGridConfig) -> np.ndarray:
    """Slot index per ground truth, -1 for centers outside the image."""
    arr = rects_to_array(gts)
    if len(arr):
        th = arr[:, 4]
        for i in np.flatnonzero(~((th >= -90.0) & (th < 90.0))):
            th[i] = normalize_angle(th[i])
    return kernels.match_slots(arr, config.grid_n, config.stride, config.k,
                               float(config.input_size))


def match(gts: Sequence[OrientedRect], config: AnchorGridConfig) -> MatchResult:
    """Assign each ground truth to the anchor of its cell with the nearest angle.

    The cell is floor(coordinate / stride) and the angle index is
    ceil((90 - theta) / bin_width) - 1, clamped to [0, k). When two ground
    truths land on one slot the later one wins. No overlap is computed.
    """
    slots = match_slots(gts, config)
    chosen: dict[int, int] = {}
    skipped = 0
    for i, s in enumerate(slots.tolist()):
        if s < 0:
            skipped += 1
            continue
        chosen[s] = i
    if skipped:
        log.warning("match: skipped %d ground truth(s) centered outside the image", skipped)
    positives = []
    for s in sorted(chosen):
        gi = chosen[s]
        anchor = anchor_at(config, s)
        gt = gts[gi]
        if not -90.0 <= gt.theta < 90.0:
            gt = gt.normalized()
        positives.append(Positive(anchor, gi, encode(gt, anchor, config.k), s))
    return MatchResult(positives, config.num_anchors, skipped)
