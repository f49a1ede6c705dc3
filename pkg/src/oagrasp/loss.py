"""Detection objective: smooth-L1 regression, mined cross-entropy, and their sum.

All gradients are taken with respect to the raw network outputs held in a
:class:`PredictionMap`. The set of mined negatives is treated as fixed when
differentiating, which is exact everywhere except on the measure-zero set
where two candidates swap rank.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .anchors import AnchorGridConfig, MatchResult


@dataclass
class PredictionMap:
    """Raw per-slot outputs: ``offsets`` (n, n, k, 5) and ``logits`` (n, n, k, 2).

    Logit column 0 is the graspable score, column 1 the ungraspable score.
    """
    offsets: np.ndarray
    logits: np.ndarray

    def __post_init__(self):
        self.offsets = np.asarray(self.offsets, dtype=np.float64)
        self.logits = np.asarray(self.logits, dtype=np.float64)
        if self.offsets.ndim != 4 or self.offsets.shape[-1] != 5:
            raise ValueError(f"offsets must be (n, n, k, 5), got {self.offsets.shape}")
        if self.logits.shape != self.offsets.shape[:-1] + (2,):
            raise ValueError(f"logits shape {self.logits.shape} does not match offsets")

    @classmethod
    def zeros(cls, config: AnchorGridConfig) -> "PredictionMap":
        n, k = config.grid_n, config.k
        return cls(np.zeros((n, n, k, 5)), np.zeros((n, n, k, 2)))

    @property
    def num_slots(self) -> int:
        return int(np.prod(self.offsets.shape[:-1]))

    def flat_offsets(self) -> np.ndarray:
        return self.offsets.reshape(-1, 5)

    def flat_logits(self) -> np.ndarray:
        return self.logits.reshape(-1, 2)

    def check(self, config: AnchorGridConfig):
        n, k = config.grid_n, config.k
        if self.offsets.shape != (n, n, k, 5):
            raise ValueError(f"prediction map {self.offsets.shape[:-1]} does not fit grid {(n, n, k)}")


@dataclass(frozen=True)
class LossConfig:
    alpha: float = 10.0
    neg_ratio: float = 3.0

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if not self.neg_ratio >= 1:
            raise ValueError("neg_ratio must be >= 1")


@dataclass(frozen=True)
class ScorePair:
    p_g: float
    p_u: float


@dataclass
class LossReport:
    total: float
    cls: float
    reg: float
    n_positive: int
    gradient: PredictionMap
    negatives: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    no_positive: bool = False


def smooth_l1(x):
    """Value and derivative of the smooth-L1 penalty (elementwise)."""
    x = np.asarray(x, dtype=np.float64)
    ax = np.abs(x)
    small = ax < 1.0
    value = np.where(small, 0.5 * x * x, ax - 0.5)
    deriv = np.where(small, x, np.sign(x))
    if value.ndim == 0:
        return float(value), float(deriv)
    return value, deriv


def log_softmax_pairs(logits: np.ndarray) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    m = z.max(axis=-1, keepdims=True)
    return z - m - np.log(np.exp(z - m).sum(axis=-1, keepdims=True))


def softmax_pair(logits) -> ScorePair:
    lp = log_softmax_pairs(np.asarray(logits, dtype=np.float64).reshape(2))
    p = np.exp(lp)
    return ScorePair(float(p[0]), float(p[1]))


def graspable_probability(preds: PredictionMap) -> np.ndarray:
    """p_g per slot in slot order."""
    return np.exp(log_softmax_pairs(preds.flat_logits())[:, 0])


def mine_negatives(preds: PredictionMap, match: MatchResult, cfg: LossConfig = LossConfig()) -> np.ndarray:
    """Slot indices of the top ``neg_ratio * N`` unmatched anchors by graspability.

    Ranking uses the logit margin, which orders identically to p_g but does
    not saturate; ties go to the lower slot index.
    """
    n_pos = match.num_positive
    if n_pos == 0:
        return np.zeros(0, dtype=np.int64)
    lg = preds.flat_logits()
    margin = lg[:, 0] - lg[:, 1]
    unmatched = np.flatnonzero(~match.positive_mask())
    want = min(int(cfg.neg_ratio * n_pos), len(unmatched))
    order = np.argsort(-margin[unmatched], kind="stable")
    return unmatched[order[:want]]


def regression_loss(preds: PredictionMap, match: MatchResult):
    """Unnormalized smooth-L1 sum over positives; gradient w.r.t. all offsets."""
    grad = np.zeros_like(preds.flat_offsets())
    if match.num_positive == 0:
        return 0.0, grad.reshape(preds.offsets.shape)
    slots = match.slots
    resid = preds.flat_offsets()[slots] - match.targets
    value, deriv = smooth_l1(resid)
    np.add.at(grad, slots, deriv)
    return float(value.sum()), grad.reshape(preds.offsets.shape)


def classification_loss(preds: PredictionMap, match: MatchResult, negatives: Sequence[int]):
    """Cross-entropy over positives (graspable) and mined negatives (ungraspable)."""
    lg = preds.flat_logits()
    grad = np.zeros_like(lg)
    pos = match.slots
    neg = np.asarray(negatives, dtype=np.int64)
    if len(pos) == 0 and len(neg) == 0:
        return 0.0, grad.reshape(preds.logits.shape)
    if np.intersect1d(pos, neg).size:
        raise ValueError("negatives overlap positives")
    lp_pos = log_softmax_pairs(lg[pos])
    lp_neg = log_softmax_pairs(lg[neg])
    value = -lp_pos[:, 0].sum() - lp_neg[:, 1].sum()
    p_pos = np.exp(lp_pos)
    p_neg = np.exp(lp_neg)
    p_pos[:, 0] -= 1.0
    p_neg[:, 1] -= 1.0
    grad[pos] = p_pos
    grad[neg] = p_neg
    return float(value), grad.reshape(preds.logits.shape)


def total_loss(preds: PredictionMap, match: MatchResult, cfg: LossConfig = LossConfig(),
               negatives: Optional[Sequence[int]] = None) -> LossReport:
    """(L_cls + alpha * L_reg) / N with the gradient of the whole expression.

    Pass ``negatives`` to hold the mined set fixed (gradient checks do this).
    With no positives the loss is 0, the gradient is 0 and ``no_positive`` is
    set so callers can skip the sample.
    """
    n_pos = match.num_positive
    if n_pos == 0:
        zero = PredictionMap(np.zeros_like(preds.offsets), np.zeros_like(preds.logits))
        return LossReport(0.0, 0.0, 0.0, 0, zero, no_positive=True)
    if negatives is None:
        negatives = mine_negatives(preds, match, cfg)
    negatives = np.asarray(negatives, dtype=np.int64)
    l_reg, g_reg = regression_loss(preds, match)
    l_cls, g_cls = classification_loss(preds, match, negatives)
    scale = 1.0 / n_pos
    grad = PredictionMap(g_reg * (cfg.alpha * scale), g_cls * scale)
    total = (l_cls + cfg.alpha * l_reg) * scale
    return LossReport(total, l_cls, l_reg, n_pos, grad, negatives)
