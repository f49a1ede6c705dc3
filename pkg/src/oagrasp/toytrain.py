"""Desk-scale demonstration that the anchor mechanism learns.

A synthetic generator stands in for the image backbone: each scene holds a
few bar-shaped objects and emits a small per-cell feature map describing the
nearest bar. A two-layer perceptron shared across cells (a 1x1 convolutional
head) maps those features to 5k offsets and 2k logits per cell, and is
trained with SGD + momentum on the mined detection loss.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from .anchors import AnchorGridConfig, MatchResult, anchor_array, match
from .geometry import OrientedRect, normalize_angle
from .loss import LossConfig, PredictionMap, mine_negatives, total_loss

log = logging.getLogger(__name__)

CHECKPOINT_SCHEMA = "oagrasp.toymodel/1.0"

BASE_CHANNELS = 7


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class SyntheticScene:
    features: np.ndarray  # (channels, grid_n, grid_n)
    gts: list


def num_channels(grid: AnchorGridConfig) -> int:
    return BASE_CHANNELS + grid.k


def scene_features(gts: Sequence[OrientedRect], grid: AnchorGridConfig) -> np.ndarray:
    """Per-cell descriptors of the nearest bar.

    Channels: proximity bump, center offset x and y in anchor units, log
    width and log height relative to the anchor, cos and sin of twice the
    angle, then one soft orientation map per anchor angle.
    """
    n, s = grid.grid_n, grid.stride
    centers = (np.arange(n) + 0.5) * s
    cy, cx = np.meshgrid(centers, centers, indexing="ij")
    g = np.array([r.as_tuple() for r in gts], dtype=np.float64)
    dx = g[:, 0][:, None, None] - cx[None]
    dy = g[:, 1][:, None, None] - cy[None]
    d2 = dx * dx + dy * dy
    near = np.argmin(d2, axis=0)
    pick = lambda a: np.take_along_axis(a, near[None], axis=0)[0]
    dxn, dyn, d2n = pick(dx), pick(dy), pick(d2)
    w, h, th = g[near, 2], g[near, 3], g[near, 4]
    prox = np.exp(-d2n / (2.0 * (0.5 * s) ** 2))
    t2 = np.radians(2.0 * th)
    feats = np.empty((num_channels(grid), n, n))
    feats[0] = prox
    feats[1] = np.clip(dxn / grid.anchor_w, -2.0, 2.0)
    feats[2] = np.clip(dyn / grid.anchor_h, -2.0, 2.0)
    feats[3] = np.log(w / grid.anchor_w)
    feats[4] = np.log(h / grid.anchor_h)
    feats[5] = np.cos(t2)
    feats[6] = np.sin(t2)
    for i, ta in enumerate(grid.anchor_angles()):
        d = np.abs(th - ta) % 180.0
        d = np.minimum(d, 180.0 - d) / grid.bin_width
        feats[BASE_CHANNELS + i] = prox * np.exp(-d * d)
    return feats


def gen_synthetic(seed: int, n: int, grid: AnchorGridConfig = AnchorGridConfig()) -> list[SyntheticScene]:
    """``n`` scenes of 1-3 bars each, deterministic in ``seed``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    size = float(grid.input_size)
    margin = 0.05 * size
    scenes = []
    for _ in range(n):
        m = int(rng.integers(1, 4))
        gts = []
        for _ in range(m):
            x, y = rng.uniform(margin, size - margin, size=2)
            w = rng.uniform(20.0, 80.0)
            h = rng.uniform(10.0, 40.0)
            th = normalize_angle(rng.uniform(-90.0, 90.0))
            gts.append(OrientedRect(float(x), float(y), float(w), float(h), float(th)))
        scenes.append(SyntheticScene(scene_features(gts, grid), gts))
    return scenes


@dataclass
class ToyModel:
    grid: AnchorGridConfig
    w1: np.ndarray  # (channels, hidden)
    b1: np.ndarray
    w2: np.ndarray  # (hidden, 7k)
    b2: np.ndarray

    PARAMS = ("w1", "b1", "w2", "b2")

    @classmethod
    def init(cls, grid: AnchorGridConfig, channels: int, hidden: int = 64, seed: int = 0) -> "ToyModel":
        rng = np.random.default_rng(seed)
        out = 7 * grid.k
        a1, a2 = 1.0 / math.sqrt(channels), 1.0 / math.sqrt(hidden)
        return cls(grid,
                   rng.uniform(-a1, a1, size=(channels, hidden)),
                   np.zeros(hidden),
                   rng.uniform(-a2, a2, size=(hidden, out)),
                   np.zeros(out))

    @classmethod
    def zeros(cls, grid: AnchorGridConfig, channels: int, hidden: int = 64) -> "ToyModel":
        out = 7 * grid.k
        return cls(grid, np.zeros((channels, hidden)), np.zeros(hidden),
                   np.zeros((hidden, out)), np.zeros(out))

    @property
    def channels(self) -> int:
        return self.w1.shape[0]

    @property
    def hidden(self) -> int:
        return self.w1.shape[1]

    def params(self) -> dict:
        return {p: getattr(self, p) for p in self.PARAMS}

    def copy(self) -> "ToyModel":
        return ToyModel(self.grid, *(getattr(self, p).copy() for p in self.PARAMS))

    def save(self, path):
        doc = {
            "schema": CHECKPOINT_SCHEMA,
            "grid": asdict(self.grid),
            "channels": self.channels,
            "hidden": self.hidden,
            "activation": "tanh",
            "weights": {p: getattr(self, p).tolist() for p in self.PARAMS},
        }
        with open(path, "w") as f:
            json.dump(doc, f)

    @classmethod
    def load(cls, path) -> "ToyModel":
        with open(path) as f:
            doc = json.load(f)
        from .io import check_schema
        check_schema(doc, CHECKPOINT_SCHEMA)
        grid = AnchorGridConfig(**doc["grid"])
        wts = doc["weights"]
        return cls(grid, *(np.asarray(wts[p], dtype=np.float64) for p in cls.PARAMS))


def _head(model: ToyModel, x: np.ndarray):
    z = x @ model.w1 + model.b1
    hdn = np.tanh(z)
    return hdn, hdn @ model.w2 + model.b2


def _split_outputs(out: np.ndarray, grid: AnchorGridConfig) -> PredictionMap:
    n, k = grid.grid_n, grid.k
    return PredictionMap(out[:, :5 * k].reshape(n, n, k, 5), out[:, 5 * k:].reshape(n, n, k, 2))


def _cells(model: ToyModel, scene: SyntheticScene) -> np.ndarray:
    f = np.asarray(scene.features, dtype=np.float64)
    n = model.grid.grid_n
    if f.shape != (model.channels, n, n):
        from .anchors import ConfigError
        raise ConfigError(f"scene features {f.shape} do not fit model ({model.channels}, {n}, {n})")
    return f.reshape(model.channels, -1).T


def forward(model: ToyModel, scene: SyntheticScene) -> PredictionMap:
    _, out = _head(model, _cells(model, scene))
    return _split_outputs(out, model.grid)


def _grad_outputs(grad: PredictionMap) -> np.ndarray:
    k = grad.offsets.shape[2]
    cells = grad.offsets.shape[0] * grad.offsets.shape[1]
    return np.concatenate([grad.offsets.reshape(cells, 5 * k), grad.logits.reshape(cells, 2 * k)], axis=1)


def loss_and_grad(model: ToyModel, scene: SyntheticScene, matched: MatchResult,
                  loss_cfg: LossConfig = LossConfig(), negatives=None):
    """Loss of one scene and its gradient with respect to each parameter."""
    x = _cells(model, scene)
    hdn, out = _head(model, x)
    rep = total_loss(_split_outputs(out, model.grid), matched, loss_cfg, negatives)
    go = _grad_outputs(rep.gradient)
    gz = (go @ model.w2.T) * (1.0 - hdn * hdn)
    grads = {"w1": x.T @ gz, "b1": gz.sum(axis=0), "w2": hdn.T @ go, "b2": go.sum(axis=0)}
    return rep, grads


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-4
    momentum: float = 0.9
    batch_size: int = 16
    iterations: int = 2000
    seed: int = 0
    weight_decay: float = 1e-4
    hidden: int = 64

    def __post_init__(self):
        if self.lr < 0 or self.momentum < 0 or self.weight_decay < 0:
            raise ValueError("lr, momentum and weight_decay must be non-negative")
        if self.batch_size < 1 or self.iterations < 0 or self.hidden < 1:
            raise ValueError("batch_size and hidden must be >= 1")


def sgd_step(params: dict, grads: dict, velocity: dict, lr: float, momentum: float, weight_decay: float):
    """In-place SGD with momentum; weight decay is added to the gradient."""
    for name, p in params.items():
        g = grads[name] + weight_decay * p
        v = velocity[name]
        v *= momentum
        v += g
        p -= lr * v


def _batches(n: int, batch_size: int, rng: np.random.Generator):
    order = rng.permutation(n)
    pos = 0
    while True:
        idx = []
        while len(idx) < batch_size:
            if pos == n:
                order = rng.permutation(n)
                pos = 0
            take = min(batch_size - len(idx), n - pos)
            idx.extend(order[pos:pos + take].tolist())
            pos += take
        yield idx


def train(config: TrainConfig, data: Sequence[SyntheticScene], loss_cfg: LossConfig = LossConfig(),
          grid: Optional[AnchorGridConfig] = None, model: Optional[ToyModel] = None):
    """Mini-batch SGD on the summed per-scene loss. Returns (model, loss_curve).

    The batch objective is the sum of each scene's normalized loss; scenes
    without positives contribute nothing. ``loss_curve`` holds the batch
    objective divided by the batch size at each iteration.
    """
    if not data:
        raise ValueError("training data is empty")
    grid = grid or AnchorGridConfig()
    if model is None:
        model = ToyModel.init(grid, data[0].features.shape[0], config.hidden, seed=config.seed)
    matches = [match(s.gts, grid) for s in data]
    rng = np.random.default_rng(config.seed)
    params = model.params()
    velocity = {k: np.zeros_like(v) for k, v in params.items()}
    batches = _batches(len(data), config.batch_size, rng)
    curve = []
    for it in range(config.iterations):
        idx = next(batches)
        acc = {k: np.zeros_like(v) for k, v in params.items()}
        total = 0.0
        for i in idx:
            rep, grads = loss_and_grad(model, data[i], matches[i], loss_cfg)
            if rep.no_positive:
                continue
            total += rep.total
            for k2 in acc:
                acc[k2] += grads[k2]
        if not math.isfinite(total):
            raise TrainingDiverged(f"non-finite loss at iteration {it}")
        sgd_step(params, acc, velocity, config.lr, config.momentum, config.weight_decay)
        curve.append(total / len(idx))
    return model, curve


def _kink_free(model, scene, matched, negatives, tol):
    if matched.num_positive == 0:
        return True
    pm = forward(model, scene)
    r = pm.flat_offsets()[matched.slots] - matched.targets
    return bool(np.all(np.abs(np.abs(r) - 1.0) > tol))


def grad_check(model: ToyModel, scene: SyntheticScene, eps: float = 1e-5, n_weights: int = 200,
               seed: int = 0, loss_cfg: LossConfig = LossConfig(), kink_tol: float = 1e-3) -> float:
    """Max relative error between analytic and central-difference gradients.

    Samples ``n_weights`` parameters at random. The mined negative set is
    frozen at the unperturbed point, and any weight whose perturbation puts a
    positive residual within ``kink_tol`` of the smooth-L1 kink is skipped.
    Relative error is |a - n| / max(|a|, |n|, 1e-6).
    """
    if not 1e-7 <= eps <= 1e-3:
        raise ValueError("eps must lie in [1e-7, 1e-3]")
    grid = model.grid
    matched = match(scene.gts, grid)
    negatives = mine_negatives(forward(model, scene), matched, loss_cfg)
    _, grads = loss_and_grad(model, scene, matched, loss_cfg, negatives)
    if not _kink_free(model, scene, matched, negatives, kink_tol):
        log.debug("unperturbed residual near the smooth-L1 kink")
    rng = np.random.default_rng(seed)
    params = model.params()
    names = list(model.PARAMS)
    sizes = np.array([params[nm].size for nm in names])
    flat_choice = rng.choice(sizes.sum(), size=min(n_weights, int(sizes.sum())), replace=False)
    bounds = np.cumsum(sizes)
    worst = 0.0
    for fi in np.sort(flat_choice):
        pi = int(np.searchsorted(bounds, fi, side="right"))
        local = int(fi - (bounds[pi - 1] if pi else 0))
        arr = params[names[pi]].reshape(-1)
        orig = arr[local]
        vals = []
        ok = True
        for sgn in (1.0, -1.0):
            arr[local] = orig + sgn * eps
            ok &= _kink_free(model, scene, matched, negatives, kink_tol)
            vals.append(total_loss(forward(model, scene), matched, loss_cfg, negatives).total)
        arr[local] = orig
        if not ok:
            continue
        num = (vals[0] - vals[1]) / (2.0 * eps)
        ana = float(grads[names[pi]].reshape(-1)[local])
        rel = abs(ana - num) / max(abs(ana), abs(num), 1e-6)
        worst = max(worst, rel)
    return worst


def top1_accuracy(model: ToyModel, scenes: Sequence[SyntheticScene], j_thresh: float = 0.25,
                  a_thresh: float = 30.0) -> float:
    from .evaluation import is_correct, select_predictions
    hits = 0
    for s in scenes:
        top = select_predictions(forward(model, s), model.grid, "top1")
        hits += bool(top) and is_correct(top[0].rect, s.gts, j_thresh, a_thresh)
    return hits / len(scenes)
