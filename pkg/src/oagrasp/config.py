"""Toolkit configuration, read from an INI-style key-value file.

Example (every key optional; these are the defaults)::

    [anchor]
    input_size = 320
    grid_n = 10
    k = 6
    anchor_w = 54
    anchor_h = 54

    [loss]
    alpha = 10
    neg_ratio = 3

    [train]
    lr = 0.0001
    momentum = 0.9
    batch_size = 16
    iterations = 2000
    seed = 0
    weight_decay = 0.0001
    hidden = 64

    [eval]
    jaccard = 0.20, 0.25, 0.30, 0.35
    angles = 30, 25, 20, 15, 10
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields

from .anchors import AnchorGridConfig, ConfigError
from .evaluation import DEFAULT_ANGLES, DEFAULT_JACCARD
from .loss import LossConfig
from .toytrain import TrainConfig


@dataclass(frozen=True)
class ToolkitConfig:
    anchor: AnchorGridConfig = field(default_factory=AnchorGridConfig)
    loss: LossConfig = field(default_factory=LossConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    jaccard_thresholds: tuple = DEFAULT_JACCARD
    angle_thresholds: tuple = DEFAULT_ANGLES


def _section(parser, name, cls):
    if not parser.has_section(name):
        return cls()
    known = {f.name: f.type for f in fields(cls)}
    kwargs = {}
    for key, raw in parser.items(name):
        if key not in known:
            raise ConfigError(f"[{name}] unknown key {key!r}")
        default = getattr(cls(), key)
        try:
            kwargs[key] = type(default)(float(raw)) if isinstance(default, int) else type(default)(raw)
        except ValueError:
            raise ConfigError(f"[{name}] {key} = {raw!r} is not a number") from None
        if isinstance(default, int) and float(raw) != int(float(raw)):
            raise ConfigError(f"[{name}] {key} must be an integer")
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"[{name}] {e}") from e


def _floats(raw: str, what: str) -> tuple:
    try:
        vals = tuple(float(v) for v in raw.replace(",", " ").split())
    except ValueError:
        raise ConfigError(f"[eval] {what}: expected numbers, got {raw!r}") from None
    if not vals:
        raise ConfigError(f"[eval] {what} is empty")
    return vals


def parse_config(text: str) -> ToolkitConfig:
    parser = configparser.ConfigParser()
    try:
        parser.read_string(text)
    except configparser.Error as e:
        raise ConfigError(str(e)) from e
    for s in parser.sections():
        if s not in ("anchor", "loss", "train", "eval"):
            raise ConfigError(f"unknown config section [{s}]")
    jac, ang = DEFAULT_JACCARD, DEFAULT_ANGLES
    if parser.has_section("eval"):
        for key in parser.options("eval"):
            if key not in ("jaccard", "angles"):
                raise ConfigError(f"[eval] unknown key {key!r}")
        if parser.has_option("eval", "jaccard"):
            jac = _floats(parser.get("eval", "jaccard"), "jaccard")
        if parser.has_option("eval", "angles"):
            ang = _floats(parser.get("eval", "angles"), "angles")
    return ToolkitConfig(_section(parser, "anchor", AnchorGridConfig),
                         _section(parser, "loss", LossConfig),
                         _section(parser, "train", TrainConfig), jac, ang)


def load_config(path=None) -> ToolkitConfig:
    if path is None:
        return ToolkitConfig()
    with open(path) as f:
        return parse_config(f.read())
