"""Versioned JSON documents shared by the command-line tools.

Every document carries ``"schema": "<name>/<major>.<minor>"``. Readers accept
any minor version of the major they know and reject everything else.
"""
from __future__ import annotations

import json

from .geometry import OrientedRect

ANNOTATIONS_SCHEMA = "oagrasp.annotations/1.0"
PREDICTIONS_SCHEMA = "oagrasp.predictions/1.0"
MATCHES_SCHEMA = "oagrasp.matches/1.0"
OFFSETS_SCHEMA = "oagrasp.offsets/1.0"

ANGLE_DECIMALS = 6


class SchemaError(ValueError):
    pass


def check_schema(doc, expected: str):
    if not isinstance(doc, dict) or "schema" not in doc:
        raise SchemaError(f"document has no schema field (expected {expected})")
    name, _, ver = str(doc["schema"]).partition("/")
    exp_name, _, exp_ver = expected.partition("/")
    if name != exp_name:
        raise SchemaError(f"expected a {exp_name} document, got {name}")
    if ver.split(".")[0] != exp_ver.split(".")[0]:
        raise SchemaError(f"unsupported {name} major version {ver} (reader knows {exp_ver})")


def rect_to_json(r: OrientedRect) -> dict:
    return {"x": round(r.x, 6), "y": round(r.y, 6), "w": round(r.w, 6), "h": round(r.h, 6),
            "theta": round(r.theta, ANGLE_DECIMALS)}


def dump(doc, path_or_file):
    text = json.dumps(doc, indent=2, sort_keys=False) + "\n"
    if hasattr(path_or_file, "write"):
        path_or_file.write(text)
    else:
        with open(path_or_file, "w") as f:
            f.write(text)


def load(path, expected: str):
    with open(path) as f:
        try:
            doc = json.load(f)
        except json.JSONDecodeError as e:
            raise SchemaError(f"{path}: invalid JSON ({e})") from e
    check_schema(doc, expected)
    return doc
