"""Cornell-style annotation ingestion, dataset splits and geometric augmentation.

Annotation files hold one vertex per line ("x y"), four consecutive lines per
rectangle. The public dataset contains groups with NaN coordinates; those
groups are skipped and counted rather than treated as errors.
"""
from __future__ import annotations

import logging
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .anchors import ConfigError
from .geometry import GeometryError, OrientedRect, rect_from_vertices, vertices
from .io import ANNOTATIONS_SCHEMA, check_schema, rect_to_json

log = logging.getLogger(__name__)

MAX_TRANSLATE = 50.0
MAX_ROTATE = 15.0


class AnnotationFormatError(ValueError):
    pass


@dataclass
class Annotation:
    image_id: str
    object_id: Optional[str]
    pos_rects: list
    source_size: tuple = (640, 480)
    neg_rects: list = field(default_factory=list)

    def to_json(self) -> dict:
        doc = {"image_id": self.image_id, "object_id": self.object_id,
               "source_size": list(self.source_size),
               "rects": [rect_to_json(r) for r in self.pos_rects]}
        if self.neg_rects:
            doc["neg_rects"] = [rect_to_json(r) for r in self.neg_rects]
        return doc

    @classmethod
    def from_json(cls, d) -> "Annotation":
        try:
            rects = [OrientedRect.from_dict(r) for r in d["rects"]]
            neg = [OrientedRect.from_dict(r) for r in d.get("neg_rects", [])]
            return cls(str(d["image_id"]), d.get("object_id"), rects,
                       tuple(d.get("source_size", (640, 480))), neg)
        except (KeyError, TypeError, ValueError) as e:
            raise AnnotationFormatError(f"bad annotation record: {e}") from e


def parse_annotation_text(text: str, source: str = "<text>"):
    """Parse vertex lines into rectangles. Returns ``(rects, n_skipped)``."""
    points = []
    for lineno, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if not s:
            continue
        toks = s.split()
        if len(toks) != 2:
            raise AnnotationFormatError(f"{source}:{lineno}: expected 2 coordinates, got {len(toks)}")
        try:
            points.append((float(toks[0]), float(toks[1]), lineno))
        except ValueError:
            raise AnnotationFormatError(f"{source}:{lineno}: unparseable coordinate in {s!r}") from None
    if len(points) % 4:
        last = points[-1][2] if points else 0
        raise AnnotationFormatError(
            f"{source}:{last}: {len(points)} vertex lines is not a multiple of 4")
    rects, skipped = [], 0
    for i in range(0, len(points), 4):
        group = np.array([p[:2] for p in points[i:i + 4]])
        if not np.all(np.isfinite(group)):
            skipped += 1
            continue
        try:
            rects.append(rect_from_vertices(group))
        except GeometryError as e:
            raise AnnotationFormatError(f"{source}:{points[i][2]}: {e}") from e
    return rects, skipped


def parse_annotation_file(path) -> list[OrientedRect]:
    with open(path) as f:
        rects, skipped = parse_annotation_text(f.read(), str(path))
    if skipped:
        log.info("%s: skipped %d rectangle(s) with non-finite vertices", path, skipped)
    return rects


def serialize_rects(rects: Sequence[OrientedRect]) -> str:
    """Inverse of parsing: four vertex lines per rectangle."""
    lines = []
    for r in rects:
        for x, y in vertices(r):
            lines.append(f"{x:.6f} {y:.6f}")
    return "\n".join(lines) + ("\n" if lines else "")


_CORNELL_NAME = re.compile(r"^(pcd\d+)c(pos|neg)\.txt$")


def load_object_map(path) -> dict:
    """Two whitespace columns per line: image id (or number) and object id."""
    out = {}
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            toks = line.replace(",", " ").split()
            if not toks or toks[0].startswith("#"):
                continue
            if len(toks) < 2:
                raise AnnotationFormatError(f"{path}:{lineno}: expected image and object columns")
            img = toks[0] if toks[0].startswith("pcd") else f"pcd{int(toks[0]):04d}"
            out[img] = toks[1]
    return out


def fallback_object_id(image_id: str) -> str:
    """Approximate object identity: the image id without its last digit."""
    return image_id[:-1]


def parse_directory(root, object_map: Optional[dict] = None,
                    source_size=(640, 480)) -> list[Annotation]:
    """Collect every ``*cpos.txt`` under ``root`` (and its ``cneg`` sibling)."""
    root = Path(root)
    if not root.is_dir():
        raise FileNotFoundError(f"{root} is not a directory")
    anns = []
    approx = False
    for p in sorted(root.rglob("*cpos.txt")):
        m = _CORNELL_NAME.match(p.name)
        image_id = m.group(1) if m else p.name[: -len("cpos.txt")]
        pos = parse_annotation_file(p)
        neg_path = p.with_name(p.name.replace("cpos.txt", "cneg.txt"))
        neg = parse_annotation_file(neg_path) if neg_path.exists() else []
        if object_map and image_id in object_map:
            obj = object_map[image_id]
        else:
            obj = fallback_object_id(image_id)
            approx = True
        anns.append(Annotation(image_id, obj, pos, tuple(source_size), neg))
    if approx:
        log.warning("object ids derived from image-id prefixes; object-wise splits are approximate")
    return anns


def annotations_to_doc(anns: Sequence[Annotation]) -> dict:
    return {"schema": ANNOTATIONS_SCHEMA, "annotations": [a.to_json() for a in anns]}


def annotations_from_doc(doc) -> list[Annotation]:
    check_schema(doc, ANNOTATIONS_SCHEMA)
    return [Annotation.from_json(d) for d in doc["annotations"]]


@dataclass(frozen=True)
class SplitSpec:
    mode: str = "image_wise"
    seed: int = 0
    train_count: int = 708
    test_count: int = 177

    def __post_init__(self):
        if self.mode not in ("image_wise", "object_wise"):
            raise ConfigError(f"unknown split mode {self.mode!r}")
        if self.train_count < 0 or self.test_count < 0:
            raise ConfigError("split counts must be non-negative")


def make_split(annotations: Sequence[Annotation], spec: SplitSpec):
    """Seeded (train, test) partition.

    Image-wise splits need ``train_count + test_count`` to equal the corpus
    size. Object-wise splits shuffle object ids and give each object whole to
    the train side until its share reaches the train fraction.
    """
    anns = list(annotations)
    rng = np.random.default_rng(spec.seed)
    if spec.mode == "image_wise":
        if spec.train_count + spec.test_count != len(anns):
            raise ConfigError(f"train_count + test_count = {spec.train_count + spec.test_count}"
                              f" but there are {len(anns)} annotations")
        order = rng.permutation(len(anns))
        return ([anns[i] for i in order[:spec.train_count]],
                [anns[i] for i in order[spec.train_count:]])
    groups: dict = {}
    for a in anns:
        if not a.object_id:
            raise ConfigError(f"annotation {a.image_id} has no object_id")
        groups.setdefault(a.object_id, []).append(a)
    ids = sorted(groups)
    ids = [ids[i] for i in rng.permutation(len(ids))]
    denom = spec.train_count + spec.test_count
    target = len(anns) * (spec.train_count / denom if denom else 1.0)
    train, test = [], []
    for oid in ids:
        g = groups[oid]
        # join train while that moves its size no further from target
        if abs(len(train) + len(g) - target) <= abs(len(train) - target):
            train.extend(g)
        else:
            test.extend(g)
    return train, test


@dataclass(frozen=True)
class AugmentParams:
    translate_x: float = 0.0
    translate_y: float = 0.0
    rotate: float = 0.0
    flip_h: bool = False
    flip_v: bool = False
    crop_size: int = 320

    def __post_init__(self):
        if abs(self.translate_x) > MAX_TRANSLATE or abs(self.translate_y) > MAX_TRANSLATE:
            raise ValueError(f"translation must lie within +-{MAX_TRANSLATE} px")
        if abs(self.rotate) > MAX_ROTATE:
            raise ValueError(f"rotation must lie within +-{MAX_ROTATE} deg")
        if self.crop_size <= 0:
            raise ValueError("crop_size must be positive")


def sample_augment_params(rng: np.random.Generator, crop_size: int = 320) -> AugmentParams:
    tx, ty = rng.uniform(-MAX_TRANSLATE, MAX_TRANSLATE, size=2)
    rot = rng.uniform(-MAX_ROTATE, MAX_ROTATE)
    fh, fv = rng.random(2) < 0.5
    return AugmentParams(float(tx), float(ty), float(rot), bool(fh), bool(fv), crop_size)


def _transform_points(pts: np.ndarray, origin, params: AugmentParams) -> np.ndarray:
    c = 0.5 * params.crop_size
    q = pts - np.asarray(origin)
    t = math.radians(params.rotate)
    rot = np.array([[math.cos(t), -math.sin(t)], [math.sin(t), math.cos(t)]])
    q = (q - c) @ rot.T + c
    if params.flip_h:
        q[:, 0] = params.crop_size - q[:, 0]
    if params.flip_v:
        q[:, 1] = params.crop_size - q[:, 1]
    return q


def augment(ann: Annotation, params: AugmentParams) -> Annotation:
    """Crop, rotate about the crop center, then flip; rectangles are refit.

    Rectangles whose transformed center leaves ``[0, crop_size)^2`` are
    dropped; ones straddling the border with the center inside are kept.
    """
    sw, sh = ann.source_size
    s = params.crop_size
    ox = 0.5 * sw + params.translate_x - 0.5 * s
    oy = 0.5 * sh + params.translate_y - 0.5 * s
    if ox < 0 or oy < 0 or ox + s > sw or oy + s > sh:
        raise ValueError(f"crop window ({ox:.1f}, {oy:.1f}, {s}) exceeds source {sw}x{sh}")

    def move(rects):
        out = []
        for r in rects:
            fitted = rect_from_vertices(_transform_points(vertices(r), (ox, oy), params))
            if 0.0 <= fitted.x < s and 0.0 <= fitted.y < s:
                out.append(fitted)
        return out

    return Annotation(ann.image_id, ann.object_id, move(ann.pos_rects), (s, s), move(ann.neg_rects))
