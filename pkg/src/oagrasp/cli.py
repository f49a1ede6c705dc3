"""Command-line entry point: ``oagrasp <subcommand> ...``.

Failures exit non-zero and print one line to stderr of the form
``oagrasp: error: <kind>: <message>``. Set ``OAGRASP_LOG`` (DEBUG, INFO,
WARNING, ...) to control log verbosity.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import io as oio
from .anchors import AnchorGridConfig, ConfigError, OffsetVector, anchor_at, decode, match
from .config import load_config
from .dataset import (AnnotationFormatError, Annotation, SplitSpec, annotations_from_doc,
                      annotations_to_doc, augment, load_object_map, make_split, parse_directory,
                      sample_augment_params)
from .evaluation import GraspPrediction, evaluate
from .geometry import GeometryError, OrientedRect
from .io import SchemaError

log = logging.getLogger("oagrasp")


class CliError(Exception):
    def __init__(self, kind, message):
        super().__init__(message)
        self.kind = kind


def _out(args):
    return args.output if args.output not in (None, "-") else sys.stdout


def _annotations(path):
    return annotations_from_doc(oio.load(path, oio.ANNOTATIONS_SCHEMA))


def cmd_parse(args, cfg):
    omap = load_object_map(args.object_map) if args.object_map else None
    anns = parse_directory(args.directory, omap, tuple(args.source_size))
    oio.dump(annotations_to_doc(anns), _out(args))


def cmd_split(args, cfg):
    anns = _annotations(args.annotations)
    spec = SplitSpec(args.mode, args.seed, args.train_count, args.test_count)
    train, test = make_split(anns, spec)
    oio.dump(annotations_to_doc(train), args.train_out)
    oio.dump(annotations_to_doc(test), args.test_out)


def cmd_augment(args, cfg):
    anns = _annotations(args.annotations)
    streams = np.random.SeedSequence(args.seed).spawn(len(anns))
    recs = []
    for ann, ss in zip(anns, streams):
        params = sample_augment_params(np.random.default_rng(ss), args.crop_size)
        rec = augment(ann, params).to_json()
        rec["augment"] = {"translate_x": round(params.translate_x, 6), "translate_y": round(params.translate_y, 6),
                          "rotate": round(params.rotate, 6), "flip_h": params.flip_h,
                          "flip_v": params.flip_v, "crop_size": params.crop_size}
        recs.append(rec)
    oio.dump({"schema": oio.ANNOTATIONS_SCHEMA, "annotations": recs}, _out(args))


def _match_records(anns, grid):
    images = []
    for ann in anns:
        m = match(ann.pos_rects, grid)
        images.append({
            "image_id": ann.image_id,
            "num_positive": m.num_positive,
            "skipped": m.skipped,
            "positives": [{
                "anchor_index": p.slot, "cell_row": p.anchor.cell_row, "cell_col": p.anchor.cell_col,
                "angle_index": p.anchor.angle_index, "theta_a": p.anchor.theta_a, "gt_index": p.gt_index,
                "offsets": [round(float(v), 9) for v in p.target.as_array()],
            } for p in m.positives],
        })
    return images


def _grid_json(grid):
    return {"input_size": grid.input_size, "grid_n": grid.grid_n, "k": grid.k,
            "anchor_w": grid.anchor_w, "anchor_h": grid.anchor_h}


def cmd_match(args, cfg):
    anns = _annotations(args.annotations)
    oio.dump({"schema": oio.MATCHES_SCHEMA, "grid": _grid_json(cfg.anchor),
              "images": _match_records(anns, cfg.anchor)}, _out(args))


def cmd_encode(args, cfg):
    anns = _annotations(args.annotations)
    images = [{"image_id": r["image_id"],
               "offsets": [{"anchor_index": p["anchor_index"], "t": p["offsets"]} for p in r["positives"]]}
              for r in _match_records(anns, cfg.anchor)]
    oio.dump({"schema": oio.OFFSETS_SCHEMA, "grid": _grid_json(cfg.anchor), "images": images}, _out(args))


def cmd_decode(args, cfg):
    doc = oio.load(args.offsets, oio.OFFSETS_SCHEMA)
    grid = AnchorGridConfig(**doc["grid"]) if "grid" in doc else cfg.anchor
    anns = []
    for img in doc["images"]:
        rects = []
        for e in img["offsets"]:
            idx = int(e["anchor_index"])
            if not 0 <= idx < grid.num_anchors:
                raise SchemaError(f"anchor_index {idx} outside grid of {grid.num_anchors}")
            rects.append(decode(OffsetVector(*map(float, e["t"])), anchor_at(grid, idx), grid.k))
        anns.append(Annotation(img["image_id"], None, rects, (grid.input_size, grid.input_size)))
    oio.dump(annotations_to_doc(anns), _out(args))


def load_predictions(path) -> dict:
    doc = oio.load(path, oio.PREDICTIONS_SCHEMA)
    out = {}
    try:
        for rec in doc["predictions"]:
            out[str(rec["image_id"])] = [
                GraspPrediction(OrientedRect.from_dict(g), float(g["score"])) for g in rec["grasps"]]
    except (KeyError, TypeError, ValueError) as e:
        raise SchemaError(f"{path}: bad prediction record: {e}") from e
    return out


def cmd_eval(args, cfg):
    preds = load_predictions(args.pred)
    anns = _annotations(args.gt)
    pairs = [(preds.get(a.image_id, []), a.pos_rects) for a in anns]
    rep = evaluate(pairs, cfg.jaccard_thresholds, cfg.angle_thresholds, split=args.split)
    if args.csv:
        with open(args.csv, "w") as f:
            f.write(rep.to_csv())
    oio.dump(rep.to_dict(), _out(args))


def cmd_train_toy(args, cfg):
    from .toytrain import ToyModel, gen_synthetic, top1_accuracy, train
    tcfg = cfg.train
    overrides = {k: v for k, v in (("iterations", args.iterations), ("seed", args.seed)) if v is not None}
    if overrides:
        from dataclasses import replace
        tcfg = replace(tcfg, **overrides)
    grid = cfg.anchor
    data = gen_synthetic(tcfg.seed, args.scenes, grid)
    held = gen_synthetic(tcfg.seed + 10_000, args.test_scenes, grid)
    model, curve = train(tcfg, data, cfg.loss, grid)
    model.save(args.checkpoint)
    with open(args.curve, "w") as f:
        f.write("iteration,loss\n")
        for i, v in enumerate(curve):
            f.write(f"{i},{v:.9g}\n")
    summary = {"iterations": tcfg.iterations, "final_loss": curve[-1] if curve else None,
               "heldout_top1_accuracy": top1_accuracy(model, held)}
    print(json.dumps(summary))


def cmd_gradcheck(args, cfg):
    from .toytrain import ToyModel, gen_synthetic, grad_check, num_channels
    grid = cfg.anchor
    scenes = gen_synthetic(args.seed, args.pairs, grid)
    errs = []
    for i, s in enumerate(scenes):
        m = ToyModel.init(grid, num_channels(grid), cfg.train.hidden, seed=args.seed + i)
        errs.append(grad_check(m, s, args.eps, args.weights, seed=i, loss_cfg=cfg.loss))
    rep = {"pairs": args.pairs, "eps": args.eps, "weights_per_pair": args.weights,
           "max_rel_error": max(errs), "per_pair": errs}
    oio.dump(rep, _out(args))


def cmd_render(args, cfg):
    from .render import render_svg
    with open(args.input) as f:
        doc = json.load(f)
    schema = str(doc.get("schema", "")) if isinstance(doc, dict) else ""
    if schema.startswith("oagrasp.predictions/"):
        oio.check_schema(doc, oio.PREDICTIONS_SCHEMA)
        recs = [(r["image_id"], [OrientedRect.from_dict(g) for g in r["grasps"]],
                 [f'{g["score"]:.2f}' for g in r["grasps"]]) for r in doc["predictions"]]
        size = (cfg.anchor.input_size, cfg.anchor.input_size)
        sizes = {}
    else:
        anns = annotations_from_doc(doc)
        recs = [(a.image_id, a.pos_rects, None) for a in anns]
        sizes = {a.image_id: tuple(a.source_size) for a in anns}
        size = None
    if args.image_id is not None:
        recs = [r for r in recs if r[0] == args.image_id]
    if not recs:
        raise CliError("not-found", "no matching image in input")
    image_id, rects, labels = recs[0]
    svg = render_svg(rects, sizes.get(image_id, size or (640, 480)), labels, title=image_id)
    if args.output in (None, "-"):
        sys.stdout.write(svg)
    else:
        with open(args.output, "w") as f:
            f.write(svg)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="oagrasp", description="Oriented anchor box grasp detection toolkit")
    p.add_argument("--config", help="INI-style toolkit config file")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        sp = sub.add_parser(name, help=help_)
        sp.set_defaults(func=fn)
        return sp

    sp = add("parse", cmd_parse, "read a directory of *cpos.txt files into annotation JSON")
    sp.add_argument("directory")
    sp.add_argument("--object-map", help="file mapping image ids to object ids")
    sp.add_argument("--source-size", type=int, nargs=2, default=(640, 480), metavar=("W", "H"))
    sp.add_argument("-o", "--output")

    sp = add("split", cmd_split, "image-wise or object-wise train/test split")
    sp.add_argument("annotations")
    sp.add_argument("--mode", choices=("image_wise", "object_wise"), default="image_wise")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--train-count", type=int, default=708)
    sp.add_argument("--test-count", type=int, default=177)
    sp.add_argument("--train-out", required=True)
    sp.add_argument("--test-out", required=True)

    sp = add("augment", cmd_augment, "random crop/rotate/flip of annotations")
    sp.add_argument("annotations")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--crop-size", type=int, default=320)
    sp.add_argument("-o", "--output")

    for name, fn, help_ in (("match", cmd_match, "assign ground truths to anchors"),
                            ("encode", cmd_encode, "anchor offsets of every ground truth")):
        sp = add(name, fn, help_)
        sp.add_argument("annotations")
        sp.add_argument("-o", "--output")

    sp = add("decode", cmd_decode, "rectangles from an offsets document")
    sp.add_argument("offsets")
    sp.add_argument("-o", "--output")

    sp = add("eval", cmd_eval, "rectangle-metric accuracy over a threshold grid")
    sp.add_argument("--pred", required=True)
    sp.add_argument("--gt", required=True)
    sp.add_argument("--csv", help="also write the threshold table as CSV")
    sp.add_argument("--split", default="unspecified")
    sp.add_argument("-o", "--output")

    sp = add("train-toy", cmd_train_toy, "train the toy head on synthetic scenes")
    sp.add_argument("--scenes", type=int, default=500)
    sp.add_argument("--test-scenes", type=int, default=100)
    sp.add_argument("--iterations", type=int)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--checkpoint", default="toymodel.json")
    sp.add_argument("--curve", default="loss_curve.csv")

    sp = add("gradcheck", cmd_gradcheck, "finite-difference check of the loss gradients")
    sp.add_argument("--pairs", type=int, default=20)
    sp.add_argument("--eps", type=float, default=1e-5)
    sp.add_argument("--weights", type=int, default=200)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("-o", "--output")

    sp = add("render", cmd_render, "draw annotations or predictions as SVG")
    sp.add_argument("input")
    sp.add_argument("--image-id")
    sp.add_argument("-o", "--output")
    return p


_ERROR_KINDS = (
    (FileNotFoundError, "missing-file"),
    (SchemaError, "schema"),
    (AnnotationFormatError, "format"),
    (GeometryError, "geometry"),
    (ConfigError, "config"),
    (json.JSONDecodeError, "schema"),
    (ValueError, "invalid-argument"),
    (OSError, "io"),
)


def main(argv=None) -> int:
    level = os.environ.get("OAGRASP_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        args.func(args, cfg)
    except CliError as e:
        print(f"oagrasp: error: {e.kind}: {e}", file=sys.stderr)
        return 1
    except Exception as e:
        for cls, kind in _ERROR_KINDS:
            if isinstance(e, cls):
                print(f"oagrasp: error: {kind}: {e}", file=sys.stderr)
                return 1
        raise
    return 0


if __name__ == "__main__":
    sys.exit(main())
