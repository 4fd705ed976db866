"""Command line entry point: ``ccexport export ...``."""

from __future__ import annotations

import argparse
import logging
import sys

from ccexport.config import DEFAULT_CLASS_NAMES, ExportConfig
from ccexport.export import export_detections, export_ground_truth

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_USAGE = 2

log = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ccexport",
        description=(
            "Repeated stochastic Mask R-CNN inference dumped as NDJSON "
            "for corner-case analysis"
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("export", help="run MC-Dropout inference over a directory of images")
    p.add_argument("--images", required=True, help="directory of input images")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--weights", default=None, help="model state-dict file (.pt)")
    p.add_argument("--ann", default=None, help="COCO-style annotation JSON to convert")
    p.add_argument("--reps", type=int, default=10, help="stochastic repetitions per image")
    p.add_argument("--dropout", type=float, default=0.2, help="dropout probability")
    p.add_argument(
        "--placement", default="box_head",
        choices=["box_head", "mask_head", "both"],
        help="where to insert the dropout layer",
    )
    p.add_argument("--no-nms", action="store_true",
                   help="keep raw detections (this is already the default)")
    p.add_argument("--nms", action="store_true",
                   help="apply per-class NMS before writing")
    p.add_argument("--nms-iou", type=float, default=0.5)
    p.add_argument("--score-floor", type=float, default=0.05)
    p.add_argument("--max-detections", type=int, default=100)
    p.add_argument("--min-size", type=int, default=800)
    p.add_argument("--max-size", type=int, default=1333)
    p.add_argument("--classes", nargs="+", default=None,
                   help="foreground class names (default: driving classes)")
    p.add_argument("--dataset", default="export", help="dataset name in the manifest")
    p.add_argument("--device", default="cpu")
    p.add_argument("--seed", type=int, default=0)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    if args.nms and args.no_nms:
        log.error("--nms and --no-nms are mutually exclusive")
        return EXIT_USAGE
    try:
        config = ExportConfig(
            images_dir=args.images,
            out_dir=args.out,
            weights=args.weights,
            annotations=args.ann,
            class_names=tuple(args.classes) if args.classes else DEFAULT_CLASS_NAMES,
            repetitions=args.reps,
            dropout=args.dropout,
            dropout_placement=args.placement,
            score_floor=args.score_floor,
            nms=args.nms,
            nms_iou=args.nms_iou,
            max_detections=args.max_detections,
            min_size=args.min_size,
            max_size=args.max_size,
            device=args.device,
            seed=args.seed,
            dataset=args.dataset,
        )
    except ValueError as exc:
        log.error("bad configuration: %s", exc)
        return EXIT_USAGE
    try:
        export_detections(config)
        if config.annotations is not None:
            export_ground_truth(config)
    except (OSError, ValueError, RuntimeError, KeyError) as exc:
        log.error("export failed: %s", exc)
        return EXIT_INPUT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
