"""Command-line entry point wiring the pipeline stages.

Subcommands: criteria, categorize, train, eval, analyze, select, report.
Configuration comes from an optional JSON file (--config) with targeted
flag overrides; flags win.  Exit codes: 0 success, 1 internal error,
2 input/validation error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys

import numpy as np

from cornercase import cycle as cycle_mod
from cornercase.analysis import correlation_report, sequential_feature_selection
from cornercase.config import ConfigError, PipelineConfig, load_config
from cornercase.dataio import (
    SchemaError,
    load_ground_truth,
    load_manifest,
    load_run,
    read_feature_table,
    write_feature_table,
)
from cornercase.decision import (
    CLASS_NAMES,
    DecisionModel,
    evaluate,
    random_undersample,
    train_forest,
    train_tree,
)
from cornercase.matching import CornerCaseCategory
from cornercase.pipeline import (
    label_feature_rows,
    read_categorized_ndjson,
    read_predictions_ndjson,
    run_categorize,
    run_criteria,
    summary_to_json,
    write_categorized_ndjson,
    write_predictions_ndjson,
)

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_INPUT = 2

_LABEL_INDEX = {name: i for i, name in enumerate(CLASS_NAMES)}


class InputError(ValueError):
    """User-facing input problem; maps to exit code 2."""


def _resolve_config(args) -> PipelineConfig:
    config = load_config(args.config) if args.config else PipelineConfig()
    if getattr(args, "seed", None) is not None:
        config.seed = args.seed
    if getattr(args, "jobs", None) is not None:
        config.jobs = args.jobs
    if getattr(args, "min_cluster_size", None) is not None:
        config.clustering.min_cluster_size = args.min_cluster_size
    if getattr(args, "iou_source", None) is not None:
        config.thresholds.iou_source = args.iou_source
    if getattr(args, "tp_iou", None) is not None:
        config.thresholds.tp_iou = args.tp_iou
    if getattr(args, "fp_iou", None) is not None:
        config.thresholds.fp_iou = args.fp_iou
    if getattr(args, "min_cc", None) is not None:
        config.cycle.min_cc = args.min_cc
    return config


def _write_run_log(out_dir, config: PipelineConfig, extra=None) -> None:
    payload = {"config": config.to_json()}
    payload.update(extra or {})
    with open(os.path.join(out_dir, "run.json"), "w") as f:
        json.dump(payload, f, indent=1, sort_keys=True)


def _ensure_out_dir(path) -> str:
    os.makedirs(path, exist_ok=True)
    return path


def _labeled_matrix(rows):
    labeled = [r for r in rows if r.label]
    if not labeled:
        raise InputError("feature table carries no labels")
    bad = [r.label for r in labeled if r.label not in _LABEL_INDEX]
    if bad:
        raise InputError(f"unknown label(s) in feature table: {sorted(set(bad))}")
    X = np.stack([r.values for r in labeled])
    y = np.array([_LABEL_INDEX[r.label] for r in labeled])
    return X, y


def cmd_criteria(args) -> int:
    config = _resolve_config(args)
    out_dir = _ensure_out_dir(args.out)
    manifest, groups = load_run(args.manifest, args.detections)
    rows, predictions, skipped = run_criteria(groups, config)
    write_feature_table(rows, os.path.join(out_dir, "features.csv"))
    write_predictions_ndjson(predictions, os.path.join(out_dir, "clusters.ndjson"))
    _write_run_log(out_dir, config, {
        "command": "criteria",
        "images": len(groups),
        "feature_rows": len(rows),
        "skipped_clusters": skipped,
    })
    print(f"wrote {len(rows)} feature rows ({len(skipped)} clusters skipped)")
    return EXIT_OK


def cmd_categorize(args) -> int:
    config = _resolve_config(args)
    out_dir = _ensure_out_dir(args.out)
    manifest = load_manifest(args.manifest)
    predictions = read_predictions_ndjson(args.clusters)
    gt_groups = load_ground_truth(args.gt, manifest) if args.gt else {}
    matches, summary = run_categorize(predictions, gt_groups, config)
    write_categorized_ndjson(matches, os.path.join(out_dir, "categorized.ndjson"))
    with open(os.path.join(out_dir, "summary.json"), "w") as f:
        json.dump(summary_to_json(summary), f, indent=1, sort_keys=True)
    if args.features:
        rows = read_feature_table(args.features)
        label_feature_rows(rows, matches)
        write_feature_table(rows, os.path.join(out_dir, "features_labeled.csv"))
    _write_run_log(out_dir, config, {"command": "categorize"})
    for name, count in summary.counts.items():
        print(f"{name:<6} {count:>8} ({summary.percentages[name]:.1f}%)")
    print(f"FN     {summary.fn_count:>8}")
    return EXIT_OK


def cmd_train(args) -> int:
    config = _resolve_config(args)
    rows = read_feature_table(args.features)
    X, y = _labeled_matrix(rows)
    if args.no_undersample:
        Xb, yb = X, y
    else:
        Xb, yb, _ = random_undersample(X, y, seed=config.seed)
    train_config = config.classifier.train_config(config.seed)
    if config.classifier.kind == "tree":
        model = train_tree(Xb, yb, train_config)
    elif config.classifier.kind == "forest":
        model = train_forest(Xb, yb, train_config)
    else:
        raise InputError(f"unknown classifier kind {config.classifier.kind!r}")
    model.save(args.out)
    print(f"trained {model.kind} on {len(yb)} rows -> {args.out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    if not os.path.exists(args.model):
        raise InputError(f"model file not found: {args.model}")
    model = DecisionModel.load(args.model)
    rows = read_feature_table(args.features)
    X, y = _labeled_matrix(rows)
    report = evaluate(model, X, y)
    with open(args.out, "w") as f:
        json.dump(report.to_json(), f, indent=1, sort_keys=True)
    print(report.format_table())
    return EXIT_OK


def cmd_analyze(args) -> int:
    config = _resolve_config(args)
    out_dir = _ensure_out_dir(args.out)
    rows = read_feature_table(args.features)
    records = read_categorized_ndjson(args.categorized)
    by_key = {(r["image_id"], r["cluster_id"]): r for r in records}
    features, box_iou, mask_iou, labels = [], [], [], []
    for row in rows:
        rec = by_key.get((row.image_id, row.cluster_id))
        if rec is None:
            continue
        features.append(row.values)
        box_iou.append(rec["iou_box_gt"])
        mask_iou.append(rec["iou_mask_gt"] if rec["iou_mask_gt"] is not None else 0.0)
        labels.append(rec["category"])
    if not features:
        raise InputError("no feature rows with categorization records")
    features = np.stack(features)
    table = correlation_report(features, box_iou, mask_iou)
    with open(os.path.join(out_dir, "correlations.json"), "w") as f:
        json.dump(table.to_json(), f, indent=1, sort_keys=True)
    with open(os.path.join(out_dir, "correlations.csv"), "w", newline="") as f:
        csv.writer(f).writerows(table.to_csv_rows())
    y = np.array([_LABEL_INDEX[lab] for lab in labels])
    if np.unique(y).size >= 2:
        sfs = sequential_feature_selection(
            features, y,
            direction=config.sfs.direction,
            n_select=min(config.sfs.n_select, features.shape[1]),
            folds=config.sfs.folds,
            seed=config.seed,
            tree_config=config.classifier.train_config(config.seed),
        )
        with open(os.path.join(out_dir, "sfs.json"), "w") as f:
            json.dump(sfs.to_json(), f, indent=1, sort_keys=True)
        print("selected:", ", ".join(sfs.selected))
    else:
        log.warning("fewer than 2 label classes; skipping feature selection")
    _write_run_log(out_dir, config, {"command": "analyze"})
    return EXIT_OK


def cmd_select(args) -> int:
    config = _resolve_config(args)
    records = read_categorized_ndjson(args.categorized)
    categories_by_image: dict = {}
    for rec in records:
        categories_by_image.setdefault(rec["image_id"], []).append(
            CornerCaseCategory(rec["category"])
        )
    selected = cycle_mod.select_corner_case_images(
        categories_by_image, min_cc=config.cycle.min_cc
    )
    counts = cycle_mod.count_categories(
        [c for cats in categories_by_image.values() for c in cats]
    )
    state = cycle_mod.CycleState(
        cycle=args.cycle,
        training_ids=frozenset(),
        candidate_ids=frozenset(categories_by_image),
        selected_ids=frozenset(selected),
        category_counts=counts,
    )
    cycle_mod.write_selection_json(state, args.out)
    print(f"selected {len(selected)} of {len(categories_by_image)} images")
    return EXIT_OK


def cmd_report(args) -> int:
    with open(args.history) as f:
        raw = json.load(f)
    history = [
        cycle_mod.CycleState(
            cycle=int(entry["cycle"]),
            training_ids=frozenset(entry.get("training_ids", ())),
            candidate_ids=frozenset(entry.get("candidates", ())),
            selected_ids=frozenset(entry.get("selected", ())),
            category_counts=dict(entry.get("counts", {})),
        )
        for entry in raw
    ]
    rows = cycle_mod.cycle_report(history)
    out_dir = _ensure_out_dir(args.out)
    cycle_mod.write_report_csv(rows, os.path.join(out_dir, "cycles.csv"))
    cycle_mod.write_report_json(rows, os.path.join(out_dir, "cycles.json"))
    for row in rows:
        print(row)
    return EXIT_OK


def _add_common(parser):
    parser.add_argument("--config", help="pipeline config JSON")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--jobs", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cornercase",
        description="Uncertainty-based corner case detection pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("criteria", help="cluster detections and compute criteria")
    p.add_argument("--manifest", required=True)
    p.add_argument("--detections", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--min-cluster-size", type=int)
    _add_common(p)
    p.set_defaults(func=cmd_criteria)

    p = sub.add_parser("categorize", help="match clusters to GT and categorize")
    p.add_argument("--manifest", required=True)
    p.add_argument("--clusters", required=True)
    p.add_argument("--gt")
    p.add_argument("--features", help="feature CSV to emit with labels attached")
    p.add_argument("--out", required=True)
    p.add_argument("--iou-source", choices=["box", "mask"])
    p.add_argument("--tp-iou", type=float)
    p.add_argument("--fp-iou", type=float)
    _add_common(p)
    p.set_defaults(func=cmd_categorize)

    p = sub.add_parser("train", help="train the corner-case decision function")
    p.add_argument("--features", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--no-undersample", action="store_true")
    _add_common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a trained decision function")
    p.add_argument("--model", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("analyze", help="criteria correlations and feature selection")
    p.add_argument("--features", required=True)
    p.add_argument("--categorized", required=True)
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("select", help="select corner-case images for training")
    p.add_argument("--categorized", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--cycle", type=int, default=0)
    p.add_argument("--min-cc", type=int)
    _add_common(p)
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("report", help="summarize a training-cycle history")
    p.add_argument("--history", required=True)
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (SchemaError, ConfigError, InputError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # pragma: no cover - defensive
        log.exception("internal error")
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
