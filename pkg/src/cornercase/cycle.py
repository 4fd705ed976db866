"""Corner-case-driven image selection across training cycles.

Selection and bookkeeping only; the detector itself is retrained outside.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

from cornercase.matching import CORNER_CASE_CATEGORIES, CornerCaseCategory


@dataclass
class CycleState:
    cycle: int = 0
    training_ids: frozenset = frozenset()
    candidate_ids: frozenset = frozenset()
    selected_ids: frozenset = frozenset()
    category_counts: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.selected_ids <= self.candidate_ids and self.candidate_ids:
            raise ValueError("selected ids must be a subset of the candidates")


def select_corner_case_images(categories_by_image: dict, min_cc: int = 1):
    """Image ids whose detections include >= min_cc corner cases.

    ``categories_by_image`` maps image_id to its detections' categories.
    TP and FP detections never select an image.
    """
    selected = set()
    for image_id, categories in categories_by_image.items():
        n_cc = sum(1 for c in categories if c in CORNER_CASE_CATEGORIES)
        if n_cc >= min_cc:
            selected.add(image_id)
    return selected


def count_categories(categories) -> dict:
    counts = {c.value: 0 for c in CornerCaseCategory}
    for c in categories:
        counts[c.value] += 1
    return counts


def advance_cycle(state: CycleState, selected_ids, candidate_ids=None,
                  category_counts=None) -> CycleState:
    """Fold the selected images into the training pool and step the index."""
    selected = frozenset(selected_ids)
    return CycleState(
        cycle=state.cycle + 1,
        training_ids=state.training_ids | selected,
        candidate_ids=frozenset(candidate_ids or ()),
        selected_ids=selected,
        category_counts=dict(category_counts or {}),
    )


def cycle_report(history) -> list:
    """Per-cycle summary rows; includes the data-reduction ratio of the last
    state (1 - used/total over all candidate images seen)."""
    rows = []
    total_candidates = 0
    for state in history:
        total_candidates += len(state.candidate_ids)
        row = {
            "cycle": state.cycle,
            "training_set_size": len(state.training_ids),
            "candidates": len(state.candidate_ids),
            "selected": len(state.selected_ids),
        }
        for name, value in sorted(state.category_counts.items()):
            row[f"count_{name}"] = value
        rows.append(row)
    if rows and total_candidates:
        used = sum(r["selected"] for r in rows)
        rows[-1]["reduction"] = 1.0 - used / total_candidates
    return rows


def write_report_csv(rows, path) -> None:
    fields: list = []
    for row in rows:
        for key in row:
            if key not in fields:
                fields.append(key)
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=fields)
        writer.writeheader()
        writer.writerows(rows)


def write_report_json(rows, path) -> None:
    with open(path, "w") as f:
        json.dump(rows, f, indent=1, sort_keys=True)


def write_selection_json(state: CycleState, path) -> None:
    with open(path, "w") as f:
        json.dump(
            {
                "cycle": state.cycle,
                "selected": sorted(state.selected_ids),
                "counts": state.category_counts,
            },
            f,
            indent=1,
            sort_keys=True,
        )
