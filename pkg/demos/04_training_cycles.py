"""Walkthrough: corner-case-driven image selection across training cycles.

Each cycle, a detector (trained elsewhere) is run on a fresh candidate
subset; images whose detections include corner cases (L_CC / C_CC /
LC_CC) join the training pool, everything else is skipped. The payoff is
the data reduction: how much labeling/training effort the selection
saved relative to using every candidate image.
"""

import numpy as np

from cornercase.cycle import (
    CycleState,
    advance_cycle,
    count_categories,
    cycle_report,
    select_corner_case_images,
)
from cornercase.matching import CornerCaseCategory as C

rng = np.random.default_rng(7)
CATS = list(C)

state = CycleState(cycle=0, training_ids=frozenset(f"seed{i}" for i in range(20)))
history = []

for subset in range(4):
    # Fake categorization output for 50 candidate images. As cycles pass,
    # corner cases get rarer (the detector improves on what it has seen).
    cc_rate = 0.35 / (subset + 1)
    cats = {}
    for i in range(50):
        n_det = rng.integers(1, 6)
        weights = np.array([0.55, cc_rate / 3, cc_rate / 3, cc_rate / 3, 0.1])
        weights /= weights.sum()
        cats[f"c{subset}_img{i:02d}"] = [
            CATS[j] for j in rng.choice(5, size=n_det, p=weights)
        ]

    selected = select_corner_case_images(cats, min_cc=1)
    counts = count_categories([c for cs in cats.values() for c in cs])
    state = advance_cycle(state, selected, candidate_ids=cats,
                          category_counts=counts)
    history.append(state)
    print(f"cycle {state.cycle}: {len(selected)}/{len(cats)} images selected, "
          f"training pool now {len(state.training_ids)}")

print("\nper-cycle report:")
for row in cycle_report(history):
    print(row)
