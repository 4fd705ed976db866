"""Uncompressed column-major run-length masks.

Same convention as the analysis toolkit's ingest format: runs alternate
0/1 starting with a zero run over the Fortran-flattened (H, W) array.
Kept self-contained so the exporter talks to the toolkit only through
files.
"""

import numpy as np


def rle_encode(mask: np.ndarray) -> dict:
    mask = np.asarray(mask, dtype=bool)
    flat = mask.flatten(order="F").astype(np.int8)
    if flat.size == 0:
        raise ValueError("empty mask array")
    boundaries = np.flatnonzero(np.diff(flat)) + 1
    edges = np.concatenate([[0], boundaries, [flat.size]])
    counts = np.diff(edges).tolist()
    if flat[0] == 1:
        counts = [0] + counts
    return {"size": [int(mask.shape[0]), int(mask.shape[1])], "counts": counts}


def rle_decode(obj: dict) -> np.ndarray:
    h, w = (int(v) for v in obj["size"])
    counts = list(obj["counts"])
    if sum(counts) != h * w:
        raise ValueError(f"run lengths sum to {sum(counts)}, expected {h * w}")
    values = np.zeros(len(counts), dtype=bool)
    values[1::2] = True
    flat = np.repeat(values, counts)
    return flat.reshape((h, w), order="F")
