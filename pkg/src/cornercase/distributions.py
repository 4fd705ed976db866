"""Discrete distributions on [0, 1] and the divergences between them.

A cluster's IoU samples are turned into a distribution via a Gaussian KDE
evaluated on an even grid over [0, 1] and renormalized to sum 1.  KL, JS
and EMD then compare the bounding-box and mask IoU distributions.
All logarithms are natural (nats).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

KL_EPSILON = 1e-10
BANDWIDTH_FLOOR = 0.01
JS_MAX = math.sqrt(math.log(2.0))


class GridMismatchError(ValueError):
    """Two distributions on different grids were compared."""


@dataclass(frozen=True)
class DiscreteDistribution:
    grid: np.ndarray   # G evenly spaced points on [0, 1]
    probs: np.ndarray  # G non-negative weights summing to 1

    def __post_init__(self):
        if self.grid.shape != self.probs.shape:
            raise ValueError("grid and probs length differ")
        if np.any(self.probs < 0):
            raise ValueError("negative probability weight")
        if abs(float(self.probs.sum()) - 1.0) > 1e-12:
            raise ValueError(f"weights sum to {self.probs.sum()}, not 1")

    @property
    def spacing(self) -> float:
        return float(self.grid[1] - self.grid[0])


def _check_grids(p: DiscreteDistribution, q: DiscreteDistribution) -> None:
    if p.grid.shape != q.grid.shape or not np.allclose(p.grid, q.grid):
        raise GridMismatchError("distributions live on different grids")


def silverman_bandwidth(values: np.ndarray) -> float:
    """0.9 * min(sigma, IQR/1.34) * n^(-1/5), floored at BANDWIDTH_FLOOR."""
    n = values.size
    sigma = float(np.std(values, ddof=1)) if n > 1 else 0.0
    q75, q25 = np.percentile(values, [75, 25])
    iqr = float(q75 - q25)
    spread = min(sigma, iqr / 1.34)
    h = 0.9 * spread * n ** (-1 / 5)
    return max(h, BANDWIDTH_FLOOR)


def kde_pdf(values, grid_size: int = 101, bandwidth: float | None = None) -> DiscreteDistribution:
    """Gaussian KDE of IoU samples, evaluated on [0, 1] and renormalized.

    ``bandwidth=None`` selects the Silverman rule-of-thumb value.
    """
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise ValueError("kde_pdf of an empty sample")
    h = silverman_bandwidth(values) if bandwidth is None else float(bandwidth)
    if h <= 0:
        raise ValueError(f"bandwidth must be positive, got {h}")
    grid = np.linspace(0.0, 1.0, grid_size)
    z = (values[None, :] - grid[:, None]) / h
    density = np.exp(-0.5 * z * z).sum(axis=1) / (values.size * h * math.sqrt(2 * math.pi))
    total = density.sum()
    if total <= 0:  # all mass numerically off-grid; fall back to uniform
        probs = np.full(grid_size, 1.0 / grid_size)
    else:
        probs = density / total
    return DiscreteDistribution(grid=grid, probs=probs)


def _smoothed(p: np.ndarray) -> np.ndarray:
    q = p + KL_EPSILON
    return q / q.sum()


def kl_divergence(p: DiscreteDistribution, q: DiscreteDistribution) -> float:
    """KL(p | q) in nats, with epsilon smoothing on both sides."""
    _check_grids(p, q)
    ps = _smoothed(p.probs)
    qs = _smoothed(q.probs)
    return float(np.sum(ps * np.log(ps / qs)))


def js_distance(p: DiscreteDistribution, q: DiscreteDistribution) -> float:
    """Jensen-Shannon distance: sqrt((KL(p|m) + KL(q|m)) / 2), m = (p+q)/2."""
    _check_grids(p, q)
    m = DiscreteDistribution(grid=p.grid, probs=(p.probs + q.probs) / 2.0)
    val = (kl_divergence(p, m) + kl_divergence(q, m)) / 2.0
    return math.sqrt(max(val, 0.0))


def emd(p: DiscreteDistribution, q: DiscreteDistribution) -> float:
    """1-D earth mover distance via the CDF closed form.

    Equals the optimal-transport flow minimum for ground distance
    |grid_i - grid_j| on an even grid.
    """
    _check_grids(p, q)
    cdf_diff = np.cumsum(p.probs) - np.cumsum(q.probs)
    return float(np.sum(np.abs(cdf_diff)) * p.spacing)
