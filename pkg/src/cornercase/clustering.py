"""Grouping sampled detections of one image into per-object clusters.

Two methods: a deterministic single-linkage clustering over box IoU
(default), and an EM-fitted Gaussian mixture over the box corner vectors
with the component count chosen by BIC.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from cornercase.dataio import DetectionSample
from cornercase.geometry import iou_box

log = logging.getLogger(__name__)

GMM_VARIANCE_FLOOR = 1e-4  # px^2; keeps duplicate boxes from collapsing a component
GMM_MAX_ITER = 200
GMM_TOL = 1e-6


@dataclass
class Cluster:
    """Detections attributed to one physical object."""

    cluster_id: int
    members: list

    @property
    def size(self) -> int:
        return len(self.members)

    def boxes(self) -> np.ndarray:
        return np.array([s.bbox.as_tuple() for s in self.members], dtype=float)

    def scores(self) -> np.ndarray:
        return np.stack([s.class_scores for s in self.members])


@dataclass
class ClusteringConfig:
    method: str = "greedy-iou"  # or "gmm"
    link_iou: float = 0.5
    min_cluster_size: int = 2
    gmm_max_components: int = 20
    gmm_seed: int = 0

    def __post_init__(self):
        if not 0 < self.link_iou < 1:
            raise ValueError(f"link_iou must be in (0, 1), got {self.link_iou}")
        if self.min_cluster_size < 1:
            raise ValueError("min_cluster_size must be >= 1")


class _UnionFind:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, a):
        while self.parent[a] != a:
            self.parent[a] = self.parent[self.parent[a]]
            a = self.parent[a]
        return a

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


def _check_single_image(samples) -> None:
    ids = {s.image_id for s in samples}
    if len(ids) > 1:
        raise ValueError(f"samples span multiple images: {sorted(ids)}")


def _build_clusters(samples, groups) -> list:
    """groups: list of member-index lists. Sorts by (-size, first index)."""
    groups = sorted(groups, key=lambda g: (-len(g), min(g)))
    return [
        Cluster(cluster_id=i, members=[samples[j] for j in sorted(g)])
        for i, g in enumerate(groups)
    ]


def cluster_greedy_iou(samples, config: ClusteringConfig) -> list:
    """Single-linkage components of the IoU >= link_iou graph."""
    if not samples:
        return []
    _check_single_image(samples)
    n = len(samples)
    uf = _UnionFind(n)
    boxes = [s.bbox for s in samples]
    for i in range(n):
        for j in range(i + 1, n):
            if iou_box(boxes[i], boxes[j]) >= config.link_iou:
                uf.union(i, j)
    groups: dict = {}
    for i in range(n):
        groups.setdefault(uf.find(i), []).append(i)
    return _build_clusters(samples, list(groups.values()))


@dataclass
class GmmFit:
    """Full diagnostics of one mixture fit (best K by BIC)."""

    n_components: int
    assignments: np.ndarray
    means: np.ndarray
    variances: np.ndarray
    weights: np.ndarray
    log_likelihood: float
    log_likelihood_trace: list
    bic: float
    converged: bool


def _kmeanspp_init(x, k, rng):
    n = x.shape[0]
    centers = [x[rng.integers(n)]]
    for _ in range(1, k):
        d2 = np.min(
            [np.sum((x - c) ** 2, axis=1) for c in centers], axis=0
        )
        total = d2.sum()
        if total <= 0:
            centers.append(x[rng.integers(n)])
            continue
        centers.append(x[rng.choice(n, p=d2 / total)])
    return np.array(centers)


def _log_gauss_diag(x, mean, var):
    # sum over dims of log N(x_d | mean_d, var_d)
    return -0.5 * np.sum(
        np.log(2 * np.pi * var) + (x - mean) ** 2 / var, axis=1
    )


def _fit_gmm_k(x, k, rng) -> GmmFit:
    n, d = x.shape
    means = _kmeanspp_init(x, k, rng)
    variances = np.maximum(np.var(x, axis=0), GMM_VARIANCE_FLOOR)
    variances = np.tile(variances, (k, 1))
    weights = np.full(k, 1.0 / k)
    prev_ll = -np.inf
    trace = []
    converged = False
    resp = None
    for _ in range(GMM_MAX_ITER):
        # E-step
        log_prob = np.stack(
            [np.log(weights[c]) + _log_gauss_diag(x, means[c], variances[c]) for c in range(k)],
            axis=1,
        )
        log_norm = np.logaddexp.reduce(log_prob, axis=1)
        ll = float(log_norm.sum())
        trace.append(ll)
        resp = np.exp(log_prob - log_norm[:, None])
        if ll - prev_ll < GMM_TOL and np.isfinite(prev_ll):
            converged = True
            break
        prev_ll = ll
        # M-step
        nk = resp.sum(axis=0) + 1e-12
        weights = nk / n
        means = (resp.T @ x) / nk[:, None]
        for c in range(k):
            diff = x - means[c]
            variances[c] = np.maximum(
                (resp[:, c][:, None] * diff * diff).sum(axis=0) / nk[c],
                GMM_VARIANCE_FLOOR,
            )
    assignments = np.argmax(resp, axis=1)
    n_params = (k - 1) + k * d + k * d  # weights + means + diag variances
    bic = -2.0 * trace[-1] + n_params * math.log(n)
    return GmmFit(
        n_components=k,
        assignments=assignments,
        means=means,
        variances=variances,
        weights=weights,
        log_likelihood=trace[-1],
        log_likelihood_trace=trace,
        bic=bic,
        converged=converged,
    )


def fit_gmm(x: np.ndarray, max_components: int, seed: int) -> GmmFit:
    """Fit mixtures for K = 1..min(max_components, n) and pick the min-BIC one."""
    n = x.shape[0]
    best = None
    for k in range(1, min(max_components, n) + 1):
        rng = np.random.default_rng((seed, k))
        fit = _fit_gmm_k(x, k, rng)
        if best is None or fit.bic < best.bic:
            best = fit
    return best


def cluster_gmm(samples, config: ClusteringConfig) -> list:
    """EM mixture over (x1, y1, x2, y2) with the component count picked by BIC."""
    if not samples:
        return []
    _check_single_image(samples)
    if len(samples) == 1:
        return [Cluster(cluster_id=0, members=list(samples))]
    x = np.array([s.bbox.as_tuple() for s in samples], dtype=float)
    fit = fit_gmm(x, config.gmm_max_components, config.gmm_seed)
    if not fit.converged:
        log.warning("GMM did not converge after %d iterations", GMM_MAX_ITER)
    groups: dict = {}
    for i, c in enumerate(fit.assignments):
        groups.setdefault(int(c), []).append(i)
    return _build_clusters(samples, list(groups.values()))


def cluster_samples(samples, config: ClusteringConfig) -> list:
    if config.method == "greedy-iou":
        return cluster_greedy_iou(samples, config)
    if config.method == "gmm":
        return cluster_gmm(samples, config)
    raise ValueError(f"unknown clustering method {config.method!r}")


def filter_clusters(clusters, min_cluster_size: int):
    """Partition clusters by size; small ones are reported, never dropped silently."""
    kept = [c for c in clusters if c.size >= min_cluster_size]
    dropped = [c for c in clusters if c.size < min_cluster_size]
    if dropped:
        log.info(
            "dropped %d clusters below min size %d", len(dropped), min_cluster_size
        )
    return kept, dropped
