"""Alignment-kernel similarity graphs and spectral clustering over them.

Two points are similar when the line through them has many other points in
its tube: the pair cost is ``2**-|R|`` for ``|R|`` tube members (a large cap
when the tube is empty) and similarity is ``exp(-cost)``.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal

import numpy as np
import scipy.linalg
import scipy.sparse.linalg

from . import kernels
from .affine import AffineModel, fit_affine
from .klinear import Clustering
from .traces import PointSet

log = logging.getLogger(__name__)

INFINITY_CAP = 700.0
UNTOUCHED_COST = 2.0
# default tube half-width as a fraction of the output range
DEFAULT_DELTA_FRACTION = 0.0025
# above this size the embedding uses Lanczos instead of a dense eigensolver
DENSE_EIGEN_LIMIT = 3000


@dataclass(frozen=True)
class AlignmentConfig:
    # None means DEFAULT_DELTA_FRACTION of the output range
    delta: float | None = None
    # None means min(N - 1, 32)
    neighbor_samples: int | None = None
    # "random": partners drawn uniformly; "nearest": the closest points
    neighbors: Literal["random", "nearest"] = "random"
    seed: int = 0
    infinity_cap: float = INFINITY_CAP

    def __post_init__(self):
        if self.delta is not None and not self.delta > 0:
            raise ValueError("delta must be positive")
        if self.neighbor_samples is not None and self.neighbor_samples < 1:
            raise ValueError("neighbor_samples must be >= 1")
        if self.neighbors not in ("random", "nearest"):
            raise ValueError(f"unknown neighbour pool {self.neighbors!r}")
        if not self.infinity_cap > UNTOUCHED_COST:
            raise ValueError("infinity_cap must exceed the untouched cost 2.0")

    def resolve(self, ps: PointSet) -> tuple[float, int]:
        delta = self.delta
        if delta is None:
            delta = DEFAULT_DELTA_FRACTION * float(np.ptp(ps.y)) or 1.0
        a = self.neighbor_samples if self.neighbor_samples is not None else 32
        return delta, max(1, min(len(ps) - 1, a))


@dataclass(frozen=True, eq=False)
class KernelCosts:
    """Exact pairwise alignment costs (diagonal 0)."""

    costs: np.ndarray
    vertical_pairs: int = 0


@dataclass(frozen=True, eq=False)
class SimilarityMatrix:
    entries: np.ndarray
    # costs after propagation, before exponentiation; None when not kept
    raw: np.ndarray | None = None
    # pairs whose cost was computed directly, with that cost
    pair_i: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.intp))
    pair_j: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.intp))
    pair_cost: np.ndarray = field(default_factory=lambda: np.empty(0))
    vertical_pairs: int = 0

    @property
    def size(self) -> int:
        return self.entries.shape[0]

    def validate(self, atol: float = 0.0) -> None:
        W = self.entries
        if W.ndim != 2 or W.shape[0] != W.shape[1]:
            raise ValueError("similarity matrix must be square")
        if not np.all(np.isfinite(W)):
            raise ValueError("similarity matrix has non-finite entries")
        if W.min() < -atol or W.max() > 1 + atol:
            raise ValueError("similarity entries must lie in [0, 1]")
        if not np.allclose(W, W.T, rtol=0, atol=atol):
            raise ValueError("similarity matrix is not symmetric")

    def to_csv(self, path: str | Path) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            for row in self.entries:
                writer.writerow([repr(float(v)) for v in row])


def _points(ps: PointSet):
    return np.ascontiguousarray(ps.X, dtype=float), np.ascontiguousarray(ps.y, dtype=float)


def alignment_kernel_exact(
    ps: PointSet, delta: float, infinity_cap: float = INFINITY_CAP
) -> KernelCosts:
    """All-pairs alignment costs; cubic time, used as the reference."""
    if len(ps) < 3:
        raise ValueError("alignment kernel needs at least 3 points")
    if not delta > 0:
        raise ValueError("delta must be positive")
    X, y = _points(ps)
    costs, vertical = kernels.alignment_exact(X, y, float(delta), float(infinity_cap))
    if vertical:
        log.info("%d point pairs share x; their line is undefined (cost capped)", vertical)
    return KernelCosts(costs, vertical)


def neighbor_schedule(
    ps: PointSet, a: int, seed: int, pool: str = "random", block: int = 256
) -> np.ndarray:
    """Row i lists the ``a`` distinct partners sampled for point i, in visit order.

    ``pool="random"`` draws partners uniformly from the other points.
    ``pool="nearest"`` takes the ``a`` closest points in (x, y) after scaling
    each axis to unit range, breaking ties at the cut-off at random.
    """
    X, y = _points(ps)
    P = np.column_stack([X, y])
    n = len(P)
    rng = np.random.default_rng(seed)
    sched = np.empty((n, a), dtype=np.intp)
    if pool == "random":
        for i in range(n):
            pick = rng.choice(n - 1, size=a, replace=False)
            sched[i] = pick + (pick >= i)
        return sched
    span = np.ptp(P, axis=0)
    P = (P - P.min(axis=0)) / np.where(span > 0, span, 1.0)
    sq = np.einsum("ij,ij->i", P, P)
    for start in range(0, n, block):
        stop = min(start + block, n)
        d = sq[start:stop, None] + sq[None, :] - 2.0 * (P[start:stop] @ P.T)
        np.maximum(d, 0.0, out=d)
        d[np.arange(stop - start), np.arange(start, stop)] = np.inf
        for row in range(stop - start):
            dist = d[row]
            cut = np.partition(dist, a - 1)[a - 1]
            near = np.flatnonzero(dist < cut)
            tied = np.flatnonzero(dist == cut)
            picked = rng.choice(tied, size=a - len(near), replace=False)
            sched[start + row] = rng.permutation(np.concatenate([near, picked]))
    return sched


def alignment_kernel_approx(
    ps: PointSet, cfg: AlignmentConfig = AlignmentConfig(), keep_raw: bool = True
) -> SimilarityMatrix:
    """Sampled alignment similarity with propagation along each tube.

    Every entry starts at cost 2.0.  For each point ``i`` and each of its
    ``a`` sampled partners ``j`` whose entry is still untouched, the line
    through ``i`` and ``j`` is scored and its cost is pushed onto the
    ``(i, r)`` and ``(r, j)`` entries of every tube member ``r`` when lower.
    """
    if len(ps) < 3:
        raise ValueError("alignment kernel needs at least 3 points")
    delta, a = cfg.resolve(ps)
    X, y = _points(ps)
    schedule = neighbor_schedule(ps, a, cfg.seed, cfg.neighbors)
    W, pi, pj, pc, vertical = kernels.alignment_approx(
        X, y, float(delta), float(cfg.infinity_cap), schedule
    )
    if vertical:
        log.info("%d sampled pairs share x; their line is undefined (cost capped)", vertical)
    if keep_raw:
        entries = np.exp(-W)
    else:
        entries = np.exp(-W, out=W)
        W = None
    return SimilarityMatrix(entries, W, pi, pj, pc, vertical)


def rbf_similarity(ps: PointSet, gamma: float) -> SimilarityMatrix:
    """Gaussian kernel on (x, y); a baseline for comparisons only."""
    P = np.column_stack([ps.X, ps.y])
    d = ((P[:, None, :] - P[None, :, :]) ** 2).sum(-1)
    return SimilarityMatrix(np.exp(-gamma * d))


def normalized_laplacian(W: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``I - D^-1/2 W D^-1/2`` and the D^-1/2 vector (0 for isolated vertices)."""
    deg = W.sum(axis=1)
    inv_sqrt = np.zeros_like(deg)
    nz = deg > 0
    inv_sqrt[nz] = 1.0 / np.sqrt(deg[nz])
    L = -(inv_sqrt[:, None] * W * inv_sqrt[None, :])
    L[np.diag_indices_from(L)] += 1.0
    return L, inv_sqrt


def _embedding(W: np.ndarray, k: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvectors for the k smallest Laplacian eigenvalues (and the values)."""
    n = W.shape[0]
    if n <= DENSE_EIGEN_LIMIT:
        L, _ = normalized_laplacian(W)
        vals, vecs = scipy.linalg.eigh(L, subset_by_index=[0, k - 1])
        return vals, vecs
    # k largest of the normalised adjacency == k smallest of the Laplacian
    deg = W.sum(axis=1)
    inv_sqrt = np.zeros_like(deg)
    nz = deg > 0
    inv_sqrt[nz] = 1.0 / np.sqrt(deg[nz])
    op = scipy.sparse.linalg.LinearOperator(
        (n, n), matvec=lambda v: inv_sqrt * (W @ (inv_sqrt * v.ravel())), dtype=float
    )
    v0 = np.random.default_rng(seed).standard_normal(n)
    vals, vecs = scipy.sparse.linalg.eigsh(op, k=k, which="LA", v0=v0, tol=1e-10)
    order = np.argsort(-vals)
    return 1.0 - vals[order], vecs[:, order]


def _kmeans_once(Y, k, rng, max_iter=300):
    n = len(Y)
    centers = np.empty((k, Y.shape[1]))
    first = int(rng.integers(n))
    centers[0] = Y[first]
    d2 = ((Y - centers[0]) ** 2).sum(1)
    for c in range(1, k):
        total = d2.sum()
        idx = int(rng.choice(n, p=d2 / total)) if total > 0 else int(rng.integers(n))
        centers[c] = Y[idx]
        d2 = np.minimum(d2, ((Y - centers[c]) ** 2).sum(1))
    labels = None
    for _ in range(max_iter):
        dist = ((Y[:, None, :] - centers[None, :, :]) ** 2).sum(-1)
        new = np.argmin(dist, axis=1)
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        for c in range(k):
            mask = labels == c
            if mask.any():
                centers[c] = Y[mask].mean(0)
            else:
                far = int(np.argmax(dist[np.arange(n), labels]))
                centers[c] = Y[far]
    dist = ((Y[:, None, :] - centers[None, :, :]) ** 2).sum(-1)
    labels = np.argmin(dist, axis=1)
    return labels, float(dist[np.arange(n), labels].sum())


def kmeans(Y: np.ndarray, k: int, seed: int, restarts: int = 20) -> np.ndarray:
    """Point-centroid K-means (k-means++ seeding), best inertia over restarts."""
    best, best_inertia = None, np.inf
    for child in np.random.SeedSequence(seed).spawn(restarts):
        labels, inertia = _kmeans_once(Y, k, np.random.default_rng(child))
        if inertia < best_inertia:
            best, best_inertia = labels, inertia
    return best.astype(np.intp)


def refit_clustering(ps: PointSet, labels: np.ndarray, k: int, flags=()) -> Clustering:
    """Fit an affine centroid per cluster so any partition becomes a Clustering."""
    labels = np.asarray(labels, dtype=np.intp)
    centroids, empty, rss = [], [], 0.0
    degenerate = False
    for h in range(k):
        mask = labels == h
        if not mask.any():
            centroids.append(AffineModel.zeros(ps.dim))
            empty.append(h)
            continue
        fit = fit_affine(ps.X[mask], ps.y[mask])
        degenerate |= fit.degenerate
        centroids.append(fit.model)
        rss += fit.rss
    flags = tuple(flags)
    if degenerate:
        flags += ("degenerate-fit",)
    if empty:
        flags += ("empty-clusters",)
    return Clustering(labels, centroids, rss, 1, tuple(empty), flags, (rss,))


def spectral_cluster(sim: SimilarityMatrix, ps: PointSet, k: int, seed: int = 0) -> Clustering:
    """Normalised-Laplacian spectral clustering, centroids refit per cluster."""
    n = sim.size
    if k < 2:
        raise ValueError("spectral clustering needs k >= 2")
    if len(ps) != n:
        raise ValueError("point set and similarity matrix sizes differ")
    if k > n:
        raise ValueError(f"k={k} exceeds the number of points {n}")
    if k == n:
        return refit_clustering(ps, np.arange(n), k)

    W = sim.entries
    flags = []
    isolated = W.sum(axis=1) <= 0
    _, vecs = _embedding(W, k, seed)
    norms = np.linalg.norm(vecs, axis=1)
    zero = norms == 0
    Y = vecs / np.where(zero, 1.0, norms)[:, None]
    labels = kmeans(Y, k, seed)
    if isolated.any() or zero.any():
        flags.append("isolated-vertices")
    return refit_clustering(ps, labels, k, flags)
