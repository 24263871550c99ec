"""K-linear clustering: K-means with affine functions as centroids.

Distance is the vertical squared residual ``(y - f(x))**2``.  A point only
changes cluster when another centroid is *strictly* closer, which rules out
oscillation and guarantees termination.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Literal

import numpy as np

from .affine import AffineModel, fit_affine
from .traces import PointSet

log = logging.getLogger(__name__)

MAX_TUBE_PAIRS = 10_000


@dataclass(frozen=True, eq=False)
class Clustering:
    assignments: np.ndarray
    centroids: list[AffineModel]
    rss: float
    iterations: int
    # cluster indices that ended with no points
    empty: tuple[int, ...] = ()
    flags: tuple[str, ...] = ()
    rss_history: tuple[float, ...] = ()

    @property
    def k(self) -> int:
        return len(self.centroids)

    @property
    def mse(self) -> float:
        return self.rss / len(self.assignments)

    def residuals(self, ps: PointSet) -> np.ndarray:
        """Signed residual of every point to its assigned centroid."""
        out = np.empty(len(ps))
        for h, model in enumerate(self.centroids):
            mask = self.assignments == h
            if mask.any():
                out[mask] = ps.y[mask] - model(ps.X[mask])
        return out

    def canonical(self) -> "Clustering":
        """Relabel clusters by ascending slope norm, then intercept.

        Empty clusters sort last.
        """
        keys = [
            (h in self.empty, float(np.linalg.norm(m.slope)), m.intercept, h)
            for h, m in enumerate(self.centroids)
        ]
        order = [key[-1] for key in sorted(keys)]
        remap = np.empty(self.k, dtype=np.intp)
        remap[order] = np.arange(self.k)
        return replace(
            self,
            assignments=remap[self.assignments],
            centroids=[self.centroids[h] for h in order],
            empty=tuple(sorted(int(remap[h]) for h in self.empty)),
        )


@dataclass(frozen=True)
class KLinearConfig:
    k: int
    restarts: int = 20
    max_iterations: int = 100
    init: Literal["random-partition", "tube-pairs"] = "random-partition"
    # None means 5% of the output range
    tube_epsilon: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.k < 1 or self.restarts < 1 or self.max_iterations < 1:
            raise ValueError("k, restarts and max_iterations must be positive")
        if self.init not in ("random-partition", "tube-pairs"):
            raise ValueError(f"unknown init {self.init!r}")
        if self.tube_epsilon is not None and not self.tube_epsilon > 0:
            raise ValueError("tube_epsilon must be positive")


@dataclass(frozen=True, eq=False)
class TubeInit:
    assignments: np.ndarray
    lines: list[AffineModel] = field(default_factory=list)
    fallback: bool = False


def default_tube_width(y: np.ndarray) -> float:
    width = 0.05 * float(np.ptp(y))
    return width if width > 0 else 1.0


def _random_partition(n: int, k: int, rng: np.random.Generator) -> np.ndarray:
    # balanced random partition, so no cluster starts empty
    return (rng.permutation(n) % k).astype(np.intp)


def _pair_lines(X, y, pairs):
    """Affine functions through each (i, j) pair; None rows are vertical."""
    lines = []
    for i, j in pairs:
        if np.array_equal(X[i], X[j]):
            lines.append(None)
            continue
        fit = fit_affine(X[[i, j]], y[[i, j]])
        lines.append(fit.model)
    return lines


def tube_pair_init(ps: PointSet, k: int, epsilon: float, seed: int) -> TubeInit:
    """Initial partition from the k best-covered, non-redundant pair lines.

    Candidate lines pass through sampled point pairs and are scored by how
    many other points lie within vertical distance ``epsilon``.  Lines are
    taken greedily by score, skipping any whose inliers mostly overlap an
    already selected line.  Falls back to a random partition (flagged) when
    fewer than ``k`` distinct lines are found.
    """
    n = len(ps)
    if n < 2:
        raise ValueError("tube initialisation needs at least two points")
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    rng = np.random.default_rng(seed)
    X, y = ps.X, ps.y

    if n * n <= MAX_TUBE_PAIRS:
        ii, jj = np.triu_indices(n, 1)
        pairs = np.column_stack([ii, jj])
    else:
        pairs = rng.integers(0, n, size=(MAX_TUBE_PAIRS, 2))
        pairs = pairs[pairs[:, 0] != pairs[:, 1]]

    lines = _pair_lines(X, y, pairs)
    scores = np.full(len(pairs), -1, dtype=np.int64)
    for q, line in enumerate(lines):
        if line is None:
            continue
        inside = np.abs(y - line(X)) < epsilon
        inside[pairs[q]] = False
        scores[q] = int(inside.sum())

    order = np.argsort(-scores, kind="stable")
    selected: list[AffineModel] = []
    selected_inliers: list[np.ndarray] = []
    for q in order:
        if len(selected) == k or scores[q] < 0:
            break
        line = lines[q]
        inliers = np.abs(y - line(X)) < epsilon
        size = int(inliers.sum())
        redundant = any(
            np.count_nonzero(inliers & other) > 0.5 * size for other in selected_inliers
        )
        if not redundant:
            selected.append(line)
            selected_inliers.append(inliers)

    if len(selected) < k:
        log.debug("tube init found %d of %d lines; using a random partition", len(selected), k)
        return TubeInit(_random_partition(n, k, rng), selected, fallback=True)

    dist = np.column_stack([(y - line(X)) ** 2 for line in selected])
    return TubeInit(np.argmin(dist, axis=1).astype(np.intp), selected)


def _fit_clusters(X, y, labels, k):
    models: list[AffineModel | None] = [None] * k
    for h in range(k):
        mask = labels == h
        if mask.any():
            models[h] = fit_affine(X[mask], y[mask]).model
    return models


def _sq_residuals(X, y, models) -> np.ndarray:
    out = np.full((len(y), len(models)), np.inf)
    for h, model in enumerate(models):
        if model is not None:
            out[:, h] = (y - model(X)) ** 2
    return out


def _repair_empty(X, y, labels, models, k):
    """Move the worst-fit point into each empty cluster, refitting as we go."""
    for h in range(k):
        if models[h] is not None:
            continue
        sizes = np.bincount(labels, minlength=k)
        own = _sq_residuals(X, y, models)[np.arange(len(y)), labels]
        movable = sizes[labels] > 1
        if not movable.any() or not np.any(own[movable] > 0):
            continue
        worst = int(np.argmax(np.where(movable, own, -1.0)))
        donor = int(labels[worst])
        labels[worst] = h
        for g in (donor, h):
            mask = labels == g
            models[g] = fit_affine(X[mask], y[mask]).model
    return models


def klinear_run(
    ps: PointSet, init: np.ndarray, k: int, max_iterations: int = 100
) -> Clustering:
    """One K-linear descent from the partition ``init``."""
    X, y = ps.X, ps.y
    labels = np.array(init, dtype=np.intp, copy=True)
    history = []
    iterations = 0
    models = None
    while iterations < max_iterations:
        iterations += 1
        models = _fit_clusters(X, y, labels, k)
        models = _repair_empty(X, y, labels, models, k)
        dist = _sq_residuals(X, y, models)
        rows = np.arange(len(y))
        current = dist[rows, labels]
        history.append(float(current.sum()))
        best = np.argmin(dist, axis=1)
        move = dist[rows, best] < current
        if not move.any():
            break
        labels = np.where(move, best, labels)
    else:
        # out of iterations: refit on the last partition
        models = _fit_clusters(X, y, labels, k)
        dist = _sq_residuals(X, y, models)
        history.append(float(dist[np.arange(len(y)), labels].sum()))

    dim = X.shape[1]
    empty = tuple(h for h in range(k) if models[h] is None)
    centroids = [m if m is not None else AffineModel.zeros(dim) for m in models]
    flags = ("empty-clusters",) if empty else ()
    if iterations >= max_iterations and len(history) > iterations:
        flags += ("max-iterations",)
    return Clustering(
        assignments=labels,
        centroids=centroids,
        rss=history[-1],
        iterations=iterations,
        empty=empty,
        flags=flags,
        rss_history=tuple(history),
    )


def _single_cluster(ps: PointSet, k: int, flags=()) -> Clustering:
    fit = fit_affine(ps.X, ps.y)
    centroids = [fit.model] + [AffineModel.zeros(ps.dim) for _ in range(k - 1)]
    return Clustering(
        assignments=np.zeros(len(ps), dtype=np.intp),
        centroids=centroids,
        rss=fit.rss,
        iterations=1,
        empty=tuple(range(1, k)),
        flags=tuple(flags) + (("empty-clusters",) if k > 1 else ()),
        rss_history=(fit.rss,),
    )


def klinear_cluster(ps: PointSet, cfg: KLinearConfig) -> Clustering:
    """Best-of-restarts K-linear clustering; lowest restart index wins ties."""
    n, k = len(ps), cfg.k
    if n < k:
        raise ValueError(f"need at least k={k} points, got {n}")
    if k == 1:
        return _single_cluster(ps, 1)
    if np.all(ps.X == ps.X[0]) and np.all(ps.y == ps.y[0]):
        return _single_cluster(ps, k, flags=("identical-points",))

    epsilon = cfg.tube_epsilon or default_tube_width(ps.y)
    best = None
    for child in np.random.SeedSequence(cfg.seed).spawn(cfg.restarts):
        rng = np.random.default_rng(child)
        if cfg.init == "tube-pairs":
            tube = tube_pair_init(ps, k, epsilon, int(rng.integers(2**63)))
            init = tube.assignments
        else:
            init = _random_partition(n, k, rng)
        run = klinear_run(ps, init, k, cfg.max_iterations)
        if cfg.init == "tube-pairs" and tube.fallback:
            run = replace(run, flags=run.flags + ("tube-fallback",))
        if best is None or run.rss < best.rss:
            best = run
    return best
