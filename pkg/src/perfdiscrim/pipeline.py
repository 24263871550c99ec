"""End-to-end analysis: cluster traces into lines, then explain the lines.

``analyze`` searches K = 1, 2, ... for the first clustering whose mean
squared residual meets the error bound, learns a classification tree over
the call counts with the cluster labels, and attaches each cluster's affine
model to the leaves.
"""
from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, replace
from typing import Literal

import numpy as np

from .affine import AffineModel, r_squared
from .dtree import (
    CrossValidation,
    DiscriminantTree,
    LabeledAuxSet,
    TreeParams,
    cross_validate,
    learn_tree,
    presort,
)
from .klinear import Clustering, KLinearConfig, klinear_cluster
from .spectral import AlignmentConfig, SimilarityMatrix, alignment_kernel_approx, spectral_cluster
from .traces import TraceSet, project_points


@dataclass(frozen=True)
class PipelineConfig:
    mse_bound: float = float("inf")
    max_clusters: int = 10
    engine: Literal["klinear", "spectral"] = "klinear"
    restarts: int = 20
    max_iterations: int = 100
    init: Literal["random-partition", "tube-pairs"] = "random-partition"
    tube_epsilon: float | None = None
    alignment: AlignmentConfig = field(default_factory=AlignmentConfig)
    tree: TreeParams = field(default_factory=TreeParams)
    folds: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.max_clusters < 1:
            raise ValueError("max_clusters must be >= 1")
        if not self.mse_bound > 0:
            raise ValueError("mse_bound must be positive")
        if self.engine not in ("klinear", "spectral"):
            raise ValueError(f"unknown engine {self.engine!r}")
        if self.folds < 2:
            raise ValueError("folds must be >= 2")


class NumericFailure(ArithmeticError):
    """The analysis produced undefined or non-finite fitness values."""


@dataclass(frozen=True)
class NoFit:
    """No K <= max_clusters met the error bound."""

    max_clusters: int
    mse_bound: float
    per_k_mse: dict[int, float]


@dataclass(eq=False)
class AnalysisReport:
    engine: str
    tree: DiscriminantTree
    clustering: Clustering
    accuracy: float
    r2: float
    mse: float
    height: int
    leaf_models: int
    wall_time: float
    per_k_mse: dict[int, float]
    cv: CrossValidation
    input_names: tuple[str, ...] = ("x",)
    output_name: str = "y"
    flags: tuple[str, ...] = ()

    @property
    def k(self) -> int:
        return self.clustering.k

    @property
    def models(self) -> list[AffineModel]:
        return self.clustering.centroids

    def metric_line(self) -> str:
        return (
            f"T={self.wall_time:.3f} A={self.accuracy:.4f} R2={self.r2:.4f} "
            f"H={self.height} L={self.leaf_models}"
        )

    def to_json(self, include_timing: bool = False) -> dict:
        return {
            "engine": self.engine,
            "input_names": list(self.input_names),
            "output_name": self.output_name,
            "k": self.k,
            "mse": self.mse,
            "r2": self.r2,
            "accuracy": self.accuracy,
            "height": self.height,
            "leaves": self.tree.leaf_count,
            "leaf_models": self.leaf_models,
            "models": [m.to_json() for m in self.models],
            "aux_names": list(self.tree.aux_names),
            "tree": self.tree.to_json(),
            "clustering": {
                "rss": self.clustering.rss,
                "mse": self.clustering.mse,
                "iterations": self.clustering.iterations,
                "empty": list(self.clustering.empty),
                "flags": list(self.clustering.flags),
                "assignments": [int(v) for v in self.clustering.assignments],
            },
            "per_k_mse": {str(k): v for k, v in sorted(self.per_k_mse.items())},
            "flags": list(self.flags),
            "timing": {"wall_time": self.wall_time} if include_timing else None,
        }

    def dumps(self, include_timing: bool = False) -> str:
        return json.dumps(self.to_json(include_timing), indent=2, allow_nan=False) + "\n"


def _cluster(ps, k: int, cfg: PipelineConfig, sim: SimilarityMatrix | None) -> Clustering:
    if cfg.engine == "spectral" and k >= 2:
        return spectral_cluster(sim, ps, k, cfg.seed)
    kcfg = KLinearConfig(
        k=k,
        restarts=cfg.restarts,
        max_iterations=cfg.max_iterations,
        init=cfg.init,
        tube_epsilon=cfg.tube_epsilon,
        seed=cfg.seed,
    )
    return klinear_cluster(ps, kcfg)


def _similarity(ps, cfg: PipelineConfig) -> SimilarityMatrix:
    return alignment_kernel_approx(ps, replace(cfg.alignment, seed=cfg.seed), keep_raw=False)


def _explain(
    ts: TraceSet, clustering: Clustering, cfg: PipelineConfig, per_k_mse, started: float
) -> AnalysisReport:
    if ts.schema.n_aux == 0:
        raise ValueError("traces carry no auxiliary variables to explain the clusters with")
    clustering = clustering.canonical()
    data = LabeledAuxSet(
        ts.schema.aux_names, np.asfortranarray(ts.aux), clustering.assignments, clustering.k
    )
    order = presort(data.Z)
    tree = learn_tree(data, cfg.tree, order=order)
    flags = list(tree.flags)
    folds = min(cfg.folds, len(ts))
    if folds < cfg.folds:
        flags.append("folds-reduced")
    cv = cross_validate(data, cfg.tree, folds, cfg.seed, order=order)
    flags += cv.flags
    tree.attach_models(clustering.centroids)
    predicted = tree.predict(ts.inputs, ts.aux)
    residual = ts.outputs - predicted
    if np.ptp(ts.outputs) == 0:
        raise NumericFailure("R^2 is undefined: every trace has the same output")
    with np.errstate(over="ignore", invalid="ignore"):
        fit_mse = float(np.mean(residual**2))
        r2 = r_squared(ts.outputs, predicted)
    if not (np.isfinite(fit_mse) and np.isfinite(r2) and np.isfinite(clustering.rss)):
        raise NumericFailure("non-finite error measures; output values overflow double precision")
    return AnalysisReport(
        engine=cfg.engine,
        tree=tree,
        clustering=clustering,
        accuracy=cv.accuracy,
        r2=r2,
        mse=fit_mse,
        height=tree.height,
        leaf_models=len({leaf.label for leaf in tree.leaves()}),
        wall_time=time.perf_counter() - started,
        per_k_mse=dict(per_k_mse),
        cv=cv,
        input_names=ts.schema.input_names,
        output_name=ts.schema.output_name,
        flags=tuple(flags),
    )


def analyze(ts: TraceSet, cfg: PipelineConfig) -> AnalysisReport | NoFit:
    """Smallest-K search under ``cfg.mse_bound``, then tree learning.

    Returns ``NoFit`` when every K in 1..max_clusters exceeds the bound.
    """
    started = time.perf_counter()
    ps = project_points(ts)
    sim = _similarity(ps, cfg) if cfg.engine == "spectral" and cfg.max_clusters > 1 else None
    per_k: dict[int, float] = {}
    for k in range(1, min(cfg.max_clusters, len(ps)) + 1):
        clustering = _cluster(ps, k, cfg, sim)
        per_k[k] = clustering.mse
        if clustering.mse <= cfg.mse_bound:
            del sim
            return _explain(ts, clustering, cfg, per_k, started)
    return NoFit(cfg.max_clusters, cfg.mse_bound, per_k)


def fixed_k_analyze(ts: TraceSet, k: int, cfg: PipelineConfig) -> AnalysisReport:
    """Run the pipeline at exactly ``k`` clusters, skipping the K search."""
    if not 1 <= k <= len(ts):
        raise ValueError(f"k must lie in [1, {len(ts)}]")
    started = time.perf_counter()
    ps = project_points(ts)
    sim = _similarity(ps, cfg) if cfg.engine == "spectral" and k > 1 else None
    clustering = _cluster(ps, k, cfg, sim)
    del sim
    return _explain(ts, clustering, cfg, {k: clustering.mse}, started)
