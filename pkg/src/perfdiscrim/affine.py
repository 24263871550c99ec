"""Affine least-squares fits and the fitness measures built on them."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# singular values below this fraction of the largest are treated as zero
RANK_RTOL = 1e-10


@dataclass(frozen=True, eq=False)
class AffineModel:
    """``y = slope . x + intercept``."""

    slope: np.ndarray
    intercept: float

    def __post_init__(self):
        slope = np.asarray(self.slope, dtype=float).reshape(-1)
        if not (np.all(np.isfinite(slope)) and np.isfinite(self.intercept)):
            raise ValueError("affine coefficients must be finite")
        slope.setflags(write=False)
        object.__setattr__(self, "slope", slope)
        object.__setattr__(self, "intercept", float(self.intercept))

    def __call__(self, X) -> np.ndarray | float:
        X = np.asarray(X, dtype=float)
        if X.ndim <= 1 and X.size == self.slope.size:
            return float(X.reshape(-1) @ self.slope + self.intercept)
        return X.reshape(-1, self.slope.size) @ self.slope + self.intercept

    @property
    def dim(self) -> int:
        return self.slope.size

    @classmethod
    def zeros(cls, dim: int) -> "AffineModel":
        return cls(np.zeros(dim), 0.0)

    def to_json(self) -> dict:
        return {"slope": [float(v) for v in self.slope], "intercept": self.intercept}

    @classmethod
    def from_json(cls, obj: dict) -> "AffineModel":
        return cls(np.asarray(obj["slope"], dtype=float), obj["intercept"])

    def __repr__(self) -> str:
        terms = " + ".join(f"{a:.6g}*x{k}" for k, a in enumerate(self.slope))
        return f"AffineModel({terms} + {self.intercept:.6g})"


@dataclass(frozen=True, eq=False)
class FitReport:
    model: AffineModel
    rss: float
    count: int
    rank: int
    # fewer points than parameters, or a rank-deficient design
    degenerate: bool = False


def _as_design(X, y) -> tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).reshape(-1)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    if X.shape[0] != y.shape[0]:
        raise ValueError(f"dimension mismatch: {X.shape[0]} inputs vs {y.shape[0]} outputs")
    if y.size == 0:
        raise ValueError("cannot fit an affine model to zero points")
    return X, y


def residual_sum_squares(model: AffineModel, X, y) -> float:
    X, y = _as_design(X, y)
    r = y - (X @ model.slope + model.intercept)
    return float(r @ r)


def fit_affine(X, y) -> FitReport:
    """Least-squares affine fit of ``y`` on the rows of ``X``.

    Uses an SVD-based solver, so rank-deficient designs (repeated x, fewer
    points than parameters) return the minimum-norm coefficient vector.
    """
    X, y = _as_design(X, y)
    n, dim = X.shape
    A = np.empty((n, dim + 1))
    A[:, :dim] = X
    A[:, dim] = 1.0
    coef, _, rank, _ = np.linalg.lstsq(A, y, rcond=RANK_RTOL)
    model = AffineModel(coef[:dim], coef[dim])
    r = y - A @ coef
    return FitReport(
        model=model,
        rss=float(r @ r),
        count=n,
        rank=int(rank),
        degenerate=bool(n < dim + 1 or rank < dim + 1),
    )


def mixture_prediction(distribution, models, x) -> float:
    """Expected value of the leaf mixture: sum_j d_j * f_j(x)."""
    return float(sum(d * m(x) for d, m in zip(distribution, models) if d))


def prediction_error(trace, tree) -> float:
    """Squared error of ``trace`` against the mixture at its routed leaf."""
    if len(trace.aux) != tree.n_aux:
        raise ValueError(
            f"schema mismatch: trace has {len(trace.aux)} aux values, tree expects {tree.n_aux}"
        )
    if tree.models is None:
        raise ValueError("tree has no attached affine models")
    if len(trace.inputs) != tree.models[0].dim:
        raise ValueError("schema mismatch: input dimension differs from the tree's models")
    leaf = tree.route(trace.aux)
    y_hat = mixture_prediction(leaf.distribution, tree.models, trace.inputs)
    return (trace.output - y_hat) ** 2


def mse(ts, tree) -> float:
    """Mean of ``prediction_error`` over every trace in ``ts``."""
    if len(ts) == 0:
        raise ValueError("mse of an empty trace set")
    residuals = ts.outputs - tree.predict(ts.inputs, ts.aux)
    return float(np.mean(residuals**2))


def r_squared(actual, predicted) -> float:
    actual = np.asarray(actual, dtype=float).reshape(-1)
    predicted = np.asarray(predicted, dtype=float).reshape(-1)
    if actual.shape != predicted.shape or actual.size == 0:
        raise ValueError("r_squared needs two non-empty sequences of equal length")
    if np.ptp(actual) == 0.0:
        raise ValueError("r_squared is undefined when all actual values are identical")
    ss_tot = float(np.sum((actual - actual.mean()) ** 2))
    ss_res = float(np.sum((actual - predicted) ** 2))
    return 1.0 - ss_res / ss_tot
