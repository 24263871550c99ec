"""Agreement between two labelings of the same points."""
from __future__ import annotations

import numpy as np
from scipy.optimize import linear_sum_assignment


def contingency(a, b) -> np.ndarray:
    a = np.asarray(a, dtype=np.intp).reshape(-1)
    b = np.asarray(b, dtype=np.intp).reshape(-1)
    if a.shape != b.shape:
        raise ValueError(f"label length mismatch: {a.size} vs {b.size}")
    if a.size and (a.min() < 0 or b.min() < 0):
        raise ValueError("labels must be non-negative")
    table = np.zeros((int(a.max(initial=-1)) + 1, int(b.max(initial=-1)) + 1), dtype=np.int64)
    np.add.at(table, (a, b), 1)
    return table


def label_agreement(a, b) -> float:
    """Fraction of points on which ``a`` and ``b`` agree under the best
    one-to-one matching of label values (Hungarian assignment)."""
    table = contingency(a, b)
    if table.size == 0:
        raise ValueError("cannot score empty labelings")
    rows, cols = linear_sum_assignment(table, maximize=True)
    return float(table[rows, cols].sum() / table.sum())
