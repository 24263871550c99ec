"""Pure numpy implementations of the hot kernels.

Same signatures and results as the compiled ``_ckernels`` module; selected by
``perfdiscrim.kernels`` when the extension is unavailable.
"""
from __future__ import annotations

import numpy as np

MAX_EXPONENT = 1074
_SPLIT_CHUNK = 256


def _line(X: np.ndarray, y: np.ndarray, i: int, j: int):
    xi, xj = X[i], X[j]
    if np.array_equal(xi, xj):
        return None
    if X.shape[1] == 1:
        a = (y[j] - y[i]) / (xj[0] - xi[0])
        return np.array([a]), y[i] - a * xi[0]
    g11 = 1.0
    g22 = 1.0
    g12 = 1.0
    for k in range(X.shape[1]):
        g11 += xi[k] * xi[k]
        g22 += xj[k] * xj[k]
        g12 += xi[k] * xj[k]
    det = g11 * g22 - g12 * g12
    if det <= 0.0:
        return None
    u = (g22 * y[i] - g12 * y[j]) / det
    v = (g11 * y[j] - g12 * y[i]) / det
    return u * xi + v * xj, u + v


def _residuals(X: np.ndarray, y: np.ndarray, a: np.ndarray, c: float) -> np.ndarray:
    s = X[:, 0] * a[0]
    for k in range(1, X.shape[1]):
        s = s + X[:, k] * a[k]
    return np.abs(y - (s + c))


def _tube_cost(count: int, cap: float) -> float:
    if count == 0:
        return cap
    return float(np.ldexp(1.0, -min(count, MAX_EXPONENT)))


def _tube(X, y, i, j, delta):
    line = _line(X, y, i, j)
    if line is None:
        return None
    inside = _residuals(X, y, *line) < delta
    inside[i] = False
    inside[j] = False
    return np.flatnonzero(inside)


def alignment_exact(X, y, delta, cap):
    X = np.ascontiguousarray(X, dtype=float)
    y = np.ascontiguousarray(y, dtype=float)
    n = X.shape[0]
    costs = np.zeros((n, n))
    n_vertical = 0
    for i in range(n):
        for j in range(i + 1, n):
            members = _tube(X, y, i, j, delta)
            if members is None:
                w = cap
                n_vertical += 1
            else:
                w = _tube_cost(len(members), cap)
            costs[i, j] = costs[j, i] = w
    return costs, n_vertical


def alignment_approx(X, y, delta, cap, schedule):
    X = np.ascontiguousarray(X, dtype=float)
    y = np.ascontiguousarray(y, dtype=float)
    n = X.shape[0]
    W = np.full((n, n), 2.0)
    pairs_i, pairs_j, pairs_c = [], [], []
    n_vertical = 0
    for i in range(n):
        for j in schedule[i]:
            j = int(j)
            if j < 0 or j == i or W[i, j] != 2.0:
                continue
            members = _tube(X, y, i, j, delta)
            if members is None:
                w = cap
                n_vertical += 1
                W[i, j] = W[j, i] = w
            else:
                w = _tube_cost(len(members), cap)
                W[i, j] = W[j, i] = w
                if len(members):
                    # the per-member updates touch disjoint cells, so they vectorize
                    lower = members[w < W[i, members]]
                    W[i, lower] = w
                    W[lower, i] = w
                    lower = members[w < W[members, j]]
                    W[j, lower] = w
                    W[lower, j] = w
            pairs_i.append(i)
            pairs_j.append(j)
            pairs_c.append(w)
    np.fill_diagonal(W, 0.0)
    return (
        W,
        np.array(pairs_i, dtype=np.intp),
        np.array(pairs_j, dtype=np.intp),
        np.array(pairs_c, dtype=float),
        n_vertical,
    )


def best_split(Z, order, active, labels, n_classes, min_leaf):
    active = np.asarray(active, dtype=bool)
    labels = np.asarray(labels, dtype=np.intp)
    n, m = Z.shape
    n_t = int(active.sum())
    tot = np.bincount(labels[active], minlength=n_classes).astype(np.int64)
    sumsq_tot = int(tot @ tot)
    best = -np.inf
    best_f, best_thr, best_lower = -1, 0.0, 0.0
    if n_t < 2:
        return best_f, best_thr, best_lower, best
    n_left = np.arange(1, n_t, dtype=np.int64)
    n_right = n_t - n_left
    size_ok = (n_left >= min_leaf) & (n_right >= min_leaf)
    for start in range(0, m, _SPLIT_CHUNK):
        stop = min(start + _SPLIT_CHUNK, m)
        idx = order[:, start:stop].T
        keep = active[idx]
        idx = idx[keep].reshape(stop - start, n_t)
        cols = np.arange(start, stop)[:, None]
        vals = Z[idx, cols]
        labs = labels[idx]
        sumsq_left = np.zeros((stop - start, n_t - 1), dtype=np.int64)
        sumsq_right = np.zeros_like(sumsq_left)
        for lab in range(n_classes):
            cum = np.cumsum(labs == lab, axis=1, dtype=np.int64)[:, :-1]
            sumsq_left += cum * cum
            rest = tot[lab] - cum
            sumsq_right += rest * rest
        valid = (vals[:, 1:] > vals[:, :-1]) & size_ok
        if not valid.any():
            continue
        score = sumsq_left.astype(float) / n_left + sumsq_right.astype(float) / n_right
        score[~valid] = -np.inf
        flat = int(np.argmax(score))
        f, p = divmod(flat, n_t - 1)
        if score[f, p] > best:
            best = float(score[f, p])
            best_f = start + f
            best_lower = float(vals[f, p])
            best_thr = float((vals[f, p] + vals[f, p + 1]) / 2.0)
    return best_f, best_thr, best_lower, best
