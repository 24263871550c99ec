"""Classification trees over call counts, with leaf label distributions.

Induction is CART-style: greedy binary splits chosen by Gini impurity with
thresholds at midpoints between consecutive observed values.  Rows go left
when ``z[feature] <= threshold``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .affine import AffineModel


@dataclass(frozen=True)
class TreeParams:
    max_height: int = 10
    min_leaf: int = 5
    min_impurity_decrease: float = 1e-4

    def __post_init__(self):
        if self.max_height < 0 or self.min_leaf < 1 or self.min_impurity_decrease < 0:
            raise ValueError("invalid tree parameters")


@dataclass(frozen=True, eq=False)
class LabeledAuxSet:
    aux_names: tuple[str, ...]
    Z: np.ndarray
    labels: np.ndarray
    n_classes: int | None = None

    def __post_init__(self):
        Z = np.asarray(self.Z, dtype=float)
        if Z.ndim == 1:
            Z = Z.reshape(-1, 1)
        labels = np.asarray(self.labels, dtype=np.intp)
        if Z.shape[0] != labels.shape[0]:
            raise ValueError("Z rows and labels differ in length")
        if Z.shape[1] != len(self.aux_names):
            raise ValueError("Z columns do not match aux_names")
        k = self.n_classes if self.n_classes is not None else int(labels.max()) + 1
        if labels.size and (labels.min() < 0 or labels.max() >= k):
            raise ValueError(f"labels must lie in [0, {k})")
        object.__setattr__(self, "aux_names", tuple(self.aux_names))
        object.__setattr__(self, "Z", Z)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "n_classes", k)

    def __len__(self) -> int:
        return len(self.labels)


@dataclass(eq=False)
class Node:
    distribution: np.ndarray
    support: int
    feature: int | None = None
    threshold: float = 0.0
    # largest observed value on the left side of the split
    lower: float = 0.0
    left: "Node | None" = None
    right: "Node | None" = None
    impurity: float = 0.0

    @property
    def is_leaf(self) -> bool:
        return self.feature is None

    @property
    def label(self) -> int:
        return int(np.argmax(self.distribution))


@dataclass(eq=False)
class DiscriminantTree:
    root: Node
    aux_names: tuple[str, ...]
    n_classes: int
    models: list[AffineModel] | None = None
    flags: tuple[str, ...] = ()

    @property
    def n_aux(self) -> int:
        return len(self.aux_names)

    @property
    def height(self) -> int:
        def depth(node):
            return 0 if node.is_leaf else 1 + max(depth(node.left), depth(node.right))

        return depth(self.root)

    def nodes(self):
        """Pre-order traversal (node, left before right)."""
        stack = [self.root]
        while stack:
            node = stack.pop()
            yield node
            if not node.is_leaf:
                stack.append(node.right)
                stack.append(node.left)

    def leaves(self) -> list[Node]:
        return [n for n in self.nodes() if n.is_leaf]

    @property
    def leaf_count(self) -> int:
        return len(self.leaves())

    def paths(self) -> list[tuple[Node, list[tuple[int, str, float]]]]:
        """Each leaf with the conjunction of (feature, '<=' or '>', threshold) leading to it."""
        out = []

        def walk(node, preds):
            if node.is_leaf:
                out.append((node, preds))
                return
            walk(node.left, preds + [(node.feature, "<=", node.threshold)])
            walk(node.right, preds + [(node.feature, ">", node.threshold)])

        walk(self.root, [])
        return out

    def route(self, z) -> Node:
        z = np.asarray(z, dtype=float).reshape(-1)
        if z.size != self.n_aux:
            raise ValueError(f"expected {self.n_aux} aux values, got {z.size}")
        node = self.root
        while not node.is_leaf:
            node = node.left if z[node.feature] <= node.threshold else node.right
        return node

    def route_many(self, Z) -> list[Node]:
        Z = np.asarray(Z, dtype=float)
        if Z.ndim != 2 or Z.shape[1] != self.n_aux:
            raise ValueError(f"expected rows of {self.n_aux} aux values")
        out: list[Node | None] = [None] * len(Z)

        def walk(node, idx):
            if node.is_leaf:
                for i in idx:
                    out[i] = node
                return
            go_left = Z[idx, node.feature] <= node.threshold
            walk(node.left, idx[go_left])
            walk(node.right, idx[~go_left])

        walk(self.root, np.arange(len(Z)))
        return out

    def predict_labels(self, Z) -> np.ndarray:
        return np.array([leaf.label for leaf in self.route_many(Z)], dtype=np.intp)

    def predict(self, X, Z) -> np.ndarray:
        """Mixture prediction sum_j d_j f_j(x) for each (x, z) row."""
        if self.models is None:
            raise ValueError("tree has no attached affine models")
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        per_model = np.column_stack([m(X) for m in self.models])
        weights = np.array([leaf.distribution for leaf in self.route_many(Z)])
        return (per_model * weights).sum(axis=1)

    def attach_models(self, models: list[AffineModel]) -> "DiscriminantTree":
        if len(models) != self.n_classes:
            raise ValueError(f"need {self.n_classes} models, got {len(models)}")
        self.models = list(models)
        return self

    def to_json(self) -> dict:
        def enc(node):
            if node.is_leaf:
                return {
                    "leaf": True,
                    "label": node.label,
                    "support": node.support,
                    "distribution": [float(p) for p in node.distribution],
                }
            return {
                "leaf": False,
                "feature": self.aux_names[node.feature],
                "index": node.feature,
                "threshold": node.threshold,
                "lower": node.lower,
                "support": node.support,
                "distribution": [float(p) for p in node.distribution],
                "left": enc(node.left),
                "right": enc(node.right),
            }

        return enc(self.root)

    @classmethod
    def from_json(cls, obj: dict, aux_names, n_classes: int, models=None) -> "DiscriminantTree":
        def dec(d):
            dist = np.asarray(d.get("distribution", np.zeros(n_classes)), dtype=float)
            if d["leaf"]:
                return Node(dist, d["support"])
            return Node(
                dist,
                d["support"],
                feature=d["index"],
                threshold=d["threshold"],
                lower=d.get("lower", d["threshold"]),
                left=dec(d["left"]),
                right=dec(d["right"]),
            )

        return cls(dec(obj), tuple(aux_names), n_classes, models)


def gini(counts: np.ndarray) -> float:
    total = counts.sum()
    if total == 0:
        return 0.0
    p = counts / total
    return float(1.0 - p @ p)


def presort(Z: np.ndarray, block: int = 512) -> np.ndarray:
    """Column-wise stable argsort as a Fortran-ordered int32 matrix."""
    n, m = Z.shape
    order = np.empty((n, m), dtype=np.int32, order="F")
    for start in range(0, m, block):
        stop = min(start + block, m)
        order[:, start:stop] = np.argsort(Z[:, start:stop], axis=0, kind="stable")
    return order


class _Grower:
    def __init__(self, Z, labels, n_classes, params, order=None):
        self.Z = np.asfortranarray(Z, dtype=float)
        self.labels = np.ascontiguousarray(labels, dtype=np.intp)
        self.k = n_classes
        self.params = params
        self.order = presort(self.Z) if order is None else order

    def grow(self, active: np.ndarray) -> Node:
        self.n_total = int(active.sum())
        return self._node(active.astype(np.uint8), 0)

    def _node(self, active, depth) -> Node:
        mask = active.view(bool)
        counts = np.bincount(self.labels[mask], minlength=self.k)
        n_t = int(counts.sum())
        node = Node(counts / n_t, n_t, impurity=gini(counts))
        p = self.params
        if depth >= p.max_height or np.count_nonzero(counts) <= 1 or n_t < 2 * p.min_leaf:
            return node
        f, thr, lower, score = kernels.best_split(
            self.Z, self.order, active, self.labels, self.k, p.min_leaf
        )
        if f < 0:
            return node
        sumsq = float(counts @ counts)
        decrease = (score - sumsq / n_t) / self.n_total
        # Gini gain is never negative; tolerate rounding when the bound is 0
        if decrease < p.min_impurity_decrease - 1e-12:
            return node
        go_left = self.Z[:, f] <= thr
        left = (mask & go_left).view(np.uint8)
        right = (mask & ~go_left).view(np.uint8)
        node.feature, node.threshold, node.lower = int(f), float(thr), float(lower)
        node.left = self._node(left, depth + 1)
        node.right = self._node(right, depth + 1)
        return node


def _all_constant(Z: np.ndarray, active: np.ndarray, block: int = 256) -> bool:
    for start in range(0, Z.shape[1], block):
        sub = Z[active, start : start + block]
        if np.any(sub != sub[0]):
            return False
    return True


def learn_tree(
    data: LabeledAuxSet,
    params: TreeParams = TreeParams(),
    rows: np.ndarray | None = None,
    order: np.ndarray | None = None,
) -> DiscriminantTree:
    """Grow a Gini tree on ``data`` (restricted to the boolean mask ``rows``).

    ``order`` is an optional precomputed ``presort(data.Z)`` so repeated fits
    on subsets (cross-validation) sort once.
    """
    n = len(data)
    active = np.ones(n, dtype=bool) if rows is None else np.asarray(rows, dtype=bool)
    if active.sum() < 1:
        raise ValueError("cannot learn a tree from zero rows")
    if data.Z.shape[1] < 1:
        raise ValueError("need at least one auxiliary variable")
    flags = ("constant-aux",) if _all_constant(data.Z, active) else ()
    grower = _Grower(data.Z, data.labels, data.n_classes, params, order)
    root = grower.grow(active)
    return DiscriminantTree(root, data.aux_names, data.n_classes, flags=flags)


@dataclass(frozen=True, eq=False)
class CrossValidation:
    accuracy: float
    predictions: np.ndarray
    folds: np.ndarray
    stratified: bool = True
    flags: tuple[str, ...] = field(default=())


def fold_assignment(labels: np.ndarray, folds: int, seed: int) -> tuple[np.ndarray, bool]:
    """Stratified fold ids; plain shuffled folds if any label is too rare."""
    rng = np.random.default_rng(seed)
    n = len(labels)
    counts = np.bincount(labels)
    present = counts[counts > 0]
    if present.min() < folds:
        return (rng.permutation(n) % folds).astype(np.intp), False
    out = np.empty(n, dtype=np.intp)
    offset = 0
    for lab in np.flatnonzero(counts):
        idx = rng.permutation(np.flatnonzero(labels == lab))
        out[idx] = (offset + np.arange(len(idx))) % folds
        offset += len(idx)
    return out, True


def cross_validate(
    data: LabeledAuxSet,
    params: TreeParams = TreeParams(),
    folds: int = 10,
    seed: int = 0,
    order: np.ndarray | None = None,
) -> CrossValidation:
    """Pooled k-fold accuracy of argmax-leaf predictions."""
    n = len(data)
    if folds < 2:
        raise ValueError("need at least 2 folds")
    if n < folds:
        raise ValueError(f"need at least {folds} rows for {folds}-fold cross-validation")
    fold_of, stratified = fold_assignment(data.labels, folds, seed)
    data = LabeledAuxSet(data.aux_names, np.asfortranarray(data.Z), data.labels, data.n_classes)
    if order is None:
        order = presort(data.Z)
    predictions = np.empty(n, dtype=np.intp)
    for f in range(folds):
        held = fold_of == f
        tree = learn_tree(data, params, rows=~held, order=order)
        predictions[held] = tree.predict_labels(data.Z[held])
    accuracy = float(np.mean(predictions == data.labels))
    flags = () if stratified else ("unstratified",)
    return CrossValidation(accuracy, predictions, fold_of, stratified, flags)
