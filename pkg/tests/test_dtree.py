import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import gini_best_split
from perfdiscrim import kernels
from perfdiscrim.dtree import (
    DiscriminantTree,
    LabeledAuxSet,
    TreeParams,
    cross_validate,
    fold_assignment,
    gini,
    learn_tree,
    presort,
)

LOOSE = TreeParams(max_height=10, min_leaf=1, min_impurity_decrease=0.0)


def _data(Z, labels, k=None):
    Z = np.asarray(Z, dtype=float)
    names = tuple(f"f{j}" for j in range(Z.shape[1]))
    return LabeledAuxSet(names, Z, labels, k)


def test_xor_is_learned_with_zero_threshold():
    Z = np.array([[0, 0], [0, 1], [1, 0], [1, 1]] * 5, dtype=float)
    labels = (Z[:, 0] != Z[:, 1]).astype(int)
    tree = learn_tree(_data(Z, labels), LOOSE)
    assert tree.height == 2 and tree.leaf_count == 4
    np.testing.assert_array_equal(tree.predict_labels(Z), labels)
    # with the default gain threshold the first (zero-gain) split is refused
    assert learn_tree(_data(Z, labels)).height == 0


def test_single_threshold_separation():
    Z = np.array([[0], [0], [0], [40], [50], [60]], dtype=float)
    tree = learn_tree(_data(Z, [0, 0, 0, 1, 1, 1]), LOOSE)
    assert tree.height == 1
    assert tree.root.threshold == 20.0 and tree.root.lower == 0.0
    assert tree.root.left.label == 0 and tree.root.right.label == 1


def test_split_score_matches_exhaustive_scan(rng):
    for _ in range(5):
        Z = np.asfortranarray(rng.integers(0, 5, size=(80, 6)).astype(float))
        labels = rng.integers(0, 3, 80).astype(np.intp)
        f, thr, _, score = kernels.best_split(
            Z, presort(Z), np.ones(80, np.uint8), labels, 3, 4
        )
        of, othr, oscore = gini_best_split(Z, labels, 3, 4)
        assert score == pytest.approx(oscore, rel=1e-12)
        assert (f, thr) == (of, othr)


def _random_tree(seed):
    rng = np.random.default_rng(seed)
    Z = rng.integers(0, 10, size=(200, 4)).astype(float)
    labels = (Z[:, 0] > 4).astype(int) + (Z[:, 2] > 6).astype(int)
    labels = np.where(rng.random(200) < 0.2, rng.integers(0, 3, 200), labels)
    return Z, learn_tree(_data(Z, labels, 3), TreeParams(min_leaf=3, min_impurity_decrease=0.0))


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_each_point_satisfies_exactly_one_leaf_path(seed):
    Z, tree = _random_tree(seed)
    probe = np.random.default_rng(seed + 1).uniform(-1, 11, size=(300, 4))
    routed = tree.route_many(probe)
    paths = tree.paths()
    for z, leaf in zip(probe, routed):
        holds = [
            all((z[f] <= t) if op == "<=" else (z[f] > t) for f, op, t in preds)
            for _, preds in paths
        ]
        assert sum(holds) == 1
        assert paths[holds.index(True)][0] is leaf
        assert tree.route(z) is leaf


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_leaf_distributions_sum_to_one(seed):
    _, tree = _random_tree(seed)
    for node in tree.nodes():
        assert node.distribution.sum() == pytest.approx(1.0, abs=1e-12)
        assert np.all(node.distribution >= 0)


def test_height_and_leaf_size_limits():
    Z, _ = _random_tree(0)
    labels = np.random.default_rng(1).integers(0, 4, len(Z))
    tree = learn_tree(_data(Z, labels), TreeParams(max_height=3, min_leaf=7, min_impurity_decrease=0.0))
    assert tree.height <= 3
    assert min(leaf.support for leaf in tree.leaves()) >= 7
    assert sum(leaf.support for leaf in tree.leaves()) == len(Z)


def test_constant_aux_is_flagged():
    tree = learn_tree(_data(np.ones((10, 3)), [0, 1] * 5))
    assert "constant-aux" in tree.flags and tree.height == 0
    assert tree.root.distribution.tolist() == [0.5, 0.5]


def test_json_round_trip_routes_identically():
    Z, tree = _random_tree(3)
    back = DiscriminantTree.from_json(tree.to_json(), tree.aux_names, tree.n_classes)
    np.testing.assert_array_equal(back.predict_labels(Z), tree.predict_labels(Z))
    assert back.height == tree.height


def test_cross_validation_on_noise_is_chance(rng):
    Z = rng.integers(0, 20, size=(1000, 5)).astype(float)
    labels = rng.integers(0, 2, 1000)
    cv = cross_validate(_data(Z, labels), TreeParams(), folds=10, seed=0)
    assert cv.stratified
    assert abs(cv.accuracy - 0.5) < 0.1


def test_cross_validation_on_clean_labels(rng):
    Z = rng.integers(0, 20, size=(500, 3)).astype(float)
    labels = (Z[:, 1] > 9).astype(int)
    cv = cross_validate(_data(Z, labels), folds=10, seed=0)
    assert cv.accuracy == 1.0


def test_fold_assignment():
    labels = np.repeat([0, 1, 2], [30, 40, 50])
    folds, stratified = fold_assignment(labels, 10, seed=0)
    assert stratified
    for lab in range(3):
        counts = np.bincount(folds[labels == lab], minlength=10)
        assert counts.max() - counts.min() <= 1
    rare = np.r_[np.zeros(50, int), np.ones(3, int)]
    folds, stratified = fold_assignment(rare, 10, seed=0)
    assert not stratified and set(folds) == set(range(10))
    Z = np.arange(53, dtype=float).reshape(-1, 1)
    assert "unstratified" in cross_validate(_data(Z, rare), folds=10).flags


def test_validation_errors():
    with pytest.raises(ValueError):
        TreeParams(min_leaf=0)
    with pytest.raises(ValueError):
        _data(np.ones((3, 1)), [0, 1])
    with pytest.raises(ValueError):
        cross_validate(_data(np.ones((5, 1)), [0, 1, 0, 1, 0]), folds=10)
    assert gini(np.array([5, 5])) == 0.5 and gini(np.array([0, 0])) == 0.0


def test_worked_tree_examples():
    tree = learn_tree(_data([[0.0], [1.0]], [0, 1]), LOOSE)
    assert tree.height == 1 and tree.root.feature == 0 and tree.root.threshold == 0.5
    assert tree.route([0.0]).label == 0
    assert tree.route([0.5]) is tree.root.left  # ties go left
    same = learn_tree(_data([[0.0], [1.0], [2.0]], [1, 1, 1], 2), LOOSE)
    assert same.height == 0 and same.root.distribution.tolist() == [0.0, 1.0]
    assert same.leaf_count == 1


def test_separable_two_fold_accuracy():
    Z = np.repeat([[0.0], [1.0]], 10, axis=0)
    labels = np.repeat([0, 1], 10)
    assert cross_validate(_data(Z, labels), LOOSE, folds=2, seed=0).accuracy == 1.0


def test_noise_accuracy_over_many_seeds():
    scores = []
    for seed in range(50):
        rng = np.random.default_rng(seed)
        Z = rng.integers(0, 10, size=(200, 3)).astype(float)
        labels = np.repeat([0, 1], 100)[rng.permutation(200)]
        scores.append(cross_validate(_data(Z, labels), folds=10, seed=seed).accuracy)
    assert abs(np.mean(scores) - 0.5) <= 0.1
