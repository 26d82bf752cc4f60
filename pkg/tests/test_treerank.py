import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from sklearn.tree import DecisionTreeClassifier

from metabrank.core import auc_pairwise, roc_curve
from metabrank.treerank import (
    FeatureImportance,
    LeafRankSpec,
    RankingForest,
    RankingTree,
    TreeNode,
    default_leafrank,
    feature_importance,
    leaf_score,
    score_forest,
    score_tree,
    split_cost,
    train_forest,
    train_leafrank,
    train_tree,
)
from metabrank.treerank.leafrank import (
    CartRule,
    ConstantRule,
    LinearRule,
    fit_cart,
    rule_from_dict,
    select_leafrank_params,
)

from conftest import concentric_circles, make_dataset, separable_linear

CART2 = LeafRankSpec("cart", ({"max_depth": 2},))


def hand_tree() -> RankingTree:
    """Depth-2 tree on one feature: leaves hold x > 1, (0, 1], (-1, 0], <= -1."""
    def split(d, k, b):
        return TreeNode(d, k, 1, 1, 0.5, LinearRule(np.array([1.0]), -b), 0.25)
    nodes = {(0, 0): split(0, 0, 0.0), (1, 0): split(1, 0, 1.0), (1, 1): split(1, 1, -1.0)}
    for k in range(4):
        nodes[(2, k)] = TreeNode(2, k, 1, 0)
    return RankingTree(2, 1, np.array([0]), nodes, "l1")


class TestSplitCost:
    def test_examples(self):
        y = np.array([1, 1, -1, -1, -1])
        assert split_cost(y, y == 1, 0.4) == 0.0
        pos = np.ones(4, dtype=int)
        assert split_cost(pos, np.zeros(4, bool), 0.3, n_total=10) == pytest.approx(2 * 0.7 * 4 / 10)

    @given(st.integers(0, 2 ** 20), st.floats(0.0, 1.0), st.integers(10, 30))
    def test_brute_force(self, seed, omega, n_total):
        rng = np.random.default_rng(seed)
        y = np.where(rng.random(10) < 0.5, 1, -1)
        mask = rng.random(10) < 0.5
        expected = 0.0
        for yi, inside in zip(y, mask):
            if yi == 1 and not inside:
                expected += 2 * (1 - omega) / n_total
            if yi == -1 and inside:
                expected += 2 * omega / n_total
        assert split_cost(y, mask, omega, n_total) == pytest.approx(expected, rel=1e-12, abs=1e-15)

    def test_errors(self):
        with pytest.raises(ValueError, match="omega"):
            split_cost(np.array([1, -1]), np.array([True, False]), 1.5)
        with pytest.raises(ValueError, match="length"):
            split_cost(np.array([1, -1]), np.array([True]), 0.5)


class TestLeafRank:
    def test_cart_separable_zero_cost(self, rng):
        x = rng.uniform(-1, 1, size=(60, 1))
        y = np.where(x[:, 0] > 0.1, 1, -1)
        omega = float(np.mean(y == 1))
        rule = train_leafrank(x, y, omega, "cart", {"max_depth": 2}, min_split=2)
        assert split_cost(y, rule.goes_left(x), omega) == 0.0

    @pytest.mark.parametrize("kind,params", [("cart", {"max_depth": 2}), ("l1", {"C": 1.0}),
                                             ("rbf", {"C": 1.0, "width": 1.0})])
    def test_degenerate_weights(self, rng, kind, params):
        X = rng.normal(size=(40, 3))
        y = np.where(rng.random(40) < 0.5, 1, -1)
        # omega = 0 puts no weight on negatives: everything belongs in Gamma
        assert train_leafrank(X, y, 0.0, kind, params).goes_left(X).all()
        assert not train_leafrank(X, y, 1.0, kind, params).goes_left(X).any()

    def test_single_class(self):
        with pytest.raises(ValueError, match="both classes"):
            train_leafrank(np.zeros((3, 1)), np.array([1, 1, 1]), 0.5, "cart", {"max_depth": 2})

    def test_l1_mass_on_informative_dims(self):
        shares = []
        for seed in range(10):
            rng = np.random.default_rng(seed)
            X = rng.normal(size=(200, 20))
            y = np.where(X[:, 3] - X[:, 11] + 0.3 * rng.normal(size=200) > 0, 1, -1)
            omega = float(np.mean(y == 1))
            w = np.abs(train_leafrank(X, y, omega, "l1", {"C": 0.05}).weight_vector)
            shares.append((w[3] + w[11]) / w.sum())
        assert np.mean(shares) >= 0.9

    @given(st.integers(0, 2 ** 20), st.integers(1, 4))
    def test_cart_matches_sklearn(self, seed, depth):
        rng = np.random.default_rng(seed)
        X = rng.normal(size=(80, 4))
        y = np.where(X[:, 0] + X[:, 1] ** 2 + 0.5 * rng.normal(size=80) > 0.8, 1, -1)
        if abs(y.sum()) == y.size:
            return
        w = rng.uniform(0.2, 1.0, size=80)
        ours = fit_cart(X, y, w, depth, min_split=10)
        ref = DecisionTreeClassifier(max_depth=depth, min_samples_split=10, random_state=0)
        ref.fit(X, y, sample_weight=w)
        Xt = rng.normal(size=(200, 4))
        assert np.array_equal(ours.goes_left(Xt), ref.predict(Xt) == 1)

    def test_rule_serialization(self, rng):
        X = rng.normal(size=(50, 3))
        y = np.where(X[:, 0] > 0, 1, -1)
        for kind, params in (("cart", {"max_depth": 3}), ("l1", {"C": 1.0}), ("rbf", {"C": 1.0, "width": 2.0})):
            rule = train_leafrank(X, y, 0.5, kind, params, min_split=5)
            back = rule_from_dict(json.loads(json.dumps(rule.to_dict())))
            assert np.array_equal(back.goes_left(X), rule.goes_left(X))
        assert rule_from_dict(ConstantRule(True).to_dict()).goes_left(X).all()

    def test_param_selection_single_and_tie(self, rng):
        X = rng.normal(size=(60, 2))
        y = np.where(X[:, 0] > 0, 1, -1)
        assert select_leafrank_params(X, y, CART2, 0) == {"max_depth": 2}
        # every depth separates perfectly: equal costs, first entry wins
        spec = LeafRankSpec("cart", ({"max_depth": 4}, {"max_depth": 2}, {"max_depth": 8}))
        assert select_leafrank_params(X, y, spec, 0) == {"max_depth": 4}

    def test_default_grids(self):
        assert [g["max_depth"] for g in default_leafrank("cart").grid] == [2, 4, 8]
        assert [g["C"] for g in default_leafrank("l1").grid] == [2.0 ** e for e in range(-5, 8, 2)]
        with pytest.raises(ValueError):
            LeafRankSpec("tree", ({},))


class TestTree:
    def test_hand_built_scores(self):
        tree = hand_tree()
        X = np.array([[2.0], [0.5], [-0.5], [-2.0]])
        assert score_tree(tree, X).tolist() == [4.0, 3.0, 2.0, 1.0]
        assert [tree.route(X)[i] for i in range(4)] == [(2, 0), (2, 1), (2, 2), (2, 3)]
        assert score_tree(tree, [0.5]) == 3.0

    def test_leaf_score_formula(self):
        assert [leaf_score(2, 2, k) for k in range(4)] == [4.0, 3.0, 2.0, 1.0]
        assert leaf_score(2, 1, 1) == leaf_score(2, 2, 2) == 2.0

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="dimension"):
            score_tree(hand_tree(), np.zeros((2, 3)))

    def test_depth_one_separable(self, rng):
        x = rng.uniform(-1, 1, size=(80, 1))
        ds = make_dataset(x, np.where(x[:, 0] > 0.2, 1, -1))
        tree = train_tree(ds, depth=1, min_split=2, leafrank=CART2)
        assert len(tree.leaves()) == 2
        assert auc_pairwise(tree.score(ds.features), ds.labels) == 1.0

    def test_pure_dataset(self):
        with pytest.raises(ValueError, match="both classes"):
            train_tree(make_dataset(np.zeros((5, 1)), [1] * 5))

    @pytest.mark.parametrize("seed", range(5))
    def test_circles_rbf(self, seed):
        ds = concentric_circles(200, seed)
        spec = LeafRankSpec("rbf", ({"C": 1.0, "width": 1.0},))
        tree = train_tree(ds, depth=3, min_split=10, leafrank=spec)
        assert auc_pairwise(tree.score(ds.features), ds.labels) >= 0.95

    @given(st.integers(0, 2 ** 20))
    def test_structure_invariants(self, seed):
        rng = np.random.default_rng(seed)
        X = rng.normal(size=(120, 3))
        y = np.where(X[:, 0] + 0.7 * rng.normal(size=120) > 0, 1, -1)
        ds = make_dataset(X, y)
        tree = train_tree(ds, depth=4, min_split=10, leafrank=CART2)
        for node in tree.internal_nodes():
            l, r = (tree.nodes[a] for a in tree.children(node.address))
            assert l.n_positive + r.n_positive == node.n_positive
            assert l.n_negative + r.n_negative == node.n_negative
            assert 0.0 <= node.omega <= 1.0 and node.delta_auc >= 0.0
        routes = tree.route(X)
        assert all(tree.nodes[a].is_leaf for a in routes)
        s = tree.score(X)
        assert s.min() >= 0 and s.max() <= 2 ** 4
        assert len(roc_curve(s, y).points) - 1 <= len(tree.leaves())
        # leaves have distinct scores
        assert len({leaf_score(4, n.depth, n.index) for n in tree.leaves()}) == len(tree.leaves())

    @given(st.integers(0, 2 ** 20))
    def test_training_auc_nondecreasing_in_depth(self, seed):
        rng = np.random.default_rng(seed)
        X = rng.normal(size=(100, 2))
        ds = make_dataset(X, np.where(X[:, 0] * X[:, 1] + 0.3 * rng.normal(size=100) > 0, 1, -1))
        aucs = [auc_pairwise(train_tree(ds, D, 10, CART2).score(X), ds.labels) for D in range(1, 6)]
        assert all(b >= a - 1e-12 for a, b in zip(aucs, aucs[1:]))

    def test_feature_name_relabeling(self, rng):
        X = rng.normal(size=(60, 3))
        y = np.where(X[:, 1] > 0, 1, -1)
        a = train_tree(make_dataset(X, y), 3, 10, CART2).score(X)
        b = train_tree(make_dataset(X, y, ["p", "q", "r"]), 3, 10, CART2).score(X)
        assert np.array_equal(np.argsort(a, kind="stable"), np.argsort(b, kind="stable"))

    def test_serialization(self, rng):
        ds = separable_linear(80, 4, 0)
        tree = train_tree(ds, 3, 10, LeafRankSpec("l1", ({"C": 1.0},)), feature_subset=[0, 2, 3])
        back = RankingTree.from_dict(json.loads(json.dumps(tree.to_dict())))
        assert np.array_equal(back.score(ds.features), tree.score(ds.features))


class TestForest:
    def test_one_tree_without_bootstrap_is_train_tree(self, rng):
        X = rng.normal(size=(90, 4))
        ds = make_dataset(X, np.where(X[:, 0] - X[:, 2] > 0, 1, -1))
        forest = train_forest(ds, 1, 1.0, 1.0, depth=4, min_split=10, leafrank=CART2, seed=3, bootstrap=False)
        tree = train_tree(ds, 4, 10, CART2)
        assert np.array_equal(forest.score(X), tree.score(X))

    def test_deterministic_and_thread_independent(self, rng):
        X = rng.normal(size=(90, 6))
        ds = make_dataset(X, np.where(X[:, 0] > 0, 1, -1))
        a = train_forest(ds, 5, 0.75, 0.5, 4, 10, CART2, seed=9)
        b = train_forest(ds, 5, 0.75, 0.5, 4, 10, CART2, seed=9, n_jobs=2)
        assert a.to_dict() == b.to_dict()
        for tree in a.trees:
            assert len(tree.feature_subset) == 3 and set(tree.feature_subset) <= set(range(6))

    def test_mean_aggregation(self):
        tree = hand_tree()
        forest = RankingForest([tree, tree], 1.0, 1.0, 0)
        assert score_forest(forest, [2.0]) == 4.0
        other = hand_tree()
        other.nodes[(0, 0)].rule = LinearRule(np.array([-1.0]), 0.0)
        f2 = RankingForest([tree, other], 1.0, 1.0, 0)
        # x = 2: first tree leaf (2,0) -> 4, second tree goes right then left -> (2,2) -> 2
        assert score_forest(f2, [2.0]) == 3.0
        assert score_forest(RankingForest([other, tree], 1.0, 1.0, 0), [2.0]) == 3.0

    def test_mean_of_four_and_one(self):
        tree = hand_tree()
        low = RankingTree(2, 1, np.array([0]), {(0, 0): TreeNode(0, 0, 1, 1)})
        # single-leaf tree scores 2^2 * (1 - 0) = 4; pair it with a leaf-(2,3) example
        f = RankingForest([tree, low], 1.0, 1.0, 0)
        assert score_forest(f, [-2.0]) == 2.5

    def test_validation(self, rng):
        ds = separable_linear(40, 2, 0)
        with pytest.raises(ValueError, match="bootstrap_fraction"):
            train_forest(ds, 2, 0.0, 1.0)
        with pytest.raises(ValueError, match="n_trees"):
            train_forest(ds, 0)
        with pytest.raises(ValueError, match="both classes"):
            train_forest(make_dataset(np.zeros((4, 1)), [-1] * 4))

    def test_serialization(self):
        ds = separable_linear(80, 5, 1)
        f = train_forest(ds, 3, 0.75, 0.75, 3, 10, LeafRankSpec("l1", ({"C": 1.0},)), seed=2)
        back = RankingForest.from_dict(json.loads(json.dumps(f.to_dict())))
        assert np.array_equal(back.score(ds.features), f.score(ds.features))

    def test_forest_not_worse_than_tree_on_average(self):
        from metabrank.data import bin_labels, default_planted_features, impute_age, standardize, synthesize_panel

        diffs = []
        for seed in range(10):
            planted = default_planted_features(20, seed)
            panel = impute_age(synthesize_panel(300, seed, planted, 1.0))
            ds, _ = standardize(bin_labels(panel, "cortisol", "high"))
            idx = np.random.default_rng(seed).permutation(ds.n_examples)
            tr, te = ds.subset(idx[:200]), ds.subset(idx[200:])
            forest = train_forest(tr, 20, 1.0, 0.5, 10, 50, CART2, seed=seed)
            tree = train_tree(tr, 10, 50, CART2)
            diffs.append(auc_pairwise(forest.score(te.features), te.labels)
                         - auc_pairwise(tree.score(te.features), te.labels))
        assert np.mean(diffs) >= 0.0


class TestImportance:
    def test_hand_example(self):
        node = TreeNode(0, 0, 1, 1, 0.5, LinearRule(np.array([3.0, 0.0, 4.0]), 0.0), 0.5)
        tree = RankingTree(1, 3, np.arange(3), {(0, 0): node, (1, 0): TreeNode(1, 0, 1, 0),
                                                 (1, 1): TreeNode(1, 1, 0, 1)}, "l1")
        imp = feature_importance(RankingForest([tree], 1.0, 1.0, 0, ("a", "b", "c"), "l1"))
        assert np.allclose(imp.weights, [0.6, 0.0, 0.8], atol=1e-15)
        assert imp.ranked()[0][:2] == (2, "c")

    def test_embedding_into_full_space(self):
        node = TreeNode(0, 0, 1, 1, 0.5, LinearRule(np.array([1.0, -2.0]), 0.0), 0.3)
        tree = RankingTree(1, 5, np.array([1, 4]), {(0, 0): node, (1, 0): TreeNode(1, 0, 1, 0),
                                                     (1, 1): TreeNode(1, 1, 0, 1)}, "l1")
        w = feature_importance(RankingForest([tree], 1.0, 0.4, 0, leafrank_kind="l1")).weights
        assert np.allclose(w, np.array([0, 1, 0, 0, 2]) / np.sqrt(5))
        assert abs(np.linalg.norm(w) - 1) <= 1e-10

    def test_errors(self):
        ds = separable_linear(60, 3, 0)
        cart = train_forest(ds, 2, 1.0, 1.0, 2, 10, CART2)
        with pytest.raises(ValueError, match="linear LeafRank"):
            feature_importance(cart)
        zero = TreeNode(0, 0, 1, 1, 0.5, LinearRule(np.array([1.0]), 0.0), 0.0)
        tree = RankingTree(1, 1, np.array([0]), {(0, 0): zero, (1, 0): TreeNode(1, 0, 1, 0),
                                                  (1, 1): TreeNode(1, 1, 0, 1)}, "l1")
        with pytest.raises(ValueError, match="zero"):
            feature_importance(RankingForest([tree], 1.0, 1.0, 0, leafrank_kind="l1"))

    def test_top(self):
        imp = FeatureImportance(np.array([0.1, 0.5, 0.5, 0.2]), ("a", "b", "c", "d"))
        assert imp.top(3) == [1, 2, 3]
