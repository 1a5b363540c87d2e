import json

import numpy as np
import pytest

from tabattack.data import Dataset, minmax_normalize, split, synth_two_class
from tabattack.errors import DataError
from tabattack.importance import (
    global_ranking,
    rank_by_magnitude,
    rank_correlation,
    ranking_query_cost,
    sample_background,
    shapley_exact,
    shapley_sampled,
    top_k,
)
from tabattack.models import ForestConfig, FunctionModel, MlpConfig, train_mlp, train_random_forest


def const_model(n, c=0.3):
    return FunctionModel(lambda r: np.full(len(r), c), n)


def quad_model(seed=0, n=8):
    W = np.random.default_rng(seed).normal(size=(n, n))
    return FunctionModel(lambda r: 1 / (1 + np.exp(-np.einsum("ij,jk,ik->i", r, W, r))), n)


@pytest.fixture(scope="module")
def rf8():
    sp = split(minmax_normalize(synth_two_class(400, 8, 0.3, seed=2)), 0.67, 1)
    m = train_random_forest(sp.train, ForestConfig(n_estimators=50, seed=0))
    return m, sp, sample_background(sp.train.values, 16, 0)


class TestExact:
    def test_additive_splits_exactly(self):
        f = FunctionModel(lambda r: r[:, 0] + r[:, 1], 2)
        sv = shapley_exact(f, [0.3, 0.6], np.zeros((1, 2)))
        np.testing.assert_allclose(sv.phi, [0.3, 0.6], atol=1e-12)
        assert sv.base_value == 0.0

    def test_symmetry(self):
        f = FunctionModel(lambda r: np.tanh(r[:, 0] * r[:, 1] + r[:, 2]) * 0.5 + 0.5, 3)
        bg = np.random.default_rng(0).uniform(-1, 1, (6, 3))
        bg[:, 1] = bg[:, 0]
        sv = shapley_exact(f, [0.4, 0.4, -0.2], bg)
        assert abs(sv.phi[0] - sv.phi[1]) < 1e-9

    def test_null_player(self):
        f = FunctionModel(lambda r: 1 / (1 + np.exp(-r[:, 0] - 2 * r[:, 2])), 4)
        bg = np.random.default_rng(1).uniform(-1, 1, (5, 4))
        sv = shapley_exact(f, [0.2, 0.9, -0.4, 0.7], bg)
        assert abs(sv.phi[1]) < 1e-12 and abs(sv.phi[3]) < 1e-12

    def test_constant_model(self):
        sv = shapley_exact(const_model(5), np.ones(5), np.zeros((3, 5)))
        np.testing.assert_array_equal(sv.phi, np.zeros(5))

    def test_efficiency(self, rf8):
        m, sp, bg = rf8
        for r in range(5):
            x = sp.test.values[r]
            sv = shapley_exact(m, x, bg)
            assert abs(sv.base_value + sv.phi.sum() - m.predict_proba(x[None])[0]) < 1e-6

    def test_too_many_features(self):
        with pytest.raises(DataError):
            shapley_exact(const_model(16), np.zeros(16), np.zeros((1, 16)))

    def test_empty_background(self):
        with pytest.raises(DataError):
            shapley_exact(const_model(2), np.zeros(2), np.zeros((0, 2)))


class TestSampled:
    def test_matches_exact(self, rf8):
        m, sp, bg = rf8
        for r in range(3):
            x = sp.test.values[r]
            ex = shapley_exact(m, x, bg).phi
            sa = shapley_sampled(m, x, bg, 2000, seed=r).phi
            assert np.abs(ex - sa).max() < 0.05 * np.abs(ex).max()

    def test_variance_halves_when_permutations_double(self):
        f = quad_model()
        rng = np.random.default_rng(0)
        bg, X = rng.uniform(-1, 1, (16, 8)), rng.uniform(-1, 1, (12, 8))

        def spread(n, offset):
            return sum(
                np.array([shapley_sampled(f, x, bg, n, offset + s).phi for s in range(20)])
                .var(axis=0, ddof=1).sum()
                for x in X
            )

        ratio = spread(10, 0) / spread(20, 50)
        assert 1.4 < ratio < 2.9

    def test_constant_model_exact_zero(self):
        for seed in range(5):
            sv = shapley_sampled(const_model(6), np.ones(6), np.zeros((4, 6)), 7, seed)
            np.testing.assert_array_equal(sv.phi, np.zeros(6))

    def test_query_budget(self):
        f = quad_model(n=5)
        bg = np.zeros((3, 5))
        shapley_sampled(f, np.ones(5), bg, n_permutations=7)
        assert f.query_count == 7 * 5 * 3 + 3

    def test_deterministic(self, rf8):
        m, sp, bg = rf8
        a = shapley_sampled(m, sp.test.values[0], bg, 30, seed=9).phi
        b = shapley_sampled(m, sp.test.values[0], bg, 30, seed=9).phi
        np.testing.assert_array_equal(a, b)

    def test_bad_permutations(self):
        with pytest.raises(ValueError):
            shapley_sampled(const_model(2), np.zeros(2), np.zeros((1, 2)), 0)

    def test_json_by_feature_name(self):
        sv = shapley_exact(FunctionModel(lambda r: r[:, 0] + r[:, 1], 2), [0.3, 0.6], np.zeros((1, 2)))
        doc = json.loads(sv.to_json(["a", "b"]))
        assert doc["phi"] == pytest.approx({"a": 0.3, "b": 0.6})


class TestRanking:
    def test_informative_pair_leads(self):
        rng = np.random.default_rng(3)
        n, m = 400, 12
        labels = np.arange(n) % 2
        X = rng.normal(size=(n, m))
        X[:, 3] += np.where(labels == 1, 2.0, -2.0)
        X[:, 7] += np.where(labels == 1, 1.5, -1.5)
        d = minmax_normalize(Dataset(X, labels, [f"f{i}" for i in range(m)]))
        sp = split(d, 0.67, 0)
        model = train_random_forest(sp.train, ForestConfig(n_estimators=60, seed=0))
        ranking = global_ranking(model, sp.test, n_probe=10, n_permutations=10, seed=0)
        assert set(ranking[:2]) == {3, 7}

    def test_constant_model_gives_identity(self):
        d = Dataset(np.zeros((5, 4)), [0, 1, 0, 1, 0], list("abcd"))
        np.testing.assert_array_equal(global_ranking(const_model(4), d, n_probe=3), np.arange(4))

    def test_tie_break_ascending(self):
        np.testing.assert_array_equal(rank_by_magnitude([1, -3, 3, 0, 1]), [1, 2, 0, 4, 3])

    def test_ten_probes_track_full_probe(self):
        sp = split(minmax_normalize(synth_two_class(600, 60, 0.5, seed=3)), 0.67, 1)
        model = train_mlp(sp.train, MlpConfig(epochs=30, seed=0))
        full = global_ranking(model, sp.test, n_probe=sp.test.n_samples, seed=0)
        ten = global_ranking(model, sp.test, n_probe=10, seed=1)
        assert rank_correlation(full, ten, top=50) > 0.8

    def test_query_cost_formula(self):
        d = Dataset(np.zeros((20, 3)), np.arange(20) % 2, list("abc"))
        f = const_model(3)
        global_ranking(f, d, n_probe=4, n_permutations=5, background=np.zeros((6, 3)))
        assert f.query_count == ranking_query_cost(3, 6, 5, 4)

    def test_probe_errors(self):
        empty = Dataset(np.zeros((0, 2)), np.zeros(0, int), ["a", "b"])
        with pytest.raises(DataError):
            global_ranking(const_model(2), empty)
        small = Dataset(np.zeros((3, 2)), [0, 1, 0], ["a", "b"])
        with pytest.raises(DataError):
            global_ranking(const_model(2), small, n_probe=4)


class TestTopK:
    def test_examples(self):
        np.testing.assert_array_equal(top_k([5, 2, 9], 2), [5, 2])
        np.testing.assert_array_equal(top_k([5, 2, 9], 3), [5, 2, 9])
        assert top_k([5, 2, 9], 0).size == 0

    def test_too_large(self):
        with pytest.raises(ValueError):
            top_k([1, 0], 3)


def test_background_sampling():
    rows = np.arange(100.0).reshape(50, 2)
    bg = sample_background(rows, 16, seed=4)
    assert bg.shape == (16, 2)
    np.testing.assert_array_equal(bg, sample_background(rows, 16, seed=4))
    assert sample_background(rows[:5], 16).shape == (5, 2)
