import numpy as np
import pytest

from bayesnbs.bac_math import channel_params
from bayesnbs.posterior import DensePosteriorWeights, LazyRangeTree, PosteriorWeights


def weights(post):
    return np.array([post.weight(i) for i in range(1, post.n_intervals + 1)])


class TestLazyRangeTree:

    def test_uniform_prefix_without_materializing(self):
        tree = LazyRangeTree(10 ** 9)
        assert tree.prefix(5 * 10 ** 8) == pytest.approx(0.5, abs=1e-12)
        assert tree.n_nodes == 1

    def test_multiply_and_search(self):
        tree = LazyRangeTree(8, total=8.0)
        tree.multiply(3, 5, 2.0)
        assert tree.total == pytest.approx(11.0)
        assert tree.leaf(4) == pytest.approx(2.0)
        assert tree.leaf(6) == pytest.approx(1.0)
        assert tree.search(4.0) == (3, pytest.approx(2.0))
        assert tree.search(4.5)[0] == 4

    def test_assign(self):
        tree = LazyRangeTree(5)
        tree.assign(2, 0.0)
        assert tree.total == pytest.approx(0.8)
        with pytest.raises(IndexError):
            tree.assign(6, 1.0)


class TestPosteriorWeights:

    def test_uniform(self):
        post = PosteriorWeights.new_uniform(4)
        np.testing.assert_allclose(weights(post), 0.25)
        assert post.prefix_weight(0) == 0.0
        assert post.prefix_weight(2) == pytest.approx(0.5)
        assert post.prefix_weight(3) == pytest.approx(0.75)
        assert post.n_nodes == 1

    def test_single_interval(self):
        post = PosteriorWeights.new_uniform(1)
        assert post.weight(1) == 1.0
        assert post.interval_at_quantile(0.3) == 1

    def test_huge_uniform(self):
        post = PosteriorWeights.new_uniform(10 ** 9)
        assert post.prefix_weight(5 * 10 ** 8) == pytest.approx(0.5, abs=1e-12)
        assert post.n_nodes == 1

    def test_parameter_errors(self):
        with pytest.raises(ValueError):
            PosteriorWeights.new_uniform(0)
        post = PosteriorWeights.new_uniform(4)
        with pytest.raises(IndexError):
            post.prefix_weight(5)
        with pytest.raises(IndexError):
            post.prefix_weight(-1)
        with pytest.raises(ValueError):
            PosteriorWeights.from_weights([0.5, 0.0, 0.5])

    def test_interval_at_quantile(self):
        assert PosteriorWeights.new_uniform(4).interval_at_quantile(0.25) == 1
        assert PosteriorWeights.new_uniform(2).interval_at_quantile(0.5) == 1
        assert PosteriorWeights.from_weights([0.6, 0.4]).interval_at_quantile(0.7) == 2

    def test_round_to_coin(self):
        assert PosteriorWeights.new_uniform(2).round_to_coin(1, 0.5) == 2
        assert PosteriorWeights.from_weights([0.9, 0.1]).round_to_coin(1, 0.5) == 2
        assert PosteriorWeights.from_weights([0.5, 0.5]).round_to_coin(2, 0.9) == 2
        assert PosteriorWeights.from_weights([0.2, 0.8]).round_to_coin(2, 0.5) == 2
        assert PosteriorWeights.from_weights([0.1, 0.2, 0.7]).round_to_coin(2, 0.25) == 3

    def test_zero_weight_guard(self):
        post = DensePosteriorWeights.new_uniform(3)
        post.w[1] = 0.0
        with pytest.warns(UserWarning):
            assert post.round_to_coin(2, 0.5) == 2

    def test_update_worked_example(self):
        params = channel_params(0.5, 0.1)
        post = PosteriorWeights.new_uniform(2)
        post.apply_update(1, 1, params, 0.5)
        np.testing.assert_allclose(weights(post), [0.6, 0.4], atol=1e-12)
        assert post.prefix_weight(1) == pytest.approx(0.6)
        post = PosteriorWeights.new_uniform(2)
        post.apply_update(1, 0, params, 0.5)
        np.testing.assert_allclose(weights(post), [0.4, 0.6], atol=1e-12)

    def test_boundary_interval_split(self):
        """Boundary mass is split at the quantile: 0.3 of it on the left, 0.7 on the right."""
        eps = 0.1
        params = channel_params(0.5, eps)
        post = PosteriorWeights.from_weights([0.47, 0.1, 0.43])
        j = post.interval_at_quantile(0.5)
        assert j == 2
        post.apply_update(j, 0, params, 0.5)
        expected_middle = 0.1 * (0.3 * (1 - 2 * eps) + 0.7 * (1 + 2 * eps))
        assert post.weight(2) == pytest.approx(expected_middle, abs=1e-12)
        assert post.weight(1) == pytest.approx(0.47 * 0.8, abs=1e-12)
        assert post.weight(3) == pytest.approx(0.43 * 1.2, abs=1e-12)

    def test_multiply_split_conservative(self):
        post = PosteriorWeights.new_uniform(4)
        post.multiply_split(2, 0.5, 1.06, 0.94)
        np.testing.assert_allclose(weights(post), [0.265, 0.265, 0.235, 0.235], atol=1e-12)

    def test_quantile_monotone(self):
        rng = np.random.default_rng(3)
        post = PosteriorWeights.from_weights(rng.uniform(0.1, 1.0, 50))
        post._scale(1.0 / post.total)
        qs = np.sort(rng.uniform(1e-6, 1.0, 200))
        found = [post.interval_at_quantile(q) for q in qs]
        assert found == sorted(found)

    def test_positivity_and_mass(self):
        params = channel_params(0.7, 0.1)
        rng = np.random.default_rng(0)
        for n_intervals in (2, 10, 10 ** 6):
            post = PosteriorWeights.new_uniform(n_intervals)
            for _ in range(2000):
                j = post.interval_at_quantile(params.q)
                post.apply_update(j, int(rng.integers(2)), params, params.q)
                assert abs(post.total - 1.0) <= 1e-6
            assert post.weight(post.interval_at_quantile(params.q)) > 0.0
            assert post.prefix_weight(n_intervals) == pytest.approx(post.total)

    @pytest.mark.slow
    def test_long_run_drift(self):
        params = channel_params(0.5, 0.1)
        rng = np.random.default_rng(1)
        for n_intervals in (2, 10, 10 ** 6):
            post = PosteriorWeights.new_uniform(n_intervals)
            outcomes = rng.integers(2, size=10 ** 5)
            for y in outcomes:
                post.apply_update(post.interval_at_quantile(0.5), int(y), params, 0.5)
                assert abs(post.total - 1.0) <= 1e-6


class TestDenseEquivalence:
    """The lazy tree and the dense reference agree under random operation sequences."""

    def _compare(self, tree, dense):
        np.testing.assert_allclose(weights(tree), dense.w, atol=1e-9)
        for i in range(tree.n_intervals + 1):
            assert tree.prefix_weight(i) == pytest.approx(dense.prefix_weight(i), abs=1e-9)

    def _run_sequence(self, rng, n_intervals, steps):
        tau = float(rng.choice([0.3, 0.5, 0.75]))
        params = channel_params(tau, 0.1)
        tree = PosteriorWeights.new_uniform(n_intervals)
        dense = DensePosteriorWeights.new_uniform(n_intervals)
        for _ in range(steps):
            q = float(rng.uniform(1e-3, 1.0 - 1e-3))
            j = tree.interval_at_quantile(q)
            assert j == dense.interval_at_quantile(q)
            assert tree.round_to_coin(j, q) == dense.round_to_coin(j, q)
            if rng.random() < 0.5:
                y = int(rng.integers(2))
                tree.apply_update(j, y, params, q)
                dense.apply_update(j, y, params, q)
            else:
                left, right = rng.uniform(0.5, 1.5, 2)
                tree.multiply_split(j, q, left, right)
                dense.multiply_split(j, q, left, right)
        self._compare(tree, dense)

    def test_random_sequences(self):
        rng = np.random.default_rng(2024)
        for _ in range(300):
            self._run_sequence(rng, int(rng.integers(2, 65)), 30)

    @pytest.mark.slow
    def test_many_random_sequences(self):
        rng = np.random.default_rng(7)
        for _ in range(10 ** 4):
            self._run_sequence(rng, int(rng.integers(2, 65)), 30)

    def test_from_weights(self):
        w = np.array([0.1, 0.2, 0.3, 0.4])
        tree = PosteriorWeights.from_weights(w)
        dense = DensePosteriorWeights.from_weights(w)
        self._compare(tree, dense)
        for q in (0.05, 0.1, 0.30001, 0.6, 0.99):
            assert tree.interval_at_quantile(q) == dense.interval_at_quantile(q)
