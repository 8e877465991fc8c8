import itertools
import math

import numpy as np
import pytest
from conftest import ScriptedOracle, step_instance

from bayesnbs.bac_math import channel_params
from bayesnbs.bayes_learn import bayes_learn, bayes_learn_iterations
from bayesnbs.oracles import BudgetExhausted, SimulatedOracle
from bayesnbs.utils import trial_rng


class PiecewisePosterior:
    """Posterior density of a continuous crossing position on [0, n - 1].

    Each observation multiplies the density left of the queried quantile by
    the heads/tails probability of a coin above the threshold and the
    density right of it by that of a coin below.
    """

    def __init__(self, n_intervals):
        self.edges = [float(x) for x in range(n_intervals + 1)]
        self.density = [1.0 / n_intervals] * n_intervals

    def _masses(self):
        return [d * (b - a) for d, a, b in zip(self.density, self.edges[:-1], self.edges[1:])]

    def split_at(self, q):
        acc = 0.0
        for k, mass in enumerate(self._masses()):
            if acc + mass >= q:
                a = self.edges[k]
                x = a + (q - acc) / self.density[k]
                if a < x < self.edges[k + 1]:
                    self.edges.insert(k + 1, x)
                    self.density.insert(k + 1, self.density[k])
                    return k + 1
                return k + 1 if x >= self.edges[k + 1] else k
            acc += mass
        return len(self.density)

    def observe(self, q, y, tau, eps):
        cut = self.split_at(q)
        high = tau + eps if y else 1.0 - tau - eps
        low = tau - eps if y else 1.0 - tau + eps
        self.density = [d * (high if k < cut else low) for k, d in enumerate(self.density)]
        total = sum(self._masses())
        self.density = [d / total for d in self.density]

    def interval_weights(self):
        n_intervals = int(round(self.edges[-1]))
        w = np.zeros(n_intervals)
        for d, a, b in zip(self.density, self.edges[:-1], self.edges[1:]):
            w[min(int(math.floor(a + 1e-12)), n_intervals - 1)] += d * (b - a)
        return w


def learner_weights(transcript):
    post = transcript.final_posterior
    return np.array([post.weight(i) for i in range(1, post.n_intervals + 1)])


class TestIterations:

    def test_core_term(self):
        capacity = channel_params(0.5, 0.1).capacity
        n = 2 ** 12
        assert bayes_learn_iterations(n, 1.0, 1e-12, capacity, 5.0, 7.0) == math.ceil(12 / capacity)

    def test_value(self):
        capacity = channel_params(0.5, 0.1).capacity
        assert bayes_learn_iterations(2 ** 20, 0.1, 1.0 / 7.0, capacity) == 2957

    def test_linear_in_c2(self):
        capacity = channel_params(0.5, 0.1).capacity
        base = bayes_learn_iterations(2 ** 20, 0.1, 1.0 / 7.0, capacity, 2.0, 2.0)
        doubled = bayes_learn_iterations(2 ** 20, 0.1, 1.0 / 7.0, capacity, 2.0, 4.0)
        step = 2.0 * math.log2(10.0) * 2.0 / capacity
        assert doubled - base in (math.floor(step), math.ceil(step))

    @pytest.mark.parametrize("kwargs", [dict(gamma=0.2), dict(gamma=0.0), dict(delta=0.0), dict(delta=1.5),
                                        dict(capacity=0.0), dict(n=1)])
    def test_parameter_errors(self, kwargs):
        args = dict(n=64, delta=0.1, gamma=0.1, capacity=0.03)
        args.update(kwargs)
        with pytest.raises(ValueError):
            bayes_learn_iterations(**args)


class TestBayesLearn:

    def test_zero_rounds(self):
        transcript = bayes_learn(ScriptedOracle(5, []), 5, 0.5, 0.1, 0)
        assert transcript.intervals == [] and transcript.outcomes == []
        np.testing.assert_allclose(learner_weights(transcript), 0.25)

    def test_single_forced_round(self):
        oracle = ScriptedOracle(3, [1])
        transcript = bayes_learn(oracle, 3, 0.5, 0.1, 1)
        assert transcript.intervals == [1]
        assert oracle.asked == [2]
        np.testing.assert_allclose(learner_weights(transcript), [0.6, 0.4], atol=1e-12)

    def test_exact_flips_and_lengths(self):
        oracle = SimulatedOracle(step_instance(32, 11), seed=4)
        transcript = bayes_learn(oracle, 32, 0.5, 0.1, 150)
        assert oracle.flips_used == 150
        assert len(transcript.intervals) == len(transcript.outcomes) == len(transcript.coins) == 150
        for j, x in zip(transcript.intervals, transcript.coins):
            assert x in (j, j + 1)

    def test_budget_exhaustion_carries_transcript(self):
        oracle = SimulatedOracle(step_instance(16, 5), seed=0, budget_cap=10)
        with pytest.raises(BudgetExhausted) as info:
            bayes_learn(oracle, 16, 0.5, 0.1, 50)
        partial = info.value.transcript
        assert len(partial.intervals) == len(partial.outcomes) == 10

    @pytest.mark.parametrize("tau,eps", [(0.5, 0.1), (0.7, 0.1), (0.25, 0.05)])
    def test_exact_bayes_posterior(self, tau, eps):
        """The learner's posterior equals the product-form posterior for every
        outcome sequence of length <= 6."""
        q = channel_params(tau, eps).q
        for n in range(2, 9):
            for length in range(1, 7):
                for outcomes in itertools.product((0, 1), repeat=length):
                    reference = PiecewisePosterior(n - 1)
                    for y in outcomes:
                        reference.observe(q, y, tau, eps)
                    transcript = bayes_learn(ScriptedOracle(n, outcomes), n, tau, eps, length)
                    np.testing.assert_allclose(learner_weights(transcript), reference.interval_weights(),
                                               atol=1e-9, err_msg="n=%d outcomes=%s" % (n, outcomes))

    @pytest.mark.slow
    def test_most_visited_is_crossing(self):
        n = 2 ** 10
        capacity = channel_params(0.5, 0.1).capacity
        M = int(math.ceil(2 * math.log2(n) / capacity))
        hits = 0
        for t in range(200):
            rng = trial_rng(17, t)
            crossing = int(rng.integers(1, n))
            oracle = SimulatedOracle(step_instance(n, crossing), rng)
            transcript = bayes_learn(oracle, n, 0.5, 0.1, M)
            values, counts = np.unique(transcript.intervals, return_counts=True)
            hits += int(values[np.argmax(counts)] == crossing)
        assert hits >= 100

    @pytest.mark.slow
    def test_good_fraction_reaches_gamma(self):
        n, delta, gamma = 2 ** 14, 0.2, 1.0 / 7.0
        M = bayes_learn_iterations(n, delta, gamma, channel_params(0.5, 0.1).capacity)
        reached = 0
        for t in range(400):
            rng = trial_rng(23, t)
            inst = step_instance(n, int(rng.integers(1, n)))
            transcript = bayes_learn(SimulatedOracle(inst, rng), n, 0.5, 0.1, M)
            good = set(inst.good_intervals().tolist())
            fraction = sum(1 for j in transcript.intervals if j in good) / M
            reached += int(fraction >= gamma)
        assert reached >= 300
