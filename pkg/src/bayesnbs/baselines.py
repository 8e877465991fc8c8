#####################################
# Budgeted comparison algorithms
# Binary search with repetition and the two Karp-Kleinberg algorithms,
# reworked to spend a given sample budget so they can be compared with the
# screening search at equal success probability.
######################################
import math
from collections import Counter

import numpy as np
from sklearn.base import BaseEstimator

from .bac_math import check_channel
from .oracles import BudgetExhausted, HalfThresholdOracle, OracleView, RunReport
from .posterior import PosteriorWeights
from .utils import ceil_lg, ts


def bisect_coins(oracle, tau, per_level, lo=1, hi=None):
    """Binary search over coins lo..hi with ``per_level`` flips per visited coin.

    Descends left when the empirical mean of the visited coin is at least tau.
    Returns the left coin of the final bracketing interval.
    """
    hi = oracle.n if hi is None else hi
    while hi - lo > 1:
        mid = (lo + hi) // 2
        heads = oracle.flip_many(mid, per_level)
        if heads >= tau * per_level:
            hi = mid
        else:
            lo = mid
    return lo


class BudgetedAlgorithm(BaseEstimator):
    """Base for searches that take a flip budget instead of a failure
    probability.

    ``run`` hands ``_search`` a view of the oracle capped at the budget, so a
    run can never spend more than it was given. When the cap is hit the run
    ends with ``exhaustion_flag`` set and the best answer ``_search`` left in
    ``report.diagnostics['best_effort']`` (None means failure).
    """

    name = None
    exhaustion_flag = "exhausted"

    def _validate_parameters(self):
        pass

    def run(self, oracle, n, tau, eps, budget):
        """Search coins 1..n of ``oracle`` within ``budget`` flips.

        Returns
        -------
        answer: int or None
        report: RunReport
        """
        self._validate_parameters()
        check_channel(tau, eps)
        if n < 2:
            raise ValueError("n must be at least 2")
        if budget is None or budget < 1:
            raise ValueError("budget must be at least 1")
        view = OracleView(oracle, budget_cap=int(budget))
        report = RunReport()
        report.diagnostics["budget"] = int(budget)
        try:
            answer = self._search(view, n, tau, eps, int(budget), report)
        except BudgetExhausted:
            report.flags.add(self.exhaustion_flag)
            answer = report.diagnostics.get("best_effort")
        report.answer = answer
        if getattr(self, "verbose", False):
            print(ts(), "%s: answer=%s flips=%d/%d" % (self.name, answer, report.flips_used, budget))
        return answer, report

    def _search(self, oracle, n, tau, eps, budget, report):
        raise NotImplementedError


class NaiveNBS(BudgetedAlgorithm):
    """Binary search with repetition.

    The budget is split evenly over the ceil(lg n) levels; each level flips
    its midpoint coin budget // ceil(lg n) times and compares the mean with tau.

    Parameters
    ----------
    verbose: bool (optional, default False)
    """

    name = "naive"

    def __init__(self, verbose=False):
        self.verbose = verbose

    def _search(self, oracle, n, tau, eps, budget, report):
        levels = ceil_lg(n)
        if budget < levels:
            raise ValueError("a budget of %d cannot give each of the %d levels one flip" % (budget, levels))
        per_level = budget // levels
        report.diagnostics["per_level"] = per_level
        with report.stage(oracle, "bisection"):
            return bisect_coins(oracle, tau, per_level)


class KKMultiplicativeWeights(BudgetedAlgorithm):
    """Multiplicative weights search with conservative updates, amplified by
    repetition.

    The coins are first recoloured so the threshold becomes 1/2 (see
    :class:`~bayesnbs.oracles.HalfThresholdOracle`), which shrinks eps to
    eps' = eps / (2 max(tau, 1 - tau)). One run starts from uniform weights,
    flips the coin at the weighted median ``iterations`` times and scales the
    two sides by 1 +/- update_scale * eps' instead of the Bayesian factors.
    Its median queried interval or its last queried interval is good with
    constant probability only, so ``repetitions`` independent runs share the
    update budget and propose two candidates each. A ``verify_fraction`` of
    the budget tests the pooled candidates against the original coins and
    the most often proposed candidate that passes is returned.

    Parameters
    ----------
    update_scale: float (optional, default 0.6)
        Multiplier of eps' in the update factors.
    verify_fraction: float (optional, default 0.2)
        Share of the budget reserved for candidate verification.
    median: str (optional, default 'time')
        'time' takes the interval queried halfway through a run,
        'value' the median of its queried positions.
    delta: float (optional, default 0.15)
        Failure target; sets the default number of runs.
    repetitions: int (optional, default None)
        Independent runs; 2 ceil(ln(1 / delta)) + 1 when None.
    random_state: int or numpy Generator (optional, default None)
        Source of the recolouring coins.
    verbose: bool (optional, default False)
    """

    name = "kk_mw"

    def __init__(self, update_scale=0.6, verify_fraction=0.2, median="time", delta=0.15, repetitions=None,
                 random_state=None, verbose=False):
        self.update_scale = update_scale
        self.verify_fraction = verify_fraction
        self.median = median
        self.delta = delta
        self.repetitions = repetitions
        self.random_state = random_state
        self.verbose = verbose

    def _validate_parameters(self):
        if not 0.0 < self.update_scale < 1.0:
            raise ValueError("update_scale must lie in (0, 1)")
        if not 0.0 <= self.verify_fraction < 1.0:
            raise ValueError("verify_fraction must lie in [0, 1)")
        if self.median not in ("time", "value"):
            raise ValueError('median must be "time" or "value"')
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")
        if self.repetitions is not None and self.repetitions < 1:
            raise ValueError("repetitions must be positive")

    def runs(self):
        """Number of independent runs."""
        if self.repetitions is not None:
            return int(self.repetitions)
        return 2 * int(math.ceil(math.log(1.0 / self.delta))) + 1

    def factors(self, eps, y):
        """(left, right) multipliers after outcome ``y`` at half-width ``eps``."""
        step = self.update_scale * eps
        if y:
            return 1.0 + step, 1.0 - step
        return 1.0 - step, 1.0 + step

    def _run_once(self, oracle, n, eps, iterations, queried):
        posterior = PosteriorWeights.new_uniform(n - 1)
        mine = []
        for _ in range(iterations):
            j = posterior.interval_at_quantile(0.5)
            x = posterior.round_to_coin(j, 0.5)
            mine.append(j)
            queried.append(j)
            y = oracle.flip(x)
            left, right = self.factors(eps, y)
            posterior.multiply_split(j, 0.5, left, right)
        if not mine:
            return [posterior.interval_at_quantile(0.5)]
        if self.median == "time":
            middle = mine[len(mine) // 2]
        else:
            middle = int(np.sort(mine)[len(mine) // 2])
        return [middle, mine[-1]]

    def _search(self, oracle, n, tau, eps, budget, report):
        if n == 2:
            return 1
        reserve = int(math.floor(self.verify_fraction * budget))
        runs = max(1, min(self.runs(), budget - reserve))
        iterations = (budget - reserve) // runs
        rng = self.random_state
        rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
        reduced = HalfThresholdOracle(oracle, tau, rng)
        eps_half = reduced.reduced_eps(eps)
        queried = []
        proposals = Counter()
        report.transcript = queried
        report.diagnostics.update(iterations=iterations, runs=runs, eps_reduced=eps_half)
        with report.stage(oracle, "updates"):
            for _ in range(runs):
                for j in self._run_once(reduced, n, eps_half, iterations, queried):
                    proposals[j] += 1
                report.diagnostics["best_effort"] = proposals.most_common(1)[0][0]
        # most_common keeps first-proposed order among ties
        candidates = [j for j, _ in proposals.most_common()]
        report.diagnostics["candidates"] = candidates
        per_coin = reserve // (2 * len(candidates))
        if per_coin == 0:
            return candidates[0]
        scores = []
        with report.stage(oracle, "verification"):
            for j in candidates:
                low = oracle.flip_many(j, per_coin) / per_coin
                high = oracle.flip_many(j + 1, per_coin) / per_coin
                if low < tau + eps / 2.0 and high > tau - eps / 2.0:
                    return j
                scores.append(max(low - tau, 0.0) + max(tau - high, 0.0))
        return candidates[int(np.argmin(scores))]


class KKBacktracking(BudgetedAlgorithm):
    """Backtracking random walk on the binary search tree of intervals.

    At every step the walk first re-checks that its current node still
    brackets the threshold (left end below tau, right end above) and moves
    back to the parent on a contradiction; otherwise it descends by flipping
    the middle coin, or at a leaf adds one to the leaf's consistency
    counter. Every comparison is a majority vote over ``votes`` flips. The
    answer is the leaf with the highest counter after a fixed number of
    steps. The budget only acts as a hard limit: a run that needs more flips
    fails.

    Parameters
    ----------
    delta: float (optional, default 0.15)
        Target failure probability, sets the walk length.
    constant: float (optional, default 2000.0)
        Overall constant of the walk; a run spends about
        constant * max(tau, 1 - tau) / eps^2 * ln n * ln(1/delta) flips.
    vote_constant: float (optional, default 8.0)
        votes = ceil(vote_constant * max(tau, 1 - tau) / eps^2).
    verbose: bool (optional, default False)
    """

    name = "kk_backtracking"
    exhaustion_flag = "budget_exceeded"

    def __init__(self, delta=0.15, constant=2000.0, vote_constant=8.0, verbose=False):
        self.delta = delta
        self.constant = constant
        self.vote_constant = vote_constant
        self.verbose = verbose

    def _validate_parameters(self):
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")
        if self.constant <= 0.0 or self.vote_constant <= 0.0:
            raise ValueError("constants must be positive")

    def schedule(self, n, tau, eps):
        """(votes per comparison, number of walk steps)."""
        votes = int(math.ceil(self.vote_constant * max(tau, 1.0 - tau) / eps ** 2))
        steps = int(math.ceil(self.constant / (3.0 * self.vote_constant)
                              * math.log(n) * math.log(1.0 / self.delta)))
        return votes, max(steps, 1)

    def _search(self, oracle, n, tau, eps, budget, report):
        if n == 2:
            return 1
        votes, steps = self.schedule(n, tau, eps)
        report.diagnostics.update(votes=votes, steps=steps)

        def above(coin):
            return oracle.flip_many(coin, votes) >= tau * votes

        path = [(1, n)]
        counters = Counter()
        backtracks = 0
        with report.stage(oracle, "walk"):
            for _ in range(steps):
                lo, hi = path[-1]
                if len(path) > 1 and (above(lo) or not above(hi)):
                    path.pop()
                    backtracks += 1
                    continue
                if hi - lo == 1:
                    counters[lo] += 1
                    continue
                mid = (lo + hi) // 2
                path.append((lo, mid) if above(mid) else (mid, hi))
        report.diagnostics["backtracks"] = backtracks
        if counters:
            return counters.most_common(1)[0][0]
        return path[-1][0]


def naive_nbs(oracle, n, tau, eps, budget):
    return NaiveNBS().run(oracle, n, tau, eps, budget)


def kk_multiplicative_weights(oracle, n, tau, eps, budget, **kwargs):
    return KKMultiplicativeWeights(**kwargs).run(oracle, n, tau, eps, budget)


def kk_backtracking(oracle, n, tau, eps, budget, **kwargs):
    return KKBacktracking(**kwargs).run(oracle, n, tau, eps, budget)
