#####################################
# Bayesian screening search
# The learner shrinks n candidate intervals to a short list that holds a
# good one with high probability; a second pass (a scan of bias estimates,
# or one recursive search over the list) picks it out.
######################################
import math
from warnings import warn

import numpy as np
from sklearn.base import BaseEstimator, clone

from .bac_math import channel_params, check_channel
from .baselines import BudgetedAlgorithm, bisect_coins
from .bayes_learn import bayes_learn, bayes_learn_iterations
from .oracles import BudgetExhausted, OracleView, RunReport
from .utils import ceil_lg, ts

MAX_SCAN = 7


class ScreeningConfig(BaseEstimator):
    """Constants of the screening search.

    Parameters
    ----------
    delta: float (optional, default 0.1)
        Failure probability, 0 < delta < 1/2.
    gamma_top: float (optional, default None)
        Gamma of the top-level call, 1 / (7 lg n) when None. Informational:
        it is reported in the run diagnostics.
    gamma_reduction: float (optional, default None)
        Gamma of the top-level reduction, 1 / (3 lg n) when None.
    gamma_recursive: float (optional, default 1/7)
        Gamma of the reduction inside the recursive call.
    c1, c2: float (optional, default 2.0)
        Lower-order constants of the learner's iteration count.
    estimator_constant: float (optional, default 1.0)
        Multiplies the Hoeffding flip count of every bias estimate.
    budget_cap: int (optional, default None)
        Hard cap on flips; exceeding it raises BudgetExhausted.
    verbose: bool (optional, default False)
    """

    def __init__(self, delta=0.1, gamma_top=None, gamma_reduction=None, gamma_recursive=1.0 / 7.0,
                 c1=2.0, c2=2.0, estimator_constant=1.0, budget_cap=None, verbose=False):
        self.delta = delta
        self.gamma_top = gamma_top
        self.gamma_reduction = gamma_reduction
        self.gamma_recursive = gamma_recursive
        self.c1 = c1
        self.c2 = c2
        self.estimator_constant = estimator_constant
        self.budget_cap = budget_cap
        self.verbose = verbose

    def _validate_parameters(self):
        if not 0.0 < self.delta < 0.5:
            raise ValueError("delta must lie in (0, 1/2)")
        for name in ("gamma_top", "gamma_reduction", "gamma_recursive"):
            value = getattr(self, name)
            if value is not None and not 0.0 < value <= 1.0 / 3.0:
                raise ValueError("%s must lie in (0, 1/3]" % name)
        if self.c1 < 0.0 or self.c2 < 0.0:
            raise ValueError("c1 and c2 cannot be negative")
        if self.estimator_constant <= 0.0:
            raise ValueError("estimator_constant must be positive")
        if self.budget_cap is not None and self.budget_cap < 1:
            raise ValueError("budget_cap must be at least 1")

    def resolve_gammas(self, n):
        """(gamma_top, gamma_reduction) for a problem of n coins."""
        lg_n = max(math.log2(n), 1.0)
        top = self.gamma_top if self.gamma_top is not None else 1.0 / (7.0 * lg_n)
        reduction = self.gamma_reduction if self.gamma_reduction is not None else 1.0 / (3.0 * lg_n)
        return top, reduction


def shrunk_eps(eps, n, delta):
    """eps' = eps * max(1 - (log_n(1/delta))^(1/3), 2/3)."""
    ratio = math.log(1.0 / delta) / math.log(n)
    return eps * max(1.0 - np.cbrt(ratio), 2.0 / 3.0)


def subsample_transcript(intervals, gamma):
    """Every ceil(gamma |L|)-th entry of L, duplicates removed in order.

    Parameters
    ----------
    intervals: list of int
        The learner's list L.
    gamma: float
        Target fraction, 0 < gamma <= 1.

    Returns
    -------
    R: list of int
        At most floor(1 / gamma) distinct intervals.
    """
    if not 0.0 < gamma <= 1.0:
        raise ValueError("gamma must lie in (0, 1]")
    size = len(intervals)
    if size == 0:
        return []
    # rounding keeps gamma * |L| = 5.0000000001 from skipping to 6
    step = max(1, int(math.ceil(round(gamma * size, 9))))
    picked = [intervals[step * i - 1] for i in range(1, size // step + 1)]
    return list(dict.fromkeys(picked))


def _reduce(oracle, n, tau, eps, delta, gamma, cfg):
    capacity = channel_params(tau, eps).capacity
    M = bayes_learn_iterations(n, delta, min(gamma, 1.0 / 7.0), capacity, cfg.c1, cfg.c2)
    transcript = bayes_learn(oracle, n, tau, eps, M, verbose=cfg.verbose)
    return subsample_transcript(transcript.intervals, gamma), transcript


def reduction_to_gamma(oracle, n, tau, eps, delta, gamma, cfg=None):
    """Candidate intervals of which a gamma fraction of the learner's
    queries were good.

    Runs the learner for bayes_learn_iterations(n, delta, gamma, C) rounds and
    subsamples its transcript with :func:`subsample_transcript`.

    Returns
    -------
    R: list of int
    """
    cfg = ScreeningConfig() if cfg is None else cfg
    return _reduce(oracle, n, tau, eps, delta, gamma, cfg)[0]


def hoeffding_flips(accuracy, delta, constant=1.0):
    """m = ceil(constant * ln(2 / delta) / (2 accuracy^2))."""
    if accuracy <= 0.0:
        raise ValueError("accuracy must be positive")
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    return int(math.ceil(constant * math.log(2.0 / delta) / (2.0 * accuracy ** 2) - 1e-9))


def estimate_bias(oracle, coin, accuracy, delta, constant=1.0):
    """Empirical heads rate of ``coin`` within ``accuracy`` w.p. 1 - delta.

    Parameters
    ----------
    oracle: CoinOracle
    coin: int
    accuracy: float
        Half-width of the guarantee.
    delta: float
        Failure probability of the guarantee.
    constant: float (optional, default 1.0)
        Scales the Hoeffding flip count.

    Returns
    -------
    estimate: float
    """
    m = hoeffding_flips(accuracy, delta, constant)
    return oracle.flip_many(coin, m) / m


def _screen(oracle, n, tau, eps, delta, gamma, cfg, report, depth, coin_map=None):
    def original(coin):
        return coin if coin_map is None else coin_map[coin - 1]

    if n == 2:
        return 1
    eps_p = shrunk_eps(eps, n, delta)
    accuracy = (eps - eps_p) / 2.0
    threshold = tau - eps + accuracy
    estimates = []
    report.diagnostics.update(eps_prime=eps_p, gamma=gamma, estimates=estimates)

    with report.stage(oracle, "learner"):
        R, transcript = _reduce(oracle, n, tau, eps_p, delta / 3.0, gamma, cfg)
    R = sorted(R)
    report.transcript = transcript.intervals
    report.diagnostics["candidates"] = R
    if cfg.verbose:
        print(ts(), "screening (depth %d): %d learner rounds, %d candidates" % (depth, len(transcript), len(R)))

    if len(R) > MAX_SCAN:
        if depth > 0:
            raise RuntimeError("the recursive call returned %d > %d candidates" % (len(R), MAX_SCAN))
        padded = sorted(set(R) | {1, n})
        report.flags.add("recursed")
        sub = RunReport()
        with report.stage(oracle, "recursion"):
            i = _screen(OracleView(oracle, padded), len(padded), tau, eps_p, delta / 3.0,
                        cfg.gamma_recursive, cfg, sub, depth + 1, coin_map=padded)
        left, right = padded[i - 1], padded[i]
        report.flags.update(sub.flags)
        report.diagnostics["recursion"] = dict(sub.diagnostics, flags=sorted(sub.flags))
        report.diagnostics["bracket"] = (original(left), original(right))
        with report.stage(oracle, "estimation"):
            est = estimate_bias(oracle, left + 1, accuracy, delta / 3.0, cfg.estimator_constant)
        estimates.append(dict(coin=original(left + 1), estimate=est, accuracy=accuracy))
        return left if est > threshold else right - 1

    with report.stage(oracle, "estimation"):
        for x in R:
            est = estimate_bias(oracle, x + 1, accuracy, delta / 18.0, cfg.estimator_constant)
            estimates.append(dict(coin=original(x + 1), estimate=est, accuracy=accuracy))
            if est > threshold:
                return x
    report.flags.add("scan_exhausted")
    warn("no candidate passed the bias test; returning the last candidate %d" % R[-1])
    return R[-1]


def bayesian_screening_search(oracle, n, tau, eps, cfg=None):
    """Find a (tau, eps)-good interval with probability at least 1 - delta.

    Parameters
    ----------
    oracle: CoinOracle
        Coins 1..n with nondecreasing heads probabilities.
    n: int
        Number of coins, at least 2.
    tau, eps: float
        Target threshold and half-width, 0 < eps <= min(tau, 1 - tau) / 2.
    cfg: ScreeningConfig (optional, default None)
        Constants of the search; ``ScreeningConfig()`` when None.

    Returns
    -------
    answer: int
        Interval index in 1..n-1.
    report: RunReport
        Flips per stage (learner, recursion, estimation), the learner's
        transcript and the candidates and estimates behind the answer.
    """
    cfg = ScreeningConfig() if cfg is None else cfg
    cfg._validate_parameters()
    check_channel(tau, eps)
    if n < 2:
        raise ValueError("n must be at least 2")
    if cfg.budget_cap is not None:
        oracle = OracleView(oracle, budget_cap=cfg.budget_cap)
    gamma_top, gamma_reduction = cfg.resolve_gammas(n)
    report = RunReport()
    report.diagnostics["gamma_top"] = gamma_top
    answer = _screen(oracle, n, tau, eps, cfg.delta, gamma_reduction, cfg, report, depth=0)
    report.answer = answer
    if cfg.verbose:
        print(ts(), "screening: answer %d after %d flips" % (answer, report.flips_used))
    return answer, report


def silly_bayesian_screening_search(oracle, n, tau, eps, delta, cfg=None, rng=None):
    """Screening search with optimal expected flips.

    With probability delta - delta / lg n a uniformly random interval is
    returned without flipping; otherwise the full search runs with failure
    probability delta / lg n.

    Parameters
    ----------
    oracle, n, tau, eps:
        As for :func:`bayesian_screening_search`.
    delta: float
        Overall failure probability.
    cfg: ScreeningConfig (optional, default None)
        Its ``delta`` is replaced by delta / lg n.
    rng: numpy Generator or int (optional, default None)
        Drives the branch choice and the random answer.
    """
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    if n < 2:
        raise ValueError("n must be at least 2")
    check_channel(tau, eps)
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    lg_n = math.log2(n)
    p_random = delta - delta / lg_n
    if rng.random() < p_random:
        report = RunReport(answer=int(rng.integers(1, n)))
        report.flags.add("random_branch")
        report.diagnostics["p_random"] = p_random
        return report.answer, report
    inner = clone(cfg) if cfg is not None else ScreeningConfig()
    inner.set_params(delta=delta / lg_n)
    answer, report = bayesian_screening_search(oracle, n, tau, eps, inner)
    report.diagnostics["p_random"] = p_random
    return answer, report


class ScreeningVariant(BudgetedAlgorithm):
    """Budgeted screening search used in the comparative experiments.

    The learner updates with eps itself and subsamples with gamma = 1/ln^2 n;
    the candidates (padded with coins 1 and n) are narrowed to two adjacent
    finalists by binary search with repetition, and one bias estimate picks
    between them. The learner gets its ceil(lg n / C) core, narrowing
    ceil(narrowing_share lg lg n / C) flips and the final estimate
    ceil(estimation_share / C); what remains is split evenly over the three
    stages.

    Parameters
    ----------
    delta: float (optional, default 0.15)
        Failure target the final threshold's eps' is computed for.
    narrowing_share: float (optional, default 1.0)
    estimation_share: float (optional, default 1.0)
    verbose: bool (optional, default False)
    """

    name = "variant"

    def __init__(self, delta=0.15, narrowing_share=1.0, estimation_share=1.0, verbose=False):
        self.delta = delta
        self.narrowing_share = narrowing_share
        self.estimation_share = estimation_share
        self.verbose = verbose

    def _validate_parameters(self):
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")
        if self.narrowing_share <= 0.0 or self.estimation_share <= 0.0:
            raise ValueError("stage shares must be positive")

    def allocate(self, n, tau, eps, budget):
        """Flips per stage as a dict, or None when the budget cannot cover
        the three base allocations."""
        capacity = channel_params(tau, eps).capacity
        lg_n = math.log2(n)
        core = int(math.ceil(lg_n / capacity))
        narrowing = int(math.ceil(self.narrowing_share * math.log2(max(lg_n, 2.0)) / capacity))
        estimation = int(math.ceil(self.estimation_share / capacity))
        rest = budget - core - narrowing - estimation
        if rest < 0:
            return None
        extra = rest // 3
        return dict(learner=core + extra + rest % 3, narrowing=narrowing + extra, estimation=estimation + extra)

    def _search(self, oracle, n, tau, eps, budget, report):
        if n == 2:
            return 1
        shares = self.allocate(n, tau, eps, budget)
        gamma = min(1.0 / math.log(n) ** 2, 1.0 / 7.0)
        learner_rounds = budget if shares is None else shares["learner"]
        report.diagnostics["allocation"] = shares
        with report.stage(oracle, "learner"):
            try:
                transcript = bayes_learn(oracle, n, tau, eps, learner_rounds)
            except BudgetExhausted as e:
                report.diagnostics["best_effort"] = e.transcript.final_posterior.interval_at_quantile(0.5)
                raise
        median = transcript.final_posterior.interval_at_quantile(0.5)
        report.transcript = transcript.intervals
        report.diagnostics["best_effort"] = median
        if shares is None:
            report.flags.add("exhausted")
            return median

        R = subsample_transcript(transcript.intervals, gamma)
        padded = sorted(set(R) | {1, n})
        report.diagnostics["candidates"] = padded
        per_level = max(1, shares["narrowing"] // ceil_lg(len(padded)))
        with report.stage(oracle, "narrowing"):
            i = bisect_coins(OracleView(oracle, padded), tau, per_level)
        left, right = padded[i - 1], padded[i]
        report.diagnostics["best_effort"] = left
        report.diagnostics["finalists"] = (left, right)
        if right == left + 1:
            return left

        eps_p = shrunk_eps(eps, n, self.delta)
        threshold = tau - eps + (eps - eps_p) / 2.0
        m = shares["estimation"]
        with report.stage(oracle, "estimation"):
            est = oracle.flip_many(left + 1, m) / m
        report.diagnostics["estimates"] = [dict(coin=left + 1, estimate=est, accuracy=None)]
        return left if est > threshold else right - 1


def experiment_variant_search(oracle, n, tau, eps, budget, delta=0.15):
    return ScreeningVariant(delta=delta).run(oracle, n, tau, eps, budget)
