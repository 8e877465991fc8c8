#####################################
# Experiment harness
# Instance generators, seeded trial campaigns, the budget calibration
# meta-search and CSV output.
######################################
import math
from dataclasses import dataclass, field
from typing import List
from warnings import warn

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from scipy.stats import binomtest
from sklearn.base import BaseEstimator

from .bac_math import check_channel, expectation_floor, query_complexity
from .baselines import BudgetedAlgorithm, KKBacktracking, KKMultiplicativeWeights, NaiveNBS
from .oracles import ProblemInstance, SimulatedOracle, TrialOracle, is_good
from .screening import (ScreeningConfig, ScreeningVariant, bayesian_screening_search,
                        silly_bayesian_screening_search)
from .utils import ceil_lg, trial_rng, ts

CSV_COLUMNS = ["algorithm", "distribution", "n", "tau", "eps", "budget", "trials", "successes",
               "mean_flips", "median_flips", "max_flips", "seed"]
CALIBRATION_COLUMNS = ["algorithm", "distribution", "n", "lower_budget", "upper_budget", "grid_ratio", "seed"]

# kind: (tau, eps, low coin, high coin)
_KINDS = {
    "standard": (0.5, 0.1, 0.4, 0.6),
    "biased": (0.75, 0.1, 0.65, 0.85),
    "lopsided": (0.5, 0.1, 0.44, 0.6),
    "wide": (0.5, 0.1, 0.4, 0.6),
    "noiseless": (0.5, 0.1, 0.0, 1.0),
}
DISTRIBUTIONS = tuple(_KINDS)

BUDGETED = {
    "naive": NaiveNBS,
    "kk_mw": KKMultiplicativeWeights,
    "kk_backtracking": KKBacktracking,
    "variant": ScreeningVariant,
}
NATIVE = ("screening", "silly")
# registry name -> name of its leading-order query complexity
COMPLEXITY_NAMES = {
    "naive": "naive",
    "kk_mw": "kk_multiplicative_weights",
    "kk_backtracking": "kk_backtracking",
    "variant": "screening",
    "screening": "screening",
    "silly": "screening",
}
ALGORITHMS = tuple(BUDGETED) + NATIVE


class CalibrationError(RuntimeError):
    """The budget grid does not bracket the target success rate."""


@dataclass(frozen=True)
class DistributionSpec:
    """A problem distribution: its kind fixes (tau, eps) and the coin values,
    the crossing position is drawn per instance."""
    kind: str
    n: int

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError("unknown distribution %r; choose from %s" % (self.kind, ", ".join(DISTRIBUTIONS)))
        if self.n < 2:
            raise ValueError("n must be at least 2")

    @property
    def tau(self):
        return _KINDS[self.kind][0]

    @property
    def eps(self):
        return _KINDS[self.kind][1]

    @property
    def window(self):
        """Length of the interpolation window of the wide distribution."""
        return int(math.ceil(10.0 * math.log(self.n)))


def make_instance(spec, seed=None, crossing=None):
    """Draw one instance of ``spec``.

    Parameters
    ----------
    spec: DistributionSpec
    seed: int or numpy Generator (optional, default None)
    crossing: int (optional, default None)
        Fix the transition instead of drawing it: the interval index for
        step distributions, the first window coin for 'wide'.

    Returns
    -------
    instance: ProblemInstance
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    tau, eps, low, high = _KINDS[spec.kind]
    n = spec.n
    p = np.empty(n)
    if spec.kind == "wide":
        w = spec.window
        if w > n:
            raise ValueError("wide window of %d coins does not fit into n=%d" % (w, n))
        start = int(rng.integers(1, n - w + 2)) if crossing is None else int(crossing)
        if not 1 <= start <= n - w + 1:
            raise ValueError("window start %d out of range 1..%d" % (start, n - w + 1))
        p[:start - 1] = low
        p[start - 1:start - 1 + w] = np.linspace(low, high, w)
        p[start - 1 + w:] = high
    else:
        k = int(rng.integers(1, n)) if crossing is None else int(crossing)
        if not 1 <= k <= n - 1:
            raise ValueError("crossing %d out of range 1..%d" % (k, n - 1))
        p[:k] = low
        p[k:] = high
    return ProblemInstance(n, tau, eps, p)


def load_instance(path, tau, eps):
    """Instance from a text file of nondecreasing heads probabilities, one
    per line.

    A vector without a (tau, eps)-good interval is padded with a p = 0 coin
    in front and a p = 1 coin behind, so coin i of the file becomes coin
    i + 1.

    Returns
    -------
    instance: ProblemInstance
    padded: bool
    """
    check_channel(tau, eps)
    p = np.loadtxt(path, ndmin=1, dtype=np.float64).ravel()
    instance = ProblemInstance(len(p), tau, eps, p)
    if len(instance.good_intervals()) == 0:
        warn("%s has no (%g, %g)-good interval; adding sentinel coins" % (path, tau, eps))
        return instance.with_sentinels(), True
    return instance, False


def make_algorithm(algorithm, delta=None):
    """Name and configured object of ``algorithm``.

    Accepts a registry name or a :class:`BudgetedAlgorithm` instance.
    Native algorithms ('screening', 'silly') resolve to their name only.
    """
    if isinstance(algorithm, BudgetedAlgorithm):
        return algorithm.name, algorithm
    if algorithm in NATIVE:
        return algorithm, None
    if algorithm not in BUDGETED:
        raise ValueError("unknown algorithm %r; choose from %s" % (algorithm, ", ".join(ALGORITHMS)))
    algo = BUDGETED[algorithm]()
    if delta is not None and "delta" in algo.get_params():
        algo.set_params(delta=delta)
    return algorithm, algo


def check_success_structure(instance, report, eps=None):
    """Whether the answer is good given that every probabilistic stage
    succeeded.

    The stages succeeded when the candidate list holds an eps'-good
    interval, every recorded bias estimate is within its accuracy, and (after
    a recursion) the returned bracket is eps'-good.

    Returns
    -------
    ok: bool or None
        None when some stage failed or the report carries no stage record.
    """
    diag = report.diagnostics
    if report.answer is None or "eps_prime" not in diag or "candidates" not in diag:
        return None
    eps = instance.eps if eps is None else eps
    eps_p = diag["eps_prime"]
    tau, p = instance.tau, instance.p
    if not any(is_good(instance, c, eps_p) for c in diag["candidates"]):
        return None
    for record in diag.get("estimates", []):
        if record["accuracy"] is None or abs(record["estimate"] - p[record["coin"] - 1]) > record["accuracy"]:
            return None
    if "bracket" in diag:
        left, right = diag["bracket"]
        if not (p[left - 1] < tau + eps_p and p[right - 1] > tau - eps_p):
            return None
    return is_good(instance, report.answer, eps)


def run_trial(algorithm, spec, budget, delta, rng):
    """Run ``algorithm`` once on a fresh instance of ``spec``.

    Returns
    -------
    success: bool
    flips: int
    structure: bool or None
        Result of :func:`check_success_structure`.
    """
    name, algo = make_algorithm(algorithm, delta)
    instance = make_instance(spec, rng)
    oracle = SimulatedOracle(instance, rng)
    if algo is not None and "random_state" in algo.get_params():
        algo.set_params(random_state=rng)
    try:
        if name == "screening":
            cfg = ScreeningConfig(delta=delta, budget_cap=budget)
            answer, report = bayesian_screening_search(oracle, spec.n, spec.tau, spec.eps, cfg)
        elif name == "silly":
            answer, report = silly_bayesian_screening_search(oracle, spec.n, spec.tau, spec.eps, delta, rng=rng)
        else:
            if budget is None:
                raise ValueError("%s needs a budget" % name)
            answer, report = algo.run(oracle, spec.n, spec.tau, spec.eps, budget)
    except (RuntimeError, ArithmeticError, ValueError):
        return False, oracle.flips_used, None
    success = answer is not None and is_good(instance, answer, spec.eps)
    return success, oracle.flips_used, check_success_structure(instance, report, spec.eps)


def _campaign_trial(algorithm, spec, budget, delta, seed, stream, trial):
    return run_trial(algorithm, spec, budget, delta, trial_rng(seed, stream, trial))


@dataclass
class CampaignResult:
    """Aggregates of one or more campaigns, one row per configuration.

    Rows hold the CSV columns plus ``structure_violations``, the number of
    trials whose stages all succeeded but whose answer was not good.
    """
    rows: List[dict] = field(default_factory=list)

    def extend(self, other):
        self.rows.extend(other.rows)
        return self

    def to_frame(self):
        return pd.DataFrame(self.rows, columns=CSV_COLUMNS)

    def success_rate(self, row=0):
        r = self.rows[row]
        return r["successes"] / r["trials"]

    def __len__(self):
        return len(self.rows)


def run_campaign(algorithm, spec, budget=None, trials=100, seed=0, delta=0.1, n_jobs=1, stream=0,
                 verbose=False):
    """Run ``trials`` independent seeded trials of ``algorithm`` on ``spec``.

    Trial t draws its instance and coin flips from the stream
    ``SeedSequence(seed, spawn_key=(stream, t))``, so results do not depend
    on ``n_jobs``.

    Parameters
    ----------
    algorithm: str or BudgetedAlgorithm
        A name from ALGORITHMS or a configured budgeted algorithm.
    spec: DistributionSpec
    budget: int (optional, default None)
        Flip budget; required by the budgeted algorithms, a hard cap for the
        native screening search.
    trials: int (optional, default 100)
    seed: int (optional, default 0)
    delta: float (optional, default 0.1)
        Failure target of the native searches and of budgeted algorithms
        that take one.
    n_jobs: int (optional, default 1)
        Number of joblib workers.
    stream: int (optional, default 0)
        Separates campaigns that share a seed.
    verbose: bool (optional, default False)

    Returns
    -------
    result: CampaignResult
        A single row.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    name, _ = make_algorithm(algorithm, delta)
    outcomes = Parallel(n_jobs=n_jobs)(
        delayed(_campaign_trial)(algorithm, spec, budget, delta, seed, stream, t) for t in range(trials))
    successes = sum(1 for s, _, _ in outcomes if s)
    flips = np.array([f for _, f, _ in outcomes], dtype=np.int64)
    violations = sum(1 for _, _, structure in outcomes if structure is False)
    if violations:
        warn("%s on %s n=%d: %d trials answered wrongly although every stage succeeded"
             % (name, spec.kind, spec.n, violations))
    row = dict(algorithm=name, distribution=spec.kind, n=spec.n, tau=spec.tau, eps=spec.eps,
               budget=budget, trials=trials, successes=successes,
               mean_flips=float(flips.mean()), median_flips=float(np.median(flips)),
               max_flips=int(flips.max()), seed=seed, structure_violations=violations)
    if verbose:
        print(ts(), "%s %s n=%d budget=%s: %d/%d successes, mean flips %.1f"
              % (name, spec.kind, spec.n, budget, successes, trials, row["mean_flips"]))
    return CampaignResult([row])


def binomial_interval(successes, trials, confidence=0.95):
    """Wilson score interval of a success rate."""
    ci = binomtest(int(successes), int(trials)).proportion_ci(confidence_level=confidence, method="wilson")
    return float(ci.low), float(ci.high)


def predicted_flips(algorithm, spec, delta):
    """Leading-order flip count of ``algorithm`` on ``spec``, with the tuned
    constants of the Karp-Kleinberg algorithms. None below n = 3."""
    if spec.n < 3:
        return None
    return query_complexity(COMPLEXITY_NAMES[algorithm], spec.n, spec.tau, spec.eps, delta, actual=True)


def check_expectation_floor(result, delta):
    """Rows that reach 1 - delta success with fewer mean flips than any
    search can afford.

    Rows of the noiseless debug distribution and rows with n < 3 are
    skipped.

    Returns
    -------
    violations: list of dict
        The offending rows, each with its ``floor``.
    """
    violations = []
    for row in result.rows:
        if row["distribution"] == "noiseless" or row["n"] < 3:
            continue
        if row["successes"] < (1.0 - delta) * row["trials"]:
            continue
        floor = expectation_floor(row["n"], row["tau"], row["eps"], delta)
        if row["mean_flips"] < floor:
            violations.append(dict(row, floor=floor))
    return violations


def _write_frame(frame, path):
    try:
        frame.to_csv(path, index=False, lineterminator="\n")
    except OSError as e:
        raise OSError("could not write %s: %s" % (path, e)) from e
    return path


def emit_csv(result, path):
    """Write campaign rows to ``path`` with the CSV_COLUMNS header."""
    return _write_frame(result.to_frame(), path)


def emit_calibration_csv(rows, path):
    """Write calibration rows to ``path`` with the CALIBRATION_COLUMNS header."""
    return _write_frame(pd.DataFrame(list(rows), columns=CALIBRATION_COLUMNS), path)


def geometric_grid(lower, upper, ratio=1.05):
    """Increasing integer budgets from ``lower`` to ``upper`` spaced by ``ratio``."""
    if lower < 1 or upper <= lower:
        raise ValueError("need 1 <= lower < upper")
    if ratio <= 1.0:
        raise ValueError("ratio must exceed 1")
    steps = int(math.ceil(math.log(upper / lower) / math.log(ratio)))
    grid = np.unique(np.round(lower * ratio ** np.arange(steps + 1)).astype(np.int64))
    grid = grid[grid < upper]
    return [int(b) for b in grid] + [int(upper)]


def budget_grid(algorithm, spec, seed=0, ratio=1.05, start=None, pilot_trials=20, low_rate=0.5,
                high_rate=1.0, max_budget=2 ** 32, delta=0.15, n_jobs=1):
    """Geometric budget grid bracketing an algorithm's success transition.

    A doubling pre-scan from ``start`` runs ``pilot_trials`` trials per
    budget. If ``start`` already succeeds more often than ``low_rate`` the
    scan first halves it until it does not (or reaches 1). The grid starts
    at the last budget whose pilot success rate was at most ``low_rate``
    and ends at twice the first budget reaching ``high_rate``.
    """
    def pilot(budget, stream):
        return run_campaign(algorithm, spec, budget, pilot_trials, seed, delta, n_jobs,
                            stream=stream).success_rate()

    budget = max(ceil_lg(spec.n), 2) if start is None else int(start)
    rate = pilot(budget, 1000)
    level = 0
    while rate > low_rate and budget > 1:
        level += 1
        budget //= 2
        rate = pilot(budget, 3000 + level)
    lower = budget
    level = 0
    while rate < high_rate:
        if budget >= max_budget:
            raise CalibrationError("no budget up to %d reached a pilot success rate of %g" % (max_budget, high_rate))
        budget *= 2
        level += 1
        rate = pilot(budget, 1000 + level)
        if rate <= low_rate:
            lower = budget
    return geometric_grid(lower, max(2 * budget, lower + 1), ratio)


class BudgetCalibrator(BaseEstimator):
    """Budget at which an algorithm's success probability crosses a target,
    found by a noisy binary search over a budget grid.

    Each grid budget is a coin whose flip runs one trial of the algorithm on
    a fresh instance (heads = success). The screening search is run over
    these coins once per threshold, and the returned interval j maps to the
    budget ``grid[j]``.

    Parameters
    ----------
    thresholds: tuple of float (optional, default (0.8, 0.9))
        Success targets of the lower and upper answer.
    eps: float (optional, default 0.05)
        Half-width of the meta-search.
    delta: float (optional, default 0.15)
        Failure probability of the meta-search and failure target of the
        calibrated algorithm.
    grid_ratio: float (optional, default 1.05)
        Spacing of the default grid.
    bracket_trials: int (optional, default 100)
        Trials at the top of the grid for the bracketing check.
    pilot_trials: int (optional, default 20)
        Trials per budget of the doubling pre-scan.
    estimator_constant: float (optional, default 1.0)
        Passed to the meta-search's ScreeningConfig.
    n_jobs: int (optional, default 1)
    verbose: bool (optional, default False)
    """

    def __init__(self, thresholds=(0.8, 0.9), eps=0.05, delta=0.15, grid_ratio=1.05, bracket_trials=100,
                 pilot_trials=20, estimator_constant=1.0, n_jobs=1, verbose=False):
        self.thresholds = thresholds
        self.eps = eps
        self.delta = delta
        self.grid_ratio = grid_ratio
        self.bracket_trials = bracket_trials
        self.pilot_trials = pilot_trials
        self.estimator_constant = estimator_constant
        self.n_jobs = n_jobs
        self.verbose = verbose

    def _validate_parameters(self):
        if len(self.thresholds) != 2 or not 0.0 < self.thresholds[0] <= self.thresholds[1] < 1.0:
            raise ValueError("thresholds must be two increasing success targets in (0, 1)")
        for tau in self.thresholds:
            try:
                check_channel(tau, self.eps)
            except ValueError as e:
                raise ValueError("eps=%g does not fit threshold %g: %s" % (self.eps, tau, e)) from e
        if self.grid_ratio <= 1.0:
            raise ValueError("grid_ratio must exceed 1")
        if self.bracket_trials < 1 or self.pilot_trials < 1:
            raise ValueError("trial counts must be positive")

    def _check_bracket(self, algorithm, spec, grid, seed):
        top = run_campaign(algorithm, spec, grid[-1], self.bracket_trials, seed, self.delta, self.n_jobs,
                           stream=2000)
        row = top.rows[0]
        _, high = binomial_interval(row["successes"], row["trials"])
        if high < self.thresholds[1]:
            raise CalibrationError(
                "success rate %d/%d at the largest budget %d is below %g; extend the grid"
                % (row["successes"], row["trials"], grid[-1], self.thresholds[1]))

    def _nonmonotone(self, oracle):
        seen = np.flatnonzero(oracle.tosses >= 30)
        rates = oracle.heads[seen] / oracle.tosses[seen]
        drops = []
        for a, b, ra, rb in zip(seen[:-1], seen[1:], rates[:-1], rates[1:]):
            noise = 3.0 * math.sqrt(max(ra * (1 - ra), rb * (1 - rb), 0.01)
                                    * (1.0 / oracle.tosses[a] + 1.0 / oracle.tosses[b]))
            if ra - rb > noise:
                drops.append((oracle.grid[a], oracle.grid[b], float(ra), float(rb)))
        return drops

    def calibrate(self, algorithm, spec, grid=None, seed=0):
        """Calibrated (lower, upper) budgets of ``algorithm`` on ``spec``.

        Sets ``grid_``, ``answers_`` (grid intervals per threshold),
        ``nonmonotone_`` (budget pairs whose measured rates drop beyond
        noise) and ``reports_``.
        """
        self._validate_parameters()
        if grid is None:
            grid = budget_grid(algorithm, spec, seed, self.grid_ratio, pilot_trials=self.pilot_trials,
                               delta=self.delta, n_jobs=self.n_jobs)
        grid = [int(b) for b in grid]
        if len(grid) < 2 or np.any(np.diff(grid) <= 0):
            raise ValueError("the budget grid must hold at least two strictly increasing budgets")
        self.grid_ = grid
        self._check_bracket(algorithm, spec, grid, seed)

        def trial(budget, rng):
            return run_trial(algorithm, spec, budget, self.delta, rng)[0]

        self.answers_, self.reports_, self.nonmonotone_ = [], [], []
        cfg = ScreeningConfig(delta=self.delta, estimator_constant=self.estimator_constant)
        for k, tau in enumerate(self.thresholds):
            oracle = TrialOracle(trial, grid, seed=seed, stream=k + 1)
            j, report = bayesian_screening_search(oracle, len(grid), tau, self.eps, cfg)
            self.answers_.append(j)
            self.reports_.append(report)
            self.nonmonotone_.extend(self._nonmonotone(oracle))
            if self.verbose:
                print(ts(), "calibration tau=%g: budget %d after %d trials" % (tau, grid[j], report.flips_used))
        if self.nonmonotone_:
            warn("success rate drops with budget at %d grid points" % len(self.nonmonotone_))
        if self.answers_[0] > self.answers_[1] + 1:
            warn("calibrated budgets are inconsistent: %d at %g exceeds %d at %g by more than one grid step"
                 % (grid[self.answers_[0]], self.thresholds[0], grid[self.answers_[1]], self.thresholds[1]))
        return grid[self.answers_[0]], grid[self.answers_[1]]


def calibrate_budget(algorithm, spec, grid=None, seed=0, **kwargs):
    """Functional form of :meth:`BudgetCalibrator.calibrate`."""
    return BudgetCalibrator(**kwargs).calibrate(algorithm, spec, grid, seed)
