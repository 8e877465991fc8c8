#####################################
# Coin oracles
# Every search in this package talks to its coins through a CoinOracle:
# flip coin i, observe one Bernoulli outcome, pay one unit of budget.
######################################
import shlex
import subprocess
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np


class BudgetExhausted(RuntimeError):
    """Raised when a flip is requested beyond an oracle's budget cap."""

    def __init__(self, message, flips_used=None):
        super(BudgetExhausted, self).__init__(message)
        self.flips_used = flips_used
        self.transcript = None


class ExternalCommandError(RuntimeError):
    """The external coin command could not be run to a clean exit."""


@dataclass
class ProblemInstance:
    """One monotone noisy binary search input.

    ``p[i - 1]`` is the heads probability of coin i; the sequence is
    nondecreasing.
    """
    n: int
    tau: float
    eps: float
    p: np.ndarray

    def __post_init__(self):
        self.p = np.asarray(self.p, dtype=np.float64)
        if self.p.ndim != 1 or self.p.size != self.n:
            raise ValueError("p must be a vector of length n")
        if self.n < 2:
            raise ValueError("an instance needs at least two coins")
        if np.any(self.p < 0.0) or np.any(self.p > 1.0):
            raise ValueError("coin probabilities must lie in [0, 1]")
        if np.any(np.diff(self.p) < 0.0):
            raise ValueError("coin probabilities must be nondecreasing")

    def good_intervals(self, eps_check=None):
        """Indices of all (tau, eps_check)-good intervals."""
        eps_check = self.eps if eps_check is None else eps_check
        left, right = self.p[:-1], self.p[1:]
        mask = (left < self.tau + eps_check) & (right > self.tau - eps_check)
        return np.flatnonzero(mask) + 1

    def with_sentinels(self):
        """Copy padded with a p = 0 coin in front and a p = 1 coin behind.

        Coin i of the original becomes coin i + 1 of the padded instance.
        """
        p = np.concatenate(([0.0], self.p, [1.0]))
        return ProblemInstance(self.n + 2, self.tau, self.eps, p)


def is_good(instance, i, eps_check=None):
    """Whether [p_i, p_{i+1}] meets (tau - eps_check, tau + eps_check)."""
    if not 1 <= i <= instance.n - 1:
        raise IndexError("interval %d out of range 1..%d" % (i, instance.n - 1))
    eps_check = instance.eps if eps_check is None else eps_check
    return bool(instance.p[i - 1] < instance.tau + eps_check and instance.p[i] > instance.tau - eps_check)


class CoinOracle(object):
    """Query interface over coins 1..n with flip accounting.

    Parameters
    ----------
    n: int
        Number of coins.
    budget_cap: int (optional, default None)
        Maximum number of flips; further queries raise BudgetExhausted.
    """

    def __init__(self, n, budget_cap=None):
        self.n = int(n)
        self.budget_cap = budget_cap
        self.flips_used = 0

    @property
    def remaining(self):
        if self.budget_cap is None:
            return None
        return self.budget_cap - self.flips_used

    def _check_index(self, i):
        if not 1 <= i <= self.n:
            raise IndexError("coin %d out of range 1..%d" % (i, self.n))

    def _exhausted(self):
        return BudgetExhausted("budget of %d flips exhausted" % self.budget_cap, self.flips_used)

    def flip(self, i):
        """Flip coin ``i`` once and return the outcome bit."""
        self._check_index(i)
        if self.budget_cap is not None and self.flips_used >= self.budget_cap:
            raise self._exhausted()
        y = int(self._draw(i))
        self.flips_used += 1
        return y

    def flip_many(self, i, m):
        """Flip coin ``i`` ``m`` times and return the number of heads.

        At a budget cap the remaining flips are spent before BudgetExhausted
        is raised, so an exhausted oracle has used exactly its cap.
        """
        self._check_index(i)
        m = int(m)
        if m <= 0:
            return 0
        if self.budget_cap is not None and self.flips_used + m > self.budget_cap:
            rest = self.budget_cap - self.flips_used
            if rest > 0:
                self._draw_many(i, rest)
                self.flips_used += rest
            raise self._exhausted()
        heads = int(self._draw_many(i, m))
        self.flips_used += m
        return heads

    def _draw(self, i):
        raise NotImplementedError

    def _draw_many(self, i, m):
        return sum(self._draw(i) for _ in range(m))


class SimulatedOracle(CoinOracle):
    """Bernoulli coins of a :class:`ProblemInstance`.

    Parameters
    ----------
    instance: ProblemInstance
    seed: int or numpy Generator (optional, default None)
        Identical seeds give identical outcome sequences.
    budget_cap: int (optional, default None)
    """

    def __init__(self, instance, seed=None, budget_cap=None):
        super(SimulatedOracle, self).__init__(instance.n, budget_cap)
        self.instance = instance
        if isinstance(seed, np.random.Generator):
            self.rng = seed
        else:
            self.rng = np.random.default_rng(seed)

    def _draw(self, i):
        return self.rng.random() < self.instance.p[i - 1]

    def _draw_many(self, i, m):
        return int(np.count_nonzero(self.rng.random(m) < self.instance.p[i - 1]))


class CommandOracle(CoinOracle):
    """Coins answered by an external command, e.g. a flaky test at revision i.

    The coin index replaces every ``{coin}`` placeholder of the argument
    template. Exit status 0 reads as outcome 1, any other clean exit as 0.
    A command that cannot be launched, times out or dies from a signal is an
    infrastructure failure and raises ExternalCommandError.

    Parameters
    ----------
    template: str or list of str
        Argument vector (a string is split with shlex).
    n: int
        Number of coins.
    cwd: str (optional, default None)
        Working directory of the command.
    timeout: float (optional, default None)
        Seconds before a run is abandoned.
    budget_cap: int (optional, default None)
    """

    placeholder = "{coin}"

    def __init__(self, template, n, cwd=None, timeout=None, budget_cap=None):
        super(CommandOracle, self).__init__(n, budget_cap)
        if isinstance(template, str):
            template = shlex.split(template)
        if not template:
            raise ValueError("command template is empty")
        if not any(self.placeholder in arg for arg in template):
            raise ValueError("command template must contain the %s placeholder" % self.placeholder)
        self.template = list(template)
        self.cwd = cwd
        self.timeout = timeout

    def argv(self, i):
        return [arg.replace(self.placeholder, str(i)) for arg in self.template]

    def _draw(self, i):
        argv = self.argv(i)
        try:
            proc = subprocess.run(argv, cwd=self.cwd, timeout=self.timeout,
                                  stdout=subprocess.DEVNULL, stderr=subprocess.DEVNULL)
        except subprocess.TimeoutExpired as e:
            raise ExternalCommandError("coin %d: command timed out after %ss" % (i, self.timeout)) from e
        except OSError as e:
            raise ExternalCommandError("coin %d: could not launch %r: %s" % (i, argv[0], e)) from e
        if proc.returncode < 0:
            raise ExternalCommandError("coin %d: command killed by signal %d" % (i, -proc.returncode))
        return 1 if proc.returncode == 0 else 0


class TrialOracle(CoinOracle):
    """Coins whose flips are whole algorithm trials.

    Coin i runs ``trial(budget=grid[i - 1], rng=...)`` once and reads heads
    when it returns True. Each flip gets its own generator derived from
    ``seed``, ``stream`` and the flip counter. Per-coin tallies are kept for
    the monotonicity report.
    """

    def __init__(self, trial, grid, seed=0, stream=0, budget_cap=None):
        super(TrialOracle, self).__init__(len(grid), budget_cap)
        self.trial = trial
        self.grid = [int(b) for b in grid]
        self.seed = int(seed)
        self.stream = int(stream)
        self.heads = np.zeros(len(grid), dtype=np.int64)
        self.tosses = np.zeros(len(grid), dtype=np.int64)
        self._trials_run = 0

    def _draw(self, i):
        rng = np.random.default_rng(np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream, self._trials_run)))
        self._trials_run += 1
        y = 1 if self.trial(budget=self.grid[i - 1], rng=rng) else 0
        self.tosses[i - 1] += 1
        self.heads[i - 1] += y
        return y


class OracleView(CoinOracle):
    """A coin subset and/or budget-capped view onto another oracle.

    Coin i of the view is coin ``coins[i - 1]`` of the parent (identity when
    ``coins`` is None). Flips are counted by both the view and the parent.
    """

    def __init__(self, parent, coins=None, budget_cap=None):
        n = parent.n if coins is None else len(coins)
        super(OracleView, self).__init__(n, budget_cap)
        self.parent = parent
        self.coins = None if coins is None else [int(c) for c in coins]

    def _map(self, i):
        return i if self.coins is None else self.coins[i - 1]

    def _draw(self, i):
        return self.parent.flip(self._map(i))

    def _draw_many(self, i, m):
        start = self.parent.flips_used
        try:
            return self.parent.flip_many(self._map(i), m)
        except BudgetExhausted:
            self.flips_used += self.parent.flips_used - start
            raise


class HalfThresholdOracle(CoinOracle):
    """Coins of ``parent`` recoloured so that threshold ``tau`` moves to 1/2.

    For tau > 1/2 each heads is kept with probability 1 / (2 tau); for
    tau < 1/2 each tails becomes heads with probability
    (1 - 2 tau) / (2 (1 - tau)). Either map is affine and increasing in the
    heads probability, sends tau to 1/2 and shrinks eps by
    2 max(tau, 1 - tau). Flips are counted by both oracles.

    Parameters
    ----------
    parent: CoinOracle
    tau: float
    seed: int or numpy Generator (optional, default None)
    """

    def __init__(self, parent, tau, seed=None):
        super(HalfThresholdOracle, self).__init__(parent.n)
        self.parent = parent
        self.tau = float(tau)
        self.rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        if self.tau >= 0.5:
            self.keep, self.promote = 0.5 / self.tau, 0.0
        else:
            self.keep, self.promote = 1.0, (1.0 - 2.0 * self.tau) / (2.0 * (1.0 - self.tau))

    def reduced_eps(self, eps):
        return eps / (2.0 * max(self.tau, 1.0 - self.tau))

    def heads_probability(self, p):
        """Heads probability of a recoloured coin whose original is ``p``."""
        return self.keep * p + self.promote * (1.0 - p)

    def _draw(self, i):
        y = self.parent.flip(i)
        if y:
            return int(self.keep >= 1.0 or self.rng.random() < self.keep)
        return int(self.promote > 0.0 and self.rng.random() < self.promote)


@dataclass
class RunReport:
    """Outcome of one search run.

    ``flips_used`` always equals the sum of ``stage_flips``.
    """
    answer: Optional[int] = None
    stage_flips: Dict[str, int] = field(default_factory=dict)
    transcript: Optional[List[int]] = None
    flags: set = field(default_factory=set)
    diagnostics: dict = field(default_factory=dict)

    @property
    def flips_used(self):
        return int(sum(self.stage_flips.values()))

    @property
    def failed(self):
        return self.answer is None

    def add_flips(self, stage, count):
        self.stage_flips[stage] = self.stage_flips.get(stage, 0) + int(count)

    @contextmanager
    def stage(self, oracle, name):
        """Attribute every flip made on ``oracle`` inside the block to ``name``,
        including flips spent before a BudgetExhausted escapes."""
        start = oracle.flips_used
        try:
            yield
        finally:
            self.add_flips(name, oracle.flips_used - start)

    def summary(self):
        lines = ["answer: %s" % ("FAIL" if self.answer is None else self.answer),
                 "flips_used: %d" % self.flips_used]
        for name, count in self.stage_flips.items():
            lines.append("  %s: %d" % (name, count))
        if self.flags:
            lines.append("flags: %s" % ", ".join(sorted(self.flags)))
        return "\n".join(lines)
