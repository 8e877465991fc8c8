#####################################
# Bayesian learner
# Keeps a posterior over which interval crosses tau, queries the
# capacity-achieving quantile of it every round, and records the interval
# that quantile fell in.
######################################
import math
from dataclasses import dataclass, field
from typing import List

from .bac_math import channel_params
from .oracles import BudgetExhausted
from .posterior import PosteriorWeights
from .utils import ts


@dataclass
class LearnTranscript:
    """The list L of chosen intervals, the outcome of each flip, the coin
    each flip went to, and the posterior after the last update."""
    intervals: List[int] = field(default_factory=list)
    outcomes: List[int] = field(default_factory=list)
    coins: List[int] = field(default_factory=list)
    final_posterior: object = None

    def __len__(self):
        return len(self.intervals)


def bayes_learn_iterations(n, delta, gamma, capacity, c1=2.0, c2=2.0):
    """Rounds the learner needs so a gamma fraction of its queries are good.

    M = ceil((1 + 7 gamma) / C * (lg n + c1 sqrt(lg n lg(1/delta)) + c2 lg(1/delta)))

    Parameters
    ----------
    n: int
        Number of coins.
    delta: float
        Failure probability, 0 < delta <= 1.
    gamma: float
        Target fraction, 0 < gamma <= 1/7.
    capacity: float
        Channel capacity C in bits.
    c1, c2: float (optional, default 2.0)
        Constants of the lower-order terms.

    Returns
    -------
    M: int
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    if not 0.0 < delta <= 1.0:
        raise ValueError("delta must lie in (0, 1]")
    if not 0.0 < gamma <= 1.0 / 7.0 + 1e-12:
        raise ValueError("gamma must lie in (0, 1/7]")
    if capacity <= 0.0:
        raise ValueError("capacity must be positive")
    if c1 < 0.0 or c2 < 0.0:
        raise ValueError("c1 and c2 cannot be negative")
    lg_n = math.log2(n)
    lg_inv_delta = math.log2(1.0 / delta)
    core = lg_n + c1 * math.sqrt(lg_n * lg_inv_delta) + c2 * lg_inv_delta
    return int(math.ceil((1.0 + 7.0 * gamma) / capacity * core - 1e-9))


def bayes_learn(oracle, n, tau, eps, M, verbose=False):
    """Run M rounds of the Bayesian learner on coins 1..n.

    Each round picks j = interval_at_quantile(q), flips the coin
    round_to_coin(j, q), appends j to L and applies the Bayesian update.

    Parameters
    ----------
    oracle: CoinOracle
        Coins to query; exactly M flips are made.
    n: int
        Number of coins (n - 1 candidate intervals).
    tau, eps: float
        Channel parameters the update assumes.
    M: int
        Number of rounds.
    verbose: bool (optional, default False)

    Returns
    -------
    transcript: LearnTranscript

    Raises
    ------
    BudgetExhausted
        With the partial transcript attached as ``.transcript``.
    """
    if n < 2:
        raise ValueError("bayes_learn needs at least two coins")
    if M < 0:
        raise ValueError("M cannot be negative")
    params = channel_params(tau, eps)
    q = params.q
    posterior = PosteriorWeights.new_uniform(n - 1)
    transcript = LearnTranscript(final_posterior=posterior)
    if verbose:
        print(ts(), "BayesLearn: n=%d tau=%g eps=%g q=%.6f M=%d" % (n, tau, eps, q, M))
    for _ in range(int(M)):
        j = posterior.interval_at_quantile(q)
        x = posterior.round_to_coin(j, q)
        transcript.intervals.append(j)
        try:
            y = oracle.flip(x)
        except BudgetExhausted as e:
            transcript.intervals.pop()
            e.transcript = transcript
            raise
        transcript.coins.append(x)
        transcript.outcomes.append(y)
        posterior.apply_update(j, y, params, q)
    if verbose:
        print(ts(), "BayesLearn finished; posterior tree holds %d nodes" % posterior.n_nodes)
    return transcript
