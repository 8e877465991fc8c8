#####################################
# Binary asymmetric channel quantities
# A (tau, eps) channel outputs 1 with probability tau - eps or tau + eps
# depending on its input bit. Its capacity bounds how many coin flips any
# noisy binary search needs, and its optimal input distribution tells the
# Bayesian learner which posterior quantile to query.
######################################
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import entr

LN2 = math.log(2.0)

CLOSED_FORM_TOL = 1e-8
MAXIMIZATION_TOL = 1e-6
BOUNDARY_SLACK = 1e-12
# absolute rounding floor of capacities built from O(1) entropies or logs
GAIN_ROUNDING = 1e-14
_SERIES_TERMS = 40


class NumericInstabilityError(ArithmeticError):
    """Closed-form channel quantities disagree with the numeric maximisation."""


@dataclass(frozen=True)
class ChannelParams:
    """All derived constants of a (tau, eps) binary asymmetric channel.

    ``d{x}{y}`` is the multiplicative effect of a flip with outcome ``x``
    (1 = heads) on posterior mass lying on side ``y`` (0 = left, 1 = right)
    of the queried quantile.
    """
    tau: float
    eps: float
    z: float
    q: float
    capacity: float
    d00: float
    d01: float
    d10: float
    d11: float
    closed_form: bool = True

    def factors(self, y):
        """(left, right) update factors for outcome ``y``."""
        if y:
            return self.d10, self.d11
        return self.d00, self.d01


def binary_entropy(p):
    """Binary entropy in bits, with 0 lg 0 taken as 0.

    Parameters
    ----------
    p: float or array-like
        Probabilities in [0, 1].

    Returns
    -------
    h: float or ndarray
        -p lg p - (1 - p) lg (1 - p), same shape as ``p``.
    """
    arr = np.asarray(p, dtype=np.float64)
    if np.any(np.isnan(arr)) or np.any(arr < 0.0) or np.any(arr > 1.0):
        raise ValueError("binary entropy is defined on [0, 1] only")
    h = (entr(arr) + entr(1.0 - arr)) / LN2
    if h.ndim == 0:
        return float(h)
    return h


def check_channel(tau, eps):
    if not 0.0 < tau < 1.0:
        raise ValueError("tau must lie strictly between 0 and 1")
    # eps = min(tau, 1 - tau) / 2 is admissible; the slack absorbs rounding in that quotient
    if not 0.0 < eps <= min(tau, 1.0 - tau) / 2.0 + BOUNDARY_SLACK:
        raise ValueError("eps must satisfy 0 < eps <= min(tau, 1 - tau) / 2")


def information_gain(q, tau, eps):
    """Expected information (bits) of one flip when a fraction ``q`` of the
    posterior lies left of the query.

    H((1-q)(tau-eps) + q(tau+eps)) - (1-q) H(tau-eps) - q H(tau+eps),
    vectorised over ``q``.
    """
    q = np.asarray(q, dtype=np.float64)
    out = (binary_entropy((1.0 - q) * (tau - eps) + q * (tau + eps))
           - (1.0 - q) * binary_entropy(tau - eps)
           - q * binary_entropy(tau + eps))
    if np.ndim(out) == 0:
        return float(out)
    return out


def _maximize_information_gain(tau, eps, method="bounded", resolution=1e-6):
    check_channel(tau, eps)
    if method == "bounded":
        res = minimize_scalar(lambda x: -information_gain(x, tau, eps),
                              bounds=(0.0, 1.0), method="bounded",
                              options={"xatol": 1e-12, "maxiter": 500})
        return float(res.x), float(-res.fun)
    if method == "grid":
        grid = np.arange(resolution, 1.0, resolution)
        values = information_gain(grid, tau, eps)
        best = int(np.argmax(values))
        return float(grid[best]), float(values[best])
    raise ValueError("method must be 'bounded' or 'grid'")


def capacity_by_maximization(tau, eps, method="bounded", resolution=1e-6):
    """Channel capacity as the numeric maximum of the information gain.

    Independent of the closed form used by :func:`channel_params`; the two
    serve as each other's oracle.

    Parameters
    ----------
    tau, eps: float
        Channel parameters, 0 < eps <= min(tau, 1 - tau) / 2.
    method: str (optional, default 'bounded')
        'bounded' runs scipy's bounded Brent/golden-section search over
        q in (0, 1); 'grid' evaluates a dense grid at ``resolution``.
    resolution: float (optional, default 1e-6)
        Grid step for method='grid'.

    Returns
    -------
    capacity: float
        Bits per query.
    """
    return _maximize_information_gain(tau, eps, method, resolution)[1]


def capacity_approximation(tau, eps):
    """Small-eps approximation eps^2 / (2 tau (1 - tau) ln 2)."""
    return eps ** 2 / (2.0 * tau * (1.0 - tau) * LN2)


def _factors_from_q(tau, eps, q):
    right = tau + (2.0 * q - 1.0) * eps
    left = 1.0 - tau - (2.0 * q - 1.0) * eps
    d00 = (1.0 - tau - eps) / left
    d01 = (1.0 - tau + eps) / left
    d10 = (tau + eps) / right
    d11 = (tau - eps) / right
    return d00, d01, d10, d11


def _log_odds_shift(tau, eps):
    """ln z - ln(tau / (1 - tau)) as its odd power series in eps.

    The series converges for every admissible channel since eps / tau and
    eps / (1 - tau) are at most 1/2, and it carries none of the cancellation
    of the entropy difference quotient when eps is small.
    """
    k = np.arange(3, 3 + 2 * _SERIES_TERMS, 2, dtype=np.float64)
    terms = ((eps / tau) ** (k - 1.0) - (eps / (1.0 - tau)) ** (k - 1.0)) / (k * (k - 1.0))
    return -math.fsum(terms[::-1])


def _divergence_kernel(w):
    """(1 + w) ln(1 + w) - w, summed as a series near zero."""
    if abs(w) < 0.1:
        k = np.arange(2, 26, dtype=np.float64)
        return math.fsum(((-w) ** k / (k * (k - 1.0)))[::-1])
    return (1.0 + w) * math.log1p(w) - w


def _closed_form(tau, eps):
    shift = _log_odds_shift(tau, eps)
    z = math.exp(math.log(tau) - math.log1p(-tau) + shift)
    # 1 / (1 + z) - (1 - tau) rewritten around the logistic of ln(tau / (1 - tau))
    q = 0.5 + tau * (1.0 - tau) * math.expm1(shift) / (2.0 * eps * (tau * math.exp(shift) + 1.0 - tau))
    if not 0.0 < q < 1.0:
        return z, q, float("nan")
    # the capacity is KL(Bern(tau + eps) || Bern(r)) at the output rate r
    r = tau + (2.0 * q - 1.0) * eps
    gap = 2.0 * eps * (1.0 - q)
    nats = r * _divergence_kernel(gap / r) + (1.0 - r) * _divergence_kernel(-gap / (1.0 - r))
    return z, q, nats / LN2


def _params_ok(tau, eps, q, capacity, d, identities=True):
    d00, d01, d10, d11 = d
    if not (0.0 < q < 1.0) or not capacity > 0.0:
        return False
    if abs(q - 0.5) > 2.0 * eps / (tau * (1.0 - tau)) * (1.0 + CLOSED_FORM_TOL):
        return False
    if not (d11 < 1.0 < d10 and d00 < 1.0 < d01):
        return False
    if abs(q * d10 + (1.0 - q) * d11 - 1.0) > CLOSED_FORM_TOL:
        return False
    if abs(q * d00 + (1.0 - q) * d01 - 1.0) > CLOSED_FORM_TOL:
        return False
    approx = capacity_approximation(tau, eps)
    if not approx * (1.0 - CLOSED_FORM_TOL) <= capacity <= 2.0 * approx * (1.0 + CLOSED_FORM_TOL):
        return False
    if not identities:
        return True
    # the logs of factors near 1 carry absolute rounding, which dominates once capacity is tiny
    tol = CLOSED_FORM_TOL * capacity + GAIN_ROUNDING
    upper = (tau + eps) * math.log2(d10) + (1.0 - tau - eps) * math.log2(d00)
    lower = (tau - eps) * math.log2(d11) + (1.0 - tau + eps) * math.log2(d01)
    return abs(upper - capacity) <= tol and abs(lower - capacity) <= tol


@lru_cache(maxsize=1024)
def channel_params(tau, eps):
    """Capacity, optimal quantile and update factors of a (tau, eps) channel.

    z, q and the capacity come from their closed forms. ln z is expanded as
    ln(tau / (1 - tau)) plus an odd series in eps, q follows from the
    logistic of ln z and the capacity is evaluated as the divergence between
    the heads rates of the right-hand coins and of the queried mixture, so
    none of them lose precision as eps shrinks. If the closed form violates
    a channel invariant (relative tolerance 1e-8) the quantile and capacity
    are taken from the numeric maximisation instead, and that result must
    pass the same checks. Either way the capacity is cross-checked against
    :func:`capacity_by_maximization` to a relative 1e-6.

    Parameters
    ----------
    tau: float
        Target threshold, 0 < tau < 1.
    eps: float
        Half-width, 0 < eps <= min(tau, 1 - tau) / 2.

    Returns
    -------
    params: ChannelParams

    Raises
    ------
    NumericInstabilityError
        When neither the closed form nor the maximisation yields parameters
        that satisfy the channel invariants.
    """
    tau = float(tau)
    eps = float(eps)
    check_channel(tau, eps)
    z, q, capacity = _closed_form(tau, eps)
    d = _factors_from_q(tau, eps, q) if 0.0 < q < 1.0 else (1.0, 1.0, 1.0, 1.0)
    q_max, c_max = _maximize_information_gain(tau, eps)

    closed = _params_ok(tau, eps, q, capacity, d)
    if not closed:
        q = q_max
        capacity = information_gain(q, tau, eps)
        d = _factors_from_q(tau, eps, q) if 0.0 < q < 1.0 else (1.0, 1.0, 1.0, 1.0)
        if not _params_ok(tau, eps, q, capacity, d, identities=False):
            raise NumericInstabilityError(
                "no stable channel parameters at tau=%g, eps=%g (maximisation gave q=%.12g, capacity=%.12g)"
                % (tau, eps, q, capacity))
    if abs(capacity - c_max) > MAXIMIZATION_TOL * capacity + GAIN_ROUNDING:
        raise NumericInstabilityError(
            "closed-form capacity %.12g disagrees with maximisation %.12g at tau=%g, eps=%g"
            % (capacity, c_max, tau, eps))
    return ChannelParams(tau=tau, eps=eps, z=z, q=q, capacity=capacity,
                         d00=d[0], d01=d[1], d10=d[2], d11=d[3], closed_form=closed)


def expectation_floor(n, tau, eps, delta):
    """Lower bound on expected queries of any search that fails w.p. <= delta.

    (1 - delta)(lg(n - 2) - 1) / C, clamped at zero.
    """
    if n < 3:
        raise ValueError("the expectation floor needs n >= 3")
    if not 0.0 <= delta <= 1.0:
        raise ValueError("delta must lie in [0, 1]")
    capacity = channel_params(tau, eps).capacity
    return max(0.0, (1.0 - delta) * (math.log2(n - 2) - 1.0) / capacity)


_COMPLEXITY_CONSTANTS = {
    # name: (proven constant, tuned constant)
    "kk_multiplicative_weights": (4000.0, 31.0),
    "kk_backtracking": (476909.0, 2000.0),
}


def query_complexity(name, n, tau, eps, delta, actual=False):
    """Leading-order query complexity of the compared algorithms.

    Parameters
    ----------
    name: str
        One of 'naive', 'kk_multiplicative_weights', 'kk_backtracking',
        'screening'.
    n: int
        Number of coins.
    tau, eps, delta: float
        Problem parameters and failure probability.
    actual: bool (optional, default False)
        Use the tuned constants for the two Karp-Kleinberg algorithms
        instead of the proven ones.

    Returns
    -------
    queries: float
    """
    ln_n = math.log(n)
    if name == "naive":
        return 2.0 * tau * (1.0 - tau) / eps ** 2 * ln_n * math.log(math.log2(n) / delta)
    if name == "screening":
        return 2.0 * tau * (1.0 - tau) / eps ** 2 * ln_n
    if name in _COMPLEXITY_CONSTANTS:
        constant = _COMPLEXITY_CONSTANTS[name][1 if actual else 0]
        return constant * max(tau, 1.0 - tau) / eps ** 2 * ln_n * math.log(1.0 / delta)
    raise ValueError("unknown algorithm %r" % name)
