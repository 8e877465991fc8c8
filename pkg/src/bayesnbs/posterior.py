#####################################
# Posterior over candidate intervals
# Interval i (1 <= i <= n - 1) is the gap between coins i and i + 1. The
# learner keeps a normalized weight w(i) on each of them and needs prefix
# sums W(i), quantile lookup and range-multiplicative updates, all in
# O(log n) even for n around 2^40.
######################################
import math
from warnings import warn

import numpy as np

DRIFT_TOL = 1e-9
DRIFT_WARN = 1e-6


class LazyRangeTree(object):
    """Sum segment tree over leaves 1..size with range multiplication.

    Nodes are addressed heap-style (root 1, children 2k and 2k + 1) and are
    materialized on first touch. A node without materialized children has
    all of its leaves equal, so its sum is split proportionally to leaf
    counts when its children are first needed. ``_tag[k]`` is a pending
    multiplier owed to the children of k.

    Parameters
    ----------
    size: int
        Number of leaves.
    total: float (optional, default 1.0)
        Initial sum, spread uniformly over the leaves.
    """

    def __init__(self, size, total=1.0):
        if size < 1:
            raise ValueError("size must be at least 1")
        self.size = int(size)
        self._sum = {1: float(total)}
        self._tag = {}

    @property
    def n_nodes(self):
        return len(self._sum)

    @property
    def total(self):
        return self._sum[1]

    def _has_children(self, node):
        return 2 * node in self._sum

    def _push(self, node, lo, hi):
        left, right = 2 * node, 2 * node + 1
        if left not in self._sum:
            mid = (lo + hi) // 2
            s = self._sum[node]
            self._sum[left] = s * (mid - lo + 1) / (hi - lo + 1)
            self._sum[right] = s - self._sum[left]
            return
        tag = self._tag.pop(node, None)
        if tag is None:
            return
        for child in (left, right):
            self._sum[child] *= tag
            if self._has_children(child):
                self._tag[child] = self._tag.get(child, 1.0) * tag

    def scale(self, factor):
        """Multiply every leaf by ``factor``."""
        self._sum[1] *= factor
        if self._has_children(1):
            self._tag[1] = self._tag.get(1, 1.0) * factor

    def multiply(self, l, r, factor):
        """Multiply leaves l..r (inclusive) by ``factor``."""
        l = max(l, 1)
        r = min(r, self.size)
        if l > r:
            return
        self._multiply(1, 1, self.size, l, r, factor)

    def _multiply(self, node, lo, hi, l, r, factor):
        if l <= lo and hi <= r:
            self._sum[node] *= factor
            if self._has_children(node):
                self._tag[node] = self._tag.get(node, 1.0) * factor
            return
        self._push(node, lo, hi)
        mid = (lo + hi) // 2
        if l <= mid:
            self._multiply(2 * node, lo, mid, l, r, factor)
        if r > mid:
            self._multiply(2 * node + 1, mid + 1, hi, l, r, factor)
        self._sum[node] = self._sum[2 * node] + self._sum[2 * node + 1]

    def assign(self, i, value):
        """Set leaf ``i`` to ``value``."""
        if not 1 <= i <= self.size:
            raise IndexError("leaf %d out of range 1..%d" % (i, self.size))
        path = []
        node, lo, hi = 1, 1, self.size
        while lo < hi:
            self._push(node, lo, hi)
            path.append(node)
            mid = (lo + hi) // 2
            if i <= mid:
                node, hi = 2 * node, mid
            else:
                node, lo = 2 * node + 1, mid + 1
        self._sum[node] = float(value)
        for parent in reversed(path):
            self._sum[parent] = self._sum[2 * parent] + self._sum[2 * parent + 1]

    def leaf(self, i):
        if not 1 <= i <= self.size:
            raise IndexError("leaf %d out of range 1..%d" % (i, self.size))
        node, lo, hi = 1, 1, self.size
        while lo < hi:
            if not self._has_children(node):
                return self._sum[node] / (hi - lo + 1)
            self._push(node, lo, hi)
            mid = (lo + hi) // 2
            if i <= mid:
                node, hi = 2 * node, mid
            else:
                node, lo = 2 * node + 1, mid + 1
        return self._sum[node]

    def prefix(self, i):
        """Sum of leaves 1..i; does not materialize nodes."""
        if i <= 0:
            return 0.0
        if i >= self.size:
            return self._sum[1]
        acc = 0.0
        node, lo, hi = 1, 1, self.size
        while True:
            if hi <= i:
                return acc + self._sum[node]
            if not self._has_children(node):
                return acc + self._sum[node] * (i - lo + 1) / (hi - lo + 1)
            self._push(node, lo, hi)
            mid = (lo + hi) // 2
            if i <= mid:
                node, hi = 2 * node, mid
            else:
                acc += self._sum[2 * node]
                node, lo = 2 * node + 1, mid + 1

    def search(self, target):
        """Minimal leaf i with prefix(i) >= target, and prefix(i - 1).

        Targets above the total resolve to the last leaf.
        """
        acc = 0.0
        node, lo, hi = 1, 1, self.size
        while lo < hi:
            if not self._has_children(node):
                count = hi - lo + 1
                share = self._sum[node] / count
                k = min(max(int(math.ceil((target - acc) / share)), 1), count) if share > 0 else 1
                while k > 1 and acc + (k - 1) * share >= target:
                    k -= 1
                while k < count and acc + k * share < target:
                    k += 1
                return lo + k - 1, acc + (k - 1) * share
            self._push(node, lo, hi)
            mid = (lo + hi) // 2
            left_sum = self._sum[2 * node]
            if acc + left_sum >= target:
                node, hi = 2 * node, mid
            else:
                acc += left_sum
                node, lo = 2 * node + 1, mid + 1
        return lo, acc


class _PosteriorOps(object):
    """Operations shared by the tree-backed posterior and its dense reference.

    Subclasses provide ``n_intervals``, ``total``, ``weight``,
    ``prefix_weight``, ``_search``, ``_multiply``, ``_assign`` and ``_scale``.
    """

    renormalizations = 0

    def interval_at_quantile(self, q):
        """Minimal interval i with W(i) >= q."""
        return self._search(q)[0]

    def round_to_coin(self, j, q):
        """Coin to flip for the fractional quantile position inside interval j.

        Returns j when (q - W(j - 1)) / w(j) <= q, else j + 1.
        """
        w = self.weight(j)
        if w <= 0.0:
            warn("interval %d carries zero posterior weight; rounding to its left coin" % j)
            return j
        frac = (q - self.prefix_weight(j - 1)) / w
        return j if frac <= q else j + 1

    def multiply_split(self, j, q, left, right):
        """Scale mass left of quantile q (inside interval j) by ``left`` and
        mass right of it by ``right``."""
        before = self.prefix_weight(j - 1)
        w = self.weight(j)
        below = min(max(q - before, 0.0), w)
        self._multiply(1, j - 1, left)
        self._multiply(j + 1, self.n_intervals, right)
        self._assign(j, left * below + right * (w - below))
        self._renormalize()
        return self

    def apply_update(self, j, y, params, q):
        """Bayesian update after observing outcome ``y`` at quantile ``q``.

        Intervals left of j are scaled by d_{y,0}, intervals right of j by
        d_{y,1}, and interval j becomes
        d_{y,0} (q - W(j - 1)) + d_{y,1} (W(j) - q).
        """
        left, right = params.factors(y)
        return self.multiply_split(j, q, left, right)

    def _renormalize(self):
        total = self.total
        drift = abs(total - 1.0)
        if drift > DRIFT_TOL:
            if drift > DRIFT_WARN:
                warn("posterior mass drifted to %.9g; renormalizing" % total)
            self._scale(1.0 / total)
            self.renormalizations += 1


class PosteriorWeights(_PosteriorOps):
    """Normalized weights over intervals 1..n_intervals backed by a lazily
    materialized range tree, so memory grows with the number of updates and
    not with n_intervals.

    Example
    -------------
    w = PosteriorWeights.new_uniform(4)
    w.prefix_weight(2)            # 0.5
    j = w.interval_at_quantile(0.5)
    coin = w.round_to_coin(j, 0.5)
    """

    def __init__(self, n_intervals):
        if n_intervals < 1:
            raise ValueError("a posterior needs at least one interval")
        self.n_intervals = int(n_intervals)
        self._tree = LazyRangeTree(self.n_intervals, 1.0)
        self.renormalizations = 0

    @classmethod
    def new_uniform(cls, n_intervals):
        return cls(n_intervals)

    @classmethod
    def from_weights(cls, weights):
        weights = np.asarray(weights, dtype=np.float64)
        if weights.ndim != 1 or weights.size < 1:
            raise ValueError("weights must be a non-empty vector")
        if np.any(weights <= 0):
            raise ValueError("posterior weights must be strictly positive")
        post = cls(weights.size)
        for i, w in enumerate(weights, start=1):
            post._tree.assign(i, w)
        return post

    @property
    def total(self):
        return self._tree.total

    @property
    def n_nodes(self):
        return self._tree.n_nodes

    def weight(self, i):
        return self._tree.leaf(i)

    def prefix_weight(self, i):
        """W(i) = w(1) + ... + w(i), with W(0) = 0."""
        if not 0 <= i <= self.n_intervals:
            raise IndexError("prefix index %d out of range 0..%d" % (i, self.n_intervals))
        return self._tree.prefix(i)

    def _search(self, q):
        return self._tree.search(q)

    def _multiply(self, l, r, factor):
        self._tree.multiply(l, r, factor)

    def _assign(self, i, value):
        self._tree.assign(i, value)

    def _scale(self, factor):
        self._tree.scale(factor)


class DensePosteriorWeights(_PosteriorOps):
    """Array-backed reference with the same interface as
    :class:`PosteriorWeights`, for small n and for cross-checking the tree."""

    def __init__(self, n_intervals):
        if n_intervals < 1:
            raise ValueError("a posterior needs at least one interval")
        self.n_intervals = int(n_intervals)
        self.w = np.full(self.n_intervals, 1.0 / self.n_intervals)
        self.renormalizations = 0

    @classmethod
    def new_uniform(cls, n_intervals):
        return cls(n_intervals)

    @classmethod
    def from_weights(cls, weights):
        weights = np.asarray(weights, dtype=np.float64)
        if np.any(weights <= 0):
            raise ValueError("posterior weights must be strictly positive")
        post = cls(weights.size)
        post.w = weights.copy()
        return post

    @property
    def total(self):
        return float(self.w.sum())

    def weight(self, i):
        if not 1 <= i <= self.n_intervals:
            raise IndexError("interval %d out of range" % i)
        return float(self.w[i - 1])

    def prefix_weight(self, i):
        if not 0 <= i <= self.n_intervals:
            raise IndexError("prefix index %d out of range 0..%d" % (i, self.n_intervals))
        return float(self.w[:i].sum())

    def _search(self, q):
        cum = np.cumsum(self.w)
        i = int(np.searchsorted(cum, q, side="left"))
        i = min(i, self.n_intervals - 1)
        return i + 1, float(cum[i - 1]) if i > 0 else 0.0

    def _multiply(self, l, r, factor):
        if l <= r:
            self.w[l - 1:r] *= factor

    def _assign(self, i, value):
        self.w[i - 1] = value

    def _scale(self, factor):
        self.w *= factor
