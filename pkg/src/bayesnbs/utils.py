"""
Utility functions
"""
import time

import numpy as np


def ts():
    """Timestamp used to prefix verbose progress lines."""
    return time.ctime(time.time())


def ceil_lg(n):
    """Number of halvings needed to bring ``n`` items down to one.
    Parameters
    ----------
    n: int
        Number of items, at least 1.
    Returns
    -------
    levels: int
        ``ceil(lg n)`` computed exactly on integers.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    return (n - 1).bit_length()


def resolve_seed(seed=None):
    """Return ``seed`` unchanged, or fresh system entropy when it is None.

    The returned integer is what callers should print so a run can be
    reproduced.
    """
    if seed is None:
        return int(np.random.SeedSequence().entropy)
    return int(seed)


def trial_rng(seed, *key):
    """Independent generator for one trial of a campaign.

    Streams are derived from ``(seed, key)`` through ``SeedSequence`` spawn
    keys, so they do not depend on the order in which trials are executed.
    """
    return np.random.default_rng(np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key)))
