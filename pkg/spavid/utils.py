# -*- coding: utf-8 -*-
"""
General-purpose python utilities for spavid experiments

Overview
--------
Functionality includes:

- seeding: reproducible random number generators from integer or string seeds
- trend statistics: rank correlation and tolerance-aware monotonicity tests used to
  check experiment-level trends (eg fooling rate vs sparsity)
- various other useful little utilities

Function list
-------------
Numerical utility functions
^^^^^^^^^^^^^^^^^^^^^^^^^^^
- set_random_seed :     Seed Python/Numpy global random number generators with given seed
- make_rng :            Create an independent seeded Numpy Generator
- derive_seed :         Derive a stable child seed from a parent seed and a string key

Trend statistics
^^^^^^^^^^^^^^^^
- correlation :         Pearson product-moment correlation btwn two variables
- rank_correlation :    Spearman rank correlation btwn two variables
- is_monotonic :        Test if a series is (weakly) monotonic within a tolerance

Other utilities
^^^^^^^^^^^^^^^
- hardware_info :       Dict of platform/hardware metadata for timing reports

Function reference
------------------
"""
import time
import random
import platform
import zlib
import numpy as np

from scipy.stats import rankdata


# =============================================================================
# Numerical utility functions
# =============================================================================
def set_random_seed(seed=None):
    """
    Seed built-in Python and Numpy global random number generators with given value

    Parameters
    ----------
    seed : int or str, default: (use current clock time)
        Seed to use. If string given, converts each char to ascii and sums the
        resulting values. If no seed given, seeds based on current clock time.

    Returns
    -------
    seed : int
        Actual integer seed used
    """
    if seed is None:            seed = int(time.time()*1000.0) % (2**32 - 1)
    # Convert string seeds to int's (convert each char->ascii and sum them)
    elif isinstance(seed,str):  seed = int(np.sum([ord(c) for c in seed]))

    np.random.seed(seed)
    random.seed(seed)

    return seed


def make_rng(seed=None):
    """
    Create an independent Numpy random Generator

    spavid code draws random numbers from explicit Generators, never the global state.

    Parameters
    ----------
    seed : int or str or np.random.Generator, default: None (unseeded)
        Seed for the generator. Strings are converted to ints as in :func:`set_random_seed`.
        If a Generator is given, it is returned unchanged.

    Returns
    -------
    rng : np.random.Generator
    """
    if isinstance(seed, np.random.Generator): return seed
    if isinstance(seed,str): seed = int(np.sum([ord(c) for c in seed]))
    return np.random.default_rng(seed)


def derive_seed(seed, key):
    """
    Derive a stable child seed from a parent seed and a string key

    Used to give each clip/model its own reproducible stream regardless of
    processing order. Result is identical across runs.

    Parameters
    ----------
    seed : int
        Parent seed

    key : str
        Identifier of the child stream (eg clip id)

    Returns
    -------
    child_seed : int
    """
    return (int(seed) * 1000003 + zlib.crc32(str(key).encode('utf-8'))) % (2**32 - 1)


# =============================================================================
# Trend statistics
# =============================================================================
def correlation(data1, data2):
    """
    Compute Pearson product-moment correlation between two 1d variables

    Returns np.nan if either variable has zero variance

    Parameters
    ----------
    data1,data2 : array-like, shape=(n,)
        Paired data to compute correlation between

    Returns
    -------
    r : float
        Pearson correlation, in range [-1,+1]
    """
    data1 = np.asarray(data1, dtype=float)
    data2 = np.asarray(data2, dtype=float)
    assert data1.shape == data2.shape, \
        ValueError("data1 and data2 must have same shape (%s != %s)" % (data1.shape,data2.shape))

    data1 = data1 - data1.mean()
    data2 = data2 - data2.mean()
    denom = np.sqrt((data1**2).sum() * (data2**2).sum())
    if denom == 0: return np.nan

    return float((data1*data2).sum() / denom)


def rank_correlation(data1, data2):
    """
    Compute Spearman rank correlation between two 1d variables

    Each variable is sorted into rank-order separately, and the resulting ranks are entered
    into a standard (Pearson) correlation. Used here to check that experiment-level curves
    (eg fooling rate vs number of polluted frames) move in the expected direction.

    Parameters
    ----------
    data1,data2 : array-like, shape=(n,)
        Paired data to compute correlation between

    Returns
    -------
    rho : float
        Spearman correlation, in range [-1,+1]; np.nan if either variable is constant
    """
    return correlation(rankdata(data1), rankdata(data2))


def is_monotonic(values, increasing=True, tol=0.0, relative=False):
    """
    Test if a series is weakly monotonic, allowing for a given tolerance

    Parameters
    ----------
    values : array-like, shape=(n,)
        Series to test, in order

    increasing : bool, default: True
        If True, tests for nondecreasing values. If False, for nonincreasing.

    tol : float, default: 0.0
        Allowed violation between successive values. If `relative` is True,
        interpreted as a fraction of the preceding value (eg 0.2 = 20% noise tolerance).

    relative : bool, default: False
        Whether `tol` is absolute or relative

    Returns
    -------
    tf : bool
        True if the series is monotonic within tolerance
    """
    values = np.asarray(values, dtype=float)
    if len(values) < 2: return True

    steps = np.diff(values) if increasing else -np.diff(values)
    allowed = tol*np.abs(values[:-1]) if relative else tol*np.ones_like(steps)

    return bool(np.all(steps >= -allowed))


# =============================================================================
# Other utilities
# =============================================================================
def hardware_info():
    """ Return dict of platform/hardware metadata, recorded with timing measurements """
    return {'platform':     platform.platform(),
            'machine':      platform.machine(),
            'processor':    platform.processor(),
            'python':       platform.python_version(),
            'numpy':        np.__version__}
