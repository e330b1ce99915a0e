"""Shared oracles and generators for the test suite."""

import itertools
from functools import lru_cache

import numpy as np
import pytest


@lru_cache(maxsize=None)
def _perm_table(n: int) -> np.ndarray:
    return np.array(list(itertools.permutations(range(n))))


def brute_force_matching_cost(x: np.ndarray, y: np.ndarray) -> float:
    """Exact minimum over all n! assignments of the mean l1 matching cost.

    Independent oracle for the assignment-based distance; only usable for
    small n.
    """
    x = np.atleast_2d(x.T).T if x.ndim == 1 else x
    y = np.atleast_2d(y.T).T if y.ndim == 1 else y
    n = x.shape[0]
    cost = np.abs(x[:, None, :] - y[None, :, :]).sum(axis=2)
    perms = _perm_table(n)
    totals = cost[np.arange(n)[None, :], perms].sum(axis=1)
    return float(totals.min() / n)


def random_cloud(rng, n, d=1, scale=5.0):
    return rng.normal(scale=scale, size=(n, d))


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)
