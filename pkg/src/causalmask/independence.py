"""Hoeffding's D statistic and the thresholded dependence test.

The statistic is the classical Hoeffding (1948) D scaled by 30, so that
for tie-free samples it lies in ``[-0.5, 1]`` and equals 1 for perfectly
monotone pairs. Values near zero indicate independence.

Two implementations are provided:

* :func:`hoeffding_d` counts bivariate dominance with a Fenwick tree
  after sorting by ``x`` (``O(n log n)``).
* :func:`hoeffding_d_oracle` counts the same quantities by direct
  ``O(n^2)`` comparison. It exists to check the fast path.

Ties follow Hoeffding's convention: midranks for the marginal ranks and,
in the bivariate count, a tie on one coordinate (other strictly smaller)
counts one half and a tie on both counts one quarter.
"""

from __future__ import annotations

import numba
import numpy as np
from scipy.stats import rankdata

DEFAULT_GAMMA = 1e-3

__all__ = [
    "DEFAULT_GAMMA",
    "hoeffding_d",
    "hoeffding_d_oracle",
    "hoeffding_d_matrix",
    "dependent",
]


def _as_pair(x, y):
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.shape != y.shape:
        raise ValueError(
            f"x and y must have the same length, got {x.size} and {y.size}")
    if x.size < 5:
        raise ValueError(
            f"Hoeffding's D needs at least 5 pairs, got {x.size}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("x and y must be finite")
    return x, y


@numba.njit(cache=True)
def _fenwick_add(tree, i):
    m = tree.shape[0] - 1
    while i <= m:
        tree[i] += 1
        i += i & (-i)


@numba.njit(cache=True)
def _fenwick_prefix(tree, i):
    s = 0
    while i > 0:
        s += tree[i]
        i -= i & (-i)
    return s


@numba.njit(cache=True)
def _quarter_counts(order, x, y_dense, m):
    """Return ``4 * (Q_i - 1)`` for every sample as integers.

    ``order`` sorts the samples by ``x``; ``y_dense`` holds dense ranks
    ``1..m`` of ``y``. Within a block of equal ``x`` the block is queried
    before and after insertion, which yields the strict and non-strict
    counts on the ``x`` coordinate.
    """
    n = order.shape[0]
    tree = np.zeros(m + 1, dtype=np.int64)
    out = np.zeros(n, dtype=np.int64)
    start = 0
    while start < n:
        stop = start + 1
        while stop < n and x[order[stop]] == x[order[start]]:
            stop += 1
        for k in range(start, stop):
            i = order[k]
            r = y_dense[i]
            out[i] += _fenwick_prefix(tree, r - 1) + _fenwick_prefix(tree, r)
        for k in range(start, stop):
            _fenwick_add(tree, y_dense[order[k]])
        for k in range(start, stop):
            i = order[k]
            r = y_dense[i]
            out[i] += _fenwick_prefix(tree, r - 1) + _fenwick_prefix(tree, r)
        start = stop
    # the (<=, <=) query counted the sample itself once
    return out - 1


def _combine(r, s, q):
    n = r.size
    d1 = np.sum((q - 1.0) * (q - 2.0))
    d2 = np.sum((r - 1.0) * (r - 2.0) * (s - 1.0) * (s - 2.0))
    d3 = np.sum((r - 2.0) * (s - 2.0) * (q - 1.0))
    num = (n - 2.0) * (n - 3.0) * d1 + d2 - 2.0 * (n - 2.0) * d3
    den = n * (n - 1.0) * (n - 2.0) * (n - 3.0) * (n - 4.0)
    return 30.0 * num / den


def _check_range(x, y, d):
    if np.unique(x).size == x.size and np.unique(y).size == y.size:
        assert -0.5 - 1e-9 <= d <= 1.0 + 1e-9, d


def hoeffding_d(x, y):
    """Hoeffding's D statistic of the paired samples ``(x_i, y_i)``.

    Parameters
    ----------
    x, y : array_like, shape (n,)
        Paired real samples, ``n >= 5``, all finite.

    Returns
    -------
    float
        The statistic scaled by 30. Independent samples give values close
        to zero; values above zero indicate dependence.

    Examples
    --------
    >>> hoeffding_d([1, 2, 3, 4, 5], [1, 2, 3, 4, 5])
    1.0
    """
    x, y = _as_pair(x, y)
    r = rankdata(x)
    s = rankdata(y)
    y_dense = rankdata(y, method="dense").astype(np.int64)
    order = np.lexsort((y, x))
    q = 1.0 + _quarter_counts(order, x, y_dense, int(y_dense.max())) / 4.0
    d = float(_combine(r, s, q))
    if __debug__:
        _check_range(x, y, d)
    return d


def hoeffding_d_oracle(x, y):
    """Reference O(n^2) evaluation of :func:`hoeffding_d`.

    Ranks and bivariate counts come from explicit pairwise comparison
    matrices rather than sorting. Meant for tests; memory grows as n^2.
    """
    x, y = _as_pair(x, y)
    # cmp[j, i] = 1 if v_j < v_i, 1/2 if v_j == v_i, 0 otherwise
    cx = (x[:, None] < x[None, :]) + 0.5 * (x[:, None] == x[None, :])
    cy = (y[:, None] < y[None, :]) + 0.5 * (y[:, None] == y[None, :])
    np.fill_diagonal(cx, 0.0)
    np.fill_diagonal(cy, 0.0)
    r = 1.0 + cx.sum(axis=0)
    s = 1.0 + cy.sum(axis=0)
    q = 1.0 + (cx * cy).sum(axis=0)
    return float(_combine(r, s, q))


def hoeffding_d_matrix(a, b):
    """D statistic between every column of ``a`` and every column of ``b``.

    ``a`` has shape (n, p) and ``b`` shape (n, q); returns a (p, q) array.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim == 1:
        a = a[:, None]
    if b.ndim == 1:
        b = b[:, None]
    out = np.empty((a.shape[1], b.shape[1]))
    for i in range(a.shape[1]):
        for j in range(b.shape[1]):
            out[i, j] = hoeffding_d(a[:, i], b[:, j])
    return out


def dependent(x, y, gamma=DEFAULT_GAMMA):
    """Thresholded test: ``hoeffding_d(x, y) > gamma``."""
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    return hoeffding_d(x, y) > gamma
