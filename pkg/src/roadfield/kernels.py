"""Hot loops shared by the time stepper and the front extractor.

Two implementations live side by side: numba-compiled kernels and plain
numpy fallbacks.  Selection happens once at import time; set the
environment variable ROADFIELD_DISABLE_NUMBA=1 to force the numpy path
(useful for debugging and for the benchmark comparison).

The tridiagonal routines implement the Thomas algorithm split into a
factor step and a repeated solve step, because the time stepper solves
the same matrix for hundreds of right hand sides.  No pivoting: every
matrix passed in here is strictly diagonally dominant.
"""

import os

import numpy as np

_disabled = os.environ.get("ROADFIELD_DISABLE_NUMBA", "").strip() not in ("", "0")

try:
    if _disabled:
        raise ImportError("numba disabled by environment flag")
    from numba import njit

    HAVE_NUMBA = True
except ImportError:
    njit = None
    HAVE_NUMBA = False


def _tridiag_factor_np(lower, diag, upper):
    n = diag.shape[0]
    mult = np.zeros(n)
    dp = np.empty(n)
    dp[0] = diag[0]
    for k in range(1, n):
        m = lower[k] / dp[k - 1]
        mult[k] = m
        dp[k] = diag[k] - m * upper[k - 1]
    return mult, dp


def _tridiag_solve_many_np(mult, dp, upper, rhs):
    # rhs has shape (nbatch, n); sweep over n, vectorize over the batch
    n = dp.shape[0]
    x = rhs.copy()
    for k in range(1, n):
        x[:, k] -= mult[k] * x[:, k - 1]
    x[:, n - 1] /= dp[n - 1]
    for k in range(n - 2, -1, -1):
        x[:, k] = (x[:, k] - upper[k] * x[:, k + 1]) / dp[k]
    return x


def _rightmost_crossings_np(field, level):
    """Per row: count of sign changes of field-level and the rightmost one.

    Returns (idx, frac, counts).  idx[b] is the left node of the rightmost
    crossing interval in row b, frac[b] the linear-interpolation fraction
    inside it; idx = -1 where the row never crosses the level.
    """
    s = field - level
    pos = s > 0.0
    cross = pos[:, :-1] != pos[:, 1:]
    counts = cross.sum(axis=1).astype(np.int64)
    nb, nm = cross.shape
    # argmax on the reversed mask finds the last True column
    rev = cross[:, ::-1]
    last = nm - 1 - rev.argmax(axis=1)
    idx = np.where(counts > 0, last, -1).astype(np.int64)
    frac = np.zeros(nb)
    hit = counts > 0
    i = idx[hit]
    rows = np.nonzero(hit)[0]
    s0 = s[rows, i]
    s1 = s[rows, i + 1]
    frac[hit] = s0 / (s0 - s1)
    return idx, frac, counts


if HAVE_NUMBA:

    @njit(cache=True)
    def _tridiag_factor_nb(lower, diag, upper):
        n = diag.shape[0]
        mult = np.zeros(n)
        dp = np.empty(n)
        dp[0] = diag[0]
        for k in range(1, n):
            m = lower[k] / dp[k - 1]
            mult[k] = m
            dp[k] = diag[k] - m * upper[k - 1]
        return mult, dp

    @njit(cache=True)
    def _tridiag_solve_many_nb(mult, dp, upper, rhs):
        nb_, n = rhs.shape
        x = rhs.copy()
        for b in range(nb_):
            for k in range(1, n):
                x[b, k] -= mult[k] * x[b, k - 1]
            x[b, n - 1] /= dp[n - 1]
            for k in range(n - 2, -1, -1):
                x[b, k] = (x[b, k] - upper[k] * x[b, k + 1]) / dp[k]
        return x

    @njit(cache=True)
    def _rightmost_crossings_nb(field, level):
        nb_, n = field.shape
        idx = np.full(nb_, -1, dtype=np.int64)
        frac = np.zeros(nb_)
        counts = np.zeros(nb_, dtype=np.int64)
        for b in range(nb_):
            for i in range(n - 1):
                s0 = field[b, i] - level
                s1 = field[b, i + 1] - level
                if (s0 > 0.0) != (s1 > 0.0):
                    counts[b] += 1
                    idx[b] = i
                    frac[b] = s0 / (s0 - s1)
        return idx, frac, counts

    tridiag_factor = _tridiag_factor_nb
    tridiag_solve_many = _tridiag_solve_many_nb
    rightmost_crossings = _rightmost_crossings_nb
else:
    tridiag_factor = _tridiag_factor_np
    tridiag_solve_many = _tridiag_solve_many_np
    rightmost_crossings = _rightmost_crossings_np
