"""Compiled pairwise power-distance sums.

Every routine reduces into one partial per row and the partials are summed
afterwards in a fixed order, so results do not depend on how the rows were
split across worker threads.
"""
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from numba import njit

_threads = 1


def set_threads(n):
    """Number of worker threads used for large pair sums (0 = all cores)."""
    global _threads
    if n < 0:
        raise ValueError("thread count must be >= 0")
    import os
    _threads = n or (os.cpu_count() or 1)


def get_threads():
    return _threads


@njit(cache=True, fastmath=True, nogil=True)
def _rows3(x, yt, two_r, lo, hi, out):
    m = yt.shape[1]
    h = 0.5 * two_r
    for i in range(lo, hi):
        a0 = x[i, 0]
        a1 = x[i, 1]
        a2 = x[i, 2]
        acc = 0.0
        if two_r == 1.0:
            for j in range(m):
                d0 = a0 - yt[0, j]
                d1 = a1 - yt[1, j]
                d2 = a2 - yt[2, j]
                acc += np.sqrt(d0 * d0 + d1 * d1 + d2 * d2)
        else:
            for j in range(m):
                d0 = a0 - yt[0, j]
                d1 = a1 - yt[1, j]
                d2 = a2 - yt[2, j]
                s = d0 * d0 + d1 * d1 + d2 * d2
                if s > 0.0:
                    acc += s ** h
        out[i] = acc


@njit(cache=True, fastmath=True, nogil=True)
def _rows2(x, yt, two_r, lo, hi, out):
    m = yt.shape[1]
    h = 0.5 * two_r
    for i in range(lo, hi):
        a0 = x[i, 0]
        a1 = x[i, 1]
        acc = 0.0
        if two_r == 1.0:
            for j in range(m):
                d0 = a0 - yt[0, j]
                d1 = a1 - yt[1, j]
                acc += np.sqrt(d0 * d0 + d1 * d1)
        else:
            for j in range(m):
                d0 = a0 - yt[0, j]
                d1 = a1 - yt[1, j]
                s = d0 * d0 + d1 * d1
                if s > 0.0:
                    acc += s ** h
        out[i] = acc


@njit(cache=True, fastmath=True, nogil=True)
def _rowsd(x, yt, two_r, lo, hi, out):
    dim = x.shape[1]
    m = yt.shape[1]
    h = 0.5 * two_r
    for i in range(lo, hi):
        acc = 0.0
        for j in range(m):
            s = 0.0
            for k in range(dim):
                diff = x[i, k] - yt[k, j]
                s += diff * diff
            if s > 0.0:
                acc += s ** h
        out[i] = acc


@njit(cache=True, nogil=True)
def _weighted_form(x, w, two_r):
    n = x.shape[0]
    dim = x.shape[1]
    h = 0.5 * two_r
    signed = 0.0
    scale = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            s = 0.0
            for k in range(dim):
                diff = x[i, k] - x[j, k]
                s += diff * diff
            if s > 0.0:
                p = s ** h
                signed += w[i] * w[j] * p
                scale += abs(w[i] * w[j]) * p
    return 2.0 * signed, 2.0 * scale


def _row_sums(x, yt, two_r):
    n, dim = x.shape
    out = np.zeros(n)
    kernel = {3: _rows3, 2: _rows2}.get(dim, _rowsd)
    workers = min(_threads, max(1, n // 64))
    if workers <= 1:
        kernel(x, yt, two_r, 0, n, out)
        return out
    bounds = np.linspace(0, n, workers + 1).astype(int)
    with ThreadPoolExecutor(workers) as pool:
        futures = [pool.submit(kernel, x, yt, two_r, lo, hi, out)
                   for lo, hi in zip(bounds[:-1], bounds[1:])]
        for f in futures:
            f.result()
    return out


def cross_sum(x, y, two_r):
    """Sum of ``|x_i - y_j|**two_r`` over all i, j."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    yt = np.ascontiguousarray(np.asarray(y, dtype=np.float64).T)
    if x.shape[0] == 0 or yt.shape[1] == 0:
        return 0.0
    return float(np.sum(_row_sums(x, yt, float(two_r))))


def self_sum(x, two_r, block=4096):
    """Sum of ``|x_i - x_j|**two_r`` over ordered pairs i != j.

    Computed block-wise over the upper triangle; diagonal blocks are full
    cross sums (the i == j terms vanish), off-diagonal blocks count twice.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    n = x.shape[0]
    if n < 2:
        return 0.0
    edges = list(range(0, n, block)) + [n]
    parts = []
    for a in range(len(edges) - 1):
        xa = x[edges[a]:edges[a + 1]]
        parts.append(cross_sum(xa, xa, two_r))
        if edges[a + 1] < n:
            parts.append(2.0 * cross_sum(xa, x[edges[a + 1]:], two_r))
    return float(sum(parts))


def weighted_form(x, w, two_r):
    """Return ``(sum_ij w_i w_j |x_i-x_j|^2r, sum_ij |w_i w_j| |x_i-x_j|^2r)``."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    w = np.ascontiguousarray(w, dtype=np.float64)
    if x.shape[0] < 2:
        return 0.0, 0.0
    return _weighted_form(x, w, float(two_r))
