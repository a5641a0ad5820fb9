"""Hot numeric kernels, each with a numba and a pure-numpy implementation.

The public names (``pairs_within``, ``gauss_kernel_sum``, ``cross_distances``)
dispatch to the numba versions unless ``FACECF_DISABLE_NUMBA`` is set. Both
variants stay importable as ``*_numba`` / ``*_numpy`` for benchmarking and
cross-checking.
"""
import math

import numpy as np

from ._accel import USE_NUMBA, njit

EUCLIDEAN = 0
L1 = 1

METRICS = {"euclidean": EUCLIDEAN, "l2": EUCLIDEAN, "l1": L1, "manhattan": L1}

# rows per block in the numpy paths; bounds the temporary (block, M, d) array
_BLOCK_ELEMS = 1 << 22


def metric_code(name):
    try:
        return METRICS[name.lower()]
    except KeyError:
        raise ValueError(f"unknown distance metric {name!r}; expected one of {sorted(METRICS)}") from None


# --------------------------------------------------------------------------
# numba kernels

@njit(cache=True, inline="always")
def _dist_nb(A, i, B, j, metric):
    # row indices instead of row views: views cost an allocation per call
    s = 0.0
    if metric == 1:
        for k in range(A.shape[1]):
            s += abs(A[i, k] - B[j, k])
        return s
    for k in range(A.shape[1]):
        t = A[i, k] - B[j, k]
        s += t * t
    return math.sqrt(s)


@njit(cache=True)
def _pairs_within_nb(X, eps, metric):
    n = X.shape[0]
    count = 0
    for i in range(n):
        for j in range(i + 1, n):
            if _dist_nb(X, i, X, j, metric) <= eps:
                count += 1
    ii = np.empty(count, dtype=np.int64)
    jj = np.empty(count, dtype=np.int64)
    dd = np.empty(count, dtype=np.float64)
    c = 0
    for i in range(n):
        for j in range(i + 1, n):
            dist = _dist_nb(X, i, X, j, metric)
            if dist <= eps:
                ii[c] = i
                jj[c] = j
                dd[c] = dist
                c += 1
    return ii, jj, dd


@njit(cache=True)
def _gauss_kernel_sum_nb(Q, R, h):
    inv = 1.0 / (2.0 * h * h)
    out = np.empty(Q.shape[0], dtype=np.float64)
    for q in range(Q.shape[0]):
        acc = 0.0
        for r in range(R.shape[0]):
            s = 0.0
            for k in range(Q.shape[1]):
                t = Q[q, k] - R[r, k]
                s += t * t
            acc += math.exp(-s * inv)
        out[q] = acc
    return out


@njit(cache=True)
def _cross_distances_nb(A, B, metric):
    out = np.empty((A.shape[0], B.shape[0]), dtype=np.float64)
    for i in range(A.shape[0]):
        for j in range(B.shape[0]):
            out[i, j] = _dist_nb(A, i, B, j, metric)
    return out


def pairs_within_numba(X, eps, metric=EUCLIDEAN):
    return _pairs_within_nb(np.ascontiguousarray(X, dtype=np.float64), float(eps), int(metric))


def gauss_kernel_sum_numba(Q, R, h):
    Q = np.ascontiguousarray(np.atleast_2d(Q), dtype=np.float64)
    R = np.ascontiguousarray(R, dtype=np.float64)
    return _gauss_kernel_sum_nb(Q, R, float(h))


def cross_distances_numba(A, B, metric=EUCLIDEAN):
    A = np.ascontiguousarray(np.atleast_2d(A), dtype=np.float64)
    B = np.ascontiguousarray(np.atleast_2d(B), dtype=np.float64)
    return _cross_distances_nb(A, B, int(metric))


# --------------------------------------------------------------------------
# numpy kernels

def _block_rows(m, d):
    return max(1, _BLOCK_ELEMS // max(1, m * d))


def cross_distances_numpy(A, B, metric=EUCLIDEAN):
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    B = np.atleast_2d(np.asarray(B, dtype=np.float64))
    out = np.empty((A.shape[0], B.shape[0]))
    step = _block_rows(B.shape[0], A.shape[1])
    for start in range(0, A.shape[0], step):
        diff = A[start:start + step, None, :] - B[None, :, :]
        if metric == L1:
            out[start:start + step] = np.abs(diff).sum(axis=-1)
        else:
            out[start:start + step] = np.sqrt((diff * diff).sum(axis=-1))
    return out


def pairs_within_numpy(X, eps, metric=EUCLIDEAN):
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    ii, jj, dd = [], [], []
    step = _block_rows(n, X.shape[1])
    cols = np.arange(n)
    for start in range(0, n, step):
        dist = cross_distances_numpy(X[start:start + step], X, metric)
        rows = np.arange(start, min(start + step, n))
        mask = (dist <= eps) & (cols[None, :] > rows[:, None])
        r, c = np.nonzero(mask)
        ii.append(rows[r])
        jj.append(c)
        dd.append(dist[r, c])
    if not ii:
        return np.empty(0, np.int64), np.empty(0, np.int64), np.empty(0)
    return (np.concatenate(ii).astype(np.int64), np.concatenate(jj).astype(np.int64),
            np.concatenate(dd))


def gauss_kernel_sum_numpy(Q, R, h):
    Q = np.atleast_2d(np.asarray(Q, dtype=np.float64))
    R = np.asarray(R, dtype=np.float64)
    inv = 1.0 / (2.0 * h * h)
    out = np.empty(Q.shape[0])
    step = _block_rows(R.shape[0], Q.shape[1])
    for start in range(0, Q.shape[0], step):
        diff = Q[start:start + step, None, :] - R[None, :, :]
        sq = (diff * diff).sum(axis=-1)
        out[start:start + step] = np.exp(-sq * inv).sum(axis=1)
    return out


if USE_NUMBA:
    pairs_within = pairs_within_numba
    gauss_kernel_sum = gauss_kernel_sum_numba
    cross_distances = cross_distances_numba
else:
    pairs_within = pairs_within_numpy
    gauss_kernel_sum = gauss_kernel_sum_numpy
    cross_distances = cross_distances_numpy


def warm_up():
    """Trigger numba compilation for every signature the library uses.

    Dataset arrays are read-only, which numba types separately from writable
    arrays, so both variants are compiled. Returns the elapsed seconds.
    """
    import time

    start = time.perf_counter()
    if USE_NUMBA:
        X = np.zeros((3, 2))
        ro = X.copy()
        ro.flags.writeable = False
        for A in (X, ro):
            for metric in (EUCLIDEAN, L1):
                pairs_within_numba(A, 1.0, metric)
                cross_distances_numba(A, A, metric)
                cross_distances_numba(X[:1], A, metric)
            gauss_kernel_sum_numba(A, A, 1.0)
            gauss_kernel_sum_numba(X, A, 1.0)
            gauss_kernel_sum_numba(A, X, 1.0)
    return time.perf_counter() - start
