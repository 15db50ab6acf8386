"""Pairwise Gaussian kernels, numba and numpy implementations.

Both paths return *raw* exponential sums, ``sum_j exp(-|a_i - b_j|^2 / s^2)``,
so the caller applies normalization constants and mixture weights. Each
output row is reduced sequentially in a fixed order, which keeps the numba
path bit-reproducible for any worker count.
"""

import math

import numpy as np

from ._accel import USE_NUMBA, njit, prange

# exponents below this are treated as exactly zero
EXP_FLOOR = -700.0

# max number of pairwise difference entries materialized per numpy chunk
_CHUNK_ENTRIES = 1 << 22


def _row_chunks(n, width):
    step = max(1, _CHUNK_ENTRIES // max(1, width))
    for start in range(0, n, step):
        yield slice(start, min(n, start + step))


def _floored_exp(expo):
    out = np.exp(np.maximum(expo, EXP_FLOOR))
    out[expo < EXP_FLOOR] = 0.0
    return out


def gauss_sums_numpy(A, B, inv_s2):
    n, d = A.shape
    out = np.empty(n)
    for sl in _row_chunks(n, B.shape[0] * d):
        diff = A[sl, None, :] - B[None, :, :]
        r2 = np.einsum("ijk,ijk->ij", diff, diff)
        out[sl] = _floored_exp(-r2 * inv_s2).sum(axis=1)
    return out


def pair_grad_numpy(T, R, u, p, q, inv_s2):
    """Raw misfit-gradient sums for every row ``l`` of ``T``.

    Returns ``sum_j e(T_l,T_j) (u_l+u_j) (T_l-T_j) + sum_k e(T_l,R_k) (p_l+q_k) (T_l-R_k)``.
    """
    n, d = T.shape
    out = np.empty_like(T)
    for sl in _row_chunks(n, (n + R.shape[0]) * d):
        Ti = T[sl]
        dTT = Ti[:, None, :] - T[None, :, :]
        W = _floored_exp(-np.einsum("ijk,ijk->ij", dTT, dTT) * inv_s2)
        W *= u[sl, None] + u[None, :]
        acc = Ti * W.sum(axis=1)[:, None] - W @ T
        dTR = Ti[:, None, :] - R[None, :, :]
        W = _floored_exp(-np.einsum("ijk,ijk->ij", dTR, dTR) * inv_s2)
        W *= p[sl, None] + q[None, :]
        acc += Ti * W.sum(axis=1)[:, None] - W @ R
        out[sl] = acc
    return out


@njit(parallel=True, cache=True)
def gauss_sums_numba(A, B, inv_s2):
    n, d = A.shape
    m = B.shape[0]
    out = np.empty(n)
    for i in prange(n):
        acc = 0.0
        for j in range(m):
            r2 = 0.0
            for k in range(d):
                t = A[i, k] - B[j, k]
                r2 += t * t
            e = -r2 * inv_s2
            if e >= EXP_FLOOR:
                acc += math.exp(e)
        out[i] = acc
    return out


@njit(parallel=True, cache=True)
def pair_grad_numba(T, R, u, p, q, inv_s2):
    n, d = T.shape
    m = R.shape[0]
    out = np.zeros((n, d))
    for l in prange(n):
        for j in range(n):
            r2 = 0.0
            for k in range(d):
                t = T[l, k] - T[j, k]
                r2 += t * t
            e = -r2 * inv_s2
            if e >= EXP_FLOOR:
                w = math.exp(e) * (u[l] + u[j])
                for k in range(d):
                    out[l, k] += w * (T[l, k] - T[j, k])
        for j in range(m):
            r2 = 0.0
            for k in range(d):
                t = T[l, k] - R[j, k]
                r2 += t * t
            e = -r2 * inv_s2
            if e >= EXP_FLOOR:
                w = math.exp(e) * (p[l] + q[j])
                for k in range(d):
                    out[l, k] += w * (T[l, k] - R[j, k])
    return out


if USE_NUMBA:
    gauss_sums = gauss_sums_numba
    pair_grad = pair_grad_numba
else:
    gauss_sums = gauss_sums_numpy
    pair_grad = pair_grad_numpy

BACKEND = "numba" if USE_NUMBA else "numpy"
