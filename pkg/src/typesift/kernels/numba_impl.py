"""Numba-compiled kernels for the hot inner loops.

Each function mirrors its counterpart in :mod:`typesift.kernels.numpy_impl`
operation for operation, so the two backends return bit-identical results.
"""

import math

import numpy as np
from numba import njit


@njit(cache=True)
def adam_update(param, grad, m, v, c1, c2, lr, beta1, beta2, eps):
    omb1 = 1.0 - beta1
    omb2 = 1.0 - beta2
    for i in range(param.shape[0]):
        m[i] = beta1 * m[i] + omb1 * grad[i]
        v[i] = beta2 * v[i] + omb2 * (grad[i] * grad[i])
        param[i] = param[i] - lr * (m[i] / c1) / (math.sqrt(v[i] / c2) + eps)


@njit(cache=True)
def sq_dists(queries, points):
    nq = queries.shape[0]
    nx = points.shape[0]
    d = queries.shape[1]
    out = np.empty((nq, nx), dtype=np.float64)
    for i in range(nq):
        for j in range(nx):
            s = 0.0
            for k in range(d):
                diff = points[j, k] - queries[i, k]
                s += diff * diff
            out[i, j] = s
    return out


@njit(cache=True)
def split_scan(sorted_vals, sorted_labels, n_classes):
    n = sorted_vals.shape[0]
    if n < 2:
        return -np.inf, -1

    total = np.zeros(n_classes, dtype=np.int64)
    for i in range(n):
        total[sorted_labels[i]] += 1
    sum_total = 0
    for k in range(n_classes):
        sum_total += total[k] * total[k]
    fn = float(n)
    gini_parent = 1.0 - float(sum_total) / (fn * fn)

    left = np.zeros(n_classes, dtype=np.int64)
    sum_left = 0
    sum_right = sum_total
    best_gain = -np.inf
    best_pos = -1
    for i in range(n - 1):
        c = sorted_labels[i]
        # (x+1)^2 = x^2 + 2x + 1 and (x-1)^2 = x^2 - 2x + 1, kept exact in ints
        sum_left += 2 * left[c] + 1
        sum_right += -2 * (total[c] - left[c]) + 1
        left[c] += 1
        if sorted_vals[i] < sorted_vals[i + 1]:
            fl = float(i + 1)
            fr = fn - fl
            gini_l = 1.0 - float(sum_left) / (fl * fl)
            gini_r = 1.0 - float(sum_right) / (fr * fr)
            gain = gini_parent - (fl * gini_l + fr * gini_r) / fn
            if gain > best_gain:
                best_gain = gain
                best_pos = i
    return best_gain, best_pos
