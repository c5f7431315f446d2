"""Pure-numpy kernel implementations.

Fallback path for the numba kernels in :mod:`typesift.kernels.numba_impl`.
Reductions use ``cumsum`` (strict left-to-right accumulation) and integer
intermediates so results are bit-identical to the numba loops.
"""

import numpy as np


def adam_update(param, grad, m, v, c1, c2, lr, beta1, beta2, eps):
    """One fused Adam step, in place, on flat float64 arrays.

    ``c1``/``c2`` are the precomputed bias corrections 1 - beta**t; the
    caller computes them once so both backends see identical scalars
    (numba's integer-power lowering differs from libm pow in the last ulp).
    """
    omb1 = 1.0 - beta1
    omb2 = 1.0 - beta2
    m[:] = beta1 * m + omb1 * grad
    v[:] = beta2 * v + omb2 * (grad * grad)
    param[:] = param - lr * (m / c1) / (np.sqrt(v / c2) + eps)


def sq_dists(queries, points):
    """Squared Euclidean distance matrix of shape (n_queries, n_points).

    Accumulates over the feature axis left to right so duplicated rows
    produce exactly equal distances on either backend.
    """
    nq = queries.shape[0]
    out = np.empty((nq, points.shape[0]), dtype=np.float64)
    for i in range(nq):
        diff = points - queries[i]
        out[i] = np.cumsum(diff * diff, axis=1)[:, -1]
    return out


def split_scan(sorted_vals, sorted_labels, n_classes):
    """Best Gini split over one feature's sorted values.

    Candidate thresholds sit between adjacent distinct values; position ``i``
    means the left child takes samples 0..i. Class bookkeeping is integer,
    so gains are exact and reproducible. Returns ``(best_gain, best_pos)``
    with ``best_pos == -1`` when no valid candidate exists.
    """
    n = sorted_vals.shape[0]
    if n < 2:
        return -np.inf, -1
    onehot = np.zeros((n, n_classes), dtype=np.int64)
    onehot[np.arange(n), sorted_labels] = 1
    left = np.cumsum(onehot, axis=0)[:-1]          # class counts in samples 0..i
    total = left[-1] + onehot[-1]
    sum_left = (left * left).sum(axis=1)
    right = total[np.newaxis, :] - left
    sum_right = (right * right).sum(axis=1)

    sum_total = int((total * total).sum())
    fn = float(n)
    gini_parent = 1.0 - float(sum_total) / (fn * fn)

    nl = np.arange(1, n, dtype=np.float64)
    nr = fn - nl
    gini_l = 1.0 - sum_left.astype(np.float64) / (nl * nl)
    gini_r = 1.0 - sum_right.astype(np.float64) / (nr * nr)
    gain = gini_parent - (nl * gini_l + nr * gini_r) / fn

    valid = sorted_vals[:-1] < sorted_vals[1:]
    if not valid.any():
        return -np.inf, -1
    gain = np.where(valid, gain, -np.inf)
    pos = int(np.argmax(gain))
    return float(gain[pos]), pos
