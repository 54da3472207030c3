"""Compiled inner loops for the pairwise-difference and prefix estimators.

Everything here operates on float64 arrays and assumes the caller has
validated shapes; the public wrappers live in :mod:`scalecp.estimators` and
:mod:`scalecp.lrv`.
"""

import numpy as np
from numba import njit


# ---------------------------------------------------------------------------
# k-th smallest pairwise difference of a sorted sample
# ---------------------------------------------------------------------------

@njit(cache=True)
def _weighted_median(vals, wts, m):
    order = np.argsort(vals[:m])
    total = 0
    for i in range(m):
        total += wts[i]
    half = (total + 1) // 2
    acc = 0
    for r in range(m):
        acc += wts[order[r]]
        if acc >= half:
            return vals[order[r]]
    return vals[order[m - 1]]


@njit(cache=True)
def select_pairwise(ys, k):
    """k-th smallest (1-based) of ys[j] - ys[i], i < j, for sorted ys.

    The differences form a matrix whose rows increase and whose columns
    decrease, so each row keeps a window [left, right] of candidate columns.
    A weighted median of the row midpoints is used as trial value; counting
    the entries below it is a two-pointer sweep.  Each round discards at
    least a quarter of the candidates, giving O(n log n) overall.
    """
    n = ys.shape[0]
    left = np.empty(n, np.int64)
    right = np.empty(n, np.int64)
    for i in range(n):
        left[i] = i + 1
        right[i] = n - 1
    p_lt = np.empty(n, np.int64)
    p_le = np.empty(n, np.int64)
    vals = np.empty(n, np.float64)
    wts = np.empty(n, np.int64)
    total = n * (n - 1) // 2

    while total > n:
        m = 0
        for i in range(n - 1):
            if left[i] <= right[i]:
                mid = (left[i] + right[i]) // 2
                vals[m] = ys[mid] - ys[i]
                wts[m] = right[i] - left[i] + 1
                m += 1
        trial = _weighted_median(vals, wts, m)

        cnt_lt = 0
        cnt_le = 0
        j_lt = 1
        j_le = 1
        for i in range(n):
            if j_lt < i + 1:
                j_lt = i + 1
            while j_lt < n and ys[j_lt] - ys[i] < trial:
                j_lt += 1
            if j_le < i + 1:
                j_le = i + 1
            while j_le < n and ys[j_le] - ys[i] <= trial:
                j_le += 1
            p_lt[i] = j_lt
            p_le[i] = j_le
            cnt_lt += j_lt - i - 1
            cnt_le += j_le - i - 1

        if k <= cnt_lt:
            for i in range(n):
                if p_lt[i] - 1 < right[i]:
                    right[i] = p_lt[i] - 1
        elif k <= cnt_le:
            return trial
        else:
            for i in range(n):
                if p_le[i] > left[i]:
                    left[i] = p_le[i]

        total = 0
        for i in range(n):
            if right[i] >= left[i]:
                total += right[i] - left[i] + 1

    below = 0
    for i in range(n):
        below += left[i] - i - 1
    cand = np.empty(total, np.float64)
    c = 0
    for i in range(n):
        for j in range(left[i], right[i] + 1):
            cand[c] = ys[j] - ys[i]
            c += 1
    cand.sort()
    return cand[k - below - 1]


@njit(cache=True)
def count_pairs_within(ys, t):
    """For sorted ys, number of j with |ys[j] - ys[i]| <= t, per i (self included)."""
    n = ys.shape[0]
    out = np.empty(n, np.int64)
    lo = 0
    hi = 0
    for i in range(n):
        while ys[i] - ys[lo] > t:
            lo += 1
        if hi < i:
            hi = i
        while hi + 1 < n and ys[hi + 1] - ys[i] <= t:
            hi += 1
        out[i] = hi - lo + 1
    return out


@njit(cache=True)
def epanechnikov_pair_sum(ys, t, h):
    """Sum over i < j of K((ys[j] - ys[i] - t) / h) for sorted ys."""
    n = ys.shape[0]
    acc = 0.0
    j0 = 1
    for i in range(n - 1):
        if j0 < i + 1:
            j0 = i + 1
        while j0 < n and ys[j0] - ys[i] - t < -h:
            j0 += 1
        j = j0
        while j < n:
            z = (ys[j] - ys[i] - t) / h
            if z > 1.0:
                break
            acc += 0.75 * (1.0 - z * z)
            j += 1
    return acc


# ---------------------------------------------------------------------------
# Fenwick (binary indexed) trees
# ---------------------------------------------------------------------------

@njit(cache=True)
def _bit_add(tree, pos, val):
    size = tree.shape[0] - 1
    while pos <= size:
        tree[pos] += val
        pos += pos & (-pos)


@njit(cache=True)
def _bit_prefix(tree, pos):
    acc = tree[0] * 0
    while pos > 0:
        acc += tree[pos]
        pos -= pos & (-pos)
    return acc


@njit(cache=True)
def _bit_find(tree, k):
    # smallest pos with prefix count >= k
    size = tree.shape[0] - 1
    step = 1
    while step * 2 <= size:
        step *= 2
    pos = 0
    rem = k
    while step > 0:
        nxt = pos + step
        if nxt <= size and tree[nxt] < rem:
            pos = nxt
            rem -= tree[nxt]
        step //= 2
    return pos + 1


def _ranks(x):
    order = np.argsort(x, kind="mergesort")
    ranks = np.empty(len(x), np.int64)
    ranks[order] = np.arange(1, len(x) + 1)
    return ranks, x[order]


# ---------------------------------------------------------------------------
# prefix estimators, entry i of each output belongs to the prefix x[:i + 2]
# ---------------------------------------------------------------------------

@njit(cache=True)
def prefix_variance(x):
    n = x.shape[0]
    out = np.empty(n - 1, np.float64)
    mean = x[0]
    m2 = 0.0
    for k in range(1, n):
        delta = x[k] - mean
        mean += delta / (k + 1)
        m2 += delta * (x[k] - mean)
        out[k - 1] = m2 / k
    return out


@njit(cache=True)
def _prefix_gini(x, ranks):
    n = x.shape[0]
    cnt = np.zeros(n + 1, np.int64)
    sm = np.zeros(n + 1, np.float64)
    out = np.empty(n - 1, np.float64)
    total = 0.0
    s_all = 0.0
    for k in range(n):
        v = x[k]
        r = ranks[k]
        c_below = _bit_prefix(cnt, r - 1)
        s_below = _bit_prefix(sm, r - 1)
        c_above = k - c_below
        s_above = s_all - s_below
        total += (v * c_below - s_below) + (s_above - v * c_above)
        _bit_add(cnt, r, 1)
        _bit_add(sm, r, v)
        s_all += v
        if k >= 1:
            out[k - 1] = 2.0 * total / (k * (k + 1.0))
    return out


def prefix_gini(x):
    ranks, _ = _ranks(x)
    return _prefix_gini(x, ranks)


@njit(cache=True)
def _prefix_mean_deviation(x, ranks, xs):
    n = x.shape[0]
    cnt = np.zeros(n + 1, np.int64)
    sm = np.zeros(n + 1, np.float64)
    out = np.empty(n - 1, np.float64)
    s_all = 0.0
    for k in range(n):
        _bit_add(cnt, ranks[k], 1)
        _bit_add(sm, ranks[k], x[k])
        s_all += x[k]
        size = k + 1
        if size < 2:
            continue
        lo_pos = _bit_find(cnt, (size + 1) // 2)
        if size % 2 == 1:
            med = xs[lo_pos - 1]
        else:
            hi_pos = _bit_find(cnt, size // 2 + 1)
            med = 0.5 * (xs[lo_pos - 1] + xs[hi_pos - 1])
        c_le = _bit_prefix(cnt, lo_pos)
        s_le = _bit_prefix(sm, lo_pos)
        dev = (med * c_le - s_le) + ((s_all - s_le) - med * (size - c_le))
        out[k - 1] = dev / (size - 1)
    return out


def prefix_mean_deviation(x):
    ranks, xs = _ranks(x)
    return _prefix_mean_deviation(x, ranks, xs)


@njit(cache=True)
def prefix_mad(x):
    n = x.shape[0]
    out = np.empty(n - 1, np.float64)
    for k in range(2, n + 1):
        seg = x[:k]
        med = np.median(seg)
        out[k - 2] = np.median(np.abs(seg - med))
    return out


@njit(cache=True)
def _prefix_pair_order_stats(x, ranks_per_k):
    """Order statistic of |x_i - x_j| among pairs inside each prefix.

    ``ranks_per_k[k - 2]`` is the 1-based rank wanted for the prefix of
    length k.  All pairs are ranked once globally; a Fenwick tree over the
    global ranks then answers each prefix query in O(log N).
    """
    n = x.shape[0]
    npairs = n * (n - 1) // 2
    d = np.empty(npairs, np.float64)
    idx = 0
    for j in range(1, n):
        for i in range(j):
            d[idx] = abs(x[j] - x[i])
            idx += 1
    perm = np.argsort(d, kind="mergesort")
    pos = np.empty(npairs, np.int64)
    for r in range(npairs):
        pos[perm[r]] = r + 1
    tree = np.zeros(npairs + 1, np.int64)
    out = np.empty(n - 1, np.float64)
    idx = 0
    for j in range(1, n):
        for i in range(j):
            _bit_add(tree, pos[idx], 1)
            idx += 1
        p = _bit_find(tree, ranks_per_k[j - 1])
        out[j - 1] = d[perm[p - 1]]
    return out


def prefix_pair_order_stats(x, ranks_per_k):
    return _prefix_pair_order_stats(x, np.ascontiguousarray(ranks_per_k, dtype=np.int64))
