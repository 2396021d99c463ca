"""Explicit-loop kernels.

These are written in the numba nopython subset and compiled by
:mod:`wristemg.kernels._numba`. Called uncompiled they are correct but slow.
"""
import numpy as np


def sos_filter(x, sos, state):
    # x: (L, C), sos: (S, 6) rows [b0, b1, b2, 1, a1, a2], state: (S, C, 2), updated in place.
    n_samples, n_chan = x.shape
    n_sec = sos.shape[0]
    out = np.empty_like(x)
    for i in range(n_samples):
        for c in range(n_chan):
            v = x[i, c]
            for s in range(n_sec):
                b0 = sos[s, 0]
                b1 = sos[s, 1]
                b2 = sos[s, 2]
                a1 = sos[s, 4]
                a2 = sos[s, 5]
                y = b0 * v + state[s, c, 0]
                state[s, c, 0] = b1 * v - a1 * y + state[s, c, 1]
                state[s, c, 1] = b2 * v - a2 * y
                v = y
            out[i, c] = v
    return out


def burg_batch(windows, order):
    n_win, n = windows.shape
    coefs = np.zeros((n_win, order))
    ef = np.empty(n)
    eb = np.empty(n)
    c = np.zeros(order)
    tmp = np.zeros(order)
    for w in range(n_win):
        mean = 0.0
        for i in range(n):
            mean += windows[w, i]
        mean /= n
        var = 0.0
        for i in range(n):
            d = windows[w, i] - mean
            ef[i] = d
            eb[i] = d
            var += d * d
        var /= n
        if var < 1e-12:
            continue
        for j in range(order):
            c[j] = 0.0
        for m in range(order):
            num = 0.0
            den = 0.0
            for i in range(m + 1, n):
                f = ef[i]
                b = eb[i - 1]
                num += b * f
                den += f * f + b * b
            k = -2.0 * num / den if den > 0.0 else 0.0
            # walk backwards so eb[i - 1] is still the previous-order value
            for i in range(n - 1, m, -1):
                f = ef[i]
                b = eb[i - 1]
                ef[i] = f + k * b
                eb[i] = b + k * f
            for j in range(m):
                tmp[j] = c[j] + k * c[m - 1 - j]
            for j in range(m):
                c[j] = tmp[j]
            c[m] = k
        for j in range(order):
            coefs[w, j] = -c[j]
    return coefs


def knn_search(train, queries, k):
    """Exact k nearest rows of ``train`` for every query row.

    Squared distances are accumulated dimension by dimension; equal
    distances keep the lower training index first.
    """
    n, dim = train.shape
    n_q = queries.shape[0]
    idx = np.empty((n_q, k), dtype=np.int64)
    dist = np.empty((n_q, k))
    for q in range(n_q):
        best_d = np.full(k, np.inf)
        best_i = np.full(k, -1, dtype=np.int64)
        for r in range(n):
            d = 0.0
            for j in range(dim):
                diff = queries[q, j] - train[r, j]
                d += diff * diff
            if d < best_d[k - 1]:
                pos = k - 1
                while pos > 0 and best_d[pos - 1] > d:
                    best_d[pos] = best_d[pos - 1]
                    best_i[pos] = best_i[pos - 1]
                    pos -= 1
                best_d[pos] = d
                best_i[pos] = r
        for j in range(k):
            idx[q, j] = best_i[j]
            dist[q, j] = best_d[j]
    return idx, dist


def best_split(X, y, min_leaf):
    n, n_feat = X.shape
    best_gain = -np.inf
    best_feat = -1
    best_thr = 0.0
    if n < 2 * min_leaf:
        return best_feat, best_thr, best_gain
    total = 0.0
    for i in range(n):
        total += y[i]
    parent = total * total / n
    xs = np.empty(n)
    ys = np.empty(n)
    for f in range(n_feat):
        order = np.argsort(X[:, f], kind="mergesort")
        for i in range(n):
            xs[i] = X[order[i], f]
            ys[i] = y[order[i]]
        s_left = 0.0
        for i in range(n - 1):
            s_left += ys[i]
            n_left = i + 1
            n_right = n - n_left
            if n_left < min_leaf:
                continue
            if n_right < min_leaf:
                break
            if not xs[i] < xs[i + 1]:
                continue
            s_right = total - s_left
            gain = s_left * s_left / n_left + s_right * s_right / n_right - parent
            if gain > best_gain:
                best_gain = gain
                best_feat = f
                thr = 0.5 * (xs[i] + xs[i + 1])
                if thr >= xs[i + 1]:
                    thr = xs[i]
                best_thr = thr
    return best_feat, best_thr, best_gain


def tree_predict(feature, threshold, left, right, value, X):
    n = X.shape[0]
    out = np.empty(n)
    for r in range(n):
        node = 0
        while feature[node] >= 0:
            if X[r, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[r] = value[node]
    return out
