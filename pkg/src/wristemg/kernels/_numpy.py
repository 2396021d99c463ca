"""Pure-numpy versions of the hot kernels.

Same signatures and results as the compiled loops; used when numba is
missing or disabled with ``WRISTEMG_DISABLE_NUMBA=1``.
"""
import numpy as np


def sos_filter(x, sos, state):
    # time recursion stays a Python loop; vectorized across channels
    out = np.empty_like(x)
    b0, b1, b2 = sos[:, 0], sos[:, 1], sos[:, 2]
    a1, a2 = sos[:, 4], sos[:, 5]
    for i in range(x.shape[0]):
        v = x[i].copy()
        for s in range(sos.shape[0]):
            y = b0[s] * v + state[s, :, 0]
            state[s, :, 0] = b1[s] * v - a1[s] * y + state[s, :, 1]
            state[s, :, 1] = b2[s] * v - a2[s] * y
            v = y
        out[i] = v
    return out


def burg_batch(windows, order):
    windows = np.asarray(windows, dtype=float)
    n_win, n = windows.shape
    x = windows - windows.mean(axis=1, keepdims=True)
    var = np.mean(x * x, axis=1)
    ef = x.copy()
    eb = x.copy()
    c = np.zeros((n_win, order))
    for m in range(order):
        f = ef[:, m + 1:]
        b = eb[:, m:-1]
        num = np.sum(b * f, axis=1)
        den = np.sum(f * f + b * b, axis=1)
        safe = np.where(den > 0.0, den, 1.0)
        k = np.where(den > 0.0, -2.0 * num / safe, 0.0)
        new_f = f + k[:, None] * b
        new_b = b + k[:, None] * f
        ef[:, m + 1:] = new_f
        eb[:, m + 1:] = new_b
        prev = c[:, :m].copy()
        c[:, :m] = prev + k[:, None] * prev[:, ::-1]
        c[:, m] = k
    coefs = -c
    coefs[var < 1e-12] = 0.0
    return coefs


def knn_search(train, queries, k, chunk=256):
    n, dim = train.shape
    n_q = queries.shape[0]
    idx = np.empty((n_q, k), dtype=np.int64)
    dist = np.empty((n_q, k))
    for lo in range(0, n_q, chunk):
        q = queries[lo:lo + chunk]
        d = np.zeros((q.shape[0], n))
        for j in range(dim):
            diff = q[:, j, None] - train[None, :, j]
            d += diff * diff
        order = np.argsort(d, axis=1, kind="stable")[:, :k]
        idx[lo:lo + chunk] = order
        dist[lo:lo + chunk] = np.take_along_axis(d, order, axis=1)
    return idx, dist


def best_split(X, y, min_leaf):
    n, n_feat = X.shape
    best = (-1, 0.0, -np.inf)
    if n < 2 * min_leaf:
        return best
    total = np.cumsum(y)[-1]
    parent = total * total / n
    n_left = np.arange(1, n, dtype=float)
    n_right = n - n_left
    size_ok = (n_left >= min_leaf) & (n_right >= min_leaf)
    for f in range(n_feat):
        order = np.argsort(X[:, f], kind="stable")
        xs = X[order, f]
        s_left = np.cumsum(y[order])[:-1]
        s_right = total - s_left
        gain = s_left * s_left / n_left + s_right * s_right / n_right - parent
        ok = size_ok & (xs[:-1] < xs[1:])
        if not ok.any():
            continue
        gain = np.where(ok, gain, -np.inf)
        i = int(np.argmax(gain))
        if gain[i] > best[2]:
            thr = 0.5 * (xs[i] + xs[i + 1])
            if thr >= xs[i + 1]:
                thr = xs[i]
            best = (f, float(thr), float(gain[i]))
    return best


def tree_predict(feature, threshold, left, right, value, X):
    node = np.zeros(X.shape[0], dtype=np.int64)
    rows = np.arange(X.shape[0])
    active = feature[node] >= 0
    while active.any():
        r = rows[active]
        nd = node[active]
        go_left = X[r, feature[nd]] <= threshold[nd]
        node[r] = np.where(go_left, left[nd], right[nd])
        active = feature[node] >= 0
    return value[node]
