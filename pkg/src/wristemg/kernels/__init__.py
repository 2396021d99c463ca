"""Hot numeric kernels with a numba path and a pure-numpy fallback.

The backend is chosen once at import time. Set ``WRISTEMG_DISABLE_NUMBA=1``
to force the numpy implementations (useful for debugging and for comparing
backends, see ``benchmarks/bench_kernels.py``). Both modules stay importable
directly as :mod:`wristemg.kernels._numpy` and :mod:`wristemg.kernels._numba`.
"""
import os

import numpy as np

from . import _numpy

_disabled = os.environ.get("WRISTEMG_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes")

if _disabled:
    _impl = _numpy
    BACKEND = "numpy"
else:
    try:
        from . import _numba as _impl
        BACKEND = "numba"
    except ImportError:  # pragma: no cover - numba is a declared dependency
        _impl = _numpy
        BACKEND = "numpy"


def sos_filter(x, sos, state):
    """Run a cascade of second-order sections (transposed direct form II).

    Parameters
    ----------
    x : ndarray, shape (L, C)
    sos : ndarray, shape (S, 6)
    state : ndarray, shape (S, C, 2)
        Filter memory, updated in place.
    """
    return _impl.sos_filter(np.ascontiguousarray(x, dtype=float), sos, state)


def burg_batch(windows, order):
    """Burg AR coefficients (sign convention ``x[n] = sum a_k x[n-k] + e[n]``) per row."""
    return _impl.burg_batch(np.ascontiguousarray(windows, dtype=float), int(order))


def knn_search(train, queries, k):
    return _impl.knn_search(
        np.ascontiguousarray(train, dtype=float), np.ascontiguousarray(queries, dtype=float), int(k)
    )


def best_split(X, y, min_leaf):
    f, thr, gain = _impl.best_split(
        np.ascontiguousarray(X, dtype=float), np.ascontiguousarray(y, dtype=float), int(min_leaf)
    )
    return int(f), float(thr), float(gain)


def tree_predict(feature, threshold, left, right, value, X):
    return _impl.tree_predict(feature, threshold, left, right, value, np.ascontiguousarray(X, dtype=float))
