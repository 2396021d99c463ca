from numba import njit

from . import _loops

sos_filter = njit(cache=True)(_loops.sos_filter)
burg_batch = njit(cache=True)(_loops.burg_batch)
knn_search = njit(cache=True)(_loops.knn_search)
best_split = njit(cache=True)(_loops.best_split)
tree_predict = njit(cache=True)(_loops.tree_predict)
