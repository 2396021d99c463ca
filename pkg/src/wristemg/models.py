"""KNN gesture classifier, CART force regressor, force normalization and the model bundle."""
from __future__ import annotations

import json
import os
import tempfile
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import kernels
from .core import CHANNELS, N_CHANNELS, GestureLabel
from .features import FeatureConfig
from .preprocess import MvcReference, PreprocessConfig
from .reduction import PcaModel, Scaler

MODEL_SCHEMA_VERSION = "1"
N_CLASSES = len(GestureLabel)
FORCE_SCALE_FLOOR = 1e-9
MIN_SPLIT_GAIN = 1e-12


class ModelError(ValueError):
    """A model file is unreadable or internally inconsistent."""


# -------------------------------------------------------------------- KNN

@dataclass(frozen=True, eq=False)
class KnnModel:
    X: np.ndarray
    y: np.ndarray
    k: int = 10

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    def predict(self, Q) -> np.ndarray:
        return knn_predict(self, Q)


def knn_fit(X, labels, k: int = 10) -> KnnModel:
    """Store the training set verbatim; prediction is an exact scan."""
    X = np.ascontiguousarray(X, dtype=float)
    y = np.asarray(labels, dtype=np.int64).reshape(-1)
    if X.ndim != 2 or X.shape[0] != y.size:
        raise ValueError("X must be 2-D with one label per row")
    if k < 1:
        raise ValueError("k must be >= 1")
    if X.shape[0] < k:
        raise ValueError(f"need at least k={k} training rows, got {X.shape[0]}")
    if y.size and (y.min() < 0 or y.max() >= N_CLASSES):
        raise ValueError("labels must be gesture indices 0..5")
    return KnnModel(X, y, int(k))


def vote(labels, dists) -> np.ndarray:
    """Majority vote per row; ties -> smaller summed distance -> lower class index."""
    labels = np.atleast_2d(labels)
    dists = np.atleast_2d(dists)
    n = labels.shape[0]
    counts = np.zeros((n, N_CLASSES))
    sums = np.zeros((n, N_CLASSES))
    rows = np.repeat(np.arange(n), labels.shape[1])
    np.add.at(counts, (rows, labels.ravel()), 1.0)
    np.add.at(sums, (rows, labels.ravel()), dists.ravel())
    best = counts == counts.max(axis=1, keepdims=True)
    return np.argmin(np.where(best, sums, np.inf), axis=1)


def knn_predict(m: KnnModel, Q) -> np.ndarray:
    """Predicted class index for each query row (a 1-D query gives a 1-element array)."""
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    if Q.shape[1] != m.dim:
        raise ValueError(f"query dimension {Q.shape[1]} does not match model dimension {m.dim}")
    idx, d2 = kernels.knn_search(m.X, Q, m.k)
    return vote(m.y[idx], np.sqrt(d2))


# ------------------------------------------------------------------- tree

@dataclass(frozen=True, eq=False)
class RegressionTree:
    """Flat binary tree; node 0 is the root and ``feature == -1`` marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    count: np.ndarray
    n_features: int

    @property
    def n_nodes(self) -> int:
        return self.feature.size

    @property
    def leaves(self) -> np.ndarray:
        return np.flatnonzero(self.feature < 0)

    def depth(self) -> int:
        d = np.zeros(self.n_nodes, dtype=int)
        for i in range(self.n_nodes):
            if self.feature[i] >= 0:
                d[self.left[i]] = d[self.right[i]] = d[i] + 1
        return int(d.max())

    def predict(self, X) -> np.ndarray:
        return tree_predict(self, X)


def tree_fit(X, targets, min_leaf: int = 10, max_depth: int | None = None) -> RegressionTree:
    """Grow a CART regression tree by exhaustive SSE-reduction split search.

    A node becomes a leaf when no split leaves ``min_leaf`` rows on both
    sides, or the best SSE reduction is below 1e-12. Thresholds are midpoints
    between consecutive distinct values; rows with ``x <= threshold`` go left.
    """
    X = np.ascontiguousarray(X, dtype=float)
    y = np.asarray(targets, dtype=float).reshape(-1)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("tree_fit needs a non-empty 2-D matrix")
    if X.shape[0] != y.size:
        raise ValueError("one target per row required")
    if min_leaf < 1:
        raise ValueError("min_leaf must be >= 1")
    feature, threshold, left, right, value, count = [], [], [], [], [], []

    def new_node(rows):
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        v = y[rows]
        # a constant node predicts its value exactly, not a rounded mean
        value.append(float(v[0]) if np.all(v == v[0]) else float(np.mean(v)))
        count.append(int(rows.size))
        return len(feature) - 1

    root = new_node(np.arange(y.size))
    stack = [(root, np.arange(y.size), 0)]
    while stack:
        node, rows, depth = stack.pop()
        if max_depth is not None and depth >= max_depth:
            continue
        f, thr, gain = kernels.best_split(X[rows], y[rows], min_leaf)
        if f < 0 or not gain >= MIN_SPLIT_GAIN:
            continue
        go_left = X[rows, f] <= thr
        lrows, rrows = rows[go_left], rows[~go_left]
        feature[node] = f
        threshold[node] = thr
        left[node] = new_node(lrows)
        right[node] = new_node(rrows)
        # right pushed first so the left subtree is expanded first
        stack.append((right[node], rrows, depth + 1))
        stack.append((left[node], lrows, depth + 1))
    return RegressionTree(
        feature=np.array(feature, dtype=np.int64),
        threshold=np.array(threshold, dtype=float),
        left=np.array(left, dtype=np.int64),
        right=np.array(right, dtype=np.int64),
        value=np.array(value, dtype=float),
        count=np.array(count, dtype=np.int64),
        n_features=X.shape[1],
    )


def tree_predict(t: RegressionTree, X) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != t.n_features:
        raise ValueError(f"expected {t.n_features} features, got {X.shape[1]}")
    return kernels.tree_predict(t.feature, t.threshold, t.left, t.right, t.value, X)


# ------------------------------------------------------ force normalization

@dataclass(frozen=True)
class ForceNorm:
    offset: float
    scale: float

    def apply(self, f) -> np.ndarray:
        return (np.asarray(f, dtype=float) - self.offset) / self.scale

    def invert(self, y) -> np.ndarray:
        return np.asarray(y, dtype=float) * self.scale + self.offset


def fit_force_norm(forces, percentile: float = 95.0) -> ForceNorm:
    """Offset = minimum force; scale = 95th percentile of the offset forces."""
    f = np.asarray(forces, dtype=float).reshape(-1)
    if f.size == 0:
        raise ValueError("no force samples")
    offset = float(f.min())
    scale = float(np.percentile(f - offset, percentile))
    return ForceNorm(offset, max(scale, FORCE_SCALE_FLOOR))


# ------------------------------------------------------------------ bundle

@dataclass(frozen=True, eq=False)
class PipelineModel:
    channels: tuple
    preprocess: PreprocessConfig
    mvc: MvcReference
    features: FeatureConfig
    scaler: Scaler
    pca: PcaModel
    knn: KnnModel | None
    tree: RegressionTree | None
    force_norm: ForceNorm
    force_filter_hz: float = 1.0
    schema_version: str = MODEL_SCHEMA_VERSION

    def __post_init__(self):
        self.validate()

    def validate(self):
        if tuple(self.channels) != tuple(self.features.channels):
            raise ModelError("channel subset differs from the feature config")
        nf = self.features.n_features
        if self.scaler.mean.shape != (nf,) or self.scaler.std.shape != (nf,):
            raise ModelError(f"scaler has {self.scaler.mean.shape[0]} features, feature config has {nf}")
        if np.any(self.scaler.std <= 0):
            raise ModelError("scaler std must be positive")
        if self.pca.mean.shape != (nf,) or self.pca.components.shape[1] != nf:
            raise ModelError("PCA dimensions do not match the feature length")
        if not 1 <= self.pca.n_components <= self.pca.components.shape[0]:
            raise ModelError("invalid PCA component count")
        m = self.pca.n_components
        if self.knn is not None:
            if self.knn.X.shape[1] != m:
                raise ModelError("KNN store dimension does not match the PCA output")
            if not 1 <= self.knn.k <= self.knn.X.shape[0]:
                raise ModelError("invalid KNN k")
        if self.tree is not None:
            t = self.tree
            if t.n_features != m or np.any(t.feature >= m):
                raise ModelError("tree feature indices exceed the PCA output")
            n = t.n_nodes
            internal = t.feature >= 0
            if np.any((t.left[internal] <= 0) | (t.left[internal] >= n) | (t.right[internal] >= n)):
                raise ModelError("tree child index out of range")
            if not np.all(np.isfinite(t.threshold)):
                raise ModelError("non-finite tree threshold")
        if not self.force_norm.scale > 0:
            raise ModelError("force normalization scale must be positive")

    @property
    def channel_index(self) -> np.ndarray:
        return self.features.channel_index

    def reduce(self, feature_rows) -> np.ndarray:
        """Scaler followed by PCA projection."""
        return self.pca.transform(self.scaler.apply(feature_rows))


def _arr(a):
    return np.asarray(a).tolist()


def model_to_dict(m: PipelineModel) -> dict:
    d = {
        "schema_version": m.schema_version,
        "channels": list(m.channels),
        "preprocess": asdict(m.preprocess),
        "mvc_scale": _arr(m.mvc.scale),
        "features": {**asdict(m.features), "channels": list(m.features.channels)},
        "scaler": {"mean": _arr(m.scaler.mean), "std": _arr(m.scaler.std)},
        "pca": {
            "mean": _arr(m.pca.mean),
            "components": _arr(m.pca.components),
            "explained_ratio": _arr(m.pca.explained_ratio),
            "n_components": m.pca.n_components,
        },
        "knn": None if m.knn is None else {"k": m.knn.k, "X": _arr(m.knn.X), "y": _arr(m.knn.y)},
        "tree": None if m.tree is None else {
            "n_features": m.tree.n_features,
            **{k: _arr(getattr(m.tree, k)) for k in ("feature", "threshold", "left", "right", "value", "count")},
        },
        "force_norm": {"offset": m.force_norm.offset, "scale": m.force_norm.scale},
        "force_filter_hz": m.force_filter_hz,
    }
    return d


def model_from_dict(d: dict) -> PipelineModel:
    version = str(d.get("schema_version"))
    if version != MODEL_SCHEMA_VERSION:
        raise ModelError(f"model schema version mismatch: expected {MODEL_SCHEMA_VERSION}, got {version}")
    try:
        fcfg = FeatureConfig(**{**d["features"], "channels": tuple(d["features"]["channels"])})
        pca = d["pca"]
        knn = d["knn"]
        tree = d["tree"]
        return PipelineModel(
            channels=tuple(int(c) for c in d["channels"]),
            preprocess=PreprocessConfig(**d["preprocess"]),
            mvc=MvcReference(d["mvc_scale"]),
            features=fcfg,
            scaler=Scaler(np.array(d["scaler"]["mean"], dtype=float), np.array(d["scaler"]["std"], dtype=float)),
            pca=PcaModel(
                mean=np.array(pca["mean"], dtype=float),
                components=np.array(pca["components"], dtype=float).reshape(-1, len(pca["mean"])),
                explained_ratio=np.array(pca["explained_ratio"], dtype=float),
                n_components=int(pca["n_components"]),
            ),
            knn=None if knn is None else KnnModel(
                np.ascontiguousarray(np.array(knn["X"], dtype=float).reshape(len(knn["y"]), -1)),
                np.array(knn["y"], dtype=np.int64),
                int(knn["k"]),
            ),
            tree=None if tree is None else RegressionTree(
                feature=np.array(tree["feature"], dtype=np.int64),
                threshold=np.array(tree["threshold"], dtype=float),
                left=np.array(tree["left"], dtype=np.int64),
                right=np.array(tree["right"], dtype=np.int64),
                value=np.array(tree["value"], dtype=float),
                count=np.array(tree["count"], dtype=np.int64),
                n_features=int(tree["n_features"]),
            ),
            force_norm=ForceNorm(float(d["force_norm"]["offset"]), float(d["force_norm"]["scale"])),
            force_filter_hz=float(d["force_filter_hz"]),
        )
    except ModelError:
        raise
    except (KeyError, TypeError, ValueError) as e:
        raise ModelError(f"invalid model bundle: {e}") from None


def model_to_json(m: PipelineModel) -> str:
    # float repr is the shortest string that round-trips exactly (<= 17 digits)
    return json.dumps(model_to_dict(m), separators=(",", ":"), allow_nan=False)


def save_model(m: PipelineModel, path) -> Path:
    """Write the bundle as one JSON document (atomic replace)."""
    path = Path(path)
    m.validate()
    text = model_to_json(m)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def load_model(path) -> PipelineModel:
    path = Path(path)
    try:
        d = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ModelError(f"{path}: corrupted model file ({e})") from None
    if not isinstance(d, dict):
        raise ModelError(f"{path}: not a model bundle")
    return model_from_dict(d)
