"""Standardization and PCA at a cumulative explained-variance target."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

STD_FLOOR = 1e-9


@dataclass(frozen=True, eq=False)
class Scaler:
    mean: np.ndarray
    std: np.ndarray

    @property
    def n_features(self) -> int:
        return self.mean.shape[0]

    def apply(self, X) -> np.ndarray:
        return apply_scaler(self, X)


def fit_scaler(X) -> Scaler:
    """Column means and population standard deviations (floored at 1e-9)."""
    X = np.asarray(getattr(X, "X", X), dtype=float)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ValueError("scaler needs a 2-D matrix with at least 2 rows")
    mean = X.mean(axis=0)
    # exact mean for constant columns, so round-off is not blown up by the floor
    const = np.all(X == X[0], axis=0)
    mean[const] = X[0, const]
    std = np.maximum(X.std(axis=0), STD_FLOOR)
    return Scaler(mean, std)


def apply_scaler(sc: Scaler, X) -> np.ndarray:
    X = np.asarray(getattr(X, "X", X), dtype=float)
    if X.shape[-1] != sc.n_features:
        raise ValueError(f"expected {sc.n_features} features, got {X.shape[-1]}")
    return (X - sc.mean) / sc.std


@dataclass(frozen=True, eq=False)
class PcaModel:
    """Principal directions as rows of ``components`` (all of them, sorted).

    Only the first ``n_components`` are used by :func:`pca_transform`.
    """

    mean: np.ndarray
    components: np.ndarray
    explained_ratio: np.ndarray
    n_components: int

    @property
    def n_features(self) -> int:
        return self.mean.shape[0]

    def transform(self, X) -> np.ndarray:
        return pca_transform(self, X)

    def inverse_transform(self, Z) -> np.ndarray:
        Z = np.asarray(Z, dtype=float)
        m = Z.shape[-1]
        return Z @ self.components[:m] + self.mean


def fit_pca(X, variance_target: float = 0.95, n_components: int | None = None) -> PcaModel:
    """Eigendecomposition of the sample covariance (n - 1 denominator).

    Keeps the smallest number of components whose cumulative explained
    variance ratio reaches ``variance_target``, unless ``n_components`` is
    given. Each direction is signed so its largest-magnitude entry is positive.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ValueError("PCA needs a 2-D matrix with at least 2 rows")
    if not 0.0 < variance_target <= 1.0:
        raise ValueError("variance_target must lie in (0, 1]")
    mean = X.mean(axis=0)
    Xc = X - mean
    cov = Xc.T @ Xc / (X.shape[0] - 1)
    evals, evecs = np.linalg.eigh(cov)
    evals = np.clip(evals[::-1], 0.0, None)
    evecs = evecs[:, ::-1].T.copy()
    total = evals.sum()
    if not total > 1e-300:
        raise ValueError("PCA on a degenerate (zero-variance) matrix")
    pivot = np.argmax(np.abs(evecs), axis=1)
    signs = np.sign(evecs[np.arange(evecs.shape[0]), pivot])
    evecs *= np.where(signs == 0, 1.0, signs)[:, None]
    ratio = evals / total
    if n_components is None:
        cum = np.cumsum(ratio)
        m = int(np.searchsorted(cum, variance_target - 1e-12) + 1)
        m = min(m, int(np.count_nonzero(evals > 0)) or 1, ratio.size)
    else:
        if not 1 <= n_components <= ratio.size:
            raise ValueError(f"n_components must be in 1..{ratio.size}")
        m = int(n_components)
    return PcaModel(mean=mean, components=evecs, explained_ratio=ratio, n_components=m)


def pca_transform(model: PcaModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.shape[-1] != model.n_features:
        raise ValueError(f"expected {model.n_features} features, got {X.shape[-1]}")
    return (X - model.mean) @ model.components[:model.n_components].T
