"""Sliding windows and the time/spatial feature expansion.

Feature row layout for channels ``c1..cK`` and AR order ``p``::

    per channel: MAV RMS VAR STD MAX MIN WL AR1..ARp
    spatial:     MAV RMS VAR STD MAX MIN          (when include_spatial)

so a row has ``K * (7 + p) + 6 * include_spatial`` entries.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels
from .core import CHANNELS, check_channel

TIME_NAMES = ("MAV", "RMS", "VAR", "STD", "MAX", "MIN", "WL")
SPATIAL_NAMES = ("MAV", "RMS", "VAR", "STD", "MAX", "MIN")
AR_DEGENERATE_VAR = 1e-12


@dataclass(frozen=True)
class FeatureConfig:
    window_len: int = 20
    stride: int = 5
    ar_order: int = 4
    include_spatial: bool = True
    channels: tuple = CHANNELS

    def __post_init__(self):
        object.__setattr__(self, "channels", tuple(check_channel(c) for c in self.channels))
        if self.ar_order < 0:
            raise ValueError("ar_order must be non-negative")
        if self.window_len < self.ar_order + 2:
            raise ValueError(f"window_len must be at least ar_order + 2 = {self.ar_order + 2}")
        if self.stride < 1:
            raise ValueError("stride must be >= 1")
        if not 1 <= len(self.channels) <= 8 or len(set(self.channels)) != len(self.channels):
            raise ValueError("channels must be 1..8 distinct channel ids")

    @property
    def n_features(self) -> int:
        return len(self.channels) * (7 + self.ar_order) + 6 * int(self.include_spatial)

    def feature_names(self) -> list:
        names = []
        for c in self.channels:
            names += [f"ch{c}_{n}" for n in TIME_NAMES]
            names += [f"ch{c}_AR{j}" for j in range(1, self.ar_order + 1)]
        if self.include_spatial:
            names += [f"sp_{n}" for n in SPATIAL_NAMES]
        return names

    @property
    def channel_index(self) -> np.ndarray:
        return np.array(self.channels, dtype=np.int64) - 1


@dataclass(frozen=True, eq=False)
class Window:
    block: np.ndarray      # (N, K) envelope samples
    t_end: float
    label: int
    force: float


@dataclass(frozen=True, eq=False)
class Windows:
    """A batch of full windows cut from one or more sequences."""

    blocks: np.ndarray     # (W, N, K)
    end_index: np.ndarray  # sample index of each window's last sample
    t_end: np.ndarray
    labels: np.ndarray
    force: np.ndarray
    seq_ids: tuple = ()

    def __len__(self):
        return self.blocks.shape[0]

    def __getitem__(self, i) -> Window:
        return Window(self.blocks[i], float(self.t_end[i]), int(self.labels[i]), float(self.force[i]))

    @classmethod
    def concat(cls, parts):
        parts = list(parts)
        return cls(
            blocks=np.concatenate([p.blocks for p in parts]),
            end_index=np.concatenate([p.end_index for p in parts]),
            t_end=np.concatenate([p.t_end for p in parts]),
            labels=np.concatenate([p.labels for p in parts]),
            force=np.concatenate([p.force for p in parts]),
            seq_ids=sum((p.seq_ids for p in parts), ()),
        )


def window_ends(length: int, window_len: int, stride: int) -> np.ndarray:
    if length < window_len:
        raise ValueError(f"sequence of {length} samples is shorter than the window ({window_len})")
    count = (length - window_len) // stride + 1
    return window_len - 1 + stride * np.arange(count)


def make_windows(ps, cfg: FeatureConfig) -> Windows:
    """Cut full windows from a processed sequence.

    Windows end at samples ``N-1, N-1+stride, ...``. The label is the one at
    the last sample (causal); the force target is the window mean.
    """
    ends = window_ends(len(ps), cfg.window_len, cfg.stride)
    env = ps.envelope[:, cfg.channel_index]
    offsets = np.arange(-cfg.window_len + 1, 1)
    rows = ends[:, None] + offsets[None, :]
    return Windows(
        blocks=env[rows],
        end_index=ends,
        t_end=ps.t[ends],
        labels=ps.labels[ends],
        force=ps.force[rows].mean(axis=1),
        seq_ids=(ps.id,) * ends.size,
    )


def time_features_batch(blocks: np.ndarray, ar_order: int) -> np.ndarray:
    """Per-channel time-domain features for blocks shaped (W, N, K) -> (W, K, 7 + p)."""
    blocks = np.asarray(blocks, dtype=float)
    W, N, K = blocks.shape
    out = np.empty((W, K, 7 + ar_order))
    mean = blocks.mean(axis=1)
    var = ((blocks - mean[:, None, :]) ** 2).mean(axis=1)
    out[:, :, 0] = np.abs(blocks).mean(axis=1)
    out[:, :, 1] = np.sqrt((blocks * blocks).mean(axis=1))
    out[:, :, 2] = var
    out[:, :, 3] = np.sqrt(var)
    out[:, :, 4] = blocks.max(axis=1)
    out[:, :, 5] = blocks.min(axis=1)
    out[:, :, 6] = np.abs(np.diff(blocks, axis=1)).sum(axis=1)
    if ar_order:
        series = np.ascontiguousarray(blocks.transpose(0, 2, 1).reshape(W * K, N))
        out[:, :, 7:] = kernels.burg_batch(series, ar_order).reshape(W, K, ar_order)
    return out


def time_features(x, ar_order: int = 4) -> np.ndarray:
    """MAV, RMS, VAR, STD, MAX, MIN, WL and ``ar_order`` Burg AR coefficients of one series."""
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size < ar_order + 2:
        raise ValueError(f"need at least {ar_order + 2} samples for AR order {ar_order}")
    return time_features_batch(x[None, :, None], ar_order)[0, 0]


def spatial_features(block) -> np.ndarray:
    """Cross-channel MAV, RMS, VAR, STD, MAX, MIN at each sample, averaged over the window.

    ``block`` is (N, K) for one window or (W, N, K) for a batch.
    """
    b = np.asarray(block, dtype=float)
    single = b.ndim == 2
    if single:
        b = b[None]
    mean = b.mean(axis=2)
    var = ((b - mean[:, :, None]) ** 2).mean(axis=2)
    per_t = np.stack([
        np.abs(b).mean(axis=2),
        np.sqrt((b * b).mean(axis=2)),
        var,
        np.sqrt(var),
        b.max(axis=2),
        b.min(axis=2),
    ], axis=2)
    out = per_t.mean(axis=1)
    return out[0] if single else out


def feature_block(blocks: np.ndarray, cfg: FeatureConfig) -> np.ndarray:
    """Feature rows (W, n_features) for window blocks (W, N, K)."""
    W = blocks.shape[0]
    parts = [time_features_batch(blocks, cfg.ar_order).reshape(W, -1)]
    if cfg.include_spatial:
        parts.append(spatial_features(blocks))
    return np.concatenate(parts, axis=1)


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    X: np.ndarray
    names: tuple
    labels: np.ndarray
    force: np.ndarray
    t_end: np.ndarray = field(default=None)
    seq_ids: tuple = ()

    def __len__(self):
        return self.X.shape[0]

    def to_csv(self, path) -> Path:
        path = Path(path)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(list(self.names) + ["label", "force_target"])
            for row, lab, f in zip(self.X, self.labels, self.force):
                w.writerow([format(v, ".9g") for v in row] + [int(lab), format(f, ".9g")])
        return path


def extract_features(windows: Windows, cfg: FeatureConfig) -> FeatureMatrix:
    if len(windows) == 0:
        raise ValueError("no windows to extract features from")
    if windows.blocks.shape[1:] != (cfg.window_len, len(cfg.channels)):
        raise ValueError("window shape does not match the feature config")
    X = feature_block(windows.blocks, cfg)
    return FeatureMatrix(
        X=X,
        names=tuple(cfg.feature_names()),
        labels=np.asarray(windows.labels),
        force=np.asarray(windows.force),
        t_end=np.asarray(windows.t_end),
        seq_ids=windows.seq_ids,
    )
