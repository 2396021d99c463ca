"""mRMR channel ranking on preprocessed envelopes.

Relevance and redundancy are plug-in mutual-information estimates on
discretized samples. Channels are binned into equal-frequency bins; the
target is either the per-sample gesture class or the normalized force cut
into equal-width bins over [0, 1]. Selection is greedy with the difference
(MID) criterion; ties go to the lower channel id.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import CHANNELS, N_CHANNELS

MIN_POOLED_SAMPLES = 1000


@dataclass(frozen=True, eq=False)
class DiscretizedSeries:
    symbols: np.ndarray
    edges: np.ndarray

    @property
    def n_bins(self) -> int:
        return self.edges.size + 1


def discretize_ef(x, bins: int) -> DiscretizedSeries:
    """Equal-frequency binning.

    Ideal cut points sit after every ``n / bins`` order statistics. A cut
    that falls inside a run of tied values moves to the nearest boundary
    between distinct values (the left one on equal distance) and is placed
    at the midpoint of the two values.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    if bins < 2:
        raise ValueError("need at least 2 bins")
    n = x.size
    if n < bins:
        raise ValueError(f"series of length {n} is shorter than the bin count {bins}")
    xs = np.sort(x)
    # positions j where xs[j-1] < xs[j]
    breaks = np.flatnonzero(xs[1:] > xs[:-1]) + 1
    edges = []
    if breaks.size:
        for i in range(1, bins):
            q = int(round(i * n / bins))
            pos = np.searchsorted(breaks, q)
            cands = []
            if pos < breaks.size:
                cands.append(breaks[pos])
            if pos > 0:
                cands.append(breaks[pos - 1])
            j = min(cands, key=lambda b: (abs(b - q), b))
            edges.append(0.5 * (xs[j - 1] + xs[j]))
    edges = np.unique(np.array(edges, dtype=float))
    symbols = np.searchsorted(edges, x, side="right").astype(np.int64)
    return DiscretizedSeries(symbols, edges)


def _symbols(a) -> np.ndarray:
    if isinstance(a, DiscretizedSeries):
        a = a.symbols
    a = np.asarray(a)
    if a.size and a.min() < 0:
        raise ValueError("symbols must be non-negative integers")
    return a.astype(np.int64).reshape(-1)


def entropy(a) -> float:
    """Plug-in entropy in bits."""
    a = _symbols(a)
    counts = np.bincount(a)
    p = counts[counts > 0] / a.size
    return float(-(p * np.log2(p)).sum())


def mutual_information(a, b) -> float:
    """Plug-in mutual information ``sum p(a,b) log2(p(a,b) / (p(a) p(b)))`` in bits."""
    a = _symbols(a)
    b = _symbols(b)
    if a.size != b.size:
        raise ValueError(f"length mismatch: {a.size} vs {b.size}")
    if a.size == 0:
        raise ValueError("empty series")
    n = a.size
    nb = int(b.max()) + 1
    joint = np.bincount(a * nb + b).astype(float)
    ca = np.bincount(a).astype(float)
    cb = np.bincount(b, minlength=nb).astype(float)
    cells = np.flatnonzero(joint)
    ia, ib = np.divmod(cells, nb)
    c = joint[cells]
    mi = float(np.sum(c / n * np.log2(c * n / (ca[ia] * cb[ib]))))
    return max(mi, 0.0)


@dataclass(frozen=True, eq=False)
class ChannelRanking:
    """Greedy selection order with the objective recorded at each pick.

    ``objective[i]`` and ``score[i]`` belong to ``order[i]``.
    """

    order: tuple
    objective: np.ndarray
    score: np.ndarray
    target: str = "gesture"

    def __post_init__(self):
        if sorted(self.order) != list(CHANNELS):
            raise ValueError("ranking must be a permutation of channels 1..8")

    def top(self, k: int) -> tuple:
        return select_channels(self, k)

    def score_of(self, ch: int) -> float:
        return float(self.score[self.order.index(ch)])

    def to_csv(self, path) -> Path:
        path = Path(path)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["channel", "rank", "objective", "score"])
            for r, (ch, obj, sc) in enumerate(zip(self.order, self.objective, self.score), start=1):
                w.writerow([ch, r, format(obj, ".9g"), format(sc, ".9g")])
        return path


def target_symbols(ps_list, target: str, force_bins: int = 10) -> np.ndarray:
    if target == "gesture":
        return np.concatenate([p.labels for p in ps_list]).astype(np.int64)
    if target == "force":
        f = np.concatenate([p.force for p in ps_list])
        return np.clip(np.floor(f * force_bins), 0, force_bins - 1).astype(np.int64)
    raise ValueError(f"unknown mRMR target {target!r} (expected 'gesture' or 'force')")


def mrmr_from_symbols(chan_symbols, y) -> tuple:
    """Greedy MID selection over discretized channels; returns (order, objectives) as 0-based indices."""
    n_ch = len(chan_symbols)
    relevance = np.array([mutual_information(c, y) for c in chan_symbols])
    redundancy = np.zeros((n_ch, n_ch))
    remaining = list(range(n_ch))
    order, objectives = [], []
    for step in range(n_ch):
        if step == 0:
            obj = {c: relevance[c] for c in remaining}
        else:
            last = order[-1]
            for c in remaining:
                redundancy[c, last] = mutual_information(chan_symbols[c], chan_symbols[last])
            obj = {c: relevance[c] - redundancy[c, order].mean() for c in remaining}
        best = remaining[0]
        for c in remaining[1:]:
            if obj[c] > obj[best]:
                best = c
        order.append(best)
        objectives.append(obj[best])
        remaining.remove(best)
    return order, np.array(objectives)


def normalized_scores(objectives) -> np.ndarray:
    obj = np.asarray(objectives, dtype=float)
    shifted = obj - obj.min()
    total = shifted.sum()
    if total <= 0:
        return np.full(obj.shape, 1.0 / obj.size)
    return shifted / total


def mrmr_rank(ps_list, target: str = "gesture", bins: int = 16, force_bins: int = 10) -> ChannelRanking:
    """Rank the 8 channels of pooled processed sequences by mRMR.

    Parameters
    ----------
    ps_list : list of ProcessedSequence
    target : {"gesture", "force"}
    bins : int
        Equal-frequency bins per channel.
    force_bins : int
        Equal-width bins of the normalized force over [0, 1].
    """
    env = np.concatenate([p.envelope for p in ps_list], axis=0)
    if env.shape[0] < MIN_POOLED_SAMPLES:
        raise ValueError(f"mRMR needs at least {MIN_POOLED_SAMPLES} pooled samples, got {env.shape[0]}")
    y = target_symbols(ps_list, target, force_bins)
    chans = [discretize_ef(env[:, c], bins).symbols for c in range(N_CHANNELS)]
    order, objectives = mrmr_from_symbols(chans, y)
    return ChannelRanking(
        order=tuple(c + 1 for c in order),
        objective=objectives,
        score=normalized_scores(objectives),
        target=target,
    )


def select_channels(r: ChannelRanking, k: int) -> tuple:
    if not 1 <= k <= N_CHANNELS:
        raise ValueError(f"k must be in 1..{N_CHANNELS}, got {k}")
    return tuple(r.order[:k])
