"""Fit the full pipeline on training sequences and run batch predictions.

Every statistic (MVC reference, force normalization, channel ranking,
scaler, PCA, KNN store, tree) is computed from the sequences handed to
:func:`prepare_fold` only; held-out sequences are touched exclusively through
:func:`predict_sequence` with a finished model.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .config import RunConfig
from .core import Sequence
from .features import FeatureConfig, Windows, extract_features, feature_block, make_windows
from .models import (PipelineModel, fit_force_norm, knn_fit, knn_predict, tree_fit, tree_predict)
from .preprocess import (CausalFilter, PreprocessConfig, envelope, mvc_reference, preprocess_sequence,
                         to_working_rate)
from .reduction import fit_pca, fit_scaler
from .selection import ChannelRanking, mrmr_rank, select_channels


class EnvelopeCache:
    """Working-rate sequence and unnormalized envelope per sequence id.

    Filtering does not depend on any fitted statistic, so folds can share it.
    Entries are keyed by id and the EMG buffer identity, so a mutated copy of
    a sequence is never served a stale envelope.
    """

    def __init__(self, cfg: PreprocessConfig):
        self.cfg = cfg
        self._store = {}

    def get(self, s: Sequence):
        key = (s.id, id(s.emg))
        hit = self._store.get(key)
        if hit is None or hit[0] is not s:
            w = to_working_rate(s, self.cfg)
            hit = (s, w, envelope(w, self.cfg))
            self._store[key] = hit
        return hit[1], hit[2]


@dataclass
class FoldContext:
    cfg: RunConfig
    processed: list
    mvc: object
    force_norm: object
    rankings: dict = field(default_factory=dict)


def prepare_fold(train_seqs, cfg: RunConfig, targets=("gesture",), cache: EnvelopeCache | None = None) -> FoldContext:
    """Normalization constants, processed training sequences and mRMR rankings."""
    train_seqs = list(train_seqs)
    if not train_seqs:
        raise ValueError("no training sequences")
    cache = cache or EnvelopeCache(cfg.preprocess)
    works, envs = zip(*(cache.get(s) for s in train_seqs))
    mvc = mvc_reference(list(works), cfg.preprocess, envelopes=list(envs))
    force_norm = fit_force_norm(np.concatenate([np.interp(w.emg_t, w.force_t, w.force) for w in works]),
                                cfg.models.force_percentile)
    processed = []
    for w, env in zip(works, envs):
        fn = force_norm
        if cfg.models.force_norm_scope == "sequence":
            fn = fit_force_norm(np.interp(w.emg_t, w.force_t, w.force), cfg.models.force_percentile)
        processed.append(preprocess_sequence(w, cfg.preprocess, mvc, fn, env=env))
    rankings = {
        t: mrmr_rank(processed, t, cfg.selection.bins, cfg.selection.force_bins) for t in targets
    }
    return FoldContext(cfg, processed, mvc, force_norm, rankings)


def choose_channels(ctx: FoldContext, n_channels=None, target=None) -> tuple:
    sel = ctx.cfg.selection
    if sel.channels is not None and n_channels is None:
        return tuple(sel.channels)
    ranking = ctx.rankings[target or sel.target]
    return select_channels(ranking, n_channels or sel.n_channels)


def feature_config(cfg: RunConfig, channels) -> FeatureConfig:
    return replace(cfg.features, channels=tuple(channels))


def training_windows(ctx: FoldContext, fcfg: FeatureConfig) -> Windows:
    return Windows.concat(make_windows(p, fcfg) for p in ctx.processed)


def fit_on_channels(ctx: FoldContext, channels, fit_knn: bool = True, fit_tree: bool = True) -> PipelineModel:
    cfg = ctx.cfg
    fcfg = feature_config(cfg, channels)
    fm = extract_features(training_windows(ctx, fcfg), fcfg)
    scaler = fit_scaler(fm.X)
    Xs = scaler.apply(fm.X)
    pca = fit_pca(Xs, cfg.reduction.variance_target)
    Z = pca.transform(Xs)
    knn = knn_fit(Z, fm.labels, cfg.models.k) if fit_knn else None
    tree = tree_fit(Z, fm.force, cfg.models.min_leaf) if fit_tree else None
    return PipelineModel(
        channels=fcfg.channels,
        preprocess=cfg.preprocess,
        mvc=ctx.mvc,
        features=fcfg,
        scaler=scaler,
        pca=pca,
        knn=knn,
        tree=tree,
        force_norm=ctx.force_norm,
        force_filter_hz=cfg.models.force_filter_hz,
    )


def fit_pipeline(train_seqs, cfg: RunConfig, fit_knn: bool = True, fit_tree: bool = True,
                 cache: EnvelopeCache | None = None, targets=("gesture", "force")):
    """Fit every stage on ``train_seqs``; returns ``(model, context)``."""
    if cfg.selection.target not in targets:
        targets = tuple(targets) + (cfg.selection.target,)
    ctx = prepare_fold(train_seqs, cfg, targets, cache)
    return fit_on_channels(ctx, choose_channels(ctx), fit_knn, fit_tree), ctx


@dataclass(frozen=True, eq=False)
class SequencePrediction:
    seq_id: str
    end_index: np.ndarray
    t_end: np.ndarray
    labels_true: np.ndarray
    labels_pred: np.ndarray | None
    force_true: np.ndarray
    force_raw: np.ndarray | None
    force_pred: np.ndarray | None


def force_output_filter(model: PipelineModel) -> CausalFilter:
    fs = model.preprocess.working_rate_hz / model.features.stride
    return CausalFilter(model.force_filter_hz, fs, 2, n_channels=1)


def predict_sequence(model: PipelineModel, s: Sequence, cache: EnvelopeCache | None = None,
                     force_norm=None) -> SequencePrediction:
    """Window-level predictions for one sequence, as the stream engine would emit them."""
    if cache is not None:
        w, env = cache.get(s)
    else:
        w = to_working_rate(s, model.preprocess)
        env = envelope(w, model.preprocess)
    ps = preprocess_sequence(w, model.preprocess, model.mvc, force_norm or model.force_norm, env=env)
    win = make_windows(ps, model.features)
    Z = model.reduce(feature_block(win.blocks, model.features))
    labels = knn_predict(model.knn, Z) if model.knn is not None else None
    raw = force = None
    if model.tree is not None:
        raw = tree_predict(model.tree, Z)
        force = force_output_filter(model).process(raw[:, None])[:, 0]
    return SequencePrediction(s.id, win.end_index, win.t_end, win.labels, labels, win.force, raw, force)
