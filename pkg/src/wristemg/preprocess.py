"""EMG envelope extraction: rectify, causal low-pass, MVC normalization."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .core import N_CHANNELS, Sequence, align_force, downsample_emg

MVC_FLOOR = 1e-9


@dataclass(frozen=True)
class PreprocessConfig:
    lowpass_cutoff_hz: float = 5.0
    filter_order: int = 2
    mvc_percentile: float = 95.0
    clip_max: float = 2.0
    working_rate_hz: float = 100.0

    def validate(self, fs_hz: float | None = None):
        if self.filter_order not in (2, 4):
            raise ValueError(f"filter_order must be 2 or 4, got {self.filter_order}")
        if not 0.0 < self.mvc_percentile <= 100.0:
            raise ValueError("mvc_percentile must lie in (0, 100]")
        if not self.clip_max > 0:
            raise ValueError("clip_max must be positive")
        fs = self.working_rate_hz if fs_hz is None else fs_hz
        if not 0.0 < self.lowpass_cutoff_hz < fs / 2.0:
            raise ValueError(f"cutoff {self.lowpass_cutoff_hz} Hz outside (0, {fs / 2}) Hz")
        return self


@dataclass(frozen=True, eq=False)
class MvcReference:
    """Per-channel normalization scale (raw units), one entry per channel 1..8."""

    scale: np.ndarray

    def __post_init__(self):
        scale = np.array(self.scale, dtype=float).reshape(-1)
        if scale.shape != (N_CHANNELS,) or not np.all(scale > 0):
            raise ValueError("MVC reference needs 8 positive scales")
        scale.setflags(write=False)
        object.__setattr__(self, "scale", scale)

    def __eq__(self, other):
        return isinstance(other, MvcReference) and np.array_equal(self.scale, other.scale)


@dataclass(frozen=True, eq=False)
class ProcessedSequence:
    """Envelopes (L, 8) in [0, clip_max] aligned with labels and normalized force."""

    id: str
    subject_id: str
    hand: str
    task: int
    protocol: str
    t: np.ndarray
    envelope: np.ndarray
    force: np.ndarray
    force_raw: np.ndarray
    labels: np.ndarray
    sample_rate_hz: float

    def __len__(self):
        return self.t.shape[0]


# ------------------------------------------------------------------ filter

def butter_lowpass_sos(cutoff_hz: float, fs_hz: float, order: int = 2) -> np.ndarray:
    """Butterworth low-pass as second-order sections (bilinear, prewarped).

    Rows are ``[b0, b1, b2, 1, a1, a2]``; every section has unity DC gain.
    """
    if not 0.0 < cutoff_hz < fs_hz / 2.0:
        raise ValueError(f"cutoff {cutoff_hz} Hz outside (0, {fs_hz / 2}) Hz")
    if order < 2 or order % 2:
        raise ValueError("order must be a positive even integer")
    K = math.tan(math.pi * cutoff_hz / fs_hz)
    rows = []
    for j in range(order // 2):
        # pole pair angle of the analog prototype
        q = 1.0 / (2.0 * math.cos(math.pi * (2 * j + 1) / (2 * order)))
        norm = 1.0 + K / q + K * K
        b0 = K * K / norm
        rows.append([b0, 2.0 * b0, b0, 1.0, 2.0 * (K * K - 1.0) / norm, (1.0 - K / q + K * K) / norm])
    return np.array(rows)


def steady_state(sos: np.ndarray, x0) -> np.ndarray:
    """Filter memory (S, C, 2) that makes a constant input ``x0`` pass unchanged."""
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    state = np.empty((sos.shape[0], x0.shape[0], 2))
    v = x0.copy()
    for s, (b0, b1, b2, _, a1, a2) in enumerate(sos):
        g = (b0 + b1 + b2) / (1.0 + a1 + a2)
        y = g * v
        state[s, :, 1] = b2 * v - a2 * y
        state[s, :, 0] = y - b0 * v
        v = y
    return state


class CausalFilter:
    """Stateful SOS low-pass over C parallel channels.

    The state is initialized from the first block's first sample so constant
    inputs produce no start-up transient. One instance belongs to one stream.
    """

    def __init__(self, cutoff_hz, fs_hz, order=2, n_channels=1):
        self.sos = butter_lowpass_sos(cutoff_hz, fs_hz, order)
        self.n_channels = n_channels
        self.state = None

    def reset(self):
        self.state = None

    def process(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(-1, self.n_channels)
        if x.shape[0] == 0:
            return x.copy()
        if self.state is None:
            self.state = steady_state(self.sos, x[0])
        return kernels.sos_filter(x, self.sos, self.state)


def lowpass_causal(x, cutoff_hz: float, fs_hz: float, order: int = 2) -> np.ndarray:
    """Causal Butterworth low-pass of a 1-D series or the columns of a 2-D array."""
    x = np.asarray(x, dtype=float)
    flat = x.ndim == 1
    x2 = x.reshape(-1, 1) if flat else x
    filt = CausalFilter(cutoff_hz, fs_hz, order, n_channels=x2.shape[1])
    y = filt.process(x2)
    return y[:, 0] if flat else y


def rectify(x) -> np.ndarray:
    return np.abs(np.asarray(x, dtype=float))


def normalize(x, ref, clip_max: float = 2.0) -> np.ndarray:
    """``min(x / ref, clip_max)``; ``ref`` may be a scalar or per-column array.

    Negative inputs (filter undershoot after rectification) map to 0.
    """
    ref = np.asarray(ref, dtype=float)
    if np.any(ref <= 0):
        raise ValueError("normalization reference must be positive")
    return np.clip(np.asarray(x, dtype=float) / ref, 0.0, clip_max)


# ---------------------------------------------------------------- pipeline

def to_working_rate(s: Sequence, cfg: PreprocessConfig) -> Sequence:
    """Block-mean downsample ``s`` to the working rate when it is an integer multiple."""
    ratio = s.sample_rate_hz / cfg.working_rate_hz
    factor = int(round(ratio))
    if factor <= 1 or abs(ratio - factor) > 1e-9:
        return s
    return downsample_emg(s, factor)


def envelope(s: Sequence, cfg: PreprocessConfig) -> np.ndarray:
    """Rectified and low-passed EMG, (L, 8), before normalization.

    ``s`` must already be at its processing rate (see :func:`to_working_rate`).
    """
    cfg.validate(s.sample_rate_hz)
    return lowpass_causal(rectify(s.emg), cfg.lowpass_cutoff_hz, s.sample_rate_hz, cfg.filter_order)


def mvc_reference(seqs, cfg: PreprocessConfig, envelopes=None) -> MvcReference:
    """Per-channel MVC scale: the ``cfg.mvc_percentile`` of the envelope.

    ``seqs`` is one sequence or a list; envelopes of a list are pooled.
    Precomputed ``envelopes`` (one array per sequence) skip the filtering.
    """
    if isinstance(seqs, Sequence):
        seqs = [seqs]
    if envelopes is None:
        envelopes = [envelope(to_working_rate(s, cfg), cfg) for s in seqs]
    pooled = np.concatenate(envelopes, axis=0) if envelopes else np.empty((0, N_CHANNELS))
    if pooled.shape[0] < 100:
        raise ValueError(f"MVC reference needs at least 100 frames, got {pooled.shape[0]}")
    scale = np.percentile(pooled, cfg.mvc_percentile, axis=0)
    return MvcReference(np.maximum(scale, MVC_FLOOR))


def preprocess_sequence(s: Sequence, cfg: PreprocessConfig = PreprocessConfig(), ref=None,
                        force_norm=None, env=None) -> ProcessedSequence:
    """Rectify -> low-pass -> normalize every channel; align and normalize force.

    Without ``ref`` the MVC reference comes from ``s`` itself; without
    ``force_norm`` the force normalization is fitted on ``s``.
    """
    s = to_working_rate(s, cfg)
    if env is None:
        env = envelope(s, cfg)
    if ref is None:
        ref = mvc_reference(s, cfg, envelopes=[env])
    force_raw = align_force(s)
    if force_norm is None:
        from .models import fit_force_norm
        force_norm = fit_force_norm(force_raw)
    return ProcessedSequence(
        id=s.id,
        subject_id=s.subject_id,
        hand=s.hand.value,
        task=int(s.task),
        protocol=s.protocol,
        t=s.emg_t,
        envelope=normalize(env, ref.scale, cfg.clip_max),
        force=force_norm.apply(force_raw),
        force_raw=force_raw,
        labels=s.label_series(),
        sample_rate_hz=s.sample_rate_hz,
    )
