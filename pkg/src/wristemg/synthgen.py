"""Deterministic synthetic EMG/force sessions following the recording protocol.

Each gesture task is rest -> ramp -> hold -> ramp -> rest. Every channel
carries a zero-mean random-sign carrier whose magnitude follows the effort
envelope scaled by the gesture's activation template, so rectification plus
low-pass filtering recovers the envelope. The force track is the same effort
envelope times the task's maximum force. The hand-close step task raises the
grip force from 0 to 100 N in 10 N steps.

The default activation template is synthetic. It is built so that channels
2 (extensor digitorum), 5 (flexor carpi radialis) and 8 (flexor carpi
ulnaris) carry most of the gesture and force information.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .core import (CHANNELS, DEFAULT_CHANNEL_MAP, GESTURES, N_CHANNELS, Dataset, GestureLabel, Hand,
                   LabelInterval, Sequence)

# rows: Rest, WF, WE, WRD, WUD, HC; columns: channels 1..8.
# Channels 1, 3, 4, 6 and 7 carry only background noise. Hand close drives
# 2 and 8 but not 5, so the force staircase does not tie all three together.
DEFAULT_TEMPLATE = (
    (0.00, 0.00, 0.00, 0.00, 0.00, 0.00, 0.00, 0.00),
    (0.00, 0.00, 0.00, 0.00, 1.00, 0.00, 0.00, 0.30),
    (0.00, 1.00, 0.00, 0.00, 0.00, 0.00, 0.00, 0.00),
    (0.00, 0.30, 0.00, 0.00, 0.80, 0.00, 0.00, 0.00),
    (0.00, 0.00, 0.00, 0.00, 0.00, 0.00, 0.00, 1.00),
    (0.00, 0.60, 0.00, 0.00, 0.00, 0.00, 0.00, 0.80),
)

# Rest, WF, WE, WRD, WUD, HC
DEFAULT_MAX_FORCE_N = (0.0, 90.0, 70.0, 80.0, 75.0, 300.0)


@dataclass(frozen=True)
class SynthSpec:
    subjects: int = 6
    hands: tuple = ("Right", "Left")
    template: tuple = DEFAULT_TEMPLATE
    max_force_n: tuple = DEFAULT_MAX_FORCE_N
    mvc_amplitude: tuple = (70.0,) * N_CHANNELS
    noise_std: float = 1.0
    crosstalk: float = 0.0
    carrier_jitter: float = 0.15
    carrier_block: int = 2
    source_rate_hz: float = 200.0
    force_rate_hz: float = 50.0
    force_noise_n: float = 0.3
    rest_s: tuple = (5.0, 6.0)
    ramp_s: float = 1.0
    hold_s: tuple = (5.0, 6.0)
    effort_range: tuple = (0.85, 1.0)
    tremor: float = 0.03
    subject_gain_sd: float = 0.08
    strength_sd: float = 0.05
    step_levels_n: tuple = tuple(float(10 * j) for j in range(11))
    step_s: float = 5.0
    step_ramp_s: float = 0.3
    include_step: bool = True
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "template", tuple(tuple(float(v) for v in row) for row in self.template))
        object.__setattr__(self, "hands", tuple(Hand(h).value for h in self.hands))
        self.validate()

    def validate(self):
        t = np.asarray(self.template)
        if t.shape != (len(GestureLabel), N_CHANNELS):
            raise ValueError("template must be 6 gestures x 8 channels")
        if np.any(t < 0) or np.any(t > 1):
            raise ValueError("template activations must lie in [0, 1]")
        if np.any(t[GestureLabel.REST] > 0.05):
            raise ValueError("the Rest template row must be ~0")
        if len(self.max_force_n) != len(GestureLabel) or min(self.max_force_n) < 0:
            raise ValueError("max_force_n needs 6 non-negative values")
        if len(self.mvc_amplitude) != N_CHANNELS or min(self.mvc_amplitude) <= 0:
            raise ValueError("mvc_amplitude needs 8 positive values")
        if self.subjects < 1 or not self.hands:
            raise ValueError("need at least one subject and one hand")
        if not 0.0 <= self.crosstalk < 1.0:
            raise ValueError("crosstalk must lie in [0, 1)")
        for name in ("rest_s", "hold_s", "effort_range"):
            lo, hi = getattr(self, name)
            if not 0 < lo <= hi:
                raise ValueError(f"{name} must be an increasing positive range")
        if self.ramp_s <= 0 or self.step_s <= self.step_ramp_s or self.step_ramp_s <= 0:
            raise ValueError("invalid phase durations")
        if self.source_rate_hz <= 0 or self.force_rate_hz <= 0 or self.carrier_block < 1:
            raise ValueError("invalid sampling parameters")
        return self


def _rng(spec: SynthSpec, *key) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(spec.seed), *key]))


def _hand_index(hand) -> int:
    return 0 if Hand(hand) is Hand.RIGHT else 1


def _subject_profile(spec: SynthSpec, subject: int, hand) -> tuple:
    rng = _rng(spec, 1, subject, _hand_index(hand))
    gain = np.clip(1.0 + spec.subject_gain_sd * rng.standard_normal(N_CHANNELS), 0.5, 1.5)
    strength = float(np.clip(1.0 + spec.strength_sd * rng.standard_normal(), 0.7, 1.3))
    return gain, strength


def _tremor(rng, tremor: float):
    freqs = rng.uniform(0.3, 2.0, 3)
    phases = rng.uniform(0, 2 * np.pi, 3)
    amp = tremor / math.sqrt(1.5)

    def f(t):
        t = np.asarray(t, dtype=float)
        return 1.0 + amp * np.sum(np.sin(2 * np.pi * freqs[:, None] * t[None, :] + phases[:, None]), axis=0)
    return f


def _trapezoid(t, t0, ramp, hold, level):
    t = np.asarray(t, dtype=float)
    up = np.clip((t - t0) / ramp, 0.0, 1.0)
    down = np.clip((t0 + ramp + hold + ramp - t) / ramp, 0.0, 1.0)
    return level * np.minimum(up, down)


def _emg(spec, rng, effort_emg, task_row, gain):
    """Raw int8-range EMG (L, 8) for a per-sample effort envelope."""
    L = effort_emg.size
    act = effort_emg[:, None] * np.asarray(task_row)[None, :] * gain[None, :]
    if spec.crosstalk:
        neigh = 0.5 * (np.roll(act, 1, axis=1) + np.roll(act, -1, axis=1))
        act = (1.0 - spec.crosstalk) * act + spec.crosstalk * neigh
    n_blocks = -(-L // spec.carrier_block)
    sign = rng.choice([-1.0, 1.0], size=(n_blocks, N_CHANNELS))
    mag = np.abs(1.0 + spec.carrier_jitter * rng.standard_normal((n_blocks, N_CHANNELS)))
    carrier = np.repeat(sign * mag, spec.carrier_block, axis=0)[:L]
    raw = np.asarray(spec.mvc_amplitude)[None, :] * act * carrier
    raw += spec.noise_std * rng.standard_normal((L, N_CHANNELS))
    return np.clip(np.round(raw), -128, 127)


def _force_track(spec, rng, t, effort_fn):
    f = effort_fn(t) + spec.force_noise_n * rng.standard_normal(t.size)
    return np.round(np.maximum(f, 0.0), 2)


def generate_sequence(spec: SynthSpec, subject: int, hand, task) -> Sequence:
    """One rest/ramp/hold/ramp/rest task for ``subject`` (1-based) and ``hand``."""
    task = GestureLabel(task)
    hand = Hand(hand)
    rng = _rng(spec, 2, subject, _hand_index(hand), int(task))
    gain, strength = _subject_profile(spec, subject, hand)
    # millisecond phase boundaries keep label times exact in 9-digit CSVs
    rest1 = round(rng.uniform(*spec.rest_s), 3)
    hold = round(rng.uniform(*spec.hold_s), 3)
    rest2 = round(rng.uniform(*spec.rest_s), 3)
    level = rng.uniform(*spec.effort_range)
    tremor = _tremor(rng, spec.tremor)
    ramp = spec.ramp_s
    duration = rest1 + 2 * ramp + hold + rest2

    def effort(t):
        return _trapezoid(t, rest1, ramp, hold, level) * tremor(t)

    fs = spec.source_rate_hz
    t_emg = np.arange(int(round(duration * fs))) / fs
    emg = _emg(spec, rng, effort(t_emg), spec.template[task], gain)
    t_force = np.arange(int(round(duration * spec.force_rate_hz))) / spec.force_rate_hz
    max_force = spec.max_force_n[task] * strength
    force = _force_track(spec, rng, t_force, lambda t: effort(t) * max_force)
    labels = []
    if task is not GestureLabel.REST:
        labels.append(LabelInterval(round(rest1 + 0.5 * ramp, 6), round(rest1 + 1.5 * ramp + hold, 6), task))
    return Sequence(
        id=f"s{subject:02d}_{hand.value[0]}_{task.name}",
        subject_id=f"s{subject:02d}",
        hand=hand,
        task=task,
        emg_t=t_emg,
        emg=emg,
        force_t=t_force,
        force=force,
        labels=labels,
        sample_rate_hz=fs,
        protocol="mvc",
    )


def step_force_profile(spec: SynthSpec, t) -> np.ndarray:
    """Staircase through ``spec.step_levels_n`` with short linear transitions."""
    t = np.asarray(t, dtype=float)
    levels = np.asarray(spec.step_levels_n, dtype=float)
    j = np.clip((t // spec.step_s).astype(int), 0, levels.size - 1)
    prev = levels[np.maximum(j - 1, 0)]
    frac = np.clip((t - j * spec.step_s) / spec.step_ramp_s, 0.0, 1.0)
    return np.where(j == 0, levels[0], prev + (levels[j] - prev) * frac)


def generate_step_task(spec: SynthSpec, subject: int, hand) -> Sequence:
    """Hand-close force staircase 0 -> 100 N; EMG tracks the force."""
    hand = Hand(hand)
    rng = _rng(spec, 3, subject, _hand_index(hand))
    gain, strength = _subject_profile(spec, subject, hand)
    hc_max = spec.max_force_n[GestureLabel.HC] * strength
    tremor = _tremor(rng, spec.tremor)
    duration = spec.step_s * len(spec.step_levels_n)

    def force_fn(t):
        return step_force_profile(spec, t) * tremor(t)

    fs = spec.source_rate_hz
    t_emg = np.arange(int(round(duration * fs))) / fs
    emg = _emg(spec, rng, force_fn(t_emg) / hc_max, spec.template[GestureLabel.HC], gain)
    t_force = np.arange(int(round(duration * spec.force_rate_hz))) / spec.force_rate_hz
    force = _force_track(spec, rng, t_force, force_fn)
    first_active = int(np.argmax(np.asarray(spec.step_levels_n) > 0))
    t_on = round(first_active * spec.step_s + 0.5 * spec.step_ramp_s, 6)
    return Sequence(
        id=f"s{subject:02d}_{hand.value[0]}_HCstep",
        subject_id=f"s{subject:02d}",
        hand=hand,
        task=GestureLabel.HC,
        emg_t=t_emg,
        emg=emg,
        force_t=t_force,
        force=force,
        labels=[LabelInterval(t_on, round(duration + 1.0, 6), GestureLabel.HC)],
        sample_rate_hz=fs,
        protocol="step",
    )


def generate_dataset(spec: SynthSpec = SynthSpec()) -> Dataset:
    """All subjects x hands x 5 gestures, plus one step task per subject and hand."""
    seqs = []
    for subject in range(1, spec.subjects + 1):
        for hand in spec.hands:
            for g in GESTURES:
                seqs.append(generate_sequence(spec, subject, hand, g))
            if spec.include_step:
                seqs.append(generate_step_task(spec, subject, hand))
    return Dataset(sequences=seqs, channel_map=dict(DEFAULT_CHANNEL_MAP))


def gesture_subset(d: Dataset) -> Dataset:
    """The rest/contract/rest gesture sequences only (no step tasks)."""
    return d.subset(lambda s: s.protocol == "mvc")
