"""Causal frame-by-frame inference and the gesture-to-actuator mapping.

:class:`StreamEngine` consumes raw 8-channel frames at the source rate,
block-averages them down to the working rate, runs the same causal filters
as the batch pipeline on the model's channels, and after the first full
window emits one :class:`ControlOutput` every ``stride`` working samples.
Replaying a sequence therefore reproduces the batch predictions of
:func:`wristemg.pipeline.predict_sequence` window for window.
"""
from __future__ import annotations

import enum
import time
from dataclasses import dataclass

import numpy as np

from .core import N_CHANNELS, GestureLabel, Sequence
from .features import feature_block
from .models import PipelineModel, knn_predict, tree_predict
from .pipeline import force_output_filter
from .preprocess import CausalFilter

LATENCY_BUDGET_S = 0.010
MIN_LATENCY_FRAMES = 100


class Motor(str, enum.Enum):
    FLEX_EXT = "FlexExt"
    RAD_ULN = "RadUln"
    GRASP = "Grasp"
    NONE = "None"


@dataclass(frozen=True)
class ActuatorCommand:
    motor: Motor
    direction: int
    intensity: float

    def __post_init__(self):
        if self.direction not in (-1, 0, 1):
            raise ValueError("direction must be -1, 0 or +1")
        if not 0.0 <= self.intensity <= 1.0:
            raise ValueError("intensity must lie in [0, 1]")
        if self.motor is Motor.NONE and (self.direction or self.intensity):
            raise ValueError("an idle command carries no direction or intensity")


# gesture -> (motor, direction); the sign per motor is a convention
CONTROL_TABLE = {
    GestureLabel.REST: (Motor.NONE, 0),
    GestureLabel.WF: (Motor.FLEX_EXT, +1),
    GestureLabel.WE: (Motor.FLEX_EXT, -1),
    GestureLabel.WRD: (Motor.RAD_ULN, +1),
    GestureLabel.WUD: (Motor.RAD_ULN, -1),
    GestureLabel.HC: (Motor.GRASP, +1),
}


def map_control(gesture, force_norm: float) -> ActuatorCommand:
    """Motor and direction from the gesture, intensity = clamp(force, 0, 1).

    Rest always maps to an idle command regardless of the force estimate.
    """
    g = GestureLabel(gesture)
    f = float(force_norm)
    if not np.isfinite(f):
        raise ValueError("force estimate must be finite")
    motor, direction = CONTROL_TABLE[g]
    if motor is Motor.NONE:
        return ActuatorCommand(motor, 0, 0.0)
    return ActuatorCommand(motor, direction, min(max(f, 0.0), 1.0))


@dataclass(frozen=True)
class ControlOutput:
    t_s: float
    gesture: GestureLabel
    force_norm: float
    command: ActuatorCommand
    frame_index: int = -1  # working-rate sample index of the window end

    def row(self) -> list:
        c = self.command
        return [format(self.t_s, ".6f"), self.gesture.name, format(self.force_norm, ".9g"), c.motor.value,
                str(c.direction), format(c.intensity, ".6f")]


OUTPUT_COLUMNS = ("t_s", "gesture", "force_norm", "motor", "direction", "intensity")


@dataclass(frozen=True)
class LatencyReport:
    n_frames: int
    min_s: float
    median_s: float
    p99_s: float
    max_s: float
    budget_s: float = LATENCY_BUDGET_S

    @property
    def within_budget(self) -> bool:
        return self.p99_s < self.budget_s

    def __str__(self):
        ms = 1e3
        return (f"{self.n_frames} pushes: min {self.min_s * ms:.3f} ms, median {self.median_s * ms:.3f} ms, "
                f"p99 {self.p99_s * ms:.3f} ms (budget {self.budget_s * ms:.0f} ms, "
                f"{'ok' if self.within_budget else 'exceeded'})")


class StreamEngine:
    """Per-stream state: filters, window buffer, force filter and timings.

    Parameters
    ----------
    model : PipelineModel
        Needs both the KNN and the tree.
    source_rate_hz : float, optional
        Rate of the pushed frames. Defaults to the model's working rate; an
        integer multiple of it is block-averaged down.
    warmup : bool
        Run one throw-away prediction so compiled kernels are ready before
        the first timed push.
    """

    def __init__(self, model: PipelineModel, source_rate_hz: float | None = None, warmup: bool = True):
        if model.knn is None or model.tree is None:
            raise ValueError("streaming needs a model with both the classifier and the regressor")
        self.model = model
        work = model.preprocess.working_rate_hz
        src = float(source_rate_hz or work)
        ratio = src / work
        factor = int(round(ratio))
        if factor < 1 or abs(ratio - factor) > 1e-9:
            # a non-integer ratio runs at the source rate, as the batch path does
            factor = 1
        self.source_rate_hz = src
        self.factor = factor
        self.rate_hz = src / factor
        model.preprocess.validate(self.rate_hz)
        self.cidx = np.asarray(model.channel_index)
        self.scale = model.mvc.scale[self.cidx]
        self.N = model.features.window_len
        self.stride = model.features.stride
        self.timings = []
        if warmup:
            self._warmup()
        self.reset()

    def reset(self):
        K = self.cidx.size
        p = self.model.preprocess
        self.env_filter = CausalFilter(p.lowpass_cutoff_hz, self.rate_hz, p.filter_order, n_channels=K)
        self.force_filter = force_output_filter(self.model)
        self.buffer = np.zeros((self.N, K))
        self.n_work = 0
        self.n_frames = 0
        self._pending = []
        self._pending_t = []

    def _warmup(self):
        z = np.zeros((1, self.N, self.cidx.size))
        Z = self.model.reduce(feature_block(z, self.model.features))
        knn_predict(self.model.knn, Z)
        tree_predict(self.model.tree, Z)
        force_output_filter(self.model).process(np.zeros((1, 1)))

    def push(self, frame, t_s: float | None = None) -> ControlOutput | None:
        """Consume one raw frame; returns an output on emission frames only."""
        t0 = time.perf_counter()
        frame = np.asarray(frame, dtype=float).reshape(-1)
        if frame.size != N_CHANNELS:
            raise ValueError(f"frame has {frame.size} channels, expected {N_CHANNELS}")
        if t_s is None:
            t_s = self.n_frames / self.source_rate_hz
        self.n_frames += 1
        out = None
        self._pending.append(frame)
        self._pending_t.append(float(t_s))
        if len(self._pending) == self.factor:
            if self.factor == 1:
                x, t = self._pending[0], self._pending_t[0]
            else:
                x = np.mean(np.stack(self._pending), axis=0)
                t = float(np.mean(self._pending_t))
            self._pending.clear()
            self._pending_t.clear()
            out = self._step(x, t)
        self.timings.append(time.perf_counter() - t0)
        return out

    def _step(self, x, t) -> ControlOutput | None:
        p = self.model.preprocess
        env = self.env_filter.process(np.abs(x[self.cidx])[None, :])[0]
        self.buffer[:-1] = self.buffer[1:]
        self.buffer[-1] = np.clip(env / self.scale, 0.0, p.clip_max)
        i = self.n_work
        self.n_work += 1
        if i < self.N - 1 or (i - (self.N - 1)) % self.stride:
            return None
        Z = self.model.reduce(feature_block(self.buffer[None], self.model.features))
        g = GestureLabel(int(knn_predict(self.model.knn, Z)[0]))
        raw = tree_predict(self.model.tree, Z)
        f = float(self.force_filter.process(raw[:, None])[0, 0])
        return ControlOutput(t, g, f, map_control(g, f), i)

    def run(self, frames, times=None) -> list:
        """Push every row of ``frames``; returns the emitted outputs in order."""
        frames = np.asarray(frames, dtype=float)
        outs = []
        for j in range(frames.shape[0]):
            o = self.push(frames[j], None if times is None else float(times[j]))
            if o is not None:
                outs.append(o)
        return outs

    def latency_report(self) -> LatencyReport:
        return latency_report(self)


def latency_report(engine: StreamEngine) -> LatencyReport:
    """Wall-clock statistics of :meth:`StreamEngine.push` calls so far."""
    t = np.asarray(engine.timings, dtype=float)
    if t.size < MIN_LATENCY_FRAMES:
        raise ValueError(f"latency report needs at least {MIN_LATENCY_FRAMES} pushes, got {t.size}")
    return LatencyReport(int(t.size), float(t.min()), float(np.median(t)), float(np.percentile(t, 99)),
                         float(t.max()))


def replay(model: PipelineModel, s: Sequence, warmup: bool = True) -> list:
    """Stream a whole recorded sequence through a fresh engine."""
    eng = StreamEngine(model, s.sample_rate_hz, warmup=warmup)
    return eng.run(s.emg, s.emg_t)


__all__ = [
    "Motor", "ActuatorCommand", "CONTROL_TABLE", "map_control", "ControlOutput", "OUTPUT_COLUMNS",
    "LatencyReport", "StreamEngine", "latency_report", "replay", "LATENCY_BUDGET_S",
]
