import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from wristemg.core import GestureLabel
from wristemg.pipeline import predict_sequence
from wristemg.stream import ActuatorCommand, Motor, StreamEngine, latency_report, map_control, replay


def test_map_control_examples():
    assert map_control(GestureLabel.REST, 0.7) == ActuatorCommand(Motor.NONE, 0, 0.0)
    assert map_control(GestureLabel.WF, 0.5) == ActuatorCommand(Motor.FLEX_EXT, 1, 0.5)
    assert map_control(GestureLabel.HC, 1.4) == ActuatorCommand(Motor.GRASP, 1, 1.0)
    assert map_control(GestureLabel.WE, 0.2).direction == -1
    assert map_control(GestureLabel.WRD, 0.2).motor is Motor.RAD_ULN
    assert map_control(GestureLabel.WUD, -0.3) == ActuatorCommand(Motor.RAD_ULN, -1, 0.0)
    with pytest.raises(ValueError):
        map_control(GestureLabel.WF, math.nan)


@given(st.sampled_from(list(GestureLabel)), st.floats(-5, 5))
def test_map_control_invariants(g, f):
    c = map_control(g, f)
    assert 0.0 <= c.intensity <= 1.0
    if c.motor is Motor.NONE:
        assert c.direction == 0 and c.intensity == 0.0
    else:
        assert c.intensity == min(max(f, 0.0), 1.0)


def test_idle_command_invariant():
    with pytest.raises(ValueError):
        ActuatorCommand(Motor.NONE, 1, 0.0)


def test_warm_up(trained):
    model, _ = trained
    eng = StreamEngine(model, 100.0)
    outs = [eng.push(np.zeros(8)) for _ in range(model.features.window_len)]
    assert all(o is None for o in outs[:-1]) and outs[-1] is not None
    eng = StreamEngine(model, 200.0)
    outs = [eng.push(np.zeros(8)) for _ in range(2 * model.features.window_len)]
    assert all(o is None for o in outs[:-1]) and outs[-1] is not None


def test_zero_stream_is_rest(trained):
    model, _ = trained
    outs = StreamEngine(model, 200.0).run(np.zeros((1000, 8)))
    assert {o.gesture for o in outs} == {GestureLabel.REST}
    assert all(o.command.motor is Motor.NONE for o in outs)
    assert max(abs(o.force_norm) for o in outs) < 0.05


def test_replay_matches_batch(trained, default_ds):
    model, _ = trained
    s = default_ds.sequences[13]
    outs = replay(model, s)
    p = predict_sequence(model, s)
    assert [int(o.gesture) for o in outs] == p.labels_pred.tolist()
    assert np.max(np.abs(np.array([o.force_norm for o in outs]) - p.force_pred)) <= 1e-9
    assert [o.frame_index for o in outs] == p.end_index.tolist()


def test_prefix_and_determinism(trained, default_ds):
    model, _ = trained
    s = default_ds.sequences[20]
    full = StreamEngine(model, 200.0).run(s.emg, s.emg_t)
    again = StreamEngine(model, 200.0).run(s.emg, s.emg_t)
    part = StreamEngine(model, 200.0).run(s.emg[:777], s.emg_t[:777])
    assert again == full
    assert part == full[:len(part)] and len(part) > 0


def test_channel_count_and_latency_guards(trained):
    model, _ = trained
    eng = StreamEngine(model, 100.0)
    with pytest.raises(ValueError, match="channels"):
        eng.push(np.zeros(7))
    with pytest.raises(ValueError, match="at least 100"):
        latency_report(eng)
    eng.run(np.zeros((150, 8)))
    rep = eng.latency_report()
    assert rep.min_s <= rep.median_s <= rep.p99_s <= rep.max_s
    assert "p99" in str(rep)


def test_output_row_format(trained):
    model, _ = trained
    o = StreamEngine(model, 100.0).run(np.zeros((20, 8)))[0]
    row = o.row()
    assert row[1] == "REST" and row[3] == "None" and row[4] == "0" and len(row) == 6
