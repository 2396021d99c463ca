import numpy as np
import pytest

from wristemg.core import GestureLabel, save_dataset
from wristemg.preprocess import PreprocessConfig, envelope, preprocess_sequence, to_working_rate
from wristemg.synthgen import (SynthSpec, generate_dataset, generate_sequence, generate_step_task, gesture_subset,
                               step_force_profile)


def test_counts(default_ds):
    assert len(default_ds.sequences) == 72
    assert len(gesture_subset(default_ds).sequences) == 60
    assert len(generate_dataset(SynthSpec(subjects=1, hands=("Left",))).sequences) == 6


def test_ids_and_protocols(default_ds):
    ids = [s.id for s in default_ds.sequences]
    assert ids[:6] == ["s01_R_WF", "s01_R_WE", "s01_R_WRD", "s01_R_WUD", "s01_R_HC", "s01_R_HCstep"]
    assert sum(s.protocol == "step" for s in default_ds.sequences) == 12


def test_rest_task_is_quiet():
    s = generate_sequence(SynthSpec(), 1, "Right", GestureLabel.REST)
    assert s.labels == ()
    assert s.force.max() < 2.0
    env = envelope(to_working_rate(s, PreprocessConfig()), PreprocessConfig())
    assert env.mean() < 0.05 * 70


def test_hc_plateau():
    spec = SynthSpec()
    s = generate_sequence(spec, 4, "Right", GestureLabel.HC)
    iv = s.labels[0]
    hold = (s.force_t > iv.t_start + 1.0) & (s.force_t < iv.t_end - 1.0)
    plateau = np.median(s.force[hold])
    assert 0.8 * spec.max_force_n[GestureLabel.HC] <= plateau <= 1.15 * spec.max_force_n[GestureLabel.HC]
    ps = preprocess_sequence(s)
    h = (ps.t > iv.t_start + 1.0) & (ps.t < iv.t_end - 0.5)
    assert abs(np.median(ps.envelope[h, 7]) - 1.0) <= 0.1


def test_same_seed_same_bytes(tmp_path):
    spec = SynthSpec(subjects=1, seed=9)
    a = save_dataset(generate_dataset(spec), tmp_path / "a").parent
    b = save_dataset(generate_dataset(spec), tmp_path / "b").parent
    c = save_dataset(generate_dataset(SynthSpec(subjects=1, seed=10)), tmp_path / "c").parent
    names = sorted(p.name for p in a.iterdir())
    assert names == sorted(p.name for p in b.iterdir())
    assert all((a / n).read_bytes() == (b / n).read_bytes() for n in names)
    assert any((a / n).read_bytes() != (c / n).read_bytes() for n in names)


def test_staircase_levels():
    spec = SynthSpec()
    assert len(spec.step_levels_n) == 11
    centers = np.arange(11) * spec.step_s + 0.5 * spec.step_s + 1.0
    assert step_force_profile(spec, centers).tolist() == [10.0 * j for j in range(11)]


def test_step_task_tracks_force():
    spec = SynthSpec()
    s = generate_step_task(spec, 2, "Left")
    assert s.task == GestureLabel.HC and s.protocol == "step"
    w = to_working_rate(s, PreprocessConfig())
    env = envelope(w, PreprocessConfig())[:, 7]
    means = [env[(w.emg_t > j * spec.step_s + 1.5) & (w.emg_t < (j + 1) * spec.step_s - 0.5)].mean()
             for j in range(11)]
    assert np.all(np.diff(means) > 0)
    f = [np.median(s.force[(s.force_t > j * 5 + 1) & (s.force_t < j * 5 + 4)]) for j in range(11)]
    assert np.allclose(f, np.arange(0, 101, 10), atol=4.0)


def test_synth_settings_validation():
    with pytest.raises(ValueError):
        SynthSpec(template=((0.5,) * 8,) * 6)
    with pytest.raises(ValueError):
        SynthSpec(crosstalk=1.0)
    with pytest.raises(ValueError):
        SynthSpec(hold_s=(6.0, 5.0))
    with pytest.raises(ValueError):
        SynthSpec(hands=("Middle",))


def test_raw_values_fit_int8():
    s = generate_sequence(SynthSpec(mvc_amplitude=(200.0,) * 8), 1, "Right", GestureLabel.WUD)
    assert s.emg.min() >= -128 and s.emg.max() <= 127
    assert np.array_equal(s.emg, np.round(s.emg))
