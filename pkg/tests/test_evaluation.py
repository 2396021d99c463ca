import csv
import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from wristemg.config import EvalConfig, RunConfig
from wristemg.evaluation import (FoldPlan, accuracy, channel_sweep, confusion_matrix, evaluate_fe, evaluate_gr,
                                 gr_sequences, kfold_by_sequence, mdape, monotone_within, rmse, summary_text,
                                 sweep_text, write_confusion_csv, write_fold_csv, write_sweep_csv)
from wristemg.synthgen import SynthSpec, generate_dataset


class Stub:
    def __init__(self, i, task=1, protocol="mvc"):
        self.id, self.task, self.protocol = f"q{i:02d}", task, protocol


def test_fold_sizes():
    seqs = [Stub(i, task=1 + i % 5) for i in range(60)]
    plan = kfold_by_sequence(seqs, 5, seed=0)
    assert [len(f) for f in plan.held_out] == [12] * 5
    assert [len(f) for f in kfold_by_sequence(seqs[:5], 5).held_out] == [1] * 5
    assert kfold_by_sequence(seqs, 5, seed=3) == kfold_by_sequence(seqs, 5, seed=3)
    with pytest.raises(ValueError):
        kfold_by_sequence(seqs[:4], 5)


def test_folds_are_stratified(default_ds, cfg):
    plan = kfold_by_sequence(gr_sequences(default_ds, cfg), 5, seed=0)
    by_id = {s.id: s for s in default_ds.sequences}
    for fold in plan.held_out:
        per_task = np.bincount([int(by_id[i].task) for i in fold], minlength=6)[1:]
        # 12 sequences per task over 5 folds -> 2 or 3 of each task per fold
        assert len(fold) == 12 and set(per_task.tolist()) <= {2, 3}


@given(st.integers(2, 10), st.integers(0, 60), st.integers(0, 1000))
def test_plan_partitions(k, extra, seed):
    seqs = [Stub(i, task=i % 6, protocol="step" if i % 7 == 0 else "mvc") for i in range(k + extra)]
    plan = kfold_by_sequence(seqs, k, seed)
    flat = [i for f in plan.held_out for i in f]
    assert sorted(flat) == sorted(s.id for s in seqs)
    sizes = [len(f) for f in plan.held_out]
    assert max(sizes) - min(sizes) <= 1
    train, test = plan.split(0, seqs)
    assert {s.id for s in train}.isdisjoint({s.id for s in test})


def test_mdape_examples():
    t = np.array([0.2, 0.5, 1.0, 0.8])
    assert mdape(t, t) == 0.0
    assert math.isclose(mdape(1.1 * t, t), 10.0, rel_tol=1e-9)
    assert mdape(np.ones(3), np.full(3, 0.01)) is None
    # samples below eps are ignored, not counted as errors
    assert mdape(np.array([5.0, 0.5]), np.array([0.0, 0.5])) == 0.0
    with pytest.raises(ValueError):
        mdape(t, t[:2])


@given(st.lists(st.floats(0.05, 2.0), min_size=1, max_size=30), st.floats(0.1, 10))
def test_mdape_scale_free(truth, c):
    t = np.array(truth)
    p = t * 1.2
    assert math.isclose(mdape(c * p, c * t, eps=0.05 * c), mdape(p, t), rel_tol=1e-9)


def test_perfect_stubs():
    y = np.array([0, 1, 2, 3, 4, 5, 5, 0])
    assert accuracy(y, y) == 1.0
    cm = confusion_matrix(y, y)
    assert np.array_equal(cm, np.diag(np.bincount(y, minlength=6)))
    f = np.linspace(0, 1, 9)
    assert rmse(f, f) == 0.0 and mdape(f, f) == 0.0
    assert math.isclose(rmse([1.0, 3.0], [0.0, 0.0]), math.sqrt(5.0))


def test_monotone_within():
    assert monotone_within([0.5, 0.7, 0.69], 0.02)
    assert not monotone_within([0.5, 0.45], 0.02)
    assert monotone_within([20, 15, 16], 2, increasing=False)


@pytest.fixture(scope="module")
def quick():
    d = generate_dataset(SynthSpec(subjects=2, seed=5))
    cfg = replace(RunConfig(), eval=EvalConfig(folds=3))
    return d, cfg


def test_gr_report_structure(quick):
    d, cfg = quick
    rep = evaluate_gr(d, cfg)
    assert len(rep.folds) == 3 and rep.n_channels == 3
    assert 0 <= rep.mean_accuracy <= 1
    for f in rep.folds:
        assert f.confusion.sum() == f.n_windows
    assert "mean accuracy" in summary_text(rep)


def test_sweep_consistency_and_csv(quick, tmp_path):
    d, cfg = quick
    res = channel_sweep(d, cfg)
    assert [r.n_channels for r in res.rows] == list(range(1, 9))
    gr8 = evaluate_gr(d, cfg, n_channels=8)
    fe8 = evaluate_fe(d, cfg, n_channels=8)
    assert res.row(8).gr_accuracy == gr8.mean_accuracy
    assert res.row(8).fe_mdape == fe8.mean_mdape and res.row(8).fe_rmse == fe8.mean_rmse
    path = write_sweep_csv(res, tmp_path / "sweep.csv")
    rows = list(csv.DictReader(open(path)))
    assert len(rows) == 8
    assert [r["gr_reference_pct"] for r in rows[:4]] == ["50", "70", "85", ">90"]
    assert [r["fe_reference_mdape_pct"] for r in rows[:4]] == ["22", "13", "9", "<5"]
    assert rows[7]["gr_reference_pct"] == ">90"
    assert set(res.rankings) == {"gesture", "force"}
    assert "ranking per fold" in sweep_text(res)
    write_fold_csv(gr8, fe8, tmp_path / "folds.csv")
    write_confusion_csv(gr8, tmp_path / "cm.csv")
    assert len((tmp_path / "folds.csv").read_text().splitlines()) == 1 + 6


def test_fixed_channels_are_used(quick):
    d, cfg = quick
    rep = evaluate_fe(d, cfg.with_overrides(channels=(1, 4)))
    assert all(f.channels == (1, 4) for f in rep.folds)


def test_sequence_scope_force_norm(quick):
    d, cfg = quick
    cfg = replace(cfg, models=replace(cfg.models, force_norm_scope="sequence"))
    rep = evaluate_fe(d, cfg, n_channels=2)
    assert np.all(rep.fold_rmse >= 0)


def test_gr_excludes_step_tasks(quick):
    d, cfg = quick
    assert len(gr_sequences(d, cfg)) == 20
    inc = replace(cfg, eval=replace(cfg.eval, gr_include_step=True))
    assert len(gr_sequences(d, inc)) == 24


def test_plan_split_keeps_dataset_order():
    seqs = [Stub(i) for i in range(6)]
    plan = FoldPlan(2, 0, (("q04", "q01"), ("q00", "q02", "q03", "q05")))
    train, test = plan.split(0, seqs)
    assert [s.id for s in test] == ["q01", "q04"]
    assert plan.train_ids(1, [s.id for s in seqs]) == ("q01", "q04")
