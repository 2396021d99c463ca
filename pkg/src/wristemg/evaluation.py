"""Sequence-level k-fold cross-validation, metrics and channel-count sweeps.

Folds hold out whole sequences. Every fold refits the complete pipeline
(normalization, mRMR, scaler, PCA, KNN / tree) on its training sequences and
scores window-level predictions on the held-out ones. Gesture recognition
ranks channels against the gesture target and force estimation against the
force target; both rankings are kept so their agreement can be reported.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import RunConfig
from .core import Dataset, GestureLabel
from .models import N_CLASSES, fit_force_norm
from .pipeline import EnvelopeCache, choose_channels, fit_on_channels, predict_sequence, prepare_fold

# reference curves quoted for 1, 2, 3 and 4+ channels; annotation only
REFERENCE_GR_ACCURACY = ("50", "70", "85", ">90")
REFERENCE_FE_MDAPE = ("22", "13", "9", "<5")


def _reference(table, n: int) -> str:
    return table[min(n, 4) - 1]


# ------------------------------------------------------------------ folds

@dataclass(frozen=True)
class FoldPlan:
    k: int
    seed: int
    held_out: tuple  # one tuple of sequence ids per fold

    def train_ids(self, fold: int, all_ids) -> tuple:
        out = set(self.held_out[fold])
        return tuple(i for i in all_ids if i not in out)

    def split(self, fold: int, seqs) -> tuple:
        """``(train, test)`` sequence lists for ``fold``, in dataset order."""
        out = set(self.held_out[fold])
        train = [s for s in seqs if s.id not in out]
        test = [s for s in seqs if s.id in out]
        return train, test


def _sequences(d) -> list:
    return list(d.sequences if isinstance(d, Dataset) else d)


def kfold_by_sequence(d, k: int = 5, seed: int = 0) -> FoldPlan:
    """Assign whole sequences to ``k`` folds, stratified by task and protocol.

    Each stratum is shuffled with a seeded generator and dealt round-robin,
    continuing the deal across strata so fold sizes differ by at most one.
    """
    seqs = _sequences(d)
    if k < 2:
        raise ValueError("need at least 2 folds")
    if len(seqs) < k:
        raise ValueError(f"{len(seqs)} sequences cannot fill {k} folds")
    strata = {}
    for s in seqs:
        strata.setdefault((s.protocol, int(s.task)), []).append(s.id)
    rng = np.random.default_rng(seed)
    folds = [[] for _ in range(k)]
    pos = 0
    for key in sorted(strata):
        ids = strata[key]
        for j in rng.permutation(len(ids)):
            folds[pos % k].append(ids[j])
            pos += 1
    order = {s.id: i for i, s in enumerate(seqs)}
    return FoldPlan(k, int(seed), tuple(tuple(sorted(f, key=order.__getitem__)) for f in folds))


# ---------------------------------------------------------------- metrics

def accuracy(true, pred) -> float:
    true = np.asarray(true)
    pred = np.asarray(pred)
    if true.shape != pred.shape:
        raise ValueError("length mismatch")
    if true.size == 0:
        raise ValueError("no samples to score")
    return float(np.mean(true == pred))


def confusion_matrix(true, pred, n_classes: int = N_CLASSES) -> np.ndarray:
    """Counts with true classes on rows and predictions on columns."""
    true = np.asarray(true, dtype=np.int64)
    pred = np.asarray(pred, dtype=np.int64)
    if true.shape != pred.shape:
        raise ValueError("length mismatch")
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (true, pred), 1)
    return cm


def rmse(pred, truth) -> float:
    pred = np.asarray(pred, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if pred.shape != truth.shape:
        raise ValueError("length mismatch")
    if truth.size == 0:
        raise ValueError("no samples to score")
    return float(np.sqrt(np.mean((pred - truth) ** 2)))


def mdape(pred, truth, eps: float = 0.05) -> float | None:
    """Median absolute percentage error over samples with ``|truth| >= eps``.

    Returns ``None`` when no sample qualifies, so an all-rest series is not
    reported as a perfect 0 %.
    """
    pred = np.asarray(pred, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if pred.shape != truth.shape:
        raise ValueError("length mismatch")
    if not eps > 0:
        raise ValueError("eps must be positive")
    ok = np.abs(truth) >= eps
    if not ok.any():
        return None
    return float(np.median(100.0 * np.abs(pred[ok] - truth[ok]) / np.abs(truth[ok])))


def _mean_std(values) -> tuple:
    v = np.array([x for x in values if x is not None], dtype=float)
    if v.size == 0:
        return None, None
    return float(v.mean()), float(v.std())


# ---------------------------------------------------------------- reports

@dataclass(frozen=True, eq=False)
class FoldResult:
    fold: int
    channels: tuple
    n_windows: int
    accuracy: float | None = None
    confusion: np.ndarray | None = None
    rmse: float | None = None
    mdape: float | None = None
    ranking: tuple = ()


@dataclass(frozen=True, eq=False)
class GrReport:
    n_channels: int
    folds: tuple
    plan: FoldPlan
    curve: tuple = ()

    @property
    def fold_accuracy(self) -> np.ndarray:
        return np.array([f.accuracy for f in self.folds])

    @property
    def mean_accuracy(self) -> float:
        return float(self.fold_accuracy.mean())

    @property
    def std_accuracy(self) -> float:
        return float(self.fold_accuracy.std())

    @property
    def confusion(self) -> np.ndarray:
        return sum(f.confusion for f in self.folds)


@dataclass(frozen=True, eq=False)
class FeReport:
    n_channels: int
    folds: tuple
    plan: FoldPlan
    curve: tuple = ()

    @property
    def fold_rmse(self) -> np.ndarray:
        return np.array([f.rmse for f in self.folds])

    @property
    def fold_mdape(self) -> list:
        return [f.mdape for f in self.folds]

    @property
    def mean_rmse(self) -> float:
        return float(self.fold_rmse.mean())

    @property
    def mean_mdape(self) -> float | None:
        return _mean_std(self.fold_mdape)[0]

    @property
    def std_mdape(self) -> float | None:
        return _mean_std(self.fold_mdape)[1]


@dataclass(frozen=True)
class SweepRow:
    n_channels: int
    gr_accuracy: float | None = None
    gr_accuracy_std: float | None = None
    fe_mdape: float | None = None
    fe_mdape_std: float | None = None
    fe_rmse: float | None = None


@dataclass(frozen=True, eq=False)
class SweepResult:
    rows: tuple
    gr: tuple = ()  # GrReport per channel count
    fe: tuple = ()  # FeReport per channel count
    rankings: dict = field(default_factory=dict)

    def row(self, n: int) -> SweepRow:
        return next(r for r in self.rows if r.n_channels == n)


# ------------------------------------------------------------- fold loop

def gr_sequences(d, cfg: RunConfig) -> list:
    seqs = _sequences(d)
    if cfg.eval.gr_include_step:
        return seqs
    return [s for s in seqs if s.protocol != "step"]


def _test_force_norm(cfg: RunConfig, cache: EnvelopeCache, s, fold_norm):
    if cfg.models.force_norm_scope != "sequence":
        return fold_norm
    w, _ = cache.get(s)
    return fit_force_norm(np.interp(w.emg_t, w.force_t, w.force), cfg.models.force_percentile)


def _run_folds(seqs, cfg: RunConfig, plan: FoldPlan, task: str, counts, cache: EnvelopeCache) -> dict:
    """Fold results keyed by channel count (``None`` = configured channels)."""
    target = "gesture" if task == "gr" else "force"
    out = {n: [] for n in counts}
    for fold in range(plan.k):
        train, test = plan.split(fold, seqs)
        if not test:
            raise ValueError(f"fold {fold} holds out no sequence")
        ctx = prepare_fold(train, cfg, (target,), cache)
        ranking = ctx.rankings[target].order
        for n in counts:
            chans = choose_channels(ctx, n, target)
            model = fit_on_channels(ctx, chans, fit_knn=task == "gr", fit_tree=task == "fe")
            preds = [predict_sequence(model, s, cache, _test_force_norm(cfg, cache, s, ctx.force_norm))
                     for s in test]
            n_win = int(sum(p.t_end.size for p in preds))
            if task == "gr":
                t = np.concatenate([p.labels_true for p in preds])
                y = np.concatenate([p.labels_pred for p in preds])
                res = FoldResult(fold, tuple(chans), n_win, accuracy=accuracy(t, y),
                                 confusion=confusion_matrix(t, y), ranking=ranking)
            else:
                t = np.concatenate([p.force_true for p in preds])
                y = np.concatenate([p.force_pred for p in preds])
                res = FoldResult(fold, tuple(chans), n_win, rmse=rmse(y, t),
                                 mdape=mdape(y, t, cfg.eval.mdape_eps), ranking=ranking)
            out[n].append(res)
    return out


def fit_fold_model(d, cfg: RunConfig, plan: FoldPlan, fold: int, task: str = "gr",
                   cache: EnvelopeCache | None = None):
    """The model a fold trains, built from that fold's training sequences only."""
    seqs = gr_sequences(d, cfg) if task == "gr" else _sequences(d)
    train, _ = plan.split(fold, seqs)
    target = "gesture" if task == "gr" else "force"
    ctx = prepare_fold(train, cfg, (target,), cache)
    n = None if cfg.selection.channels is not None else cfg.selection.n_channels
    return fit_on_channels(ctx, choose_channels(ctx, n, target))


def _plan_for(seqs, cfg: RunConfig, plan) -> FoldPlan:
    return plan if plan is not None else kfold_by_sequence(seqs, cfg.eval.folds, cfg.seed)


def evaluate_gr(d, cfg: RunConfig = RunConfig(), plan: FoldPlan | None = None, n_channels: int | None = None,
                cache: EnvelopeCache | None = None) -> GrReport:
    """Cross-validated window-level gesture accuracy.

    Uses the configured channel list when one is set, otherwise the top
    ``n_channels`` (default ``cfg.selection.n_channels``) of each fold's ranking.
    """
    seqs = gr_sequences(d, cfg)
    plan = _plan_for(seqs, cfg, plan)
    n = n_channels if n_channels is not None or cfg.selection.channels is None else None
    if n is None and cfg.selection.channels is None:
        n = cfg.selection.n_channels
    folds = _run_folds(seqs, cfg, plan, "gr", [n], cache or EnvelopeCache(cfg.preprocess))[n]
    return GrReport(len(folds[0].channels), tuple(folds), plan)


def evaluate_fe(d, cfg: RunConfig = RunConfig(), plan: FoldPlan | None = None, n_channels: int | None = None,
                cache: EnvelopeCache | None = None) -> FeReport:
    """Cross-validated force RMSE and MdAPE (normalized units, filtered predictions)."""
    seqs = _sequences(d)
    plan = _plan_for(seqs, cfg, plan)
    n = n_channels if n_channels is not None or cfg.selection.channels is None else None
    if n is None and cfg.selection.channels is None:
        n = cfg.selection.n_channels
    folds = _run_folds(seqs, cfg, plan, "fe", [n], cache or EnvelopeCache(cfg.preprocess))[n]
    return FeReport(len(folds[0].channels), tuple(folds), plan)


def channel_sweep(d, cfg: RunConfig = RunConfig(), counts=range(1, 9), tasks=("gr", "fe"),
                  cache: EnvelopeCache | None = None) -> SweepResult:
    """Accuracy and MdAPE per channel count; one mRMR ranking per fold and task."""
    counts = [int(c) for c in counts]
    if not counts or min(counts) < 1 or max(counts) > 8:
        raise ValueError("channel counts must lie in 1..8")
    cache = cache or EnvelopeCache(cfg.preprocess)
    gr = fe = None
    rankings = {}
    if "gr" in tasks:
        seqs = gr_sequences(d, cfg)
        plan = _plan_for(seqs, cfg, None)
        res = _run_folds(seqs, cfg, plan, "gr", counts, cache)
        gr = {n: GrReport(n, tuple(res[n]), plan) for n in counts}
        rankings["gesture"] = [f.ranking for f in res[counts[0]]]
    if "fe" in tasks:
        seqs = _sequences(d)
        plan = _plan_for(seqs, cfg, None)
        res = _run_folds(seqs, cfg, plan, "fe", counts, cache)
        fe = {n: FeReport(n, tuple(res[n]), plan) for n in counts}
        rankings["force"] = [f.ranking for f in res[counts[0]]]
    rows = []
    for n in counts:
        row = {"n_channels": n}
        if gr:
            row.update(gr_accuracy=gr[n].mean_accuracy, gr_accuracy_std=gr[n].std_accuracy)
        if fe:
            row.update(fe_mdape=fe[n].mean_mdape, fe_mdape_std=fe[n].std_mdape, fe_rmse=fe[n].mean_rmse)
        rows.append(SweepRow(**row))
    return SweepResult(tuple(rows), tuple(gr[n] for n in counts) if gr else (),
                       tuple(fe[n] for n in counts) if fe else (), rankings)


def monotone_within(values, tol: float, increasing: bool = True) -> bool:
    """True when no step moves against the expected direction by more than ``tol``."""
    v = np.asarray(values, dtype=float)
    steps = np.diff(v) if increasing else -np.diff(v)
    return bool(np.all(steps >= -tol))


# ---------------------------------------------------------------- output

def _fmt(x) -> str:
    return "" if x is None else format(x, ".6g")


def write_sweep_csv(res: SweepResult, path) -> Path:
    """One row per channel count with the reference curve values alongside."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["n_channels", "gr_accuracy", "gr_accuracy_std", "gr_reference_pct",
                    "fe_mdape_pct", "fe_mdape_std", "fe_rmse", "fe_reference_mdape_pct"])
        for r in res.rows:
            w.writerow([r.n_channels, _fmt(r.gr_accuracy), _fmt(r.gr_accuracy_std),
                        _reference(REFERENCE_GR_ACCURACY, r.n_channels), _fmt(r.fe_mdape),
                        _fmt(r.fe_mdape_std), _fmt(r.fe_rmse), _reference(REFERENCE_FE_MDAPE, r.n_channels)])
    return path


def write_fold_csv(gr: GrReport | None, fe: FeReport | None, path) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["task", "fold", "channels", "n_windows", "accuracy", "rmse", "mdape_pct"])
        for name, rep in (("gr", gr), ("fe", fe)):
            if rep is None:
                continue
            for f in rep.folds:
                w.writerow([name, f.fold, " ".join(map(str, f.channels)), f.n_windows,
                            _fmt(f.accuracy), _fmt(f.rmse), _fmt(f.mdape)])
    return path


def write_confusion_csv(gr: GrReport, path) -> Path:
    path = Path(path)
    names = [g.name for g in GestureLabel]
    cm = gr.confusion
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["true\\pred"] + names)
        for name, row in zip(names, cm):
            w.writerow([name] + [int(v) for v in row])
    return path


def summary_text(gr: GrReport | None = None, fe: FeReport | None = None) -> str:
    lines = []
    if gr is not None:
        lines.append(f"gesture recognition: {gr.n_channels} channel(s), {gr.plan.k} folds")
        for f in gr.folds:
            lines.append(f"  fold {f.fold}: channels {list(f.channels)}  accuracy {f.accuracy:.4f}  ({f.n_windows} windows)")
        lines.append(f"  mean accuracy {gr.mean_accuracy:.4f} +/- {gr.std_accuracy:.4f}")
        lines.append("  confusion (rows true, cols predicted): " + " ".join(g.name for g in GestureLabel))
        for g, row in zip(GestureLabel, gr.confusion):
            lines.append(f"    {g.name:>4} " + " ".join(f"{int(v):6d}" for v in row))
    if fe is not None:
        lines.append(f"force estimation: {fe.n_channels} channel(s), {fe.plan.k} folds")
        for f in fe.folds:
            md = "n/a" if f.mdape is None else f"{f.mdape:.2f}%"
            lines.append(f"  fold {f.fold}: channels {list(f.channels)}  RMSE {f.rmse:.4f}  MdAPE {md}")
        md = "n/a" if fe.mean_mdape is None else f"{fe.mean_mdape:.2f}% +/- {fe.std_mdape:.2f}"
        lines.append(f"  mean RMSE {fe.mean_rmse:.4f}  mean MdAPE {md}")
    return "\n".join(lines) + "\n"


def sweep_text(res: SweepResult) -> str:
    lines = ["n  accuracy  (ref %)  MdAPE %  (ref %)"]
    for r in res.rows:
        acc = "-" if r.gr_accuracy is None else f"{r.gr_accuracy:.4f}"
        md = "-" if r.fe_mdape is None else f"{r.fe_mdape:.2f}"
        lines.append(f"{r.n_channels}  {acc:>8}  ({_reference(REFERENCE_GR_ACCURACY, r.n_channels):>3})    "
                     f"{md:>6}  ({_reference(REFERENCE_FE_MDAPE, r.n_channels):>3})")
    for target, orders in res.rankings.items():
        lines.append(f"{target} ranking per fold: " + "; ".join(" ".join(map(str, o)) for o in orders))
    return "\n".join(lines) + "\n"


def write_traces_csv(preds, path) -> Path:
    """Plot-ready per-window traces: class and force over time per sequence."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["seq_id", "window_end", "t_s", "label_true", "label_pred", "force_true", "force_pred"])
        for p in preds:
            for i in range(p.t_end.size):
                w.writerow([p.seq_id, int(p.end_index[i]), _fmt(p.t_end[i]), int(p.labels_true[i]),
                            "" if p.labels_pred is None else int(p.labels_pred[i]), _fmt(p.force_true[i]),
                            "" if p.force_pred is None else _fmt(p.force_pred[i])])
    return path


__all__ = [
    "FoldPlan", "FoldResult", "GrReport", "FeReport", "SweepRow", "SweepResult", "kfold_by_sequence",
    "accuracy", "confusion_matrix", "rmse", "mdape", "evaluate_gr", "evaluate_fe", "channel_sweep",
    "monotone_within", "fit_fold_model", "write_sweep_csv", "write_fold_csv", "write_confusion_csv", "summary_text",
    "sweep_text", "write_traces_csv", "gr_sequences",
]
