"""``wristemg`` command line: generate, train, eval, sweep, stream, inspect.

Settings come from the defaults, then the ``--config`` TOML file, then the
``--seed`` / ``--channels`` flags (later wins).

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, load_config
from .core import CHANNELS, N_CHANNELS, DatasetError, GestureLabel, load_dataset, save_dataset
from .evaluation import (accuracy, channel_sweep, evaluate_fe, evaluate_gr, mdape, summary_text, sweep_text,
                         write_confusion_csv, write_fold_csv, write_sweep_csv)
from .models import ModelError, load_model, save_model
from .pipeline import EnvelopeCache, fit_pipeline, predict_sequence
from .stream import OUTPUT_COLUMNS, StreamEngine
from .synthgen import generate_dataset


class UsageError(Exception):
    pass


def _channels(text: str) -> tuple:
    try:
        chans = tuple(int(c) for c in text.replace(" ", "").split(",") if c)
    except ValueError:
        raise argparse.ArgumentTypeError(f"channels must be a comma-separated list, got {text!r}") from None
    if not chans or len(set(chans)) != len(chans) or any(c not in CHANNELS for c in chans):
        raise argparse.ArgumentTypeError("channels must be distinct ids in 1..8")
    return chans


def _config(args) -> RunConfig:
    cfg = load_config(args.config)
    return cfg.with_overrides(seed=args.seed, channels=getattr(args, "channels", None))


def _existing(path, what: str) -> Path:
    p = Path(path)
    if not p.exists():
        raise UsageError(f"{what} not found: {p}")
    return p


def _out_dir(args, default: str) -> Path:
    out = Path(args.out or default)
    out.mkdir(parents=True, exist_ok=True)
    return out


# --------------------------------------------------------------- commands

def cmd_generate(args) -> int:
    cfg = _config(args)
    d = generate_dataset(cfg.synth_spec())
    path = save_dataset(d, args.out or "data")
    print(f"{len(d.sequences)} sequences, {d.n_samples} EMG samples -> {path}")
    return 0


def cmd_train(args) -> int:
    cfg = _config(args)
    d = load_dataset(_existing(args.manifest, "manifest"))
    cache = EnvelopeCache(cfg.preprocess)
    model, ctx = fit_pipeline(d.sequences, cfg, cache=cache)
    out = Path(args.out or "model.json")
    save_model(model, out)
    print(f"channels: {' '.join(map(str, model.channels))}")
    for target, r in sorted(ctx.rankings.items()):
        print(f"{target} ranking: {' '.join(map(str, r.order))}")
    print(f"features: {model.features.n_features}, PCA components: {model.pca.n_components}")
    preds = [predict_sequence(model, s, cache) for s in d.sequences]
    gr = [p for p, s in zip(preds, d.sequences) if s.protocol != "step" or cfg.eval.gr_include_step]
    acc = accuracy(np.concatenate([p.labels_true for p in gr]), np.concatenate([p.labels_pred for p in gr]))
    md = mdape(np.concatenate([p.force_pred for p in preds]), np.concatenate([p.force_true for p in preds]),
               cfg.eval.mdape_eps)
    print(f"training accuracy {acc:.4f}, training MdAPE {'n/a' if md is None else f'{md:.2f}%'}")
    print(f"model -> {out}")
    return 0


def cmd_eval(args) -> int:
    cfg = _config(args)
    d = load_dataset(_existing(args.manifest, "manifest"))
    out = _out_dir(args, "eval_out")
    cache = EnvelopeCache(cfg.preprocess)
    gr = evaluate_gr(d, cfg, cache=cache)
    fe = evaluate_fe(d, cfg, cache=cache)
    text = summary_text(gr, fe)
    (out / "summary.txt").write_text(text)
    write_fold_csv(gr, fe, out / "folds.csv")
    write_confusion_csv(gr, out / "confusion.csv")
    sys.stdout.write(text)
    print(f"reports -> {out}")
    return 0


def cmd_sweep(args) -> int:
    cfg = _config(args)
    d = load_dataset(_existing(args.manifest, "manifest"))
    out = _out_dir(args, "sweep_out")
    res = channel_sweep(d, cfg)
    write_sweep_csv(res, out / "sweep.csv")
    text = sweep_text(res)
    (out / "sweep.txt").write_text(text)
    sys.stdout.write(text)
    print(f"curves -> {out / 'sweep.csv'}")
    return 0


def _frame_rows(fh):
    reader = csv.reader(fh)
    header = next(reader, None)
    expected = ["t_s"] + [f"ch{c}" for c in CHANNELS]
    if header is None or [h.strip() for h in header] != expected:
        raise DatasetError(f"stream input must start with the header {','.join(expected)}")
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != N_CHANNELS + 1:
            raise DatasetError(f"line {lineno}: wrong channel count ({len(row) - 1})")
        try:
            vals = [float(v) for v in row]
        except ValueError:
            raise DatasetError(f"line {lineno}: non-numeric value") from None
        yield vals[0], np.array(vals[1:])


def cmd_stream(args) -> int:
    model = load_model(_existing(args.model, "model"))
    src = sys.stdin if args.input == "-" else open(_existing(args.input, "input"), newline="")
    dst = sys.stdout if not args.out else open(args.out, "w", newline="")
    try:
        rows = _frame_rows(src)
        first = list(zip(range(2), rows))
        rate = args.rate
        if rate is None:
            if len(first) < 2 or not first[1][1][0] > first[0][1][0]:
                raise UsageError("cannot infer the frame rate; pass --rate")
            rate = round(1.0 / (first[1][1][0] - first[0][1][0]), 6)
        eng = StreamEngine(model, rate)
        w = csv.writer(dst, lineterminator="\n")
        w.writerow(OUTPUT_COLUMNS)

        def frames():
            for _, fr in first:
                yield fr
            yield from rows

        for t, x in frames():
            o = eng.push(x, t)
            if o is not None:
                w.writerow(o.row())
        if len(eng.timings) >= 100:
            print(eng.latency_report(), file=sys.stderr)
    finally:
        if src is not sys.stdin:
            src.close()
        if dst is not sys.stdout:
            dst.close()
    return 0


def _inspect_dataset(path: Path) -> None:
    d = load_dataset(path)
    print(f"{len(d.sequences)} sequences, {d.n_samples} EMG samples, schema {d.schema_version}")
    counts = {}
    for s in d.sequences:
        key = f"{s.task.name}/{s.protocol}"
        counts[key] = counts.get(key, 0) + 1
    for key in sorted(counts):
        print(f"  {key}: {counts[key]}")
    rates = sorted({s.sample_rate_hz for s in d.sequences})
    print(f"  sample rates: {', '.join(f'{r:g} Hz' for r in rates)}")


def _inspect_model(path: Path) -> None:
    m = load_model(path)
    print(f"channels {' '.join(map(str, m.channels))}; window {m.features.window_len}, stride {m.features.stride}")
    print(f"features {m.features.n_features} -> PCA {m.pca.n_components} "
          f"({float(np.sum(m.pca.explained_ratio[:m.pca.n_components])):.4f} of variance)")
    if m.knn is not None:
        labels = np.bincount(m.knn.y, minlength=len(GestureLabel))
        print(f"knn: k={m.knn.k}, {m.knn.X.shape[0]} stored windows, per class "
              + " ".join(f"{g.name}={n}" for g, n in zip(GestureLabel, labels)))
    if m.tree is not None:
        print(f"tree: {m.tree.n_nodes} nodes, {m.tree.leaves.size} leaves, depth {m.tree.depth()}")
    print("mvc scale: " + " ".join(f"{v:.4g}" for v in m.mvc.scale))
    print(f"force norm: offset {m.force_norm.offset:.4g} N, scale {m.force_norm.scale:.4g} N; "
          f"output filter {m.force_filter_hz:g} Hz")


def cmd_inspect(args) -> int:
    path = _existing(args.path, "file")
    if path.is_dir():
        path = _existing(path / "manifest.json", "manifest")
    try:
        kind = json.loads(path.read_text()).get("sequences") is not None
    except (json.JSONDecodeError, AttributeError, UnicodeDecodeError):
        raise UsageError(f"{path} is neither a dataset manifest nor a model file") from None
    (_inspect_dataset if kind else _inspect_model)(path)
    return 0


# ------------------------------------------------------------------ parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="wristemg", description="EMG wrist gesture and force pipeline")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML run configuration")
    common.add_argument("--seed", type=int, help="override the configured seed")
    common.add_argument("--out", help="output file or directory")
    chans = argparse.ArgumentParser(add_help=False)
    chans.add_argument("--channels", type=_channels, help="fixed channel subset, e.g. 2,5,8")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", parents=[common], help="write the synthetic dataset")
    g.set_defaults(func=cmd_generate)
    t = sub.add_parser("train", parents=[common, chans], help="fit on every sequence and save the model")
    t.add_argument("manifest")
    t.set_defaults(func=cmd_train)
    e = sub.add_parser("eval", parents=[common, chans], help="k-fold gesture and force evaluation")
    e.add_argument("manifest")
    e.set_defaults(func=cmd_eval)
    s = sub.add_parser("sweep", parents=[common], help="accuracy and MdAPE for 1..8 channels")
    s.add_argument("manifest")
    s.set_defaults(func=cmd_sweep)
    st = sub.add_parser("stream", parents=[common], help="run the causal engine over frames")
    st.add_argument("model")
    st.add_argument("input", nargs="?", default="-", help="EMG CSV (t_s,ch1..ch8) or - for stdin")
    st.add_argument("--rate", type=float, help="frame rate in Hz (default: from the first two timestamps)")
    st.set_defaults(func=cmd_stream)
    i = sub.add_parser("inspect", parents=[common], help="summarize a dataset manifest or a model file")
    i.add_argument("path")
    i.set_defaults(func=cmd_inspect)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, ConfigError) as e:
        print(f"wristemg: error: {e}", file=sys.stderr)
        return 2
    except (DatasetError, ModelError, ValueError, OSError) as e:
        print(f"wristemg: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
