"""Domain types, the on-disk dataset format, downsampling and force alignment.

On disk a dataset is a ``manifest.json`` plus three CSV files per sequence::

    manifest.json   {"schema_version": "1", "channel_map": {...}, "sequences": [...]}
    <id>_emg.csv    t_s,ch1,...,ch8
    <id>_force.csv  t_s,force_n
    <id>_labels.csv t_start_s,t_end_s,label

Reals are written with 9 significant digits.
"""
from __future__ import annotations

import csv
import enum
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence as Seq

import numpy as np

SCHEMA_VERSION = "1"
N_CHANNELS = 8
CHANNELS = tuple(range(1, N_CHANNELS + 1))

DEFAULT_CHANNEL_MAP = {
    1: "Extensor Carpi Ulnaris",
    2: "Extensor Digitorum",
    3: "Extensor Carpi Radialis Longus e Brevis",
    4: "Brachioradialis",
    5: "Flexor Carpi Radialis",
    6: "Palmaris Longus",
    7: "Flexor Digitorum Superficialis",
    8: "Flexor Carpi Ulnaris",
}


class DatasetError(ValueError):
    """Invalid dataset content or files."""


class GestureLabel(enum.IntEnum):
    # the integer value doubles as class index and tie-break order
    REST = 0
    WF = 1
    WE = 2
    WRD = 3
    WUD = 4
    HC = 5

    @classmethod
    def parse(cls, token: str) -> "GestureLabel":
        try:
            return cls[token.strip().upper()]
        except KeyError:
            raise ValueError(f"unknown gesture label {token!r}") from None


GESTURES = (GestureLabel.WF, GestureLabel.WE, GestureLabel.WRD, GestureLabel.WUD, GestureLabel.HC)


class Hand(str, enum.Enum):
    LEFT = "Left"
    RIGHT = "Right"


def check_channel(ch: int) -> int:
    if not isinstance(ch, (int, np.integer)) or not 1 <= int(ch) <= N_CHANNELS:
        raise ValueError(f"channel id must be an integer in 1..{N_CHANNELS}, got {ch!r}")
    return int(ch)


@dataclass(frozen=True)
class LabelInterval:
    t_start: float
    t_end: float
    label: GestureLabel

    def __post_init__(self):
        if not self.t_start < self.t_end:
            raise DatasetError(f"label interval needs t_start < t_end, got {self.t_start}..{self.t_end}")


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Sequence:
    """One recorded task.

    ``emg`` is an (L, 8) array of raw readings at ``emg_t``; the force track has
    its own timeline. Samples not covered by a label interval are Rest.
    ``protocol`` is ``"mvc"`` for the rest/contract/rest gesture tasks and
    ``"step"`` for the graded hand-close force staircase.
    """

    id: str
    subject_id: str
    hand: Hand
    task: GestureLabel
    emg_t: np.ndarray
    emg: np.ndarray
    force_t: np.ndarray
    force: np.ndarray
    labels: tuple = ()
    sample_rate_hz: float = 100.0
    protocol: str = "mvc"

    def __post_init__(self):
        object.__setattr__(self, "hand", Hand(self.hand))
        object.__setattr__(self, "task", GestureLabel(self.task))
        object.__setattr__(self, "emg_t", _frozen(self.emg_t))
        object.__setattr__(self, "emg", _frozen(self.emg))
        object.__setattr__(self, "force_t", _frozen(self.force_t))
        object.__setattr__(self, "force", _frozen(self.force))
        object.__setattr__(self, "labels", tuple(sorted(self.labels, key=lambda iv: iv.t_start)))
        self.validate()

    def validate(self):
        sid = self.id
        if not self.sample_rate_hz > 0:
            raise DatasetError(f"{sid}: sample_rate_hz must be positive")
        if self.emg.ndim != 2 or self.emg.shape[1] != N_CHANNELS:
            raise DatasetError(f"{sid}: wrong channel count (expected {N_CHANNELS})")
        if self.emg.shape[0] != self.emg_t.shape[0]:
            raise DatasetError(f"{sid}: emg timestamps and frames differ in length")
        if self.force.shape != self.force_t.shape:
            raise DatasetError(f"{sid}: force timestamps and samples differ in length")
        for name, t in (("emg", self.emg_t), ("force", self.force_t)):
            bad = np.flatnonzero(np.diff(t) <= 0)
            if bad.size:
                raise DatasetError(f"{sid}: non-monotone {name} timestamps at row {bad[0] + 1}")
        if not np.all(np.isfinite(self.emg)):
            raise DatasetError(f"{sid}: non-finite EMG values")
        if not np.all(np.isfinite(self.force)):
            raise DatasetError(f"{sid}: non-finite force values")
        if np.any(self.force < 0):
            raise DatasetError(f"{sid}: negative force")
        for a, b in zip(self.labels, self.labels[1:]):
            if b.t_start < a.t_end:
                raise DatasetError(f"{sid}: overlapping label intervals")
        if self.protocol not in ("mvc", "step"):
            raise DatasetError(f"{sid}: unknown protocol {self.protocol!r}")

    @property
    def n_frames(self) -> int:
        return self.emg.shape[0]

    def label_series(self, t=None) -> np.ndarray:
        """Gesture index at each timestamp (intervals are half-open)."""
        t = self.emg_t if t is None else np.asarray(t, dtype=float)
        out = np.zeros(t.shape, dtype=np.int64)
        for iv in self.labels:
            out[(t >= iv.t_start) & (t < iv.t_end)] = int(iv.label)
        return out

    def __eq__(self, other):
        if not isinstance(other, Sequence):
            return NotImplemented
        return (
            self.id == other.id
            and self.subject_id == other.subject_id
            and self.hand == other.hand
            and self.task == other.task
            and self.sample_rate_hz == other.sample_rate_hz
            and self.protocol == other.protocol
            and self.labels == other.labels
            and np.array_equal(self.emg_t, other.emg_t)
            and np.array_equal(self.emg, other.emg)
            and np.array_equal(self.force_t, other.force_t)
            and np.array_equal(self.force, other.force)
        )

    __hash__ = None


@dataclass(frozen=True, eq=True)
class Dataset:
    sequences: tuple
    channel_map: dict = field(default_factory=lambda: dict(DEFAULT_CHANNEL_MAP))
    schema_version: str = SCHEMA_VERSION

    def __post_init__(self):
        object.__setattr__(self, "sequences", tuple(self.sequences))
        if not self.sequences:
            raise DatasetError("dataset has no sequences")
        ids = [s.id for s in self.sequences]
        if len(set(ids)) != len(ids):
            raise DatasetError("duplicate sequence ids")
        cmap = {int(k): str(v) for k, v in self.channel_map.items()}
        if sorted(cmap) != list(CHANNELS):
            raise DatasetError("channel map must cover channels 1..8")
        object.__setattr__(self, "channel_map", cmap)

    def subset(self, keep) -> "Dataset":
        """Sequences for which ``keep(seq)`` is true."""
        return replace(self, sequences=tuple(s for s in self.sequences if keep(s)))

    def by_id(self, ids: Iterable[str]) -> list:
        lookup = {s.id: s for s in self.sequences}
        return [lookup[i] for i in ids]

    @property
    def n_samples(self) -> int:
        return sum(s.n_frames for s in self.sequences)


# --------------------------------------------------------------------- I/O

def _fmt(x: float) -> str:
    return format(float(x), ".9g")


def _write_csv(path: Path, header: Seq[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")


def save_dataset(d: Dataset, out_dir) -> Path:
    """Write ``d`` as manifest + per-sequence CSVs; returns the manifest path."""
    out_dir = Path(out_dir)
    for s in d.sequences:
        s.validate()
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for s in d.sequences:
        files = {k: f"{s.id}_{k}.csv" for k in ("emg", "force", "labels")}
        _write_csv(
            out_dir / files["emg"],
            ["t_s"] + [f"ch{c}" for c in CHANNELS],
            ([_fmt(t)] + [_fmt(v) for v in row] for t, row in zip(s.emg_t, s.emg)),
        )
        _write_csv(
            out_dir / files["force"], ["t_s", "force_n"],
            ([_fmt(t), _fmt(f)] for t, f in zip(s.force_t, s.force)),
        )
        _write_csv(
            out_dir / files["labels"], ["t_start_s", "t_end_s", "label"],
            ([_fmt(iv.t_start), _fmt(iv.t_end), iv.label.name] for iv in s.labels),
        )
        entries.append({
            "id": s.id,
            "subject": s.subject_id,
            "hand": s.hand.value,
            "task": s.task.name,
            "protocol": s.protocol,
            "sample_rate_hz": s.sample_rate_hz,
            "emg_csv": files["emg"],
            "force_csv": files["force"],
            "labels_csv": files["labels"],
        })
    manifest = {
        "schema_version": d.schema_version,
        "channel_map": {str(k): v for k, v in sorted(d.channel_map.items())},
        "sequences": entries,
    }
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2) + "\n")
    return path


def _read_rows(path: Path, seq_id: str, header: Seq[str]):
    if not path.exists():
        raise DatasetError(f"{seq_id}: missing file {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            first = next(reader)
        except StopIteration:
            raise DatasetError(f"{seq_id}: {path.name} line 1: empty file") from None
        if [h.strip() for h in first] != list(header):
            if path.name.endswith("_emg.csv") and len(first) != len(header):
                raise DatasetError(f"{seq_id}: {path.name} line 1: wrong channel count in header")
            raise DatasetError(f"{seq_id}: {path.name} line 1: expected header {','.join(header)}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            yield lineno, row


def _read_numeric(path: Path, seq_id: str, header: Seq[str], what: str):
    rows = []
    for lineno, row in _read_rows(path, seq_id, header):
        if len(row) != len(header):
            if what == "emg":
                raise DatasetError(f"{seq_id}: {path.name} line {lineno}: wrong channel count")
            raise DatasetError(f"{seq_id}: {path.name} line {lineno}: expected {len(header)} fields")
        try:
            vals = [float(v) for v in row]
        except ValueError:
            raise DatasetError(f"{seq_id}: {path.name} line {lineno}: not a number") from None
        if rows and not vals[0] > rows[-1][0]:
            raise DatasetError(f"{seq_id}: {path.name} line {lineno}: non-monotone timestamp")
        rows.append(vals)
    return np.array(rows, dtype=float).reshape(-1, len(header))


def load_dataset(manifest_path) -> Dataset:
    """Read and validate a dataset written by :func:`save_dataset`."""
    manifest_path = Path(manifest_path)
    if not manifest_path.exists():
        raise FileNotFoundError(f"manifest not found: {manifest_path}")
    try:
        manifest = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as e:
        raise DatasetError(f"{manifest_path}: invalid JSON ({e})") from None
    version = str(manifest.get("schema_version"))
    if version != SCHEMA_VERSION:
        raise DatasetError(f"schema version mismatch: expected {SCHEMA_VERSION}, got {version}")
    root = manifest_path.parent
    seqs = []
    for entry in manifest.get("sequences", []):
        sid = entry["id"]
        emg = _read_numeric(root / entry["emg_csv"], sid, ["t_s"] + [f"ch{c}" for c in CHANNELS], "emg")
        force = _read_numeric(root / entry["force_csv"], sid, ["t_s", "force_n"], "force")
        labels = []
        lpath = root / entry["labels_csv"]
        for lineno, row in _read_rows(lpath, sid, ["t_start_s", "t_end_s", "label"]):
            try:
                labels.append(LabelInterval(float(row[0]), float(row[1]), GestureLabel.parse(row[2])))
            except (ValueError, IndexError) as e:
                raise DatasetError(f"{sid}: {lpath.name} line {lineno}: {e}") from None
        try:
            seqs.append(Sequence(
                id=sid,
                subject_id=str(entry["subject"]),
                hand=Hand(entry["hand"]),
                task=GestureLabel.parse(entry["task"]),
                emg_t=emg[:, 0],
                emg=emg[:, 1:],
                force_t=force[:, 0],
                force=force[:, 1],
                labels=labels,
                sample_rate_hz=float(entry["sample_rate_hz"]),
                protocol=entry.get("protocol", "mvc"),
            ))
        except DatasetError:
            raise
        except ValueError as e:
            raise DatasetError(f"{sid}: {e}") from None
    return Dataset(
        sequences=seqs,
        channel_map={int(k): v for k, v in manifest.get("channel_map", DEFAULT_CHANNEL_MAP).items()},
        schema_version=version,
    )


# ------------------------------------------------------------- resampling

def downsample_emg(s: Sequence, factor: int) -> Sequence:
    """Block-mean decimation of the EMG frames by an integer ``factor``.

    Each output frame (and its timestamp) is the mean of ``factor``
    consecutive input frames; a trailing partial block is dropped.
    """
    if int(factor) != factor or factor < 1:
        raise ValueError(f"downsampling factor must be a positive integer, got {factor}")
    factor = int(factor)
    if factor == 1:
        return s
    n_blocks = s.n_frames // factor
    if n_blocks == 0:
        raise ValueError(f"{s.id}: fewer frames ({s.n_frames}) than the downsampling factor")
    n = n_blocks * factor
    emg = s.emg[:n].reshape(n_blocks, factor, N_CHANNELS).mean(axis=1)
    t = s.emg_t[:n].reshape(n_blocks, factor).mean(axis=1)
    return replace(s, emg=emg, emg_t=t, sample_rate_hz=s.sample_rate_hz / factor)


def align_force(s: Sequence) -> np.ndarray:
    """Force linearly interpolated at the EMG timestamps, clamped at both ends."""
    if s.force.size == 0:
        raise ValueError(f"{s.id}: empty force track")
    return np.interp(s.emg_t, s.force_t, s.force)
