"""Recordings, labelled segments, classification cases and train/test splits.

Two sources are supported:

* the Bonn corpus (five sets of 100 single-channel recordings, stored on disk
  as ``Z/O/N/F/S`` and addressed here by the letters ``A..E``);
* generic annotated recordings: ``<name>.txt`` (one sample per line) plus a
  ``<name>.manifest`` with ``key=value`` lines (``fs``, ``subject_id`` and
  repeated ``seizure=<start_s>,<end_s>``).

The synthetic corpus generator writes the generic format, so every downstream
step treats real and synthetic recordings alike.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from ._random import substream

logger = logging.getLogger(__name__)

BONN_FS = 173.61
BONN_SAMPLES = 4096
BONN_RECORDINGS_PER_SET = 100

# on-disk directory name -> set letter used throughout
BONN_DISK_TO_SET = {"Z": "A", "O": "B", "N": "C", "F": "D", "S": "E"}

BONN_CASES = {
    1: ("A",),
    2: ("B",),
    3: ("C",),
    4: ("D",),
    5: ("A", "C", "D"),
    6: ("B", "C", "D"),
    7: ("A", "B", "C", "D"),
}


class DatasetError(ValueError):
    """Raised for malformed corpora, bad case ids and unsatisfiable splits."""


@dataclass(frozen=True)
class SeizureInterval:
    start_s: float
    end_s: float

    def __post_init__(self):
        if not (0 <= self.start_s < self.end_s):
            raise DatasetError(f"invalid seizure interval [{self.start_s}, {self.end_s}]")


@dataclass
class Recording:
    subject_id: Optional[str]
    samples: np.ndarray
    fs: float
    annotations: list = field(default_factory=list)
    name: str = ""

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.fs <= 0:
            raise DatasetError(f"sampling rate must be positive, got {self.fs}")
        if self.samples.ndim != 1 or self.samples.size == 0:
            raise DatasetError("recording samples must be a non-empty 1-D sequence")
        dur = self.duration
        for iv in self.annotations:
            if iv.end_s > dur + 1e-9:
                raise DatasetError(
                    f"annotation [{iv.start_s}, {iv.end_s}] exceeds duration {dur:.3f} s"
                )

    @property
    def duration(self):
        return self.samples.size / self.fs


@dataclass
class Segment:
    samples: np.ndarray
    fs: float
    label: int
    subject_id: Optional[str]
    segment_id: int
    start_s: float = 0.0

    def __post_init__(self):
        if self.label not in (0, 1):
            raise DatasetError(f"label must be 0 or 1, got {self.label}")


@dataclass(frozen=True)
class BonnCase:
    case_id: int
    seizure_sets: tuple
    nonseizure_sets: tuple


@dataclass(frozen=True)
class SplitPlan:
    scenario: str = "mixed"
    train_fraction: float = 0.7
    repeats: int = 100
    seed: int = 0
    balance: bool = True
    max_retries: int = 20

    def __post_init__(self):
        if self.scenario not in ("mixed", "separated"):
            raise DatasetError(f"unknown scenario {self.scenario!r}")
        if not 0 < self.train_fraction < 1:
            raise DatasetError("train_fraction must lie in (0, 1)")
        if self.repeats < 1:
            raise DatasetError("repeats must be positive")


# --------------------------------------------------------------------------
# Bonn corpus


def _read_int_column(path):
    values = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            text = line.strip()
            if not text:
                continue
            try:
                values.append(int(text))
            except ValueError:
                try:
                    values.append(float(text))
                except ValueError:
                    raise DatasetError(f"{path}: non-numeric line {lineno}: {text!r}") from None
    return np.asarray(values, dtype=np.float64)


def _find_set_dir(root, disk_name, letter):
    for cand in (disk_name, disk_name.lower(), letter, letter.lower()):
        p = root / cand
        if p.is_dir():
            return p
    return None


def load_bonn_corpus(root_path):
    """Load the five Bonn sets.

    Parameters
    ----------
    root_path : str or Path
        Directory holding ``Z, O, N, F, S`` subdirectories of text files.

    Returns
    -------
    dict
        ``{"A": [Recording, ...], ..., "E": [...]}``, 100 recordings per set,
        4096 samples each at 173.61 Hz.

    Notes
    -----
    The published files carry 4097 values; the trailing value is dropped so
    every recording has the documented 4096 points. Any other length is
    rejected.
    """
    root = Path(root_path)
    if not root.is_dir():
        raise DatasetError(f"missing set: corpus root {root} is not a directory")
    corpus = {}
    for disk_name, letter in BONN_DISK_TO_SET.items():
        set_dir = _find_set_dir(root, disk_name, letter)
        if set_dir is None:
            raise DatasetError(f"missing set {disk_name} (set {letter}) under {root}")
        files = sorted(p for p in set_dir.iterdir() if p.suffix.lower() == ".txt")
        if len(files) != BONN_RECORDINGS_PER_SET:
            raise DatasetError(
                f"set {disk_name} has {len(files)} files, expected {BONN_RECORDINGS_PER_SET}"
            )
        recs = []
        for f in files:
            x = _read_int_column(f)
            if x.size == BONN_SAMPLES + 1:
                x = x[:BONN_SAMPLES]
            if x.size != BONN_SAMPLES:
                raise DatasetError(f"{f.name}: {x.size} samples, expected {BONN_SAMPLES}")
            recs.append(Recording(subject_id=None, samples=x, fs=BONN_FS, name=f"{letter}/{f.stem}"))
        corpus[letter] = recs
    return corpus


def get_case(case_id):
    if case_id not in BONN_CASES:
        raise DatasetError(f"invalid Bonn case id {case_id!r}; expected 1..7")
    return BonnCase(case_id, ("E",), BONN_CASES[case_id])


def build_case(case_id, corpus):
    """Whole Bonn recordings for one case: set E labelled 1, listed sets 0."""
    case = get_case(case_id)
    segments = []
    for label, sets in ((1, case.seizure_sets), (0, case.nonseizure_sets)):
        for letter in sets:
            for rec in corpus[letter]:
                segments.append(
                    Segment(rec.samples, rec.fs, label, rec.subject_id, len(segments))
                )
    return segments


# --------------------------------------------------------------------------
# segmentation


def _merge(intervals):
    merged = []
    for iv in sorted(intervals, key=lambda v: v.start_s):
        if merged and iv.start_s <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], iv.end_s)
        else:
            merged.append([iv.start_s, iv.end_s])
    return merged


def seizure_overlap(intervals, t0, t1):
    """Total seconds of ``[t0, t1)`` covered by the (merged) intervals."""
    return sum(max(0.0, min(e, t1) - max(s, t0)) for s, e in _merge(intervals))


def window_label(intervals, t0, window_s, seizure_threshold=0.5):
    """1 iff the window touches a seizure and coverage >= threshold * window."""
    ov = seizure_overlap(intervals, t0, t0 + window_s)
    return int(ov > 1e-12 and ov >= seizure_threshold * window_s - 1e-9)


def segment_recording(rec, window_s=4.0, hop_s=2.0, seizure_threshold=0.5, first_id=0):
    """Cut ``rec`` into fixed windows starting at 0, hop_s, 2*hop_s, ...

    A window is labelled seizure when its overlap with the annotations is at
    least ``seizure_threshold * window_s`` (seizure-dominant at 0.5).
    """
    if hop_s <= 0:
        raise DatasetError("hop_s must be positive")
    if window_s <= 0 or window_s > rec.duration + 1e-9:
        raise DatasetError(
            f"window {window_s} s longer than recording {rec.duration:.3f} s"
        )
    win = int(round(window_s * rec.fs))
    n = rec.samples.size
    segments = []
    i = 0
    while True:
        start = int(round(i * hop_s * rec.fs))
        if start + win > n:
            break
        t0 = i * hop_s
        label = window_label(rec.annotations, t0, window_s, seizure_threshold)
        segments.append(
            Segment(rec.samples[start:start + win].copy(), rec.fs, label,
                    rec.subject_id, first_id + len(segments), start_s=t0)
        )
        i += 1
    return segments


def segment_corpus(recordings, window_s=4.0, hop_s=2.0, seizure_threshold=0.5):
    out = []
    for rec in recordings:
        out.extend(segment_recording(rec, window_s, hop_s, seizure_threshold, first_id=len(out)))
    return out


# --------------------------------------------------------------------------
# splits


def n_test_subjects(n_subjects):
    if n_subjects == 19:
        return 6
    return min(n_subjects - 1, max(1, round(6 / 19 * n_subjects)))


def _undersample(idx, labels, rng):
    pos = idx[labels[idx] == 1]
    neg = idx[labels[idx] == 0]
    m = min(pos.size, neg.size)
    pos = rng.choice(pos, m, replace=False) if pos.size > m else pos
    neg = rng.choice(neg, m, replace=False) if neg.size > m else neg
    return np.sort(np.concatenate([pos, neg]))


def _stratified(idx, labels, frac, rng):
    train, test = [], []
    for c in (0, 1):
        members = rng.permutation(idx[labels[idx] == c])
        k = int(round(frac * members.size))
        train.append(members[:k])
        test.append(members[k:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(test))


def _both_classes(ids, labels):
    return ids.size > 0 and 0 < labels[ids].sum() < ids.size


def _draw(labels, subjects, plan, rng):
    all_idx = np.arange(labels.size)
    if plan.scenario == "mixed":
        idx = _undersample(all_idx, labels, rng) if plan.balance else all_idx
        return _stratified(idx, labels, plan.train_fraction, rng)
    uniq = sorted(set(subjects))
    chosen = set(rng.choice(len(uniq), n_test_subjects(len(uniq)), replace=False).tolist())
    test_subj = {uniq[i] for i in chosen}
    is_test = np.array([s in test_subj for s in subjects])
    train, test = all_idx[~is_test], all_idx[is_test]
    if plan.balance:
        train = _undersample(train, labels, rng)
        test = _undersample(test, labels, rng)
    return train, test


def make_splits(segments, plan):
    """Monte Carlo train/test index splits.

    Each repeat draws from its own seed-derived stream. In the mixed scenario
    the majority class is optionally undersampled and each class split
    ``train_fraction``/rest; in the separated scenario whole subjects are held
    out (6 of 19, or the same proportion of other subject counts).

    Returns
    -------
    list of (ndarray, ndarray)
        Positions into ``segments`` for training and testing.
    """
    labels = np.array([s.label for s in segments], dtype=np.int64)
    subjects = [s.subject_id for s in segments]
    if plan.scenario == "separated":
        if any(s is None for s in subjects):
            raise DatasetError(
                "separated scenario needs subject metadata; the Bonn corpus has none"
            )
        if len(set(subjects)) < 2:
            raise DatasetError("separated scenario needs at least 2 distinct subjects")
    splits = []
    for r in range(plan.repeats):
        rng = substream(plan.seed, "split", r)
        for _attempt in range(plan.max_retries):
            train, test = _draw(labels, subjects, plan, rng)
            if _both_classes(train, labels) and _both_classes(test, labels):
                break
        else:
            raise DatasetError(
                f"repeat {r}: could not draw a split with both classes on each side "
                f"after {plan.max_retries} attempts"
            )
        splits.append((train, test))
    return splits


# --------------------------------------------------------------------------
# generic on-disk format


def write_recording(rec, directory, name):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    np.savetxt(directory / f"{name}.txt", rec.samples, fmt="%.17g")
    lines = [f"fs={float(rec.fs)!r}", f"subject_id={rec.subject_id}"]
    lines += [f"seizure={float(iv.start_s)!r},{float(iv.end_s)!r}" for iv in rec.annotations]
    (directory / f"{name}.manifest").write_text("\n".join(lines) + "\n")


def read_manifest(path):
    fs = None
    subject = None
    intervals = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise DatasetError(f"{path}:{lineno}: expected key=value")
        key, value = key.strip(), value.strip()
        if key == "fs":
            fs = float(value)
        elif key == "subject_id":
            subject = value
        elif key == "seizure":
            a, b = value.split(",")
            intervals.append(SeizureInterval(float(a), float(b)))
    if fs is None:
        raise DatasetError(f"{path}: manifest lacks fs")
    return fs, subject, intervals


def load_recording(directory, name):
    directory = Path(directory)
    fs, subject, intervals = read_manifest(directory / f"{name}.manifest")
    x = _read_int_column(directory / f"{name}.txt")
    return Recording(subject, x, fs, intervals, name=name)


def load_generic_corpus(directory):
    directory = Path(directory)
    if not directory.is_dir():
        raise DatasetError(f"corpus directory {directory} does not exist")
    names = sorted(p.stem for p in directory.glob("*.manifest"))
    if not names:
        raise DatasetError(f"no *.manifest files in {directory}")
    return [load_recording(directory, n) for n in names]


def write_annotations_csv(intervals, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["start_s", "end_s"])
        for iv in intervals:
            w.writerow([repr(iv.start_s), repr(iv.end_s)])


def read_annotations_csv(path):
    with open(path, newline="") as fh:
        return [SeizureInterval(float(r["start_s"]), float(r["end_s"])) for r in csv.DictReader(fh)]


# --------------------------------------------------------------------------
# synthetic absence-seizure corpus


@dataclass
class SyntheticConfig:
    fs: float = 256.0
    duration_s: float = 300.0
    spike_wave_hz: float = 3.0
    spike_wave_jitter: float = 0.2     # relative spread of the per-subject fundamental
    events_per_subject: tuple = (3, 10)
    event_duration_s: tuple = (2.0, 20.0)
    noise_uv: float = 30.0             # std of the pink background
    seizure_uv: tuple = (40.0, 110.0)  # per-subject spike-wave amplitude range
    alpha_uv: float = 15.0
    artifacts_per_minute: float = 2.0
    artifact_uv: float = 150.0

    def validate(self):
        if self.fs <= 0 or self.duration_s <= 0:
            raise DatasetError("fs and duration must be positive")
        lo, hi = self.event_duration_s
        if lo <= 0 or hi < lo:
            raise DatasetError("event durations must be positive with lo <= hi")
        if hi >= self.duration_s:
            raise DatasetError("event duration exceeds recording duration")
        if self.spike_wave_hz <= 0:
            raise DatasetError("spike-wave fundamental must be positive")


def pink_noise(n, rng):
    """Unit-variance 1/f noise by spectral shaping of white noise."""
    spec = np.fft.rfft(rng.standard_normal(n))
    f = np.arange(spec.size, dtype=float)
    f[0] = 1.0
    spec /= np.sqrt(f)
    spec[0] = 0.0
    x = np.fft.irfft(spec, n)
    return x / x.std()


def spike_wave_train(t, f0, phase=0.0):
    """Unit-peak spike-wave pattern: a sharp transient then a slow wave each cycle."""
    cyc = (t * f0 + phase) % 1.0
    period = 1.0 / f0
    tc = cyc * period
    spike = np.exp(-0.5 * ((tc - 0.06 * period) / (0.025 * period)) ** 2)
    slow = -0.6 * np.exp(-0.5 * ((tc - 0.55 * period) / (0.16 * period)) ** 2)
    return spike + slow


def _place_events(n_events, lo, hi, duration, rng):
    intervals = []
    for _ in range(200 * max(n_events, 1)):
        if len(intervals) == n_events:
            break
        d = rng.uniform(lo, hi)
        s = rng.uniform(1.0, duration - d - 1.0)
        e = s + d
        if all(e + 2.0 < a or s > b + 2.0 for a, b in intervals):
            intervals.append((s, e))
    return [SeizureInterval(float(s), float(e)) for s, e in sorted(intervals)]


def synthesize_recording(subject_id, cfg, rng):
    n = int(round(cfg.duration_s * cfg.fs))
    t = np.arange(n) / cfg.fs
    x = cfg.noise_uv * rng.uniform(0.7, 1.3) * pink_noise(n, rng)

    # waxing/waning alpha rhythm
    alpha_f = rng.uniform(8.0, 12.0)
    env = np.clip(pink_noise(n, rng), 0, None)
    x += cfg.alpha_uv * env * np.sin(2 * np.pi * alpha_f * t + rng.uniform(0, 2 * np.pi))

    f_subject = cfg.spike_wave_hz * rng.uniform(1 - cfg.spike_wave_jitter, 1 + cfg.spike_wave_jitter)
    amp = rng.uniform(*cfg.seizure_uv)
    lo_n, hi_n = cfg.events_per_subject
    intervals = _place_events(int(rng.integers(lo_n, hi_n + 1)), *cfg.event_duration_s,
                              cfg.duration_s, rng)
    for iv in intervals:
        m = (t >= iv.start_s) & (t < iv.end_s)
        tt = t[m] - iv.start_s
        # frequency slows slightly over the discharge, amplitude ramps in and out
        f_ev = f_subject * rng.uniform(0.9, 1.1)
        drift = 1.0 - 0.15 * tt / max(iv.end_s - iv.start_s, 1e-9)
        phase = np.cumsum(f_ev * drift) / cfg.fs
        ramp = np.minimum(1.0, np.minimum(tt, iv.end_s - iv.start_s - tt) / 0.5)
        x[m] += amp * rng.uniform(0.8, 1.2) * ramp * spike_wave_train(phase, 1.0)

    # movement / blink / muscle artifacts outside any particular structure
    n_art = rng.poisson(cfg.artifacts_per_minute * cfg.duration_s / 60.0)
    for _ in range(n_art):
        c = rng.uniform(0, cfg.duration_s)
        kind = rng.integers(3)
        w = rng.uniform(0.1, 0.4)
        g = np.exp(-0.5 * ((t - c) / w) ** 2)
        if kind == 0:
            x += cfg.artifact_uv * rng.uniform(0.5, 1.5) * g
        elif kind == 1:
            x += cfg.artifact_uv * 0.3 * g * rng.standard_normal(n)
        else:
            x += cfg.artifact_uv * rng.uniform(0.5, 1.0) * g * np.sin(2 * np.pi * rng.uniform(1.5, 4.5) * t)
    return Recording(subject_id, x, cfg.fs, intervals, name=subject_id)


def generate_synthetic_corpus(n_subjects=19, config=None, seed=0):
    """Annotated single-channel recordings with spike-wave discharges in pink noise."""
    cfg = config or SyntheticConfig()
    cfg.validate()
    if n_subjects < 1:
        raise DatasetError("n_subjects must be positive")
    width = max(2, int(math.log10(n_subjects)) + 1)
    return [
        synthesize_recording(f"S{i + 1:0{width}d}", cfg, substream(seed, "synthetic", i))
        for i in range(n_subjects)
    ]
