import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mswtc.io_datasets import (
    BONN_FS, DatasetError, Recording, SeizureInterval, Segment, SplitPlan, SyntheticConfig,
    build_case, generate_synthetic_corpus, load_bonn_corpus, load_generic_corpus,
    make_splits, read_annotations_csv, segment_recording, window_label, write_annotations_csv,
    write_recording,
)


# -- Bonn loader ----------------------------------------------------------


def test_bonn_corpus_shape(fake_bonn):
    corpus = load_bonn_corpus(fake_bonn)
    assert sorted(corpus) == ["A", "B", "C", "D", "E"]
    for recs in corpus.values():
        assert len(recs) == 100
        assert all(r.samples.size == 4096 and r.fs == BONN_FS for r in recs)


def test_bonn_disk_names_map_to_letters(fake_bonn):
    corpus = load_bonn_corpus(fake_bonn)
    assert corpus["E"][0].name == "E/S001"
    assert corpus["A"][0].name == "A/Z001"


def test_bonn_empty_dir(tmp_path):
    with pytest.raises(DatasetError, match="missing set"):
        load_bonn_corpus(tmp_path)


def test_bonn_truncated_file_named(tmp_path):
    from conftest import write_fake_bonn

    root = write_fake_bonn(tmp_path / "b", n_files=100, n_samples=4096)
    bad = root / "N" / "N007.txt"
    lines = bad.read_text().splitlines()[:4000]
    bad.write_text("\n".join(lines) + "\n")
    with pytest.raises(DatasetError, match="N007.txt"):
        load_bonn_corpus(root)


def test_bonn_non_numeric_line(tmp_path):
    from conftest import write_fake_bonn

    root = write_fake_bonn(tmp_path / "b", n_files=100, n_samples=4096)
    bad = root / "Z" / "Z003.txt"
    bad.write_text(bad.read_text().replace("\n", "\nabc\n", 1))
    with pytest.raises(DatasetError, match="non-numeric"):
        load_bonn_corpus(root)


@pytest.mark.parametrize("case_id, n_pos, n_neg", [(1, 100, 100), (5, 100, 300), (7, 100, 400)])
def test_build_case_counts(fake_bonn, case_id, n_pos, n_neg):
    segs = build_case(case_id, load_bonn_corpus(fake_bonn))
    labels = np.array([s.label for s in segs])
    assert (labels == 1).sum() == n_pos
    assert (labels == 0).sum() == n_neg
    assert all(s.samples.size == 4096 for s in segs)


@pytest.mark.parametrize("bad", [0, 8, -1])
def test_build_case_invalid(fake_bonn, bad):
    with pytest.raises(DatasetError):
        build_case(bad, load_bonn_corpus(fake_bonn))


# -- segmentation ---------------------------------------------------------


def _rec(duration=60.0, fs=256.0, intervals=()):
    return Recording("s1", np.zeros(int(duration * fs)), fs,
                     [SeizureInterval(a, b) for a, b in intervals])


def test_segment_count():
    assert len(segment_recording(_rec(60.0), 4.0, 2.0)) == 29


def test_full_overlap_is_seizure():
    segs = segment_recording(_rec(60.0, intervals=[(10, 14)]), 4.0, 2.0)
    by_start = {s.start_s: s.label for s in segs}
    assert by_start[10.0] == 1
    assert by_start[8.0] == 1  # 2 s of 4 s = exactly half
    assert by_start[6.0] == 0


def test_partial_overlap_below_threshold():
    segs = segment_recording(_rec(60.0, intervals=[(10, 11)]), 4.0, 2.0, seizure_threshold=0.5)
    assert {s.start_s: s.label for s in segs}[10.0] == 0


def test_window_longer_than_recording():
    with pytest.raises(DatasetError):
        segment_recording(_rec(3.0), 4.0, 2.0)


@settings(max_examples=60, deadline=None)
@given(
    duration=st.integers(8, 80),
    hop=st.sampled_from([0.5, 1.0, 2.0, 4.0]),
    start=st.floats(0, 50), length=st.floats(0.1, 20),
)
def test_tiling_and_label_monotonicity(duration, hop, start, length):
    fs = 64.0
    s = min(start, duration - 0.2)
    e = min(s + length, duration)
    rec = _rec(float(duration), fs, [(s, e)])
    segs = segment_recording(rec, 4.0, hop)
    starts = [g.start_s for g in segs]
    assert starts[0] == 0.0
    assert np.allclose(np.diff(starts), hop)
    assert all(g.start_s + 4.0 <= duration + 1e-9 for g in segs)
    assert all(g.samples.size == 256 for g in segs)
    ivs = rec.annotations
    for g in segs:
        labels = [window_label(ivs, g.start_s, 4.0, t) for t in (0.0, 0.25, 0.5, 0.75, 1.0)]
        assert labels == sorted(labels, reverse=True)
        overlap = max(0.0, min(e, g.start_s + 4) - max(s, g.start_s))
        assert labels[0] == int(overlap > 0)
        assert labels[-1] == int(overlap >= 4.0 - 1e-9)


# -- splits ---------------------------------------------------------------


def _segments(n=1000, n_pos=300, n_subjects=None, seed=0):
    rng = np.random.default_rng(seed)
    labels = np.zeros(n, int)
    labels[rng.choice(n, n_pos, replace=False)] = 1
    subj = [None] * n if n_subjects is None else [f"P{i % n_subjects:02d}" for i in range(n)]
    return [Segment(np.zeros(4), 1.0, int(l), subj[i], i) for i, l in enumerate(labels)]


def test_balanced_mixed_split_sizes():
    segs = _segments()
    labels = np.array([s.label for s in segs])
    for train, test in make_splits(segs, SplitPlan(repeats=5, seed=3)):
        assert train.size == 420 and test.size == 180
        assert labels[train].sum() == 210 and labels[test].sum() == 90
        assert not set(train) & set(test)


def test_repeats_differ_and_seed_reproducible():
    segs = _segments()
    a = make_splits(segs, SplitPlan(repeats=4, seed=11))
    b = make_splits(segs, SplitPlan(repeats=4, seed=11))
    for (t1, s1), (t2, s2) in zip(a, b):
        assert np.array_equal(t1, t2) and np.array_equal(s1, s2)
    assert not np.array_equal(a[0][0], a[1][0])


def test_separated_holds_out_six_of_nineteen():
    segs = _segments(n_subjects=19)
    subj = np.array([s.subject_id for s in segs])
    for train, test in make_splits(segs, SplitPlan("separated", repeats=5, seed=1)):
        assert len(set(subj[test])) == 6
        assert not set(subj[train]) & set(subj[test])


def test_separated_rejects_bonn(fake_bonn):
    segs = build_case(1, load_bonn_corpus(fake_bonn))
    with pytest.raises(DatasetError, match="subject"):
        make_splits(segs, SplitPlan("separated", repeats=1))


def test_split_error_when_class_cannot_be_split():
    segs = _segments(n=20, n_pos=1)
    with pytest.raises(DatasetError):
        make_splits(segs, SplitPlan(repeats=1, max_retries=3))


@settings(max_examples=25, deadline=None)
@given(n_subjects=st.integers(2, 25), seed=st.integers(0, 1000), balance=st.booleans())
def test_split_soundness(n_subjects, seed, balance):
    segs = _segments(n=400, n_pos=120, n_subjects=n_subjects, seed=seed)
    subj = np.array([s.subject_id for s in segs])
    labels = np.array([s.label for s in segs])
    for scenario in ("mixed", "separated"):
        try:
            splits = make_splits(segs, SplitPlan(scenario, repeats=2, seed=seed, balance=balance))
        except DatasetError:
            continue
        for train, test in splits:
            assert not set(train) & set(test)
            if scenario == "separated":
                assert not set(subj[train]) & set(subj[test])
            if balance:
                both = np.concatenate([train, test])
                assert labels[both].sum() * 2 == both.size


# -- generic format and synthetic corpus ----------------------------------


def test_synthetic_shape_and_ranges():
    cfg = SyntheticConfig(duration_s=120.0, event_duration_s=(2.0, 20.0))
    recs = generate_synthetic_corpus(19, cfg, seed=4)
    assert len(recs) == 19
    assert len({r.subject_id for r in recs}) == 19
    for r in recs:
        assert r.fs == 256.0 and r.samples.size == 120 * 256
        assert r.annotations
        for iv in r.annotations:
            assert 2.0 <= iv.end_s - iv.start_s <= 20.0
            assert 0 <= iv.start_s < iv.end_s <= r.duration


def test_synthetic_deterministic():
    cfg = SyntheticConfig(duration_s=60.0)
    a = generate_synthetic_corpus(3, cfg, seed=9)
    b = generate_synthetic_corpus(3, cfg, seed=9)
    for x, y in zip(a, b):
        assert x.samples.tobytes() == y.samples.tobytes()
        assert x.annotations == y.annotations
    c = generate_synthetic_corpus(3, cfg, seed=10)
    assert a[0].samples.tobytes() != c[0].samples.tobytes()


def test_synthetic_rejects_bad_durations():
    with pytest.raises(DatasetError):
        generate_synthetic_corpus(2, SyntheticConfig(event_duration_s=(0.0, 5.0)))
    with pytest.raises(DatasetError):
        generate_synthetic_corpus(2, SyntheticConfig(duration_s=-1.0))


def test_seizure_bursts_raise_low_frequency_power():
    rec = generate_synthetic_corpus(1, SyntheticConfig(duration_s=120.0, artifacts_per_minute=0), seed=2)[0]
    segs = segment_recording(rec)
    power = lambda s: np.mean(s.samples ** 2)
    pos = [power(s) for s in segs if s.label == 1]
    neg = [power(s) for s in segs if s.label == 0]
    assert np.median(pos) > np.median(neg)


def test_generic_round_trip(tmp_path):
    recs = generate_synthetic_corpus(2, SyntheticConfig(duration_s=30.0, event_duration_s=(2, 5)), seed=1)
    for r in recs:
        write_recording(r, tmp_path, r.subject_id)
    back = load_generic_corpus(tmp_path)
    for r, b in zip(recs, back):
        assert b.subject_id == r.subject_id and b.fs == r.fs
        assert np.array_equal(b.samples, r.samples)
        assert b.annotations == r.annotations


def test_annotation_csv_round_trip(tmp_path):
    ivs = [SeizureInterval(1.5, 3.25), SeizureInterval(10.0, 12.0)]
    p = tmp_path / "ann.csv"
    write_annotations_csv(ivs, p)
    assert p.read_text().splitlines()[0] == "start_s,end_s"
    assert read_annotations_csv(p) == ivs


def test_recording_invariants():
    with pytest.raises(DatasetError):
        Recording("x", [], 256.0)
    with pytest.raises(DatasetError):
        Recording("x", [1.0], 0.0)
    with pytest.raises(DatasetError):
        SeizureInterval(3.0, 3.0)
    with pytest.raises(DatasetError):
        Recording("x", np.zeros(256), 256.0, [SeizureInterval(0.5, 2.0)])
