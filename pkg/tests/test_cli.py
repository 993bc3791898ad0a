import json

import pytest

from mswtc.cli import main
from mswtc.micro_nn import load_model
from mswtc.pipeline import read_feature_dump


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    cfg = root / "synth.yaml"
    cfg.write_text("dataset:\n  synthetic:\n    n_subjects: 4\n    duration_s: 60\n")
    assert main(["synth", "--config", str(cfg), "--out", str(root / "s"), "--seed", "2"]) == 0
    return root / "s" / "corpus"


def test_ingest_synthetic(capsys):
    assert main(["ingest", "--synthetic", "3", "--seed", "5"]) == 0
    out = capsys.readouterr().out
    assert "3 recordings" in out and "S03," in out


def test_ingest_bonn(fake_bonn, capsys):
    assert main(["ingest", "--bonn-root", str(fake_bonn), "--case", "7"]) == 0
    out = capsys.readouterr().out
    assert "5 sets x 100 samples, fs=173.61" in out
    assert "case 7: 100 seizure / 400 non-seizure" in out


def test_ingest_bad_path(tmp_path, capsys):
    assert main(["ingest", "--corpus", str(tmp_path / "missing")]) != 0
    assert "does not exist" in capsys.readouterr().err


def test_conflicting_sources(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"dataset": {"synthetic": {}, "corpus_dir": "x"}}))
    assert main(["ingest", "--config", str(cfg)]) == 1
    assert "exactly one dataset source" in capsys.readouterr().err


def test_unknown_config_key(tmp_path, capsys):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("modle: {}\n")
    assert main(["ingest", "--config", str(cfg), "--synthetic", "2"]) == 1
    assert "unknown config keys" in capsys.readouterr().err


def test_featurize_bonn_case1(fake_bonn, tmp_path):
    out = tmp_path / "f"
    assert main(["featurize", "--bonn-root", str(fake_bonn), "--case", "1", "--methods", "ms",
                 "--out", str(out)]) == 0
    method, feats, freqs = read_feature_dump(out / "features_MS_WTC.bin")
    assert method == "MS_WTC" and feats.shape[:2] == (200, 2)
    assert feats.shape[2] == freqs.size


def test_featurize_rerun_byte_identical(corpus, tmp_path):
    for d in ("a", "b"):
        assert main(["featurize", "--corpus", str(corpus), "--methods", "ms,emd",
                     "--out", str(tmp_path / d)]) == 0
    for name in ("features_MS_WTC.bin", "features_EMD.bin", "labels.csv", "features.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_featurize_unknown_method_is_usage_error(corpus, tmp_path, capsys):
    assert main(["featurize", "--corpus", str(corpus), "--methods", "wavelet",
                 "--out", str(tmp_path)]) == 2
    assert "unknown feature method" in capsys.readouterr().err


def test_train_then_evaluate_saved_model(corpus, tmp_path):
    args = ["--corpus", str(corpus), "--seed", "3"]
    assert main(["train", *args, "--method", "fft", "--epochs", "3", "--out", str(tmp_path / "t")]) == 0
    model = load_model(tmp_path / "t" / "model.msnn")
    assert model.meta["method"] == "FFT_PSD" and model.meta["config_digest"]
    assert main(["evaluate", *args, "--model", str(tmp_path / "t" / "model.msnn"),
                 "--out", str(tmp_path / "e")]) == 0
    trained = json.loads((tmp_path / "t" / "train_metrics.json").read_text())
    scored = json.loads((tmp_path / "e" / "eval_metrics.json").read_text())
    for k in ("spe", "sen", "acc", "tp", "tn", "fp", "fn"):
        assert trained[k] == scored[k]
    log = (tmp_path / "t" / "training_log.csv").read_text().splitlines()
    assert log[0] == "epoch,mean_loss,train_acc" and len(log) == 4


def test_compare_exports_and_is_deterministic(corpus, tmp_path):
    runs = []
    for d in ("a", "b"):
        out = tmp_path / d
        assert main(["compare", "--corpus", str(corpus), "--methods", "ms,m,s,fft", "--repeats", "2",
                     "--epochs", "2", "--out", str(out)]) == 0
        runs.append(out)
    for name in ("summary.csv", "repeats.csv", "box_spe.svg", "box_sen.svg", "box_acc.svg"):
        assert (runs[0] / name).read_bytes() == (runs[1] / name).read_bytes()
    lines = (runs[0] / "summary.csv").read_text().splitlines()
    assert len(lines) == 1 + 4 * 3


def test_flags_override_config(corpus, tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text(f"dataset:\n  corpus_dir: {corpus}\nsplit:\n  repeats: 50\n"
                   "features:\n  methods: [fft]\ntrain:\n  epochs: 1\n")
    out = tmp_path / "o"
    assert main(["evaluate", "--config", str(cfg), "--repeats", "2", "--out", str(out)]) == 0
    run = json.loads((out / "run.json").read_text())
    assert run["config"]["split"]["repeats"] == 2
    assert len((out / "repeats.csv").read_text().splitlines()) == 3


def test_separated_on_bonn_errors(fake_bonn, tmp_path, capsys):
    code = main(["evaluate", "--bonn-root", str(fake_bonn), "--case", "1", "--method", "ms",
                 "--scenario", "separated", "--repeats", "1", "--out", str(tmp_path)])
    assert code == 1
    assert "subject" in capsys.readouterr().err


def test_bench_csv(tmp_path, capsys):
    out = tmp_path / "b"
    assert main(["bench", "--method", "fft", "--segments", "50", "--out", str(out)]) == 0
    rows = (out / "bench.csv").read_text().splitlines()
    assert rows[0].split(",")[:6] == ["method", "n_segments", "segment_s", "fs", "stat", "seconds"]
    stats = {r.split(",")[4]: float(r.split(",")[5]) for r in rows[1:]}
    assert stats["min"] <= stats["median"] <= stats["p95"]


def test_bench_zero_segments(capsys):
    assert main(["bench", "--segments", "0"]) == 1
    assert "at least one segment" in capsys.readouterr().err
