"""Command-line front end: ingest, featurize, train, evaluate, compare, bench, synth.

Every command reads one optional YAML/JSON experiment config; command-line
flags override it. All randomness derives from the top-level ``seed``.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import sys
import time
import warnings
from pathlib import Path

import numpy as np
import yaml

from . import io_datasets as io
from .dsp_preprocess import BONN_PREPROCESS, PreprocessConfig
from .eval_harness import (
    METRICS, UndefinedMetricWarning, compare_methods, confusion, digest, export_report,
    metrics, run_cv,
)
from .micro_nn import (
    InputNormalizer, Model, ModelConfig, ModelError, TrainConfig, init_params, load_model,
    save_model, train, write_training_log,
)
from .pipeline import FeatureConfig, featurize, featurize_many, resolve_method, write_feature_dump
from .spectral_features import SpectralError
from .temporal_features import EmdConfig

logger = logging.getLogger("mswtc")

DEFAULTS = {
    "seed": 0,
    "out": "out",
    "jobs": 1,
    "dataset": {
        "bonn_root": None,
        "case": 1,
        "corpus_dir": None,
        "synthetic": None,
        "window_s": 4.0,
        "hop_s": 2.0,
        "seizure_threshold": 0.5,
    },
    "preprocess": None,
    "features": {"methods": ["ms"]},
    "model": {},
    "train": {},
    "split": {"scenario": "mixed", "train_fraction": 0.7, "repeats": 100, "balance": True},
}


class ConfigError(ValueError):
    pass


class UsageError(ConfigError):
    pass


# --------------------------------------------------------------------------
# configuration


def _merge(base, override):
    out = dict(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def load_config(path):
    """Read a YAML (or JSON, a YAML subset) config and merge it over the defaults."""
    if path is None:
        return json.loads(json.dumps(DEFAULTS))
    try:
        raw = yaml.safe_load(Path(path).read_text()) or {}
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path} is not valid YAML/JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"config {path} must be a mapping")
    unknown = set(raw) - set(DEFAULTS)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return _merge(json.loads(json.dumps(DEFAULTS)), raw)


def _build(cls, values, what):
    values = dict(values or {})
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(values) - names
    if unknown:
        raise ConfigError(f"unknown {what} keys: {sorted(unknown)}")
    for k, v in values.items():
        if isinstance(v, list):
            values[k] = tuple(v)
    return cls(**values)


def apply_flags(cfg, args):
    """Flags win over the config file."""
    ds = cfg["dataset"]
    sources = [a for a in ("bonn_root", "corpus_dir", "synthetic") if getattr(args, a, None) is not None]
    if sources:
        for key in ("bonn_root", "corpus_dir", "synthetic"):
            ds[key] = None
    for key in ("bonn_root", "corpus_dir"):
        if getattr(args, key, None) is not None:
            ds[key] = str(getattr(args, key))
    if getattr(args, "synthetic", None) is not None:
        ds["synthetic"] = {"n_subjects": args.synthetic}
    if getattr(args, "case", None) is not None:
        ds["case"] = args.case
    for key in ("seed", "out", "jobs"):
        if getattr(args, key, None) is not None:
            cfg[key] = getattr(args, key)
    if getattr(args, "repeats", None) is not None:
        cfg["split"]["repeats"] = args.repeats
    if getattr(args, "scenario", None) is not None:
        cfg["split"]["scenario"] = args.scenario
    if getattr(args, "epochs", None) is not None:
        cfg["train"] = {**cfg["train"], "epochs": args.epochs}
    methods = getattr(args, "methods", None) or getattr(args, "method", None)
    if methods:
        cfg["features"]["methods"] = [m for m in methods.split(",") if m]
    return cfg


def dataset_kind(cfg):
    ds = cfg["dataset"]
    given = [k for k in ("bonn_root", "corpus_dir", "synthetic") if ds.get(k) is not None]
    if len(given) != 1:
        raise ConfigError(
            "exactly one dataset source is required (bonn_root, corpus_dir or synthetic); "
            f"got {given or 'none'}"
        )
    return given[0]


def feature_config(cfg):
    f = dict(cfg["features"])
    f.pop("methods", None)
    if "emd" in f:
        f["emd"] = _build(EmdConfig, f["emd"], "features.emd")
    if cfg["preprocess"] is not None:
        pre = _build(PreprocessConfig, cfg["preprocess"], "preprocess")
    elif dataset_kind(cfg) == "bonn_root":
        pre = BONN_PREPROCESS
    else:
        pre = PreprocessConfig()
    f["preprocess"] = pre
    return _build(FeatureConfig, f, "features")


def split_plan(cfg):
    return _build(io.SplitPlan, {**cfg["split"], "seed": cfg["seed"]}, "split")


def train_overrides(cfg):
    t = dict(cfg["train"])
    _build(TrainConfig, t, "train")
    return t


def model_overrides(cfg):
    m = dict(cfg["model"])
    _build(ModelConfig, {"in_channels": 1, "in_length": 64, **m}, "model")
    return m


def methods_of(cfg):
    try:
        return [resolve_method(m) for m in cfg["features"]["methods"]]
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def config_digest(cfg):
    """Digest of everything that can change results (not the output dir or worker count)."""
    return digest({k: v for k, v in cfg.items() if k not in ("out", "jobs")})


# --------------------------------------------------------------------------
# data loading


def synthetic_recordings(cfg):
    spec = dict(cfg["dataset"]["synthetic"])
    n = spec.pop("n_subjects", 19)
    return io.generate_synthetic_corpus(n, _build(io.SyntheticConfig, spec, "synthetic"), cfg["seed"])


def load_segments(cfg):
    kind = dataset_kind(cfg)
    ds = cfg["dataset"]
    if kind == "bonn_root":
        return io.build_case(ds["case"], io.load_bonn_corpus(ds["bonn_root"]))
    recs = synthetic_recordings(cfg) if kind == "synthetic" else io.load_generic_corpus(ds["corpus_dir"])
    return io.segment_corpus(recs, ds["window_s"], ds["hop_s"], ds["seizure_threshold"])


def _out_dir(cfg):
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True, default=str) + "\n")


def _check_written(paths):
    missing = [str(p) for p in paths if not Path(p).is_file()]
    if missing:
        raise RuntimeError(f"artifacts not written: {missing}")


# --------------------------------------------------------------------------
# commands


def cmd_ingest(cfg, args):
    kind = dataset_kind(cfg)
    ds = cfg["dataset"]
    if kind == "bonn_root":
        corpus = io.load_bonn_corpus(ds["bonn_root"])
        n = {k: len(v) for k, v in corpus.items()}
        print(f"{len(corpus)} sets x {n['A']} samples, fs={io.BONN_FS}, "
              f"{io.BONN_SAMPLES} points ({io.BONN_SAMPLES / io.BONN_FS:.1f} s) each")
        for letter, recs in corpus.items():
            print(f"  set {letter}: {len(recs)} recordings")
        segs = io.build_case(ds["case"], corpus)
        pos = sum(s.label for s in segs)
        print(f"case {ds['case']}: {pos} seizure / {len(segs) - pos} non-seizure")
        return []
    recs = synthetic_recordings(cfg) if kind == "synthetic" else io.load_generic_corpus(ds["corpus_dir"])
    print(f"{len(recs)} recordings")
    print("subject,duration_s,fs,events,seizure_s")
    for r in recs:
        sz = sum(iv.end_s - iv.start_s for iv in r.annotations)
        print(f"{r.subject_id},{r.duration:.2f},{r.fs:g},{len(r.annotations)},{sz:.2f}")
    segs = io.segment_corpus(recs, ds["window_s"], ds["hop_s"], ds["seizure_threshold"])
    pos = sum(s.label for s in segs)
    print(f"segments: {len(segs)} ({pos} seizure, {len(segs) - pos} non-seizure)")
    return []


def cmd_synth(cfg, args):
    if cfg["dataset"].get("synthetic") is None:
        cfg["dataset"] = {**cfg["dataset"], "bonn_root": None, "corpus_dir": None, "synthetic": {}}
    recs = synthetic_recordings(cfg)
    out = _out_dir(cfg) / "corpus"
    written = []
    for r in recs:
        io.write_recording(r, out, r.subject_id)
        written += [out / f"{r.subject_id}.txt", out / f"{r.subject_id}.manifest"]
    manifest = out.parent / "synth.json"
    _write_json(manifest, {"config_digest": config_digest(cfg), "seed": cfg["seed"],
                           "synthetic": cfg["dataset"]["synthetic"],
                           "recordings": [r.subject_id for r in recs]})
    print(f"wrote {len(recs)} recordings to {out}")
    return written + [manifest]


def cmd_featurize(cfg, args):
    segs = load_segments(cfg)
    fcfg = feature_config(cfg)
    out = _out_dir(cfg)
    dig = config_digest(cfg)
    labels_path = out / "labels.csv"
    with open(labels_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["segment_id", "label", "subject_id", "start_s"])
        for s in segs:
            w.writerow([s.segment_id, s.label, s.subject_id or "", repr(s.start_s)])
    written = [labels_path]
    entries = []
    for method in methods_of(cfg):
        feats, meta = featurize_many(segs, method, fcfg, jobs=cfg["jobs"])
        path = out / f"features_{method}.bin"
        write_feature_dump(path, method, feats, meta)
        written += [path, Path(str(path) + ".freqs.txt")]
        entries.append({"method": method, "file": path.name, "count": feats.shape[0],
                        "channels": feats.shape[1], "length": feats.shape[2]})
        print(f"{method}: {feats.shape[0]} rows x {feats.shape[1]} channels x {feats.shape[2]}")
    manifest = out / "features.json"
    _write_json(manifest, {"config_digest": dig, "features": entries, "labels": labels_path.name,
                           "feature_config": fcfg.as_dict()})
    return written + [manifest]


def _first_split(cfg, segs):
    plan = dataclasses.replace(split_plan(cfg), repeats=1)
    return io.make_splits(segs, plan)[0]


def cmd_train(cfg, args):
    methods = methods_of(cfg)
    if len(methods) != 1:
        raise ConfigError("train takes exactly one feature method")
    method = methods[0]
    segs = load_segments(cfg)
    fcfg = feature_config(cfg)
    feats, _ = featurize_many(segs, method, fcfg, jobs=cfg["jobs"])
    labels = np.array([s.label for s in segs])
    train_ids, test_ids = _first_split(cfg, segs)
    mcfg = ModelConfig(in_channels=feats.shape[1], in_length=feats.shape[2],
                       **{**model_overrides(cfg), "seed": cfg["seed"]})
    tcfg = TrainConfig(**{**train_overrides(cfg), "seed": cfg["seed"]})
    log = []
    model, _ = train(mcfg, tcfg, feats[train_ids], labels[train_ids], log=log)
    dig = config_digest(cfg)
    model.meta = {"method": method, "config_digest": dig, "feature_config": fcfg.as_dict()}
    out = _out_dir(cfg)
    model_path = out / "model.msnn"
    save_model(model, model_path, adam_state=model.adam_state)
    log_path = out / "training_log.csv"
    write_training_log(log, log_path)
    counts = confusion(model.predict(feats[test_ids]), labels[test_ids])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UndefinedMetricWarning)
        m = metrics(counts)
    result = out / "train_metrics.json"
    _write_json(result, {"config_digest": dig, "method": method, "n_train": int(train_ids.size),
                         "n_test": int(test_ids.size), **dataclasses.asdict(m),
                         **dataclasses.asdict(counts)})
    print(f"{method}: test spe={m.spe:.4f} sen={m.sen:.4f} acc={m.acc:.4f}")
    return [model_path, log_path, result]


def _evaluate_saved(cfg, args):
    model = load_model(args.model)
    method = model.meta.get("method")
    if method is None:
        raise ModelError(f"{args.model} does not record its feature method")
    segs = load_segments(cfg)
    fcfg = feature_config(cfg)
    feats, _ = featurize_many(segs, method, fcfg, jobs=cfg["jobs"])
    labels = np.array([s.label for s in segs])
    _, test_ids = _first_split(cfg, segs)
    counts = confusion(model.predict(feats[test_ids]), labels[test_ids])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UndefinedMetricWarning)
        m = metrics(counts)
    out = _out_dir(cfg) / "eval_metrics.json"
    _write_json(out, {"config_digest": config_digest(cfg), "model": str(args.model),
                      "method": method, "n_test": int(test_ids.size),
                      **dataclasses.asdict(m), **dataclasses.asdict(counts)})
    print(f"{method}: test spe={m.spe:.4f} sen={m.sen:.4f} acc={m.acc:.4f}")
    return [out]


def _report_lines(reports):
    for rep in reports:
        parts = []
        for metric in METRICS:
            s = rep.summary(metric)
            parts.append(f"{metric}={s['mean']:.4f}+/-{s['std']:.4f}")
        print(f"{rep.method} [{rep.scenario}, {len(rep.repeats)} repeats]: " + " ".join(parts))


def cmd_evaluate(cfg, args):
    if getattr(args, "model", None):
        return _evaluate_saved(cfg, args)
    methods = methods_of(cfg)
    if len(methods) != 1:
        raise ConfigError("evaluate takes exactly one feature method; use compare for several")
    segs = load_segments(cfg)
    rep = run_cv(segs, methods[0], model_overrides(cfg), train_overrides(cfg), split_plan(cfg),
                 feature_config(cfg), jobs=cfg["jobs"])
    _report_lines([rep])
    return _export(cfg, [rep])


def cmd_compare(cfg, args):
    segs = load_segments(cfg)
    reports = compare_methods(segs, methods_of(cfg), model_overrides(cfg), train_overrides(cfg),
                              split_plan(cfg), feature_config(cfg), jobs=cfg["jobs"])
    _report_lines(reports)
    return _export(cfg, reports)


def _export(cfg, reports):
    out = _out_dir(cfg)
    written = export_report(reports, out)
    run = out / "run.json"
    _write_json(run, {"config_digest": config_digest(cfg), "config": cfg,
                      "split_digest": reports[0].split_digest,
                      "failures": {r.method: r.failures for r in reports}})
    return written + [run]


def cmd_bench(cfg, args):
    n = args.segments
    if n < 1:
        raise ConfigError("bench needs at least one segment")
    if n < 1000:
        logger.warning("timing statistics over %d segments; 1000 or more recommended", n)
    methods = methods_of(cfg)
    if len(methods) != 1:
        raise ConfigError("bench takes exactly one feature method")
    method = methods[0]
    if dataset_kind_or_none(cfg) is None:
        # default workload: 4 s windows at 256 Hz from a synthetic corpus
        cfg["dataset"] = {**cfg["dataset"], "synthetic": {"n_subjects": 19, "duration_s": 120.0}}
    segs = load_segments(cfg)
    segs = [segs[i % len(segs)] for i in range(n)]
    fcfg = feature_config(cfg)
    probe = featurize(segs[0], method, fcfg)
    if args.model:
        model = load_model(args.model)
    else:
        # latency does not depend on the weights, so an untrained network suffices
        c, length = probe.data.shape
        mcfg = ModelConfig(in_channels=c, in_length=length, **model_overrides(cfg))
        model = Model(mcfg, init_params(mcfg), InputNormalizer(np.zeros(c, np.float32),
                                                               np.ones(c, np.float32)))
    for s in segs[:10]:
        model.predict(featurize(s, method, fcfg).data[None])
    times = np.empty(n)
    for i, s in enumerate(segs):
        t0 = time.perf_counter()
        model.predict(featurize(s, method, fcfg).data[None])
        times[i] = time.perf_counter() - t0
    stats = {"min": times.min(), "median": float(np.median(times)),
             "p95": float(np.percentile(times, 95))}
    out = _out_dir(cfg) / "bench.csv"
    rows = [["method", "n_segments", "segment_s", "fs", "stat", "seconds", "config_digest"]]
    seg_len = segs[0].samples.size / segs[0].fs
    for k, v in stats.items():
        rows.append([method, n, repr(seg_len), repr(segs[0].fs), k, repr(float(v)), config_digest(cfg)])
    with open(out, "w", newline="") as fh:
        csv.writer(fh, lineterminator="\n").writerows(rows)
    csv.writer(sys.stdout, lineterminator="\n").writerows(rows)
    return [out]


def dataset_kind_or_none(cfg):
    ds = cfg["dataset"]
    if not any(ds.get(k) is not None for k in ("bonn_root", "corpus_dir", "synthetic")):
        return None
    return dataset_kind(cfg)


COMMANDS = {
    "ingest": cmd_ingest, "synth": cmd_synth, "featurize": cmd_featurize, "train": cmd_train,
    "evaluate": cmd_evaluate, "compare": cmd_compare, "bench": cmd_bench,
}


# --------------------------------------------------------------------------
# argument parsing


def _global_flags(p, default):
    p.add_argument("--config", type=Path, default=default, help="YAML or JSON experiment config")
    p.add_argument("--seed", type=int, default=default, help="top-level seed")
    p.add_argument("--out", type=Path, default=default, help="output directory")
    p.add_argument("--repeats", type=int, default=default, help="Monte Carlo repeats")
    p.add_argument("--jobs", type=int, default=default, help="worker processes")
    p.add_argument("-v", "--verbose", action="store_true", default=default)


def _dataset_flags(p):
    g = p.add_argument_group("dataset (overrides the config source)")
    g.add_argument("--bonn-root", dest="bonn_root", type=Path, help="Bonn corpus directory")
    g.add_argument("--case", type=int, help="Bonn case 1-7")
    g.add_argument("--corpus", dest="corpus_dir", type=Path, help="generic annotated corpus directory")
    g.add_argument("--synthetic", type=int, metavar="N_SUBJECTS", help="generate a synthetic corpus")


def build_parser():
    parser = argparse.ArgumentParser(prog="mswtc", description=__doc__.splitlines()[0])
    _global_flags(parser, None)
    sub = parser.add_subparsers(dest="command", required=True)
    shared = argparse.ArgumentParser(add_help=False)
    _global_flags(shared, argparse.SUPPRESS)

    p = sub.add_parser("ingest", parents=[shared], help="summarise a corpus")
    _dataset_flags(p)

    p = sub.add_parser("synth", parents=[shared], help="write a synthetic corpus to <out>/corpus")
    p.add_argument("--synthetic", type=int, metavar="N_SUBJECTS", default=None)

    p = sub.add_parser("featurize", parents=[shared], help="write feature dumps")
    _dataset_flags(p)
    p.add_argument("--methods", "--method", dest="methods", help="comma-separated: ms,m,s,fft,emd")

    p = sub.add_parser("train", parents=[shared], help="train one model on the first split")
    _dataset_flags(p)
    p.add_argument("--method", dest="methods")
    p.add_argument("--epochs", type=int)
    p.add_argument("--scenario", choices=["mixed", "separated"])

    p = sub.add_parser("evaluate", parents=[shared], help="Monte Carlo CV of one method, or score a saved model")
    _dataset_flags(p)
    p.add_argument("--method", dest="methods")
    p.add_argument("--epochs", type=int)
    p.add_argument("--scenario", choices=["mixed", "separated"])
    p.add_argument("--model", type=Path, help="evaluate this saved model on the first split")

    p = sub.add_parser("compare", parents=[shared], help="CV several methods on shared splits")
    _dataset_flags(p)
    p.add_argument("--methods", default=None)
    p.add_argument("--epochs", type=int)
    p.add_argument("--scenario", choices=["mixed", "separated"])

    p = sub.add_parser("bench", parents=[shared], help="per-segment featurize+predict latency")
    _dataset_flags(p)
    p.add_argument("--method", dest="methods")
    p.add_argument("--segments", type=int, default=1000)
    p.add_argument("--model", type=Path)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = apply_flags(load_config(args.config), args)
        if cfg["jobs"] < 1:
            raise ConfigError("--jobs must be >= 1")
        written = COMMANDS[args.command](cfg, args)
        _check_written(written)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"mswtc {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (ConfigError, io.DatasetError, ModelError, SpectralError, ValueError, OSError,
            RuntimeError) as exc:
        print(f"mswtc {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
