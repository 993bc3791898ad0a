"""Metrics, Monte Carlo cross-validation and report export."""
from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ._random import substream
from .io_datasets import make_splits
from .micro_nn import ModelConfig, TrainConfig, train
from .pipeline import FeatureConfig, featurize_many, resolve_method

logger = logging.getLogger(__name__)

METRICS = ("spe", "sen", "acc")
MAX_CONSECUTIVE_FAILURES = 3


class UndefinedMetricWarning(UserWarning):
    pass


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    tn: int
    fp: int
    fn: int

    @property
    def total(self):
        return self.tp + self.tn + self.fp + self.fn


@dataclass(frozen=True)
class Metrics:
    spe: float
    sen: float
    acc: float


def confusion(predicted, labels):
    """Confusion counts with class 1 (seizure) as the positive class."""
    p = np.asarray(predicted).astype(np.int64).reshape(-1)
    y = np.asarray(labels).astype(np.int64).reshape(-1)
    if p.shape != y.shape:
        raise ValueError(f"length mismatch: {p.size} predictions vs {y.size} labels")
    tp = int(np.sum((p == 1) & (y == 1)))
    tn = int(np.sum((p == 0) & (y == 0)))
    fp = int(np.sum((p == 1) & (y == 0)))
    fn = int(np.sum((p == 0) & (y == 1)))
    return ConfusionCounts(tp, tn, fp, fn)


def metrics(counts):
    """SPE = TN/(TN+FP), SEN = TP/(TP+FN), ACC = (TP+TN)/total.

    A ratio whose denominator is zero is reported as NaN with an
    ``UndefinedMetricWarning``.
    """
    c = counts
    if c.tn + c.fp:
        spe = c.tn / (c.tn + c.fp)
    else:
        spe = math.nan
        warnings.warn("SPE undefined: no negatives in test set", UndefinedMetricWarning, stacklevel=2)
    if c.tp + c.fn:
        sen = c.tp / (c.tp + c.fn)
    else:
        sen = math.nan
        warnings.warn("SEN undefined: no positives in test set", UndefinedMetricWarning, stacklevel=2)
    acc = (c.tp + c.tn) / c.total if c.total else math.nan
    return Metrics(spe, sen, acc)


def evaluate(model, features, labels, threshold=0.5):
    counts = confusion(model.predict(features, threshold), labels)
    return counts, metrics(counts)


# --------------------------------------------------------------------------
# aggregation


def summarize(values):
    """mean, sample std, and type-7 quartiles over the finite entries."""
    v = np.asarray(values, dtype=np.float64)
    v = v[np.isfinite(v)]
    if v.size == 0:
        return {"mean": math.nan, "std": math.nan, "q25": math.nan, "q50": math.nan,
                "q75": math.nan, "n": 0}
    q25, q50, q75 = np.percentile(v, [25, 50, 75], method="linear")
    return {
        "mean": float(np.mean(v)),
        "std": float(np.std(v, ddof=1)) if v.size > 1 else 0.0,
        "q25": float(q25), "q50": float(q50), "q75": float(q75),
        "n": int(v.size),
    }


def digest(obj):
    blob = json.dumps(obj, sort_keys=True, default=str).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()[:16]


def split_digest(splits):
    h = hashlib.sha256()
    for train_ids, test_ids in splits:
        h.update(np.asarray(train_ids, dtype="<i8").tobytes())
        h.update(b"|")
        h.update(np.asarray(test_ids, dtype="<i8").tobytes())
        h.update(b"#")
    return h.hexdigest()[:16]


@dataclass
class CvReport:
    method: str
    scenario: str
    seed: int
    repeats: list = field(default_factory=list)   # list of (Metrics, ConfusionCounts)
    failures: list = field(default_factory=list)  # list of (repeat index, message)
    split_digest: str = ""
    config_digest: str = ""
    degenerate_std: bool = False

    def values(self, metric):
        return [getattr(m, metric) for m, _ in self.repeats]

    def summary(self, metric):
        return summarize(self.values(metric))

    @property
    def mean_acc(self):
        return self.summary("acc")["mean"]


# --------------------------------------------------------------------------
# cross-validation


def _derive_seed(seed, *names):
    return int(substream(seed, *names).integers(0, 2**31 - 1))


def _one_repeat(args):
    r, feats, labels, train_ids, test_ids, model_kwargs, train_kwargs, seed = args
    mcfg = ModelConfig(in_channels=feats.shape[1], in_length=feats.shape[2],
                       **{**model_kwargs, "seed": _derive_seed(seed, "init", r)})
    tcfg = TrainConfig(**{**train_kwargs, "seed": _derive_seed(seed, "train", r)})
    model, _ = train(mcfg, tcfg, feats[train_ids], labels[train_ids])
    counts = confusion(model.predict(feats[test_ids]), labels[test_ids])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UndefinedMetricWarning)
        return metrics(counts), counts


def _model_kwargs(model_cfg):
    d = dict(model_cfg or {})
    for k in ("in_channels", "in_length", "seed"):
        d.pop(k, None)
    return d


def _train_kwargs(train_cfg):
    if isinstance(train_cfg, TrainConfig):
        d = asdict(train_cfg)
    else:
        d = dict(train_cfg or {})
    d.pop("seed", None)
    return d


def run_cv(segments, method, model_cfg=None, train_cfg=None, plan=None,
           feature_cfg=FeatureConfig(), jobs=1, features=None, splits=None):
    """Monte Carlo cross-validation of one feature method.

    Every repeat gets a fresh split, fresh CNN initialisation and its own
    shuffle/dropout streams, all derived from ``plan.seed``, so the report is
    a deterministic function of its inputs. Features depend only on the
    segment, so they are extracted once and indexed per split.

    Parameters
    ----------
    segments : list of Segment
    method : str
        Feature method name or alias (``ms``, ``m``, ``s``, ``fft``, ``emd``).
    model_cfg, train_cfg : dict or None
        Overrides for :class:`ModelConfig` / :class:`TrainConfig`; input
        shape and seeds are filled in per repeat.
    plan : SplitPlan
    """
    method = resolve_method(method)
    labels = np.array([s.label for s in segments], dtype=np.int64)
    if features is None:
        features, _ = featurize_many(segments, method, feature_cfg, jobs=jobs)
    if splits is None:
        splits = make_splits(segments, plan)
    mk, tk = _model_kwargs(model_cfg), _train_kwargs(train_cfg)
    report = CvReport(
        method=method, scenario=plan.scenario, seed=plan.seed,
        split_digest=split_digest(splits),
        config_digest=digest({"method": method, "model": mk, "train": tk,
                              "plan": asdict(plan), "features": feature_cfg.as_dict()}),
        degenerate_std=plan.repeats == 1,
    )
    jobs_args = [(r, features, labels, tr, te, mk, tk, plan.seed) for r, (tr, te) in enumerate(splits)]

    def outcomes():
        if jobs > 1:
            with ProcessPoolExecutor(max_workers=jobs) as ex:
                futures = [ex.submit(_one_repeat, a) for a in jobs_args]
                for f in futures:
                    try:
                        yield f.result(), None
                    except Exception as exc:  # noqa: BLE001 - reported per repeat
                        yield None, exc
        else:
            for a in jobs_args:
                try:
                    yield _one_repeat(a), None
                except Exception as exc:  # noqa: BLE001
                    yield None, exc

    consecutive = 0
    for r, (result, exc) in enumerate(outcomes()):
        if exc is not None:
            consecutive += 1
            report.failures.append((r, f"{type(exc).__name__}: {exc}"))
            logger.warning("repeat %d failed: %s", r, exc)
            if consecutive >= MAX_CONSECUTIVE_FAILURES:
                raise RuntimeError(
                    f"{method}: {consecutive} consecutive repeats failed, last at repeat {r}: {exc}"
                ) from exc
            continue
        consecutive = 0
        report.repeats.append(result)
    for metric in METRICS:
        if any(math.isnan(v) for v in report.values(metric)):
            warnings.warn(f"{method}: NaN {metric.upper()} repeats excluded from aggregation",
                          UndefinedMetricWarning, stacklevel=2)
    return report


def compare_methods(segments, methods, model_cfg=None, train_cfg=None, plan=None,
                    feature_cfg=FeatureConfig(), jobs=1):
    """Cross-validate several methods on one shared split sequence."""
    splits = make_splits(segments, plan)
    reports = []
    for m in methods:
        reports.append(run_cv(segments, m, model_cfg, train_cfg, plan, feature_cfg,
                              jobs=jobs, splits=splits))
    digests = {r.split_digest for r in reports}
    if len(digests) != 1:
        raise RuntimeError(f"split sequences diverged across methods: {digests}")
    return reports


# --------------------------------------------------------------------------
# export


SUMMARY_COLUMNS = ("method", "scenario", "metric", "mean", "std", "q25", "q50", "q75", "n_repeats",
                   "config_digest")


def write_summary_csv(reports, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_COLUMNS)
        for rep in reports:
            for metric in METRICS:
                s = rep.summary(metric)
                w.writerow([rep.method, rep.scenario, metric, repr(s["mean"]), repr(s["std"]),
                            repr(s["q25"]), repr(s["q50"]), repr(s["q75"]), s["n"], rep.config_digest])


def read_summary_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    for r in rows:
        for k in ("mean", "std", "q25", "q50", "q75"):
            r[k] = float(r[k])
        r["n_repeats"] = int(r["n_repeats"])
    return rows


def write_repeats_csv(reports, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["method", "scenario", "repeat", "spe", "sen", "acc", "tp", "tn", "fp", "fn",
                    "split_digest", "config_digest"])
        for rep in reports:
            for i, (m, c) in enumerate(rep.repeats):
                w.writerow([rep.method, rep.scenario, i, repr(m.spe), repr(m.sen), repr(m.acc),
                            c.tp, c.tn, c.fp, c.fn, rep.split_digest, rep.config_digest])


def box_stats(values, label):
    """Quartile box, 1.5 IQR whiskers, mean and outliers for one sample."""
    v = np.asarray(values, dtype=np.float64)
    v = v[np.isfinite(v)]
    if v.size == 0:
        v = np.array([math.nan])
    q1, med, q3 = np.percentile(v, [25, 50, 75], method="linear")
    iqr = q3 - q1
    lo_fence, hi_fence = q1 - 1.5 * iqr, q3 + 1.5 * iqr
    inside = v[(v >= lo_fence) & (v <= hi_fence)]
    return {
        "label": label, "med": med, "q1": q1, "q3": q3, "mean": float(np.mean(v)),
        "whislo": float(inside.min()) if inside.size else q1,
        "whishi": float(inside.max()) if inside.size else q3,
        "fliers": v[(v < lo_fence) | (v > hi_fence)],
    }


def write_box_svg(reports, metric, path):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    stats = [box_stats(r.values(metric), r.method) for r in reports]
    with matplotlib.rc_context({"svg.hashsalt": "mswtc", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(1.2 + 1.1 * len(stats), 3.6))
        ax.bxp(stats, showmeans=True, showfliers=True, patch_artist=True,
               boxprops={"facecolor": "#bfe9ef"},
               medianprops={"color": "red"},
               meanprops={"marker": "o", "markerfacecolor": "blue", "markeredgecolor": "blue"},
               flierprops={"marker": "+", "markeredgecolor": "red"})
        ax.set_ylabel(metric.upper())
        ax.grid(axis="y", linestyle=":", alpha=0.6)
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)


def export_report(reports, out_dir):
    """Write ``repeats.csv``, ``summary.csv`` and ``box_<metric>.svg`` files."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = [out / "repeats.csv", out / "summary.csv"]
    write_repeats_csv(reports, written[0])
    write_summary_csv(reports, written[1])
    for metric in METRICS:
        p = out / f"box_{metric}.svg"
        write_box_svg(reports, metric, p)
        written.append(p)
    return written
