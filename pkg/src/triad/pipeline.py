"""End-to-end orchestration: train, localize, search discords, score, evaluate."""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import time
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import detector, discord, evaluate, scorer
from .series import SegmentationConfig, TimeSeries, estimate_period, load_ucr, split_stats, \
    znormalize
from .train import LossConfig, TrainedModel, train

log = logging.getLogger(__name__)

REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "TriAD dataset report",
    "type": "object",
    "required": ["dataset", "seed", "n_test", "anomaly", "segmentation", "detection",
                 "scoring", "metrics"],
    "properties": {
        "dataset": {"type": "string"},
        "seed": {"type": "integer"},
        "n_test": {"type": "integer", "minimum": 1},
        "anomaly": {
            "type": "object",
            "required": ["begin", "end"],
            "properties": {"begin": {"type": "integer"}, "end": {"type": "integer"}},
        },
        "segmentation": {
            "type": "object",
            "required": ["period", "window_len", "stride"],
            "properties": {k: {"type": "integer", "minimum": 1}
                           for k in ("period", "window_len", "stride")},
        },
        "detection": {
            "type": "object",
            "required": ["candidates", "chosen", "region", "tri_window_hit",
                         "single_window_hit", "n_hits"],
            "properties": {
                "candidates": {"type": "object",
                               "additionalProperties": {"type": "integer"}},
                "chosen": {"type": "integer", "minimum": 0},
                "region": {"type": "array", "items": {"type": "integer"},
                           "minItems": 2, "maxItems": 2},
                "tri_window_hit": {"type": "boolean"},
                "single_window_hit": {"type": "boolean"},
                "n_hits": {"type": "integer", "minimum": 0},
            },
        },
        "scoring": {
            "type": "object",
            "required": ["threshold", "rule", "exception_fired", "n_positive"],
        },
        "metrics": {
            "type": "object",
            "required": ["precision_pw", "recall_pw", "f1_pw", "f1_pa", "pa_k_precision_auc",
                         "pa_k_recall_auc", "pa_k_f1_auc", "affiliation_precision",
                         "affiliation_recall", "affiliation_f1"],
            "additionalProperties": {"type": ["number", "boolean"]},
        },
    },
}


class StageError(RuntimeError):
    def __init__(self, stage, message):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


@dataclass
class PipelineConfig:
    seed: int = 0
    alpha: float = 0.4
    batch_size: int = 8
    epochs: int = 20
    lr: float = 1e-3
    val_fraction: float = 0.10
    depth: int = 6
    hidden: int = 32
    kernel: int = 3
    window_len: int | None = None
    period: int | None = None
    pad: int | None = None
    l_min: int = 3
    l_max: int | None = None
    l_step: int | None = None
    rule: str = "mean"
    percentile: float = 90.0
    probe_stride: int | None = None

    def loss_config(self):
        return LossConfig(self.alpha, self.batch_size, self.epochs, self.lr, self.val_fraction,
                          self.seed, self.depth, self.hidden, self.kernel)

    def items(self):
        return [(f.name, getattr(self, f.name)) for f in fields(self)]


def _coerce(cfg_field, raw):
    if raw in ("None", "none", ""):
        return None
    typ = str(cfg_field.type)
    if typ.startswith("int"):
        return int(raw)
    if typ.startswith("float"):
        return float(raw)
    return raw


def parse_config_text(text):
    """Flat ``key=value`` lines; '#' comments and unknown keys (e.g. epoch logs) skipped."""
    known = {f.name: f for f in fields(PipelineConfig)}
    values, extra = {}, {}
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if not line or "=" not in line:
            continue
        key, raw = (s.strip() for s in line.split("=", 1))
        if key in known:
            values[key] = _coerce(known[key], raw)
        else:
            extra[key] = raw
    return values, extra


def config_from_sources(file_text=None, overrides=None):
    """Defaults < file < explicit overrides (None overrides are ignored)."""
    values = {}
    extra = {}
    if file_text:
        values, extra = parse_config_text(file_text)
    for k, v in (overrides or {}).items():
        if v is not None:
            values[k] = v
    return PipelineConfig(**values), extra


def sha256_file(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


@dataclass
class Dataset:
    name: str
    path: Path
    values: np.ndarray  # full series, normalized with training statistics
    meta: object
    mean: float
    std: float
    period: int
    seg: SegmentationConfig

    @property
    def train(self):
        return self.values[:self.meta.train_end]

    @property
    def test(self):
        return self.values[self.meta.train_end:]

    def truth(self):
        b, e = self.meta.test_span()
        return evaluate.truth_from_span(len(self.test), b, e)


def prepare(path, cfg):
    try:
        raw, meta = load_ucr(path)
        train_raw = raw.slice(0, meta.train_end)
        mean, std = split_stats(train_raw)
        full = znormalize(raw, mean, std)
        period = cfg.period or estimate_period(TimeSeries(full.values[:meta.train_end]))
        seg = SegmentationConfig.from_period(period, cfg.window_len)
    except Exception as exc:
        raise StageError("load", str(exc)) from exc
    return Dataset(raw.name, Path(path), full.values, meta, mean, std, period, seg)


def fit(ds, cfg, progress=None):
    try:
        return train(TimeSeries(ds.train, ds.name), cfg.loss_config(), ds.seg, ds.mean, ds.std,
                     progress=progress)
    except Exception as exc:
        raise StageError("train", str(exc)) from exc


@dataclass
class Detection:
    candidates: detector.CandidateWindows
    chosen: int
    nn_distances: dict
    region: detector.SearchRegion
    hits: list  # test coordinates
    scores: scorer.ScoreVector
    timings: dict = field(default_factory=dict)


def default_l_max(region_len, window_len):
    return min(window_len, region_len // 2 - 1)


def detect(model, train_values, test_values, cfg):
    """Localize and label the anomaly in ``test_values`` (already normalized)."""
    L = model.seg.window_len
    timings = {}
    try:
        t0 = time.perf_counter()
        cands = detector.tri_window(TimeSeries(test_values), model)
        timings["tri_window"] = time.perf_counter() - t0
    except Exception as exc:
        raise StageError("tri_window", str(exc)) from exc
    try:
        t0 = time.perf_counter()
        chosen, nn = detector.select_single(cands, train_values, L, test_values,
                                            cfg.probe_stride)
        region = detector.make_search_region(chosen, L, len(test_values), cfg.pad)
        timings["select_single"] = time.perf_counter() - t0
    except Exception as exc:
        raise StageError("select_single", str(exc)) from exc
    try:
        t0 = time.perf_counter()
        seg_values = test_values[region.begin:region.end]
        l_max = cfg.l_max or default_l_max(region.length, L)
        hits = discord.merlin(seg_values, cfg.l_min, l_max, cfg.l_step)
        hits = [h.shifted(region.begin) for h in hits]
        timings["discord"] = time.perf_counter() - t0
    except Exception as exc:
        raise StageError("discord", str(exc)) from exc
    try:
        sv = scorer.score(len(test_values), (chosen, L), hits, cfg.rule, cfg.percentile)
    except Exception as exc:
        raise StageError("score", str(exc)) from exc
    return Detection(cands, chosen, nn, region, hits, sv, timings)


def _overlaps(start, length, b, e):
    return start <= e and b < start + length


def build_report(ds, cfg, det, metrics):
    b, e = ds.meta.test_span()
    L = ds.seg.window_len
    return {
        "dataset": ds.name,
        "seed": cfg.seed,
        "n_test": int(len(ds.test)),
        "anomaly": {"begin": int(b), "end": int(e)},
        "segmentation": {"period": ds.seg.period, "window_len": L, "stride": ds.seg.stride},
        "detection": {
            "candidates": {d: int(s) for d, s in det.candidates.starts.items()},
            "chosen": int(det.chosen),
            "region": [int(det.region.begin), int(det.region.end)],
            "tri_window_hit": any(_overlaps(s, L, b, e) for s in det.candidates.distinct),
            "single_window_hit": _overlaps(det.chosen, L, b, e),
            "n_hits": len(det.hits),
        },
        "scoring": det.scores.summary(),
        "metrics": metrics.to_dict(),
    }


def detection_trace(det):
    c = det.candidates
    return {
        "window_starts": [int(s) for s in c.window_starts],
        "deviance": {d: [round(float(v), 12) for v in c.deviance[d]] for d in c.deviance},
        "nominated": {d: int(s) for d, s in c.starts.items()},
        "nominated_scores": {d: round(float(v), 12) for d, v in c.scores.items()},
        "nn_to_train": {str(k): round(float(v), 12) for k, v in det.nn_distances.items()},
        "chosen": int(det.chosen),
        "region": [int(det.region.begin), int(det.region.end)],
    }


def write_manifest(path, ds, cfg, history):
    lines = [f"dataset={ds.path}", f"dataset_name={ds.name}",
             f"dataset_sha256={sha256_file(ds.path)}"]
    lines += [f"{k}={v}" for k, v in cfg.items()]
    for h in history:
        lines.append(f"epoch.{h['epoch']}.train={h['train']}")
        lines.append(f"epoch.{h['epoch']}.val={h['val']}")
    Path(path).write_text("\n".join(lines) + "\n")


def write_hits(path, hits):
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["length", "start", "distance"])
        for h in hits:
            w.writerow([h.length, h.start, repr(float(h.distance))])


def write_scores(path, sv):
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["timestamp", "votes", "label"])
        for i, (v, y) in enumerate(zip(sv.votes, sv.labels)):
            w.writerow([i, int(v), int(y)])


def read_scores(path):
    with Path(path).open() as fh:
        rows = list(csv.DictReader(fh))
    return (np.array([int(r["votes"]) for r in rows]),
            np.array([int(r["label"]) for r in rows], dtype=np.int8))


def write_pak_curve(path, pred, truth):
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["K", "precision", "recall", "f1"])
        for row in evaluate.pa_k_curve(pred, truth):
            w.writerow([row[0], *(f"{v:.12g}" for v in row[1:])])


def dump_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def validate_report(report):
    import jsonschema
    jsonschema.validate(report, REPORT_SCHEMA)
    return report


def train_stage(path, cfg, outdir):
    """Load and train; writes the checkpoint and run manifest. Returns (dataset, model, out)."""
    ds = prepare(path, cfg)
    out = Path(outdir) / ds.name
    out.mkdir(parents=True, exist_ok=True)
    model = fit(ds, cfg)
    model.save(out / "model.npz")
    write_manifest(out / "manifest.txt", ds, cfg, model.history)
    return ds, model, out


def load_model(path):
    try:
        return TrainedModel.load(path)
    except Exception as exc:
        raise StageError("load", f"cannot read checkpoint {path}: {exc}") from exc


def detect_stage(ds, model, cfg, out, plot=True):
    """Detection plus its artifacts (trace, hits, scores, summary, optional plot)."""
    ds.seg = model.seg
    det = detect(model, ds.train, ds.test, cfg)
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    dump_json(out / "trace.json", detection_trace(det))
    write_hits(out / "hits.csv", det.hits)
    write_scores(out / "scores.csv", det.scores)
    dump_json(out / "summary.json", det.scores.summary())
    if plot:
        try:
            from .plotting import plot_detection
            plot_detection(out / "plot.svg", ds, det)
        except Exception as exc:
            raise StageError("plot", str(exc)) from exc
    return det


def eval_stage(ds, labels, out):
    """Metrics for a label vector; writes the PA%K curve and returns a MetricReport."""
    truth = ds.truth()
    try:
        metrics = evaluate.evaluate(labels, truth)
        write_pak_curve(Path(out) / "pak_curve.csv", labels, truth)
    except Exception as exc:
        raise StageError("eval", str(exc)) from exc
    return metrics


def run(path, cfg, outdir, plot=True):
    """Full pipeline for one dataset; returns the schema-checked report dict."""
    ds, model, out = train_stage(path, cfg, outdir)
    det = detect_stage(ds, model, cfg, out, plot)
    metrics = eval_stage(ds, det.scores.labels, out)
    report = build_report(ds, cfg, det, metrics)
    try:
        validate_report(report)
    except Exception as exc:
        raise StageError("report", str(exc)) from exc
    dump_json(out / "report.json", report)
    return report


def _run_one(args):
    path, cfg, outdir, plot = args
    return run(path, cfg, outdir, plot)


def run_batch(paths, cfg, outdir, workers=1, plot=True):
    """One pipeline per dataset (optionally in worker processes) plus an aggregate summary."""
    jobs = [(p, cfg, outdir, plot) for p in paths]
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(workers) as pool:
            reports = list(pool.map(_run_one, jobs))
    else:
        reports = [_run_one(j) for j in jobs]
    summary = aggregate(reports)
    out = Path(outdir)
    dump_json(out / "aggregate.json", summary)
    write_aggregate_csv(out / "aggregate.csv", summary)
    return reports, summary


def write_aggregate_csv(path, summary):
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["metric", "mean", "std"])
        for k in AGGREGATE_KEYS:
            w.writerow([k, f"{summary[k]['mean']:.6f}", f"{summary[k]['std']:.6f}"])


AGGREGATE_KEYS = ("f1_pw", "f1_pa", "pa_k_precision_auc", "pa_k_recall_auc", "pa_k_f1_auc",
                  "affiliation_precision", "affiliation_recall", "affiliation_f1")


def aggregate(reports):
    """Mean and population std of each metric, plus window accuracies."""
    out = {"n_datasets": len(reports)}
    for k in AGGREGATE_KEYS:
        v = np.array([r["metrics"][k] for r in reports], dtype=float)
        out[k] = {"mean": round(float(v.mean()), 12), "std": round(float(v.std()), 12)}
    for k in ("tri_window_hit", "single_window_hit"):
        v = np.array([r["detection"][k] for r in reports], dtype=float)
        out[k.replace("_hit", "_accuracy")] = round(float(v.mean()), 12)
    return out
