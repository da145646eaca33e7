"""Command line entry point: ``triad {synth,train,detect,eval,pipeline,bench}``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import pipeline, synth
from .pipeline import StageError, config_from_sources, dump_json, prepare, read_scores, \
    sha256_file
from .series import read_manifest

OUTPUT_ENV = "TRIAD_OUTPUT_DIR"

# PipelineConfig field -> flag type; flags are the field names with dashes
OVERRIDES = {
    "seed": int, "alpha": float, "batch_size": int, "epochs": int, "lr": float,
    "val_fraction": float, "depth": int, "hidden": int, "kernel": int,
    "window_len": int, "period": int, "pad": int, "l_min": int, "l_max": int,
    "l_step": int, "rule": str, "percentile": float, "probe_stride": int,
}


def _add_config_flags(p):
    p.add_argument("--config", type=Path, help="key=value config file (flags take precedence)")
    g = p.add_argument_group("overrides")
    for name, typ in OVERRIDES.items():
        flag = "--" + name.replace("_", "-")
        if name == "rule":
            g.add_argument(flag, choices=["mean", "percentile"], default=None)
        else:
            g.add_argument(flag, type=typ, default=None, metavar=name.upper())


def _add_out(p):
    p.add_argument("--out", type=Path, default=None,
                   help=f"output directory (default: ${OUTPUT_ENV} or ./triad_out)")


def _out_dir(args):
    if args.out is not None:
        return args.out
    return Path(os.environ.get(OUTPUT_ENV, "triad_out"))


def _config(args):
    text = None
    if getattr(args, "config", None) is not None:
        try:
            text = args.config.read_text()
        except OSError as exc:
            raise StageError("config", str(exc)) from exc
    overrides = {k: getattr(args, k) for k in OVERRIDES}
    try:
        cfg, extra = config_from_sources(text, overrides)
        cfg.loss_config()  # validates training options early
    except (TypeError, ValueError) as exc:
        raise StageError("config", str(exc)) from exc
    return cfg, extra


def _check_hash(path, extra):
    want = extra.get("dataset_sha256")
    if want and want != sha256_file(path):
        raise StageError("config", f"{path} does not match the manifest's dataset hash")


def cmd_synth(args):
    out = _out_dir(args)
    if args.suite:
        manifest = synth.write_suite(out, seed=args.seed, n_train=args.n_train,
                                     n_test=args.n_test, period=args.period)
        print(manifest)
        return
    spec = synth.SynthSpec(args.kind, args.n_train, args.n_test, args.period, args.length,
                           args.start, args.noise, args.seed)
    try:
        print(synth.write(spec, out, args.index))
    except ValueError as exc:
        raise StageError("synth", str(exc)) from exc


def cmd_train(args):
    cfg, extra = _config(args)
    _check_hash(args.dataset, extra)
    ds, model, out = pipeline.train_stage(args.dataset, cfg, _out_dir(args))
    h = model.history[model.best_epoch]
    print(f"{ds.name}: best epoch {model.best_epoch} (val {h['val']:.6f}) -> {out / 'model.npz'}")


def cmd_detect(args):
    cfg, _ = _config(args)
    ds = prepare(args.dataset, cfg)
    model = pipeline.load_model(args.model)
    out = _out_dir(args) / ds.name
    det = pipeline.detect_stage(ds, model, cfg, out, plot=not args.no_plot)
    print(f"{ds.name}: window {det.chosen}, region {det.region.begin}-{det.region.end}, "
          f"{len(det.hits)} hits, {int(det.scores.labels.sum())} positives -> {out}")


def cmd_eval(args):
    cfg, _ = _config(args)
    ds = prepare(args.dataset, cfg)
    out = _out_dir(args) / ds.name
    out.mkdir(parents=True, exist_ok=True)
    try:
        _, labels = read_scores(args.scores)
    except (OSError, KeyError, ValueError) as exc:
        raise StageError("eval", f"cannot read scores {args.scores}: {exc}") from exc
    metrics = pipeline.eval_stage(ds, labels, out).to_dict()
    dump_json(out / "metrics.json", metrics)
    print(json.dumps(metrics, indent=2))


def cmd_pipeline(args):
    cfg, extra = _config(args)
    out = _out_dir(args)
    if args.manifest is not None:
        try:
            paths = read_manifest(args.manifest)
        except OSError as exc:
            raise StageError("load", str(exc)) from exc
        reports, summary = pipeline.run_batch(paths, cfg, out, args.workers, not args.no_plot)
        for r in reports:
            print(f"{r['dataset']}: affiliation F1 {r['metrics']['affiliation_f1']:.3f}")
        print(json.dumps(summary, indent=2))
        return
    dataset = args.dataset or extra.get("dataset")
    if dataset is None:
        raise StageError("config", "give a dataset, --manifest, or a config with dataset=")
    _check_hash(dataset, extra)
    report = pipeline.run(dataset, cfg, out, plot=not args.no_plot)
    print(json.dumps(report["metrics"], indent=2))


def cmd_bench(args):
    from .bench import bench, sweep

    cfg, _ = _config(args)
    model = pipeline.load_model(args.model) if args.model else None
    result = bench(args.dataset, cfg, full_search=not args.no_full, model=model)
    if args.sweep:
        result["sweep"] = sweep(args.dataset, cfg, model=model)
    out = _out_dir(args)
    out.mkdir(parents=True, exist_ok=True)
    dump_json(out / f"bench_{result['dataset']}.json", result)
    print(json.dumps(result, indent=2))


def build_parser():
    ap = argparse.ArgumentParser(prog="triad", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write synthetic UCR-style datasets")
    p.add_argument("--kind", choices=synth.KINDS, default="seasonal")
    p.add_argument("--n-train", type=int, default=4000)
    p.add_argument("--n-test", type=int, default=3000)
    p.add_argument("--period", type=int, default=50)
    p.add_argument("--length", type=int, default=100, help="anomaly length")
    p.add_argument("--start", type=int, default=None, help="anomaly start in the test split")
    p.add_argument("--noise", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--index", type=int, default=0, help="numeric file-name prefix")
    p.add_argument("--suite", action="store_true",
                   help="write the 12-dataset suite (2 per kind) and a manifest")
    _add_out(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train the tri-domain encoders on a dataset")
    p.add_argument("dataset", type=Path)
    _add_config_flags(p)
    _add_out(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("detect", help="localize and label with a trained model")
    p.add_argument("dataset", type=Path)
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--no-plot", action="store_true")
    _add_config_flags(p)
    _add_out(p)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("eval", help="score a labels CSV against the dataset's ground truth")
    p.add_argument("dataset", type=Path)
    p.add_argument("--scores", type=Path, required=True)
    _add_config_flags(p)
    _add_out(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("pipeline", help="train, detect and evaluate end to end")
    p.add_argument("dataset", type=Path, nargs="?")
    p.add_argument("--manifest", type=Path, help="file listing one dataset per line")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--no-plot", action="store_true")
    _add_config_flags(p)
    _add_out(p)
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("bench", help="per-stage timings and search-span reduction")
    p.add_argument("dataset", type=Path)
    p.add_argument("--model", type=Path, help="skip training and use this checkpoint")
    p.add_argument("--no-full", action="store_true", help="skip the full-series discord search")
    p.add_argument("--sweep", action="store_true", help="also time three test-split sizes")
    _add_config_flags(p)
    _add_out(p)
    p.set_defaults(func=cmd_bench)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except StageError as exc:
        print(f"triad: error {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
