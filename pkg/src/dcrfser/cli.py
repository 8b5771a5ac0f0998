"""Command-line entry point.

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .augment import AugmentationPlan, expand_manifest
from .config import ConfigError, load_config
from .errors import DataError, DegenerateBatch, NumericalError, ShapeMismatch
from .features import load_features, save_features
from .harness.experiment import evaluate_checkpoint, run_crossval, run_holdout
from .harness.manifest import (REFERENCE_COUNTS, DatasetManifest, build_manifest,
                               reference_deviations)
from .harness.pipeline import extract_table, trim_entry_to_file
from .harness.report import write_metrics_json, write_report
from .harness.synthetic import generate_corpus
from .model.checkpoint import load_checkpoint, save_checkpoint
from .model.network import layer_summary, param_count

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 0, 1, 2, 3

log = logging.getLogger("dcrfser")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _load_manifest(path) -> DatasetManifest:
    if not Path(path).exists():
        raise DataError(f"no manifest at {path}")
    return DatasetManifest.load(path)


def _print_counts(manifest: DatasetManifest) -> None:
    counts = manifest.class_counts()
    print(f"{len(manifest)} entries: " + ", ".join(f"{k}={v}" for k, v in counts.items()))


def cmd_manifest(args):
    if len(args.corpus) != len(args.root):
        raise ConfigError("give one --root per --corpus")
    manifest = build_manifest(dict(zip(args.corpus, args.root)))
    manifest.save(args.out)
    _print_counts(manifest)
    print(f"excluded {manifest.excluded}, skipped {len(manifest.skipped)}")
    if args.reference:
        dev = reference_deviations(manifest, args.reference)
        print("matches reference counts" if not dev else f"deviation from reference: {dev}")


def _mark_preprocess(entry):
    return replace(entry, preprocess=True)


def cmd_preprocess(args):
    cfg = load_config(args.config)
    manifest = _load_manifest(args.manifest)
    if args.wav_dir:
        out_dir = Path(args.wav_dir)
        out = []
        for e in manifest:
            path = out_dir / (e.source_id.replace("/", "__") + ".wav")
            path.parent.mkdir(parents=True, exist_ok=True)
            out.append(trim_entry_to_file(e, path, cfg.dsp, cfg.trim))
        manifest = DatasetManifest(out)
    else:
        manifest = manifest.map(_mark_preprocess)
    manifest.save(args.out)
    print(f"{len(manifest)} entries marked for trimming and resampling to "
          f"{cfg.dsp.sample_rate} Hz")


def cmd_augment(args):
    cfg = load_config(args.config)
    manifest = _load_manifest(args.manifest)
    if args.plan == "none":
        plan = AugmentationPlan((), (), (), cfg.augment.seed)
    else:
        plan = cfg.augment
    if args.seed is not None:
        plan = replace(plan, seed=args.seed)
    out = expand_manifest(manifest, plan)
    out.save(args.out)
    _print_counts(out)


def cmd_extract(args):
    cfg = load_config(args.config)
    manifest = _load_manifest(args.manifest)
    table = extract_table(manifest, cfg.dsp, cfg.trim, args.workers)
    save_features(table, args.out)
    print(f"wrote {len(table)} x {table.X.shape[1]} features to {args.out}")


def _experiment(args):
    cfg = load_config(args.config)
    split = cfg.split if args.seed is None else replace(cfg.split, seed=args.seed)
    train = cfg.train if args.epochs is None else replace(cfg.train, epochs=args.epochs)
    return cfg, split, train


def cmd_train(args):
    cfg, split, train = _experiment(args)
    table = load_features(args.features)
    result = run_holdout(table, cfg.model, train, cfg.pca, split)
    save_checkpoint(args.out, result.checkpoint)
    m = result.metrics
    print(f"best epoch {result.checkpoint.meta['best_epoch']}; test accuracy {m.accuracy:.4f}, "
          f"macro F1 {m.macro['f1']:.4f}, weighted F1 {m.weighted['f1']:.4f}")
    if args.report:
        write_report(result.history, m, args.report)


def cmd_evaluate(args):
    ckpt = load_checkpoint(args.checkpoint)
    table = load_features(args.features)
    ids = None if args.all else ckpt.meta.get("test_ids")
    m = evaluate_checkpoint(ckpt, table, ids)
    print(json.dumps({"accuracy": m.accuracy, "macro_avg": m.macro,
                      "weighted_avg": m.weighted}, indent=2))
    if args.out:
        write_metrics_json(m, args.out)


def cmd_report(args):
    ckpt = load_checkpoint(args.checkpoint)
    table = load_features(args.features)
    m = evaluate_checkpoint(ckpt, table, ckpt.meta.get("test_ids"))
    paths = write_report(ckpt.meta.get("history", []), m, args.out)
    for p in paths.values():
        print(p)


def cmd_crossval(args):
    cfg, split, train = _experiment(args)
    table = load_features(args.features)
    results = run_crossval(table, cfg.model, train, cfg.pca, split, args.k)
    accs = np.array([r.metrics.accuracy for r in results])
    for i, r in enumerate(results):
        print(f"fold {i + 1}: accuracy {r.metrics.accuracy:.4f} (k = {r.checkpoint.config.input_dim})")
    print(f"mean accuracy {accs.mean():.4f} +/- {accs.std():.4f}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        doc = {"k": args.k, "mean_accuracy": float(accs.mean()),
               "std_accuracy": float(accs.std()),
               "folds": [r.metrics.to_dict() for r in results]}
        (out / "crossval.json").write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
        for i, r in enumerate(results):
            write_report(r.history, r.metrics, out / f"fold{i + 1}")


def cmd_synth(args):
    paths = generate_corpus(args.out, args.per_class, args.seed)
    print(f"wrote {len(paths)} clips under {args.out}")


def cmd_summary(args):
    cfg = load_config(args.config)
    for name, shape, n in layer_summary(cfg.model):
        print(f"{name:<24} {str((None, *shape)):<18} {n:>10}")
    total, trainable, frozen = param_count(cfg.model)
    print(f"total {total}  trainable {trainable}  non-trainable {frozen}")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="dcrfser", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("manifest", help="label corpus recordings from their file names")
    s.add_argument("--corpus", action="append", required=True,
                   help="corpus name (repeat together with --root)")
    s.add_argument("--root", action="append", required=True)
    s.add_argument("--out", required=True, help="JSON-lines manifest to write")
    s.add_argument("--reference", choices=sorted(REFERENCE_COUNTS),
                   help="compare class counts against a reference subset")
    s.set_defaults(fn=cmd_manifest)

    s = sub.add_parser("preprocess", help="trim silence and resample")
    s.add_argument("--manifest", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--wav-dir", help="write processed WAVs here instead of flagging entries")
    s.add_argument("--config")
    s.set_defaults(fn=cmd_preprocess)

    s = sub.add_parser("augment", help="add noise, pitch and stretch variants")
    s.add_argument("--manifest", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--plan", choices=("default", "none"), default="default",
                   help="'default' uses the [augment] section of --config")
    s.add_argument("--seed", type=int)
    s.add_argument("--config")
    s.set_defaults(fn=cmd_augment)

    s = sub.add_parser("extract", help="compute 190-dim feature vectors")
    s.add_argument("--manifest", required=True)
    s.add_argument("--out", required=True, help=".serf (binary) or .csv")
    s.add_argument("--workers", type=int, help="process count (default: all CPUs)")
    s.add_argument("--config")
    s.set_defaults(fn=cmd_extract)

    for name, fn, text in (("train", cmd_train, "holdout training run"),
                           ("crossval", cmd_crossval, "stratified k-fold runs")):
        s = sub.add_parser(name, help=text)
        s.add_argument("--features", required=True)
        s.add_argument("--config")
        s.add_argument("--seed", type=int)
        s.add_argument("--epochs", type=int, help="override [train] epochs")
        if name == "train":
            s.add_argument("--out", required=True, help="checkpoint path")
            s.add_argument("--report", help="also write report files here")
        else:
            s.add_argument("--k", type=int, default=5)
            s.add_argument("--out", help="directory for crossval.json and per-fold reports")
        s.set_defaults(fn=fn)

    s = sub.add_parser("evaluate", help="score a checkpoint")
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--features", required=True)
    s.add_argument("--all", action="store_true", help="score every row, not the stored test split")
    s.add_argument("--out", help="metrics.json path")
    s.set_defaults(fn=cmd_evaluate)

    s = sub.add_parser("report", help="write history, metrics and confusion-matrix files")
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--features", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(fn=cmd_report)

    s = sub.add_parser("synth", help="generate the synthetic tone corpus")
    s.add_argument("--out", required=True)
    s.add_argument("--per-class", type=int, default=35)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(fn=cmd_synth)

    s = sub.add_parser("summary", help="print the layer table and parameter counts")
    s.add_argument("--config")
    s.set_defaults(fn=cmd_summary)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.fn(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, ShapeMismatch, DegenerateBatch, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
