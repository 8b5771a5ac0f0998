"""Full-size training run on real corpora (hours of CPU time).

Expects ``--corpora`` to contain one folder per corpus, named after it
(RAVDESS, TESS, SAVEE, EMODB, CREMAD). Features are cached in ``--work``
so a second run skips extraction.

    python3 scripts/reproduce_full_scale.py --corpora /data/ser --work runs/ravdess
"""
import argparse
import json
import logging
from pathlib import Path

from dcrfser.augment import expand_manifest
from dcrfser.config import load_config
from dcrfser.features import load_features, save_features
from dcrfser.harness.experiment import run_holdout
from dcrfser.harness.manifest import build_manifest, normalize_corpus
from dcrfser.harness.pipeline import extract_table
from dcrfser.harness.report import write_report
from dcrfser.harness.synthetic import mark_preprocess
from dcrfser.model import save_checkpoint

ROOT = Path(__file__).resolve().parents[1]


def find_roots(corpora_dir: Path, wanted):
    roots = {}
    for sub in sorted(p for p in corpora_dir.iterdir() if p.is_dir()):
        try:
            name = normalize_corpus(sub.name)
        except ValueError:
            continue
        if name in wanted:
            roots[name] = sub
    missing = set(wanted) - set(roots)
    if missing:
        raise SystemExit(f"no folder for {', '.join(sorted(missing))} under {corpora_dir}")
    return roots


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--corpora", required=True, type=Path)
    ap.add_argument("--work", required=True, type=Path)
    ap.add_argument("--corpus", action="append", default=None,
                    help="corpus to include (repeatable, default RAVDESS)")
    ap.add_argument("--config", default=ROOT / "configs/default.toml")
    ap.add_argument("--workers", type=int, default=None)
    ap.add_argument("--json", action="store_true", help="print a JSON summary line last")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    cfg = load_config(args.config)
    args.work.mkdir(parents=True, exist_ok=True)
    store = args.work / "features.serf"
    if store.exists():
        table = load_features(store)
    else:
        wanted = [normalize_corpus(c) for c in (args.corpus or ["ravdess"])]
        manifest = build_manifest(find_roots(args.corpora, wanted)).map(mark_preprocess)
        manifest = expand_manifest(manifest, cfg.augment)
        manifest.save(args.work / "manifest.jsonl")
        table = extract_table(manifest, cfg.dsp, cfg.trim, args.workers)
        save_features(table, store)

    result = run_holdout(table, cfg.model, cfg.train, cfg.pca, cfg.split)
    save_checkpoint(args.work / "model.dcrf", result.checkpoint)
    write_report(result.history, result.metrics, args.work / "report")
    k = result.checkpoint.pca.k if result.checkpoint.pca is not None else table.X.shape[1]
    summary = {"accuracy": result.metrics.accuracy, "macro_f1": result.metrics.macro["f1"],
               "pca_components": k, "rows": len(table)}
    print(f"test accuracy {summary['accuracy']:.4f} with {k} principal components")
    if args.json:
        print(json.dumps(summary))


if __name__ == "__main__":
    main()
