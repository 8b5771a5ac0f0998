"""Run artifacts: history curves, metrics and a confusion-matrix heatmap.

``history.csv`` columns, in order: epoch, train_loss, train_accuracy,
val_loss, val_accuracy.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .metrics import Metrics
from .training import HISTORY_COLUMNS


def write_history_csv(history, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=HISTORY_COLUMNS)
        w.writeheader()
        for row in history:
            w.writerow({k: row[k] for k in HISTORY_COLUMNS})


def write_metrics_json(metrics: Metrics, path, extra=None) -> None:
    doc = metrics.to_dict()
    if extra:
        doc.update(extra)
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def write_confusion_csv(metrics: Metrics, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["true\\predicted", *metrics.class_names])
        for name, row in zip(metrics.class_names, metrics.confusion):
            w.writerow([name, *map(int, row)])


def confusion_svg(metrics: Metrics, cell: int = 56) -> str:
    """Standalone SVG heatmap; cell shade is the row-normalized rate."""
    cm = np.asarray(metrics.confusion, dtype=np.float64)
    names = metrics.class_names
    K = len(names)
    rates = cm / np.maximum(cm.sum(axis=1, keepdims=True), 1.0)
    left, top = 90, 70
    width, height = left + K * cell + 20, top + K * cell + 20
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'font-family="sans-serif" font-size="11">',
           f'<text x="{left + K * cell / 2}" y="16" text-anchor="middle" font-size="13">'
           f'Confusion matrix (accuracy {metrics.accuracy:.4f})</text>',
           f'<text x="{left + K * cell / 2}" y="34" text-anchor="middle">predicted</text>',
           f'<text x="14" y="{top + K * cell / 2}" text-anchor="middle" '
           f'transform="rotate(-90 14 {top + K * cell / 2})">true</text>']
    for j, name in enumerate(names):
        x = left + j * cell + cell / 2
        out.append(f'<text x="{x}" y="{top - 8}" text-anchor="middle">{escape(name)}</text>')
    for i, name in enumerate(names):
        y = top + i * cell
        out.append(f'<text x="{left - 6}" y="{y + cell / 2 + 4}" text-anchor="end">'
                   f'{escape(name)}</text>')
        for j in range(K):
            r = rates[i, j]
            shade = int(round(255 * (1.0 - r)))
            fg = "#ffffff" if r > 0.5 else "#000000"
            x = left + j * cell
            out.append(f'<rect x="{x}" y="{y}" width="{cell}" height="{cell}" '
                       f'fill="rgb({shade},{shade},255)" stroke="#888888"/>')
            out.append(f'<text x="{x + cell / 2}" y="{y + cell / 2 + 4}" text-anchor="middle" '
                       f'fill="{fg}">{int(cm[i, j])}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_report(history, metrics: Metrics, out_dir, extra=None) -> dict[str, Path]:
    """Write the four run artifacts into ``out_dir`` and return their paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"history": out / "history.csv", "metrics": out / "metrics.json",
             "confusion_csv": out / "confusion_matrix.csv",
             "confusion_svg": out / "confusion_matrix.svg"}
    write_history_csv(history, paths["history"])
    write_metrics_json(metrics, paths["metrics"], extra)
    write_confusion_csv(metrics, paths["confusion_csv"])
    paths["confusion_svg"].write_text(confusion_svg(metrics), encoding="utf-8")
    return paths
