"""Experiment reports: confusion matrices, CSV/JSON emission, SVG plots.

CSV is the canonical output; the JSON summary carries the config hash and
seeds so a report is traceable to the exact run that produced it.  Nothing
written here embeds wall-clock time -- reruns with the same config and
seed must produce byte-identical files.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field

import numpy as np

from ..errors import InvalidInputError


def config_hash(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


def confusion_matrix(y_true, y_pred, n_classes: int) -> np.ndarray:
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape:
        raise InvalidInputError("label/prediction length mismatch")
    m = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(m, (y_true, y_pred), 1)
    return m


@dataclass
class ExperimentReport:
    name: str
    confusion: np.ndarray  # rows = true class, cols = predicted
    class_names: dict  # label -> display name
    config_hash: str
    seed: int
    extra: dict = field(default_factory=dict)

    @property
    def overall_accuracy(self) -> float:
        total = int(self.confusion.sum())
        return float(np.trace(self.confusion)) / total if total else 0.0

    @property
    def per_class_accuracy(self) -> dict:
        out = {}
        for i, name in sorted(self.class_names.items()):
            row = self.confusion[i].sum()
            out[name] = float(self.confusion[i, i]) / row if row else None
        return out

    def to_summary(self) -> dict:
        return {
            "name": self.name,
            "overall_accuracy": round(self.overall_accuracy, 6),
            "per_class_accuracy": {
                k: (round(v, 6) if v is not None else None)
                for k, v in self.per_class_accuracy.items()
            },
            "config_hash": self.config_hash,
            "seed": self.seed,
            **self.extra,
        }

    def write(self, out_dir) -> None:
        os.makedirs(out_dir, exist_ok=True)
        write_confusion_csv(os.path.join(out_dir, "confusion.csv"),
                            self.confusion, self.class_names)
        write_json(os.path.join(out_dir, "summary.json"), self.to_summary())


def write_json(path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=1)
        fh.write("\n")


def write_confusion_csv(path, confusion: np.ndarray, class_names: dict) -> None:
    names = [class_names[i] for i in sorted(class_names)]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("true\\pred," + ",".join(names) + "\n")
        for i, name in enumerate(names):
            fh.write(name + "," + ",".join(str(int(v)) for v in confusion[i]) + "\n")


def write_rows_csv(path, header, rows) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def read_rows_csv(path):
    with open(path, encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    header = lines[0].split(",")
    return header, [ln.split(",") for ln in lines[1:]]


# ---------------------------------------------------------------------------
# plain-text and SVG rendering for the `report` command


def render_confusion_text(confusion: np.ndarray, class_names: dict) -> str:
    names = [class_names[i] for i in sorted(class_names)]
    width = max(len(n) for n in names) + 1
    lines = [" " * width + " ".join(f"{n:>{width}}" for n in names)]
    for i, name in enumerate(names):
        cells = " ".join(f"{int(v):>{width}}" for v in confusion[i])
        lines.append(f"{name:>{width}}" + cells)
    return "\n".join(lines)


def _svg_header(w, h):
    return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" '
            f'height="{h}" viewBox="0 0 {w} {h}">'
            f'<rect width="{w}" height="{h}" fill="white"/>')


def svg_heatmap(confusion: np.ndarray, class_names: dict) -> str:
    n = confusion.shape[0]
    cell = 28
    margin = 90
    size = margin + n * cell + 10
    rows = confusion / np.maximum(confusion.sum(axis=1, keepdims=True), 1)
    parts = [_svg_header(size, size)]
    names = [class_names[i] for i in sorted(class_names)]
    for i in range(n):
        parts.append(
            f'<text x="{margin - 6}" y="{margin + i * cell + cell * 0.7:.0f}" '
            f'font-size="10" text-anchor="end">{names[i]}</text>')
        parts.append(
            f'<text x="{margin + i * cell + cell / 2:.0f}" y="{margin - 8}" '
            f'font-size="10" text-anchor="middle" '
            f'transform="rotate(-45 {margin + i * cell + cell / 2:.0f} '
            f'{margin - 8})">{names[i]}</text>')
        for j in range(n):
            v = rows[i, j]
            shade = int(255 - 215 * v)
            parts.append(
                f'<rect x="{margin + j * cell}" y="{margin + i * cell}" '
                f'width="{cell - 1}" height="{cell - 1}" '
                f'fill="rgb({shade},{shade},255)"/>')
            if confusion[i, j]:
                parts.append(
                    f'<text x="{margin + j * cell + cell / 2:.0f}" '
                    f'y="{margin + i * cell + cell * 0.7:.0f}" font-size="9" '
                    f'text-anchor="middle">{int(confusion[i, j])}</text>')
    parts.append("</svg>")
    return "".join(parts)


def svg_curve(points, title: str, x_label: str, y_label: str) -> str:
    """Simple polyline plot of (x, y) pairs with y expected in [0, 1]."""
    w, h, m = 420, 300, 48
    xs = [p[0] for p in points]
    ys = [p[1] for p in points]
    x0, x1 = min(xs), max(xs)
    span = (x1 - x0) or 1.0
    px = lambda x: m + (x - x0) / span * (w - 2 * m)
    py = lambda y: h - m - y * (h - 2 * m)
    parts = [_svg_header(w, h)]
    parts.append(f'<text x="{w/2}" y="18" font-size="13" '
                 f'text-anchor="middle">{title}</text>')
    parts.append(f'<line x1="{m}" y1="{h-m}" x2="{w-m}" y2="{h-m}" '
                 f'stroke="black"/>')
    parts.append(f'<line x1="{m}" y1="{m}" x2="{m}" y2="{h-m}" stroke="black"/>')
    parts.append(f'<text x="{w/2}" y="{h-10}" font-size="11" '
                 f'text-anchor="middle">{x_label}</text>')
    parts.append(f'<text x="14" y="{h/2}" font-size="11" text-anchor="middle" '
                 f'transform="rotate(-90 14 {h/2})">{y_label}</text>')
    poly = " ".join(f"{px(x):.1f},{py(y):.1f}" for x, y in points)
    parts.append(f'<polyline points="{poly}" fill="none" stroke="steelblue" '
                 f'stroke-width="2"/>')
    for x, y in points:
        parts.append(f'<circle cx="{px(x):.1f}" cy="{py(y):.1f}" r="3" '
                     f'fill="steelblue"/>')
    parts.append("</svg>")
    return "".join(parts)


def svg_bars(labels, values, title: str) -> str:
    w, h, m = 420, 300, 48
    bar = (w - 2 * m) / max(len(values), 1)
    parts = [_svg_header(w, h)]
    parts.append(f'<text x="{w/2}" y="18" font-size="13" '
                 f'text-anchor="middle">{title}</text>')
    for i, (label, v) in enumerate(zip(labels, values)):
        x = m + i * bar
        bh = v * (h - 2 * m)
        parts.append(f'<rect x="{x + 3:.1f}" y="{h - m - bh:.1f}" '
                     f'width="{bar - 6:.1f}" height="{bh:.1f}" fill="steelblue"/>')
        parts.append(f'<text x="{x + bar / 2:.1f}" y="{h - m + 14}" '
                     f'font-size="10" text-anchor="middle">{label}</text>')
        parts.append(f'<text x="{x + bar / 2:.1f}" y="{h - m - bh - 4:.1f}" '
                     f'font-size="10" text-anchor="middle">{v:.2f}</text>')
    parts.append("</svg>")
    return "".join(parts)
