"""Deterministic SVG scatter plots of embeddings.

Two color modes: ``by-label`` paints supervised samples with a fixed
12-color categorical palette (cycling past 12 classes) and unsupervised
samples black; ``by-confidence`` interpolates linearly from red (#FF0000)
at confidence 0 to green (#00FF00) at confidence 1. Output bytes depend
only on the input files and the PlotSpec.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DimensionError, ParseError, SpecError

BY_LABEL = "by-label"
BY_CONFIDENCE = "by-confidence"

UNSUPERVISED_COLOR = "#000000"

# 12 fixed high-contrast categorical colors, cycled past 12 classes
PALETTE = (
    "#1F77B4", "#FF7F0E", "#2CA02C", "#D62728",
    "#9467BD", "#8C564B", "#E377C2", "#7F7F7F",
    "#BCBD22", "#17BECF", "#AEC7E8", "#FFBB78",
)


@dataclass(frozen=True)
class PlotSpec:
    embedding: Path
    labels: Path | None = None
    confidence: Path | None = None
    color_mode: str = BY_LABEL
    width: int = 800
    height: int = 600
    point_radius: float = 3.0

    def __post_init__(self) -> None:
        if self.color_mode not in (BY_LABEL, BY_CONFIDENCE):
            raise SpecError(f"unknown color mode {self.color_mode!r}")
        if self.width <= 0 or self.height <= 0 or self.point_radius <= 0:
            raise SpecError("plot dimensions must be positive")


def confidence_color(value: float) -> str:
    """Linear red-to-green blend; 0 -> #FF0000, 0.5 -> #808000, 1 -> #00FF00."""
    v = min(max(float(value), 0.0), 1.0)
    red = round(255 * (1.0 - v))
    green = round(255 * v)
    return f"#{red:02X}{green:02X}00"


def label_color(class_order: int) -> str:
    return PALETTE[class_order % len(PALETTE)]


def _read_csv(path: Path, expected_header: list[str]) -> list[list[str]]:
    if not path.exists():
        raise ParseError(f"{path}: no such file")
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [row for row in csv.reader(fh) if row]
    if not rows or rows[0][:len(expected_header)] != expected_header:
        raise ParseError(
            f"{path}: expected header starting with {','.join(expected_header)!r}")
    return rows[1:]


def render_scatter(spec: PlotSpec) -> str:
    """Render one circle per embedded sample; returns the SVG document."""
    emb_rows = _read_csv(Path(spec.embedding), ["id", "y0", "y1"])
    ids = [row[0] for row in emb_rows]
    try:
        points = np.array([[float(row[1]), float(row[2])] for row in emb_rows])
    except (ValueError, IndexError):
        raise ParseError(f"{spec.embedding}: malformed coordinate row") from None
    if len(ids) == 0:
        raise ParseError(f"{spec.embedding}: no samples to plot")

    fills = _fills(spec, ids)
    w, h, r = spec.width, spec.height, spec.point_radius
    margin = r + 2.0
    lo = points.min(axis=0)
    hi = points.max(axis=0)
    span = np.where(hi > lo, hi - lo, 1.0)
    xs = margin + (points[:, 0] - lo[0]) / span[0] * (w - 2 * margin)
    # SVG y grows downward; flip so larger y1 plots higher
    ys = margin + (hi[1] - points[:, 1]) / span[1] * (h - 2 * margin)

    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" '
        f'viewBox="0 0 {w} {h}">',
        f'<rect width="{w}" height="{h}" fill="#FFFFFF"/>',
    ]
    for sid, cx, cy, fill in zip(ids, xs, ys, fills):
        lines.append(
            f'<circle cx="{cx:.2f}" cy="{cy:.2f}" r="{r:g}" fill="{fill}">'
            f"<title>{_escape(sid)}</title></circle>"
        )
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def _fills(spec: PlotSpec, ids: list[str]) -> list[str]:
    if spec.color_mode == BY_LABEL:
        if spec.labels is None:
            raise SpecError("by-label mode requires a labels file")
        rows = _read_csv(Path(spec.labels),
                         ["id", "assigned_label", "cost", "confidence", "supervised"])
        _check_ids(ids, [row[0] for row in rows], spec.labels)
        names = sorted({row[1] for row in rows})
        order = {name: i for i, name in enumerate(names)}
        return [
            label_color(order[row[1]]) if row[4] == "1" else UNSUPERVISED_COLOR
            for row in rows
        ]

    conf = _confidences(spec, ids)
    return [confidence_color(v) for v in conf]


def _confidences(spec: PlotSpec, ids: list[str]) -> list[float]:
    if spec.confidence is not None:
        rows = _read_csv(Path(spec.confidence), ["id", "confidence"])
        _check_ids(ids, [row[0] for row in rows], spec.confidence)
        return [float(row[1]) for row in rows]
    if spec.labels is not None:
        rows = _read_csv(Path(spec.labels),
                         ["id", "assigned_label", "cost", "confidence", "supervised"])
        _check_ids(ids, [row[0] for row in rows], spec.labels)
        return [float(row[3]) for row in rows]
    raise SpecError("by-confidence mode requires a confidence or labels file")


def _check_ids(embedding_ids: list[str], other_ids: list[str], path) -> None:
    if len(embedding_ids) != len(other_ids):
        raise DimensionError(
            f"{path}: {len(other_ids)} rows but embedding has {len(embedding_ids)}")
    if embedding_ids != other_ids:
        raise DimensionError(f"{path}: sample ids do not match the embedding order")


def _escape(text: str) -> str:
    return (text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;"))


def write_scatter(spec: PlotSpec, out_path: str | Path) -> None:
    Path(out_path).write_text(render_scatter(spec), encoding="utf-8")
