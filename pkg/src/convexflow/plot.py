"""Deterministic SVG line plots of CSV columns.

Output is byte-identical for identical input: the canvas is fixed at
800x600, the SVG id salt is constant, and no date or version metadata is
written.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.ticker import FormatStrFormatter  # noqa: E402

__all__ = ["PlotSpec", "PlotError", "parse_plot_spec", "read_columns", "emit_plot"]

# matplotlib writes SVG in points; 72 per inch makes the viewBox 800 x 600
WIDTH_PX, HEIGHT_PX, DPI = 800, 600, 72
_RC = {
    "svg.hashsalt": "convexflow",
    "svg.fonttype": "none",
    "font.family": "DejaVu Sans",
    "font.size": 13,
    "path.simplify": False,
}


class PlotError(ValueError):
    pass


@dataclass(frozen=True)
class PlotSpec:
    """Which columns to draw: one x column against one or more y columns."""

    x: str
    y: tuple[str, ...]
    title: str = ""
    logy: bool = False


def parse_plot_spec(text: str) -> PlotSpec:
    """Parse ``x=COL;y=COL[,COL...][;title=...][;logy=true]``."""
    parts = {}
    for chunk in text.split(";"):
        if not chunk.strip():
            continue
        key, sep, val = chunk.partition("=")
        if not sep:
            raise PlotError(f"bad plot spec fragment {chunk!r}")
        parts[key.strip()] = val.strip()
    unknown = set(parts) - {"x", "y", "title", "logy"}
    if unknown:
        raise PlotError(f"unknown plot spec keys {sorted(unknown)}")
    if "x" not in parts or not parts.get("y"):
        raise PlotError("plot spec needs x=COL and y=COL[,COL...]")
    ys = tuple(c.strip() for c in parts["y"].split(",") if c.strip())
    logy = parts.get("logy", "false").lower() in ("1", "true", "yes")
    return PlotSpec(parts["x"], ys, parts.get("title", ""), logy)


def read_columns(path: str | Path, names) -> dict[str, np.ndarray]:
    """Read the named columns of a CSV file as float arrays."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise PlotError(f"{path}: empty file") from None
        missing = [c for c in names if c not in header]
        if missing:
            raise PlotError(f"{path}: missing columns {missing}")
        idx = [header.index(c) for c in names]
        cols: list[list[float]] = [[] for _ in names]
        for lineno, row in enumerate(reader, start=2):
            for k, i in enumerate(idx):
                try:
                    cols[k].append(float(row[i]))
                except (ValueError, IndexError):
                    cell = row[i] if i < len(row) else ""
                    raise PlotError(f"{path}:{lineno}: non-numeric cell {cell!r} in {names[k]}") from None
    return {c: np.asarray(v) for c, v in zip(names, cols)}


def emit_plot(csv_path: str | Path, spec: PlotSpec | str, svg_path: str | Path) -> Path:
    """Draw the spec's columns from ``csv_path`` into ``svg_path``."""
    if isinstance(spec, str):
        spec = parse_plot_spec(spec)
    data = read_columns(csv_path, (spec.x,) + spec.y)
    svg_path = Path(svg_path)
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(WIDTH_PX / DPI, HEIGHT_PX / DPI), dpi=DPI)
        x = data[spec.x]
        for name in spec.y:
            ax.plot(x, data[name], marker="o", markersize=3, linewidth=1.2, label=name)
        if spec.logy:
            ax.set_yscale("log")
        else:
            ax.yaxis.set_major_formatter(FormatStrFormatter("%.3g"))
        ax.xaxis.set_major_formatter(FormatStrFormatter("%.3g"))
        ax.set_xlabel(spec.x)
        ax.set_ylabel(spec.y[0] if len(spec.y) == 1 else "value")
        if spec.title:
            ax.set_title(spec.title)
        if len(spec.y) > 1:
            ax.legend()
        ax.grid(True, linewidth=0.4, alpha=0.5)
        fig.savefig(svg_path, format="svg", metadata={"Date": None, "Creator": None})
        plt.close(fig)
    return svg_path
