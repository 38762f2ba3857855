"""Figure rendering: each render emits an image plus its exact data table.

Golden tests pin the CSV tables; images are a courtesy for humans and no
test ever compares pixels. Table cells are formatted with repr(round(x, 10))
so identical inputs produce byte-identical tables on any platform.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .binning import bin_series
from .data import (
    SchemaError,
    read_episodes_csv,
    read_exchange_events,
    read_sweep_csv,
)

FIGURE_KINDS = ("curves", "heatmap", "supply-demand", "stackplot")

# role color convention: apple farmers in reds, banana farmers in greens
ROLE_COLORS = {"af": "#cc3333", "bf": "#33aa33"}


@dataclass
class FigureSpec:
    """What to draw: a kind, its inputs, binning, and light styling."""

    kind: str
    inputs: list[str | Path]
    out_dir: str | Path = "."
    name: str | None = None
    bins: int = 100
    columns: list[str] = field(default_factory=list)  # curves/stackplot series
    x_column: str = "avg_agent_steps"
    sd_x: str = "apples_produced"   # supply-demand x axis
    image_format: str = "svg"

    def validate(self) -> None:
        if self.kind not in FIGURE_KINDS:
            raise SchemaError(
                f"unknown figure kind {self.kind!r}; expected one of {FIGURE_KINDS}")
        if not self.inputs:
            raise SchemaError("figure spec needs at least one input file")
        if self.bins < 1:
            raise SchemaError("bins must be positive")


def _fmt(x) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    return repr(round(float(x), 10))


def _table_bytes(columns, rows) -> bytes:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    w.writerows(rows)
    return buf.getvalue().encode()


@dataclass
class RenderResult:
    image_path: Path
    table_path: Path
    table: bytes


def render(spec: FigureSpec) -> RenderResult:
    """Draw one figure and write its image + data table side by side."""
    spec.validate()
    out_dir = Path(spec.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    name = spec.name or spec.kind.replace("-", "_")
    if spec.kind == "curves":
        columns, rows, fig = _curves(spec)
    elif spec.kind == "stackplot":
        columns, rows, fig = _stackplot(spec)
    elif spec.kind == "heatmap":
        columns, rows, fig = _heatmap(spec)
    else:
        columns, rows, fig = _supply_demand(spec)
    table = _table_bytes(columns, rows)
    table_path = out_dir / f"{name}.csv"
    table_path.write_bytes(table)
    image_path = out_dir / f"{name}.{spec.image_format}"
    fig.savefig(image_path)
    plt.close(fig)
    return RenderResult(image_path=image_path, table_path=table_path, table=table)


def _series_style(column: str) -> dict:
    style = {}
    for token, color in ROLE_COLORS.items():
        if token in column.split("_"):
            style["color"] = color
    # purchases dashed, sales solid
    if "bought" in column or "purchase" in column or "buy" in column:
        style["linestyle"] = "--"
    return style


def _curves(spec: FigureSpec):
    rows_in = read_episodes_csv(spec.inputs[0])
    columns = spec.columns or ["return_af", "return_bf", "exchanges", "avg_price"]
    x = np.array([float(r[spec.x_column]) for r in rows_in])
    series = {}
    for col in columns:
        if col not in rows_in[0]:
            raise SchemaError(f"{spec.inputs[0]}: no column {col!r}")
        pairs = [(xv, r[col]) for xv, r in zip(x, rows_in) if r[col] != ""]
        if not pairs:
            series[col] = (np.array([]), np.array([]))
            continue
        xs = np.array([p[0] for p in pairs])
        ys = np.array([float(p[1]) for p in pairs])
        series[col] = bin_series(xs, ys, spec.bins)

    fig, axes = plt.subplots(1, len(columns), figsize=(4 * len(columns), 3))
    if len(columns) == 1:
        axes = [axes]
    for ax, col in zip(axes, columns):
        centers, mean = series[col]
        ax.plot(centers, mean, **_series_style(col))
        ax.set_xlabel(spec.x_column)
        ax.set_title(col)
    fig.tight_layout()

    centers = next((c for c, _ in series.values() if len(c)), np.array([]))
    out_rows = []
    for b in range(len(centers)):
        row = [_fmt(centers[b])]
        for col in columns:
            c, mean = series[col]
            row.append(_fmt(mean[b]) if len(mean) else "")
        out_rows.append(row)
    return ["bin_center"] + columns, out_rows, fig


def _stackplot(spec: FigureSpec):
    rows_in = read_episodes_csv(spec.inputs[0])
    x = np.array([float(r[spec.x_column]) for r in rows_in])
    market = np.array([float(r["market_exchanges"]) for r in rows_in])
    total = np.array([float(r["exchanges"]) for r in rows_in])
    player = total - market
    centers, player_b = bin_series(x, player, spec.bins)
    _, market_b = bin_series(x, market, spec.bins)

    fig, ax = plt.subplots(figsize=(6, 3))
    filled = ~np.isnan(player_b)
    ax.stackplot(centers[filled], market_b[filled], player_b[filled],
                 labels=["player-market", "player-player"])
    ax.legend(loc="upper left")
    ax.set_xlabel(spec.x_column)
    ax.set_ylabel("exchanges per episode")
    fig.tight_layout()

    out_rows = [
        [_fmt(c), _fmt(m), _fmt(p)]
        for c, m, p in zip(centers, market_b, player_b)
    ]
    return ["bin_center", "market_exchanges", "player_exchanges"], out_rows, fig


def _heatmap(spec: FigureSpec):
    events, (width, height) = read_exchange_events(spec.inputs)
    surfaces = {}
    for side, keys in (("buy", ("bx", "by")), ("sell", ("sx", "sy"))):
        total = np.zeros((height, width))
        count = np.zeros((height, width), dtype=np.int64)
        for ev in events:
            x, y = ev[keys[0]], ev[keys[1]]
            total[y, x] += ev["qb"] / ev["qa"]
            count[y, x] += 1
        with np.errstate(invalid="ignore"):
            mean = total / count
        mean[count == 0] = np.nan
        surfaces[side] = (mean, count)

    fig, axes = plt.subplots(2, 2, figsize=(9, 7))
    for row, side in enumerate(("buy", "sell")):
        mean, count = surfaces[side]
        im = axes[row][0].imshow(mean, origin="upper", cmap="RdYlGn_r")
        axes[row][0].set_title(f"apple {side} price")
        fig.colorbar(im, ax=axes[row][0])
        im = axes[row][1].imshow(count, origin="upper", cmap="viridis")
        axes[row][1].set_title(f"apple {side} count")
        fig.colorbar(im, ax=axes[row][1])
    fig.tight_layout()

    out_rows = []
    for y in range(height):
        for x in range(width):
            buy_mean, buy_count = surfaces["buy"]
            sell_mean, sell_count = surfaces["sell"]
            if buy_count[y, x] == 0 and sell_count[y, x] == 0:
                continue
            out_rows.append([
                x, y,
                _fmt(buy_mean[y, x]), int(buy_count[y, x]),
                _fmt(sell_mean[y, x]), int(sell_count[y, x]),
            ])
    columns = ["x", "y", "buy_price", "buy_count", "sell_price", "sell_count"]
    return columns, out_rows, fig


def _supply_demand(spec: FigureSpec):
    rows_in = read_sweep_csv(spec.inputs[0])
    if spec.sd_x not in rows_in[0]:
        raise SchemaError(f"{spec.inputs[0]}: no column {spec.sd_x!r}")
    fig, ax = plt.subplots(figsize=(6, 4))
    out_rows = []
    for r in rows_in:
        if r["avg_price"] == "":
            continue
        x = float(r[spec.sd_x])
        y = float(r["avg_price"])
        label = f"{r['param'].split('.')[-1]}={r['value']}"
        ax.scatter([x], [y])
        ax.annotate(label, (x, y), fontsize=7)
        out_rows.append([label, _fmt(x), _fmt(y)])
    ax.set_xlabel(spec.sd_x)
    ax.set_ylabel("bananas per apple")
    fig.tight_layout()
    return ["label", spec.sd_x, "avg_price"], out_rows, fig
