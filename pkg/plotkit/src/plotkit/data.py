"""Readers for the simulator's published file formats.

Only the documented interchange files are consumed here: per-episode CSV
summaries, per-episode JSONL event logs, and sweep aggregate CSVs. Nothing
in this package imports the simulator itself.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path


class SchemaError(ValueError):
    """An input file does not match its published schema."""


EPISODE_COLUMNS = (
    "episode", "avg_agent_steps", "return_mean", "return_af", "return_bf",
    "exchanges", "market_exchanges", "avg_price",
    "apples_produced", "apples_consumed",
)

SWEEP_COLUMNS = (
    "param", "value", "avg_price", "apples_produced", "apples_consumed",
    "net_apples_traded",
)


def read_episodes_csv(path) -> list[dict]:
    rows = _read_csv(path, EPISODE_COLUMNS)
    if not rows:
        raise SchemaError(f"{path}: no episode rows")
    return rows


def read_sweep_csv(path) -> list[dict]:
    rows = _read_csv(path, SWEEP_COLUMNS)
    if not rows:
        raise SchemaError(f"{path}: no sweep rows")
    return rows


def _read_csv(path, required) -> list[dict]:
    path = Path(path)
    if not path.exists():
        raise SchemaError(f"{path}: missing input")
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        missing = [c for c in required if c not in (reader.fieldnames or [])]
        if missing:
            raise SchemaError(f"{path}: missing columns {', '.join(missing)}")
        return list(reader)


def read_exchange_events(paths) -> tuple[list[dict], tuple[int, int]]:
    """Exchange events plus the map dimensions from the log headers.

    Accepts one path or a list; all logs must agree on map size.
    """
    if isinstance(paths, (str, Path)):
        paths = [paths]
    exchanges: list[dict] = []
    dims: tuple[int, int] | None = None
    for path in paths:
        path = Path(path)
        if not path.exists():
            raise SchemaError(f"{path}: missing input")
        with open(path) as f:
            try:
                header = json.loads(f.readline())
            except json.JSONDecodeError as err:
                raise SchemaError(f"{path}: not a JSONL event log") from err
            if "schema" not in header or "width" not in header:
                raise SchemaError(f"{path}: missing log header fields")
            size = (int(header["width"]), int(header["height"]))
            if dims is None:
                dims = size
            elif dims != size:
                raise SchemaError(f"{path}: map size {size} differs from {dims}")
            for line in f:
                ev = json.loads(line)
                if ev.get("e") == "exch":
                    for key in ("bx", "by", "sx", "sy", "qa", "qb"):
                        if key not in ev:
                            raise SchemaError(f"{path}: malformed exchange event")
                    exchanges.append(ev)
    assert dims is not None
    return exchanges, dims
