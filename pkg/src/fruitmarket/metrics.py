"""Event logs, per-episode summaries, prices, heatmaps, sweep tables.

Episode logs are line-delimited JSON, one event per line after a header
line, schema-versioned, with stable key order so byte equality is meaningful.
A log replays to the exact final state; summaries derive from the log alone.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .economy import ROLE_NAMES
from .exchange import APPLE, BANANA

SCHEMA_VERSION = 1

# Per-event JSON field order, so serialization is byte-stable.
_EVENT_FIELDS = {
    "act": ("a",),
    "move": ("p", "x", "y", "o", "s"),
    "harvest": ("p", "g", "q", "x", "y"),
    "eat": ("p", "g", "r"),
    "offer": ("p", "a", "b"),
    "exch": ("buyer", "seller", "bx", "by", "sx", "sy", "qa", "qb", "acc"),
    "water": ("p",),
    "hunger": ("p",),
    "drop": ("p", "g", "x", "y"),
    "pick": ("p", "g", "x", "y"),
    "give": ("p", "to", "g"),
}


def _jdump(obj) -> str:
    return json.dumps(obj, separators=(",", ":"), ensure_ascii=True)


def config_hash(config_dict: dict) -> str:
    canon = json.dumps(config_dict, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def event_to_dict(event: tuple) -> dict:
    kind, tick = event[0], event[1]
    out = {"t": tick, "e": kind}
    for name, value in zip(_EVENT_FIELDS[kind], event[2:]):
        out[name] = value
    return out


def episode_log_lines(env, config_dict: dict, extra_header: dict | None = None) -> list[str]:
    """Serialize a finished (or in-progress) episode to JSONL lines."""
    header = {
        "schema": SCHEMA_VERSION,
        "config_hash": config_hash(config_dict),
        "seed": env.seed,
        "width": env.grid.width,
        "height": env.grid.height,
        "roster": [
            {"role": e.role, "region": e.region, "agent": e.agent} for e in env.roster
        ],
        "config": config_dict,
    }
    if extra_header:
        header.update(extra_header)
    lines = [_jdump(header)]
    lines.extend(_jdump(event_to_dict(ev)) for ev in env.events)
    footer = {
        "e": "end",
        "t": env.tick,
        "inv": [list(p.inventory) for p in env.players],
        "ret": [env.episodic_return(p.pid) for p in env.players],
    }
    lines.append(_jdump(footer))
    return lines


def write_episode_log(path, env, config_dict: dict, extra_header: dict | None = None) -> None:
    with open(path, "w") as f:
        for line in episode_log_lines(env, config_dict, extra_header):
            f.write(line)
            f.write("\n")


def read_episode_log(path) -> tuple[dict, list[dict], dict | None]:
    """Returns (header, events, footer); footer is None for truncated logs."""
    with open(path) as f:
        lines = [json.loads(line) for line in f if line.strip()]
    if not lines or "schema" not in lines[0]:
        raise ValueError(f"{path}: not an episode log (missing header)")
    header = lines[0]
    if header["schema"] != SCHEMA_VERSION:
        raise ValueError(
            f"{path}: log schema {header['schema']} unsupported (expected {SCHEMA_VERSION})"
        )
    footer = None
    events = lines[1:]
    if events and events[-1].get("e") == "end":
        footer = events.pop()
    return header, events, footer


# -- prices ----------------------------------------------------------------


def average_price(records: Iterable) -> float | None:
    """Unweighted mean of bananas-per-apple over exchanges; None when empty.

    Accepts ExchangeRecord-likes (``.apples``/``.bananas``) or (apples,
    bananas) pairs. Each exchange contributes its exact integer ratio.
    """
    total = Fraction(0)
    n = 0
    for r in records:
        apples, bananas = _qty(r)
        total += Fraction(bananas, apples)
        n += 1
    if n == 0:
        return None
    return float(total / n)


def volume_weighted_price(records: Iterable) -> float | None:
    """Total bananas over total apples; the flag-guarded alternative averaging."""
    apples = bananas = 0
    for r in records:
        qa, qb = _qty(r)
        apples += qa
        bananas += qb
    if apples == 0:
        return None
    return float(Fraction(bananas, apples))


def _qty(r) -> tuple[int, int]:
    if hasattr(r, "apples"):
        return r.apples, r.bananas
    return r[0], r[1]


def net_traded(bought_sold: Iterable[tuple[int, int]]) -> int:
    """Sum over players of max(0, sold - bought): goods produced for sale."""
    return sum(max(0, sold - bought) for bought, sold in bought_sold)


def price_heatmap(
    records: Iterable,
    dims: tuple[int, int],
    side: str,
) -> tuple[np.ndarray, np.ndarray]:
    """Mean exchange price and exchange count per map cell of the chosen side.

    ``side`` is "buyer" or "seller" (of apples). Cells that never hosted an
    exchange hold NaN in the price surface and 0 in the count surface.
    """
    if side not in ("buyer", "seller"):
        raise ValueError("side must be 'buyer' or 'seller'")
    width, height = dims
    total = np.zeros((height, width), dtype=np.float64)
    count = np.zeros((height, width), dtype=np.int64)
    for r in records:
        if hasattr(r, "apples"):
            x, y = r.apple_buyer_pos if side == "buyer" else r.apple_seller_pos
            qa, qb = r.apples, r.bananas
        else:
            x, y = (r["bx"], r["by"]) if side == "buyer" else (r["sx"], r["sy"])
            qa, qb = r["qa"], r["qb"]
        total[y, x] += qb / qa
        count[y, x] += 1
    with np.errstate(invalid="ignore"):
        mean = total / count
    mean[count == 0] = np.nan
    return mean, count


# -- per-episode summaries ---------------------------------------------------


@dataclass
class PlayerTotals:
    """Integer flow accounting for one player over one episode."""

    produced: list[int] = field(default_factory=lambda: [0, 0])
    bought: list[int] = field(default_factory=lambda: [0, 0])
    consumed: list[int] = field(default_factory=lambda: [0, 0])
    sold: list[int] = field(default_factory=lambda: [0, 0])
    dropped: list[int] = field(default_factory=lambda: [0, 0])
    picked: list[int] = field(default_factory=lambda: [0, 0])
    given: list[int] = field(default_factory=lambda: [0, 0])
    received: list[int] = field(default_factory=lambda: [0, 0])
    exchanges: int = 0
    reward: dict[str, float] = field(default_factory=dict)

    def inventory_delta(self, good: int) -> int:
        return (
            self.produced[good] + self.bought[good] + self.picked[good]
            + self.received[good]
            - self.consumed[good] - self.sold[good] - self.dropped[good]
            - self.given[good]
        )


SUMMARY_COLUMNS = [
    "scope", "key", "role", "region",
    "apples_produced", "apples_bought", "apples_consumed", "apples_sold",
    "bananas_produced", "bananas_bought", "bananas_consumed", "bananas_sold",
    "reward_eat_apple", "reward_eat_banana", "reward_hunger",
    "reward_movement", "reward_water", "reward_total",
    "exchanges", "avg_price",
]


@dataclass
class EpisodeSummary:
    players: list[PlayerTotals]
    roster: list[dict]
    exchange_count: int
    avg_price: float | None
    market_bought: list[int]   # goods the marketplace bought from players
    market_sold: list[int]     # goods the marketplace sold to players
    prices: list[tuple[int, int]]
    market_exchanges: int = 0

    def net_traded(self, good: int) -> int:
        pairs = [(p.bought[good], p.sold[good]) for p in self.players]
        return net_traded(pairs)

    def role_means(self) -> dict[int, dict[str, float]]:
        out: dict[int, dict[str, float]] = {}
        for role_id in sorted({r["role"] for r in self.roster}):
            pids = [i for i, r in enumerate(self.roster) if r["role"] == role_id]
            ps = [self.players[i] for i in pids]
            out[role_id] = {
                "apples_produced": _mean(p.produced[APPLE] for p in ps),
                "apples_bought": _mean(p.bought[APPLE] for p in ps),
                "apples_consumed": _mean(p.consumed[APPLE] for p in ps),
                "apples_sold": _mean(p.sold[APPLE] for p in ps),
                "bananas_produced": _mean(p.produced[BANANA] for p in ps),
                "bananas_bought": _mean(p.bought[BANANA] for p in ps),
                "bananas_consumed": _mean(p.consumed[BANANA] for p in ps),
                "bananas_sold": _mean(p.sold[BANANA] for p in ps),
                "reward_total": _mean(sum(p.reward.values()) for p in ps),
            }
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(SUMMARY_COLUMNS)
        for pid, (p, entry) in enumerate(zip(self.players, self.roster)):
            w.writerow(
                ["player", pid, ROLE_NAMES[entry["role"]], _blank(entry.get("region"))]
                + [p.produced[APPLE], p.bought[APPLE], p.consumed[APPLE], p.sold[APPLE],
                   p.produced[BANANA], p.bought[BANANA], p.consumed[BANANA], p.sold[BANANA]]
                + [_fmt(p.reward.get(k, 0.0)) for k in
                   ("eat_apple", "eat_banana", "hunger", "movement", "water")]
                + [_fmt(sum(p.reward.values())), p.exchanges, ""]
            )
        for role_id, means in self.role_means().items():
            w.writerow(
                ["role", ROLE_NAMES[role_id], ROLE_NAMES[role_id], ""]
                + [_fmt(means[c]) for c in (
                    "apples_produced", "apples_bought", "apples_consumed", "apples_sold",
                    "bananas_produced", "bananas_bought", "bananas_consumed", "bananas_sold")]
                + ["", "", "", "", ""]
                + [_fmt(means["reward_total"]), "", ""]
            )
        w.writerow(
            ["episode", "", "", ""] + [""] * 8 + [""] * 5
            + ["", self.exchange_count,
               "" if self.avg_price is None else _fmt(self.avg_price)]
        )
        return buf.getvalue()


def _mean(xs) -> float:
    xs = list(xs)
    return sum(xs) / len(xs) if xs else 0.0


def _fmt(x: float) -> str:
    return repr(round(float(x), 10))


def _blank(x) -> str:
    return "" if x is None else x


def summarize(header: dict, events: Sequence[dict]) -> EpisodeSummary:
    """Fold an event stream into per-player flow and reward totals."""
    consts = header["config"]["constants"]
    hunger_pen = consts["hunger_penalty"]
    water_pen = consts["water_penalty"]
    move_pen = consts["movement_penalty"]
    roster = header["roster"]
    players = [PlayerTotals() for _ in roster]
    market_bought = [0, 0]
    market_sold = [0, 0]
    market_exchanges = 0
    prices: list[tuple[int, int]] = []
    for ev in events:
        e = ev["e"]
        if e == "harvest":
            players[ev["p"]].produced[ev["g"]] += ev["q"]
        elif e == "eat":
            t = players[ev["p"]]
            t.consumed[ev["g"]] += 1
            key = "eat_apple" if ev["g"] == APPLE else "eat_banana"
            t.reward[key] = t.reward.get(key, 0.0) + ev["r"]
        elif e == "move":
            if ev["s"]:
                t = players[ev["p"]]
                t.reward["movement"] = t.reward.get("movement", 0.0) - move_pen
        elif e == "exch":
            qa, qb = ev["qa"], ev["qb"]
            prices.append((qa, qb))
            if ev["buyer"] < 0 or ev["seller"] < 0:
                market_exchanges += 1
            if ev["buyer"] >= 0:
                b = players[ev["buyer"]]
                b.bought[APPLE] += qa
                b.sold[BANANA] += qb
                b.exchanges += 1
            else:  # the marketplace bought the apples, paying bananas out
                market_bought[APPLE] += qa
                market_sold[BANANA] += qb
            if ev["seller"] >= 0:
                s = players[ev["seller"]]
                s.sold[APPLE] += qa
                s.bought[BANANA] += qb
                s.exchanges += 1
            else:  # the marketplace sold the apples, taking bananas in
                market_sold[APPLE] += qa
                market_bought[BANANA] += qb
        elif e == "hunger":
            t = players[ev["p"]]
            t.reward["hunger"] = t.reward.get("hunger", 0.0) - hunger_pen
        elif e == "water":
            t = players[ev["p"]]
            t.reward["water"] = t.reward.get("water", 0.0) - water_pen
        elif e == "drop":
            players[ev["p"]].dropped[ev["g"]] += 1
        elif e == "pick":
            players[ev["p"]].picked[ev["g"]] += 1
        elif e == "give":
            players[ev["p"]].given[ev["g"]] += 1
            players[ev["to"]].received[ev["g"]] += 1
    return EpisodeSummary(
        players=players,
        roster=roster,
        exchange_count=len(prices),
        avg_price=average_price(prices),
        market_bought=market_bought,
        market_sold=market_sold,
        prices=prices,
        market_exchanges=market_exchanges,
    )


# -- replay ------------------------------------------------------------------


@dataclass
class ReplayReport:
    exact: bool
    lines_checked: int
    first_divergence: int | None = None
    expected: str | None = None
    actual: str | None = None

    def describe(self) -> str:
        if self.exact:
            return f"exact ({self.lines_checked} lines)"
        return (
            f"divergence at line {self.first_divergence}:\n"
            f"  logged:   {self.expected}\n"
            f"  replayed: {self.actual}"
        )


def replay_episode(path) -> ReplayReport:
    """Re-simulate a logged episode from its config and seed and diff streams."""
    from .config import episode_config_from_dict
    from .env import Environment

    header, events, footer = read_episode_log(path)
    if footer is None:
        raise ValueError(f"{path}: truncated log (no end record)")
    cfg = episode_config_from_dict(header["config"])
    cfg.roster = _roster_from_header(header)
    environment = Environment(cfg, seed=header["seed"])
    environment.reset()
    for ev in events:
        if ev["e"] == "act":
            environment.step(ev["a"])
    extra = {k: header[k] for k in header if k not in
             ("schema", "config_hash", "seed", "roster", "config")}
    replayed = episode_log_lines(environment, header["config"], extra or None)
    with open(path) as f:
        logged = f.read().splitlines()
    checked = 0
    for i, (a, b) in enumerate(zip(logged, replayed)):
        if a != b:
            return ReplayReport(False, checked, i + 1, a, b)
        checked += 1
    if len(logged) != len(replayed):
        i = min(len(logged), len(replayed))
        return ReplayReport(
            False, checked, i + 1,
            logged[i] if i < len(logged) else "<missing>",
            replayed[i] if i < len(replayed) else "<missing>",
        )
    return ReplayReport(True, checked)


def _roster_from_header(header: dict):
    from .env import RosterEntry

    return [
        RosterEntry(role=e["role"], region=e.get("region"), agent=e.get("agent"))
        for e in header["roster"]
    ]


# -- run-level series ----------------------------------------------------------

EPISODE_COLUMNS = [
    "episode", "seed", "avg_agent_steps",
    "return_mean", "return_af", "return_bf",
    "exchanges", "market_exchanges", "avg_price",
    "apples_produced", "apples_consumed", "bananas_produced", "bananas_consumed",
    "net_apples_traded", "net_bananas_traded",
]


def episode_row(
    episode: int,
    seed: int,
    avg_agent_steps: float,
    summary: EpisodeSummary,
    returns: Sequence[float],
) -> list:
    roles = [r["role"] for r in summary.roster]
    af = [x for x, role in zip(returns, roles) if role == 0]
    bf = [x for x, role in zip(returns, roles) if role == 1]
    return [
        episode, seed, _fmt(avg_agent_steps),
        _fmt(_mean(returns)), _fmt(_mean(af)), _fmt(_mean(bf)),
        summary.exchange_count, summary.market_exchanges,
        "" if summary.avg_price is None else _fmt(summary.avg_price),
        sum(p.produced[APPLE] for p in summary.players),
        sum(p.consumed[APPLE] for p in summary.players),
        sum(p.produced[BANANA] for p in summary.players),
        sum(p.consumed[BANANA] for p in summary.players),
        summary.net_traded(APPLE),
        summary.net_traded(BANANA),
    ]


def bin_edges(lo: float, hi: float, bins: int = 100) -> np.ndarray:
    """Equal-width edges shared by every consumer of the binned series."""
    return np.linspace(lo, hi, bins + 1)


def bin_series(x: np.ndarray, y: np.ndarray, bins: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """Mean of y in equal-width bins of x; NaN for empty bins.

    Returns (bin centers, binned means). The rightmost bin includes x == max.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.size == 0:
        return np.array([]), np.array([])
    edges = bin_edges(float(x.min()), float(x.max()), bins)
    idx = np.clip(np.searchsorted(edges, x, side="right") - 1, 0, bins - 1)
    total = np.zeros(bins)
    count = np.zeros(bins)
    np.add.at(total, idx, y)
    np.add.at(count, idx, 1)
    with np.errstate(invalid="ignore"):
        mean = total / count
    mean[count == 0] = np.nan
    centers = (edges[:-1] + edges[1:]) / 2
    return centers, mean


SWEEP_COLUMNS = [
    "param", "value", "episodes_used", "avg_price",
    "apples_produced", "apples_consumed", "net_apples_traded",
    "bananas_produced", "bananas_consumed", "net_bananas_traded",
    "return_mean",
]


def sweep_aggregate(runs: Sequence[tuple[str, float, Sequence[dict]]], window: float = 0.25) -> list[list]:
    """Trailing-window means per run, for supply-demand style scatter tables.

    ``runs`` holds (param, value, episode_rows) triples where episode_rows are
    dict rows of EPISODE_COLUMNS. The window keeps episodes from the final
    ``window`` fraction of the run's average-agent-steps axis.
    """
    if not 0 < window <= 1:
        raise ValueError("window must lie in (0, 1]")
    table = []
    for param, value, rows in runs:
        rows = list(rows)
        if not rows:
            raise ValueError(f"run for {param}={value} has no episodes")
        hi = max(float(r["avg_agent_steps"]) for r in rows)
        cut = hi * (1.0 - window)
        kept = [r for r in rows if float(r["avg_agent_steps"]) >= cut]
        prices = [float(r["avg_price"]) for r in kept if r["avg_price"] != ""]
        table.append([
            param, value, len(kept),
            _fmt(_mean(prices)) if prices else "",
            _fmt(_mean(float(r["apples_produced"]) for r in kept)),
            _fmt(_mean(float(r["apples_consumed"]) for r in kept)),
            _fmt(_mean(float(r["net_apples_traded"]) for r in kept)),
            _fmt(_mean(float(r["bananas_produced"]) for r in kept)),
            _fmt(_mean(float(r["bananas_consumed"]) for r in kept)),
            _fmt(_mean(float(r["net_bananas_traded"]) for r in kept)),
            _fmt(_mean(float(r["return_mean"]) for r in kept)),
        ])
    return table


def write_csv(path, columns: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(columns)
        w.writerows(rows)


def read_csv_rows(path) -> list[dict]:
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


def conservation_check(header: dict, events: Sequence[dict], footer: dict) -> None:
    """Assert the per-good flow identity for one episode, exactly.

    produced + marketplace-out = consumed + sold-to-marketplace
                                 + ground items left + final inventories.
    """
    summ = summarize(header, events)
    ground = [0, 0]
    for ev in events:
        if ev["e"] == "drop":
            ground[ev["g"]] += 1
        elif ev["e"] == "pick":
            ground[ev["g"]] -= 1
    for g in (APPLE, BANANA):
        produced = sum(p.produced[g] for p in summ.players)
        consumed = sum(p.consumed[g] for p in summ.players)
        final = sum(inv[g] for inv in footer["inv"])
        lhs = produced + summ.market_sold[g]
        rhs = consumed + summ.market_bought[g] + ground[g] + final
        if lhs != rhs:
            raise AssertionError(
                f"conservation violated for good {g}: "
                f"produced {produced} + market_out {summ.market_sold[g]} != "
                f"consumed {consumed} + market_in {summ.market_bought[g]} "
                f"+ ground {ground[g]} + held {final}"
            )
