"""Tile maps: templates, procedural tree placement, regrowth, marketplaces.

Maps are rectangular grids of tiles. Templates (walled borders, water rings,
region rectangles, spawn points, marketplace sites) ship as data files; tree
placement on top of a template is procedural per episode. Template geometry
is reverse-engineered from reference imagery and flagged approximate in the
data file.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .exchange import APPLE, BANANA, Offer

# Tile kinds
EMPTY = 0
WALL = 1
WATER = 2
TREE = 3
MARKET = 4

_KIND_FOR_CHAR = {".": EMPTY, "S": EMPTY, "_": EMPTY, "#": WALL, "~": WATER}

Position = tuple[int, int]


@dataclass(frozen=True)
class Region:
    """Rectangular zone with its own per-tile tree spawn probabilities."""

    rid: int
    x0: int
    y0: int
    x1: int
    y1: int
    apple: float
    banana: float
    penalized: bool = False

    def contains(self, x: int, y: int) -> bool:
        return self.x0 <= x <= self.x1 and self.y0 <= y <= self.y1


@dataclass
class Marketplace:
    """Fixed-position pseudo-trader with unbounded inventory and constant offers."""

    position: Position
    offers: list[Offer]


@dataclass
class MapState:
    """The world grid plus everything anchored to it."""

    width: int
    height: int
    kind: np.ndarray            # (h, w) uint8 tile kinds
    tree_good: np.ndarray       # (h, w) int8, good id on TREE tiles, -1 elsewhere
    ripe_at: np.ndarray         # (h, w) int32, tick at which a tree bears fruit again
    ground_item: np.ndarray     # (h, w) int8, good id of a dropped item, -1 none
    no_tree: np.ndarray         # (h, w) bool, tiles where trees never spawn
    regions: list[Region] = field(default_factory=list)
    marketplaces: list[Marketplace] = field(default_factory=list)
    spawn_points: list[Position] = field(default_factory=list)

    def in_bounds(self, x: int, y: int) -> bool:
        return 0 <= x < self.width and 0 <= y < self.height

    def passable(self, x: int, y: int) -> bool:
        """Whether a player may stand here (walls and marketplaces block)."""
        return self.in_bounds(x, y) and self.kind[y, x] not in (WALL, MARKET)

    def is_ripe(self, x: int, y: int, tick: int) -> bool:
        return self.kind[y, x] == TREE and tick >= int(self.ripe_at[y, x])

    def region_of(self, x: int, y: int) -> Region | None:
        for r in self.regions:
            if r.contains(x, y):
                return r
        return None

    def spawn_points_in_region(self, rid: int) -> list[Position]:
        r = self.regions[rid]
        return [p for p in self.spawn_points if r.contains(*p)]


def _load_json(name: str) -> dict:
    with resources.files("fruitmarket.data").joinpath(name).open() as f:
        return json.load(f)


_TEMPLATES: dict | None = None


def templates() -> dict:
    global _TEMPLATES
    if _TEMPLATES is None:
        _TEMPLATES = _load_json("templates.json")
    return _TEMPLATES


def template_names() -> list[str]:
    return sorted(templates().keys())


def euclidean_distance(a: Position, b: Position) -> float:
    from .exchange import euclidean_distance as _d

    return _d(a, b)


def _parse_rows(rows: list[str]) -> tuple[np.ndarray, np.ndarray, list[Position]]:
    height = len(rows)
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise ValueError("map rows must all have the same width")
    kind = np.zeros((height, width), dtype=np.uint8)
    no_tree = np.zeros((height, width), dtype=bool)
    spawns: list[Position] = []
    for y, row in enumerate(rows):
        for x, ch in enumerate(row):
            if ch not in _KIND_FOR_CHAR:
                raise ValueError(f"unknown map character {ch!r} at ({x}, {y})")
            kind[y, x] = _KIND_FOR_CHAR[ch]
            if ch != ".":
                no_tree[y, x] = True
            if ch == "S":
                spawns.append((x, y))
    return kind, no_tree, spawns


@dataclass
class MapSpec:
    """What generate_map needs to know: template plus episode modifiers."""

    template: str = "uniform"
    apple_multiplier: float = 1.0
    banana_multiplier: float = 1.0
    neutral_penalty: float = 1.0
    base_spawn_prob: float = 0.15
    custom: dict | None = None  # same shape as a template entry

    def resolve(self) -> dict:
        if self.template == "custom":
            if not self.custom:
                raise ValueError("custom template requires a grid definition")
            return self.custom
        try:
            return templates()[self.template]
        except KeyError:
            raise ValueError(
                f"unknown map template {self.template!r}; "
                f"expected one of {template_names() + ['custom']}"
            ) from None


def generate_map(spec: MapSpec, rng: np.random.Generator) -> MapState:
    """Build a map: template geometry plus one categorical tree draw per tile.

    Every tile that can host a tree independently becomes an apple tree with
    probability p_apple, a banana tree with p_banana, and stays empty
    otherwise; when p_apple + p_banana would exceed 1 the pair is rescaled
    proportionally. All trees start ripe. Spawn points stay clear.
    """
    if spec.apple_multiplier < 0 or spec.banana_multiplier < 0:
        raise ValueError("tree spawn multipliers must be non-negative")
    if spec.neutral_penalty < 0:
        raise ValueError("region penalty must be non-negative")
    tpl = spec.resolve()
    kind, no_tree, spawns = _parse_rows(tpl["rows"])
    height, width = kind.shape

    regions = [
        Region(rid=i, x0=r["x0"], y0=r["y0"], x1=r["x1"], y1=r["y1"],
               apple=r["apple"], banana=r["banana"],
               penalized=bool(r.get("penalized", False)))
        for i, r in enumerate(tpl.get("regions", []))
    ]

    p_apple = np.zeros((height, width))
    p_banana = np.zeros((height, width))
    if regions:
        for r in regions:
            pen = spec.neutral_penalty if r.penalized else 1.0
            sl = (slice(r.y0, r.y1 + 1), slice(r.x0, r.x1 + 1))
            p_apple[sl] = r.apple * spec.apple_multiplier * pen
            p_banana[sl] = r.banana * spec.banana_multiplier * pen
    else:
        p_apple[:] = spec.base_spawn_prob * spec.apple_multiplier
        p_banana[:] = spec.base_spawn_prob * spec.banana_multiplier

    spawnable = (kind == EMPTY) & ~no_tree
    p_apple[~spawnable] = 0.0
    p_banana[~spawnable] = 0.0
    total = p_apple + p_banana
    over = total > 1.0
    if over.any():
        p_apple[over] /= total[over]
        p_banana[over] /= total[over]

    u = rng.random((height, width))
    apple_here = spawnable & (u < p_apple)
    banana_here = spawnable & ~apple_here & (u < p_apple + p_banana)

    tree_good = np.full((height, width), -1, dtype=np.int8)
    tree_good[apple_here] = APPLE
    tree_good[banana_here] = BANANA
    kind = kind.copy()
    kind[apple_here | banana_here] = TREE

    state = MapState(
        width=width,
        height=height,
        kind=kind,
        tree_good=tree_good,
        ripe_at=np.zeros((height, width), dtype=np.int32),
        ground_item=np.full((height, width), -1, dtype=np.int8),
        no_tree=no_tree,
        regions=regions,
        spawn_points=spawns,
    )
    return state


def place_marketplace(state: MapState, position: Position, offers: list[Offer]) -> None:
    """Install a marketplace, supplanting any tree that grew on its tile."""
    x, y = position
    if not state.in_bounds(x, y):
        raise ValueError(f"marketplace position {position} out of bounds")
    if state.kind[y, x] in (WALL, WATER):
        raise ValueError(f"marketplace position {position} not on open ground")
    if position in state.spawn_points:
        raise ValueError(f"marketplace position {position} is a spawn point")
    state.kind[y, x] = MARKET
    state.tree_good[y, x] = -1
    state.marketplaces.append(Marketplace(position=position, offers=list(offers)))


def harvest_tree(state: MapState, x: int, y: int, tick: int, ripen_time: int) -> int:
    """Mark the tree at (x, y) harvested; it bears fruit again at tick + ripen_time."""
    state.ripe_at[y, x] = tick + ripen_time
    return int(state.tree_good[y, x])


def regrow_tick(state: MapState, tick: int) -> None:
    """No-op: ripeness is a pure function of ripe_at versus the current tick."""


def dump_grid(state: MapState, tick: int = 0) -> str:
    """Character-matrix view of the map, one row per line (golden-test friendly)."""
    chars = {EMPTY: ".", WALL: "#", WATER: "~", MARKET: "M"}
    out = []
    for y in range(state.height):
        row = []
        for x in range(state.width):
            k = state.kind[y, x]
            if k == TREE:
                ripe = tick >= int(state.ripe_at[y, x])
                if state.tree_good[y, x] == APPLE:
                    row.append("A" if ripe else "a")
                else:
                    row.append("B" if ripe else "b")
            elif state.ground_item[y, x] >= 0:
                row.append("*" if state.ground_item[y, x] == APPLE else "%")
            else:
                row.append(chars[int(k)])
        out.append("".join(row))
    return "\n".join(out)


def flood_reachable(state: MapState, start: Position) -> set[Position]:
    """Tiles reachable from start by 4-neighbour steps over passable tiles."""
    seen = {start}
    stack = [start]
    while stack:
        x, y = stack.pop()
        for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            nxt = (x + dx, y + dy)
            if nxt not in seen and state.passable(*nxt):
                seen.add(nxt)
                stack.append(nxt)
    return seen
