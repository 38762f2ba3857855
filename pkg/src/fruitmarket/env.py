"""The playable environment: action decoding, tick pipeline, observations.

One Environment owns one map and its players and is stepped by one caller;
see reset()/step(). Observation and reward outputs are fresh arrays each
tick, safe to hand to any consumer.

Within a tick, phases run in a fixed order: movement (randomized actor order
for conflicts), passive harvesting, consumption/offer/accept/drop effects
(same randomized order), exchange matching, water costs, hunger, reward
aggregation, observations.
"""

from __future__ import annotations

import heapq
import json
from dataclasses import dataclass, field, replace
from importlib import resources

import numpy as np

from . import economy, world
from .economy import (
    APPLE_FARMER,
    BANANA_FARMER,
    LEDGER_COMPONENTS,
    PlayerState,
    Role,
    RewardUnits,
    default_roles,
)
from .exchange import (
    APPLE,
    BANANA,
    NULL_OFFER,
    STANDARD_OFFERS,
    ExchangeRecord,
    Offer,
    Participant,
    accept_best,
    apply_dynamic,
    resolve_exchanges,
    validated_offer,
)
from .rng import substream

MECHANISMS = (
    "standard",
    "inverse-only",
    "standard+accept",
    "accept-only",
    "dynamic",
    "drop-give",
)

VISION_AHEAD = 14
VISION_SIDE = 7
VISION_SHAPE = (15, 15, 3)
NO_ACTION = -1  # previous-action observation before the first step

_MOVE_NAMES = ("stand", "left", "right", "forward", "backward", "turn-left", "turn-right")
_MOVE_ACTIONS = (
    economy.STAND, economy.STEP_LEFT, economy.STEP_RIGHT, economy.STEP_FWD,
    economy.STEP_BACK, economy.TURN_LEFT, economy.TURN_RIGHT,
)


def _offer_name(offer: Offer) -> str:
    a, b = offer
    if a < 0:
        return f"{-a}a:{b}b"
    return f"{-b}b:{a}a"


def action_table(mechanism: str) -> list[dict]:
    """The discrete action set for one mechanism mode, in index order."""
    if mechanism not in MECHANISMS:
        raise ValueError(f"unknown mechanism {mechanism!r}; expected one of {MECHANISMS}")
    table: list[dict] = []

    def add(name: str, kind: str, **params) -> None:
        table.append({"index": len(table), "name": name, "kind": kind, **params})

    for name, move in zip(_MOVE_NAMES, _MOVE_ACTIONS):
        add(name, "move", move=move)
    add("eat-apple", "eat", good=APPLE)
    add("eat-banana", "eat", good=BANANA)

    if mechanism in ("standard", "inverse-only", "standard+accept", "accept-only"):
        add("cancel-offer", "cancel")
        for offer in STANDARD_OFFERS:
            add("offer-" + _offer_name(offer), "offer", offer=list(offer))
        if mechanism in ("standard+accept", "accept-only"):
            add("buy-apple", "buy", good=APPLE)
            add("buy-banana", "buy", good=BANANA)
    elif mechanism == "dynamic":
        add("cancel-offer", "cancel")
        add("offer-minus-apple", "dyn", good=APPLE, step=-1)
        add("offer-plus-apple", "dyn", good=APPLE, step=1)
        add("offer-minus-banana", "dyn", good=BANANA, step=-1)
        add("offer-plus-banana", "dyn", good=BANANA, step=1)
    elif mechanism == "drop-give":
        add("drop-apple", "drop", good=APPLE)
        add("drop-banana", "drop", good=BANANA)
        add("give-apple", "give", good=APPLE)
        add("give-banana", "give", good=BANANA)
    return table


def num_actions(mechanism: str) -> int:
    return len(action_table(mechanism))


def decode_action(index: int, mechanism: str) -> dict:
    """Structured form of one action index; stable across versions."""
    table = action_table(mechanism)
    if not 0 <= index < len(table):
        raise IndexError(f"action index {index} out of range for {mechanism!r}")
    return table[index]


@dataclass(frozen=True)
class Constants:
    """Shared scalar knobs; defaults are the reference values."""

    ripen_time: int = 50
    movement_penalty: float = 0.25
    water_penalty: float = 1.0
    hunger_penalty: float = 1.0
    satiation_start: int = 30
    trade_radius: float = 4.0
    offer_visibility_radius: float = 4.0
    harvest_quantity: int = 2
    cross_harvest_prob: float = 0.05


@dataclass(frozen=True)
class RosterEntry:
    role: int
    region: int | None = None
    agent: int | None = None  # filled by the trainer; cosmetic here


@dataclass(frozen=True)
class MarketplaceSpec:
    offers: tuple[Offer, ...]
    site: int = 0                       # index into the template's marketplace sites
    position: tuple[int, int] | None = None  # explicit override


@dataclass
class EpisodeConfig:
    """Everything one episode needs besides the seed."""

    map: world.MapSpec = field(default_factory=world.MapSpec)
    mechanism: str = "standard"
    constants: Constants = field(default_factory=Constants)
    reward_multipliers: dict[tuple[int, int], float] = field(default_factory=dict)
    episode_length: int = 1000
    marketplace: MarketplaceSpec | None = None
    hunger_enabled: bool = True
    restricted_production: bool = False
    roster: list[RosterEntry] | None = None  # None = template default

    def validate(self) -> None:
        if self.mechanism not in MECHANISMS:
            raise ValueError(f"unknown mechanism {self.mechanism!r}")
        if self.episode_length < 1:
            raise ValueError("episode_length must be at least 1")
        if self.constants.trade_radius < 0 or self.constants.offer_visibility_radius < 0:
            raise ValueError("radii must be non-negative")


@dataclass(slots=True)
class Observation:
    """One player's view of one tick."""

    vision: np.ndarray       # (15, 15, 3) float32, observer centered bottom row
    inventory: np.ndarray    # (2,) int32
    needs: int               # satiation
    own_offer: np.ndarray    # (2,) int8
    offers: np.ndarray       # (P, 2) int8, zero rows out of visibility range
    previous_action: int
    reward: float

    def flat_nonvisual(self) -> np.ndarray:
        return np.concatenate([
            self.inventory.astype(np.float32),
            np.array([self.needs], dtype=np.float32),
            self.own_offer.astype(np.float32),
            self.offers.astype(np.float32).ravel(),
            np.array([self.previous_action, self.reward], dtype=np.float32),
        ])


# Palette index layout for the composed color grid.
_IDX_EMPTY, _IDX_WALL, _IDX_WATER, _IDX_MARKET = 0, 1, 2, 3
_IDX_APPLE_RIPE, _IDX_APPLE_UNRIPE, _IDX_BANANA_RIPE, _IDX_BANANA_UNRIPE = 4, 5, 6, 7
_IDX_GROUND_APPLE, _IDX_GROUND_BANANA = 8, 9
_IDX_AVATAR0 = 10
_N_AVATARS = 16

_KIND_TO_IDX = {
    world.EMPTY: _IDX_EMPTY,
    world.WALL: _IDX_WALL,
    world.WATER: _IDX_WATER,
    world.MARKET: _IDX_MARKET,
}

# Counterclockwise quarter turns that bring the facing direction to "up".
_ROT_K = {economy.NORTH: 0, economy.WEST: 3, economy.SOUTH: 2, economy.EAST: 1}


def load_palette() -> np.ndarray:
    """(26, 3) float32 color table matching the composed grid's indices."""
    with resources.files("fruitmarket.data").joinpath("palette.json").open() as f:
        data = json.load(f)
    t = data["terrain"]
    rows = [
        t["empty"], t["wall"], t["water"], t["marketplace"],
        t["apple_ripe"], t["apple_unripe"], t["banana_ripe"], t["banana_unripe"],
        t["ground_apple"], t["ground_banana"],
    ] + data["avatars"]
    return np.asarray(rows, dtype=np.float32)


_PALETTE = load_palette()


class Environment:
    """A single episodic world instance driven by per-player action indices."""

    def __init__(self, config: EpisodeConfig, seed: int = 0):
        config.validate()
        self.config = config
        self.seed = seed
        self.actions = action_table(config.mechanism)
        self.num_actions = len(self.actions)
        self._matching_on = config.mechanism in (
            "standard", "inverse-only", "standard+accept", "dynamic",
        )
        self._accepts_on = config.mechanism in ("standard+accept", "accept-only")
        self.grid: world.MapState | None = None
        self.players: list[PlayerState] = []
        self.tick = 0

    # -- lifecycle ---------------------------------------------------------

    def reset(self, seed: int | None = None) -> list[Observation]:
        if seed is not None:
            self.seed = seed
        cfg = self.config
        self._rng_harvest = substream(self.seed, "harvest")
        self._rng_matching = substream(self.seed, "matching")
        self._rng_conflicts = substream(self.seed, "conflicts")

        self.grid = world.generate_map(cfg.map, substream(self.seed, "map"))
        if cfg.marketplace is not None:
            self._place_marketplace(cfg.marketplace)

        af, bf = default_roles(
            cross_harvest_prob=cfg.constants.cross_harvest_prob,
            restricted=cfg.restricted_production,
            reward_multipliers=cfg.reward_multipliers,
        )
        roles = {APPLE_FARMER: replace(af, harvest_quantity=cfg.constants.harvest_quantity),
                 BANANA_FARMER: replace(bf, harvest_quantity=cfg.constants.harvest_quantity)}
        roster = cfg.roster if cfg.roster is not None else self.default_roster()
        self.players = self._spawn_players(roster, roles)
        self.roster = roster

        self.tick = 0
        self.events: list[tuple] = []
        self.exchange_records: list[ExchangeRecord] = []
        self._prev_actions = [NO_ACTION] * len(self.players)
        self._tick_rewards = np.zeros(len(self.players), dtype=np.float64)
        self._units = [
            RewardUnits(
                eat=p.role.consume_reward,
                hunger_penalty=cfg.constants.hunger_penalty,
                movement_penalty=cfg.constants.movement_penalty,
                water_penalty=cfg.constants.water_penalty,
            )
            for p in self.players
        ]
        self._views = [
            Participant(p.pid, p.x, p.y, p.offer, p.inventory) for p in self.players
        ]
        self._mkt_views = []
        for mi, mkt in enumerate(self.grid.marketplaces):
            for oi, offer in enumerate(mkt.offers):
                pid = -(1 + mi * 8 + oi)
                self._mkt_views.append(
                    Participant(pid, mkt.position[0], mkt.position[1], offer, None)
                )
        self.rebuild_terrain_caches()
        self._build_gather_offsets()
        return self._observe()

    def rebuild_terrain_caches(self) -> None:
        """Re-derive lookup caches and the color grid from the map arrays.

        Call after mutating self.grid in place (scripted test scenes do).
        """
        ys, xs = np.nonzero(self.grid.kind == world.WATER)
        self._water_tiles = frozenset(zip(xs.tolist(), ys.tolist()))
        ys, xs = np.nonzero(self.grid.kind == world.TREE)
        self._tree_tiles = frozenset(zip(xs.tolist(), ys.tolist()))
        self._init_colors()

    def default_roster(self) -> list[RosterEntry]:
        """Template default: 2 of each role per region, else alternating roles."""
        grid = self.grid if self.grid is not None else world.generate_map(
            self.config.map, substream(self.seed, "map"))
        if grid.regions:
            return [
                RosterEntry(role=role, region=r.rid)
                for r in grid.regions
                for role in (APPLE_FARMER, APPLE_FARMER, BANANA_FARMER, BANANA_FARMER)
            ]
        n = len(grid.spawn_points)
        return [RosterEntry(role=i % 2) for i in range(n)]

    def _place_marketplace(self, spec: MarketplaceSpec) -> None:
        if spec.position is not None:
            pos = spec.position
        else:
            sites = self.config.map.resolve().get("marketplace_sites", [])
            if not 0 <= spec.site < len(sites):
                raise ValueError(
                    f"marketplace site {spec.site} not defined for this template "
                    f"({len(sites)} sites available)"
                )
            pos = tuple(sites[spec.site])
        world.place_marketplace(self.grid, pos, list(spec.offers))

    def _spawn_players(self, roster, roles) -> list[PlayerState]:
        grid = self.grid
        players: list[PlayerState] = []
        if grid.regions and any(e.region is not None for e in roster):
            used: dict[int, int] = {}
            for pid, entry in enumerate(roster):
                if entry.region is None:
                    raise ValueError("region maps need a region for every roster entry")
                spots = grid.spawn_points_in_region(entry.region)
                k = used.get(entry.region, 0)
                if k >= len(spots):
                    raise ValueError(
                        f"roster needs {k + 1} spawn points in region {entry.region}, "
                        f"template has {len(spots)}"
                    )
                used[entry.region] = k + 1
                x, y = spots[k]
                players.append(self._new_player(pid, roles[entry.role], x, y, entry.region))
        else:
            if len(roster) > len(grid.spawn_points):
                raise ValueError(
                    f"roster of {len(roster)} exceeds the template's "
                    f"{len(grid.spawn_points)} spawn points"
                )
            for pid, entry in enumerate(roster):
                x, y = grid.spawn_points[pid]
                players.append(self._new_player(pid, roles[entry.role], x, y, entry.region))
        return players

    def _new_player(self, pid: int, role: Role, x: int, y: int, region) -> PlayerState:
        return PlayerState(
            pid=pid, role=role, x=x, y=y,
            orientation=economy.NORTH,
            satiation=self.config.constants.satiation_start,
            region=region,
        )

    # -- stepping ----------------------------------------------------------

    def step(self, actions) -> tuple[list[Observation], np.ndarray, bool]:
        if self.grid is None:
            raise RuntimeError("call reset() before step()")
        players = self.players
        if len(actions) != len(players):
            raise ValueError(f"expected {len(players)} actions, got {len(actions)}")
        if isinstance(actions, np.ndarray):
            actions = actions.tolist()
        else:
            actions = [int(a) for a in actions]
        decoded = []
        for a in actions:
            if not 0 <= a < self.num_actions:
                raise IndexError(f"action index {a} out of range 0..{self.num_actions - 1}")
            decoded.append(self.actions[a])

        self.tick += 1
        tick = self.tick
        ev = self.events.append
        ev(("act", tick, actions))
        before = [
            (p.ledger.eat_apple, p.ledger.eat_banana, p.ledger.hunger,
             p.ledger.movement, p.ledger.water)
            for p in players
        ]

        order = self._rng_conflicts.permutation(len(players)).tolist()

        # movement
        occupied = {(p.x, p.y) for p in players}
        for pid in order:
            act = decoded[pid]
            if act["kind"] != "move":
                continue
            p = players[pid]
            changed_pos = economy.apply_move(self.grid, players, p, act["move"], occupied)
            if changed_pos or act["move"] in (economy.TURN_LEFT, economy.TURN_RIGHT):
                ev(("move", tick, pid, p.x, p.y, p.orientation, int(changed_pos)))
            if changed_pos:
                self._maybe_pickup(p)

        # passive harvesting
        tree_tiles = self._tree_tiles
        ripen = self.config.constants.ripen_time
        for p in players:
            if (p.x, p.y) not in tree_tiles:
                continue
            got = economy.harvest_tick(self.grid, p, tick, ripen, self._rng_harvest)
            if got is not None:
                good, qty = got
                ev(("harvest", tick, p.pid, good, qty, p.x, p.y))
                self._paint_tree(p.x, p.y, ripe=False)
                heapq.heappush(self._ripe_heap, (tick + ripen, p.x, p.y))

        # consumption, offers, accepts, drops, gives
        for pid in order:
            self._apply_effect(players[pid], decoded[pid], tick)

        # exchange matching
        if self._matching_on:
            self._run_matching(tick)

        # water and hunger costs, then the tick's reward as the exact
        # ledger delta summed in fixed component order
        water = self._water_tiles
        hunger_on = self.config.hunger_enabled
        rewards = self._tick_rewards
        for i, p in enumerate(players):
            led = p.ledger
            if (p.x, p.y) in water:
                led.water += 1
                ev(("water", tick, p.pid))
            if economy.hunger_tick(p, enabled=hunger_on):
                ev(("hunger", tick, p.pid))
            b = before[i]
            u = self._units[i]
            rewards[i] = (
                (led.eat_apple - b[0]) * u.eat[APPLE]
                + (led.eat_banana - b[1]) * u.eat[BANANA]
                + (led.hunger - b[2]) * -u.hunger_penalty
                + (led.movement - b[3]) * -u.movement_penalty
                + (led.water - b[4]) * -u.water_penalty
            )
        self._prev_actions = actions
        done = tick >= self.config.episode_length
        return self._observe(), rewards.copy(), done

    def _apply_effect(self, p: PlayerState, act: dict, tick: int) -> None:
        kind = act["kind"]
        ev = self.events.append
        if kind in ("move",):
            return
        if kind == "eat":
            had_offer = p.offer
            reward = economy.consume(p, act["good"], self.config.constants.satiation_start)
            if reward:
                ev(("eat", tick, p.pid, act["good"], reward))
                if p.offer != had_offer:
                    ev(("offer", tick, p.pid, 0, 0))
                    self._views[p.pid].offer = p.offer
        elif kind == "offer":
            new = validated_offer(tuple(act["offer"]), p.inventory)
            self._set_offer(p, new, tick)
        elif kind == "cancel":
            self._set_offer(p, NULL_OFFER, tick)
        elif kind == "dyn":
            new = apply_dynamic(p.offer, act["good"], act["step"], p.inventory)
            self._set_offer(p, new, tick)
        elif kind == "buy":
            self._run_accept(p, act["good"], tick)
        elif kind == "drop":
            self._drop(p, act["good"], tick)
        elif kind == "give":
            self._give(p, act["good"], tick)
        else:
            raise AssertionError(f"unhandled action kind {kind!r}")

    def _set_offer(self, p: PlayerState, new: Offer, tick: int) -> None:
        if new != p.offer:
            p.offer = new
            self.events.append(("offer", tick, p.pid, new[0], new[1]))
        self._views[p.pid].offer = p.offer

    def _sync_views(self) -> None:
        for p, v in zip(self.players, self._views):
            v.x, v.y, v.offer = p.x, p.y, p.offer

    def _writeback_offers(self) -> None:
        for p, v in zip(self.players, self._views):
            if v.offer != p.offer:
                p.offer = v.offer

    def _scene(self) -> list[Participant]:
        return self._views + self._mkt_views

    def _run_accept(self, p: PlayerState, good: int, tick: int) -> None:
        self._sync_views()
        actor = self._views[p.pid]
        rec = accept_best(
            actor, self._scene(), good,
            self.config.constants.trade_radius, self._rng_matching, tick,
        )
        if rec is not None:
            self._writeback_offers()
            self._record_exchange(rec)

    def _run_matching(self, tick: int) -> None:
        self._sync_views()
        active = sum(1 for v in self._views if v.offer != NULL_OFFER)
        if active == 0 or (active < 2 and not self._mkt_views):
            return
        records = resolve_exchanges(
            self._scene(),
            self.config.constants.trade_radius,
            self._rng_matching,
            inverse_only=self.config.mechanism == "inverse-only",
            tick=tick,
        )
        if records:
            self._writeback_offers()
            for rec in records:
                self._record_exchange(rec)

    def _record_exchange(self, rec: ExchangeRecord) -> None:
        self.exchange_records.append(rec)
        self.events.append((
            "exch", rec.tick, rec.apple_buyer, rec.apple_seller,
            rec.apple_buyer_pos[0], rec.apple_buyer_pos[1],
            rec.apple_seller_pos[0], rec.apple_seller_pos[1],
            rec.apples, rec.bananas, int(rec.via_accept),
        ))

    def _drop(self, p: PlayerState, good: int, tick: int) -> None:
        if p.inventory[good] < 1:
            return
        x, y = economy.facing_tile(p)
        if not self.grid.passable(x, y) or self.grid.ground_item[y, x] >= 0:
            return
        p.inventory[good] -= 1
        self._offer_recheck(p, tick)
        self.grid.ground_item[y, x] = good
        self._paint_ground(x, y, good)
        self.events.append(("drop", tick, p.pid, good, x, y))

    def _offer_recheck(self, p: PlayerState, tick: int) -> None:
        if p.revalidate_offer():
            self.events.append(("offer", tick, p.pid, 0, 0))
            self._views[p.pid].offer = p.offer

    def _give(self, p: PlayerState, good: int, tick: int) -> None:
        if p.inventory[good] < 1:
            return
        r2 = self.config.constants.offer_visibility_radius ** 2
        cands = []
        best = None
        for q in self.players:
            if q is p:
                continue
            d2 = (q.x - p.x) ** 2 + (q.y - p.y) ** 2
            if d2 > r2:
                continue
            if best is None or d2 < best:
                best, cands = d2, [q]
            elif d2 == best:
                cands.append(q)
        if not cands:
            return
        target = cands[0] if len(cands) == 1 else cands[int(self._rng_matching.integers(len(cands)))]
        p.inventory[good] -= 1
        self._offer_recheck(p, tick)
        target.inventory[good] += 1
        self.events.append(("give", tick, p.pid, target.pid, good))

    def _maybe_pickup(self, p: PlayerState) -> None:
        item = int(self.grid.ground_item[p.y, p.x])
        if item < 0:
            return
        self.grid.ground_item[p.y, p.x] = -1
        p.inventory[item] += 1
        self._repaint_terrain(p.x, p.y)
        self.events.append(("pick", self.tick, p.pid, item, p.x, p.y))

    # -- rendering ---------------------------------------------------------

    def _init_colors(self) -> None:
        g = self.grid
        pad = VISION_AHEAD
        self._pad = pad
        idx = np.full((g.height + 2 * pad, g.width + 2 * pad), _IDX_WALL, dtype=np.uint8)
        inner = idx[pad:pad + g.height, pad:pad + g.width]
        for kind, cidx in _KIND_TO_IDX.items():
            inner[g.kind == kind] = cidx
        inner[(g.kind == world.TREE) & (g.tree_good == APPLE)] = _IDX_APPLE_RIPE
        inner[(g.kind == world.TREE) & (g.tree_good == BANANA)] = _IDX_BANANA_RIPE
        self._colors = idx
        self._rgb = _PALETTE[idx]  # float32 mirror, updated on every repaint
        self._ripe_heap: list[tuple[int, int, int]] = []

    def _set_color(self, x: int, y: int, cidx: int) -> None:
        yy, xx = y + self._pad, x + self._pad
        self._colors[yy, xx] = cidx
        self._rgb[yy, xx] = _PALETTE[cidx]

    def _paint_tree(self, x: int, y: int, ripe: bool) -> None:
        good = int(self.grid.tree_good[y, x])
        if good == APPLE:
            cidx = _IDX_APPLE_RIPE if ripe else _IDX_APPLE_UNRIPE
        else:
            cidx = _IDX_BANANA_RIPE if ripe else _IDX_BANANA_UNRIPE
        self._set_color(x, y, cidx)

    def _paint_ground(self, x: int, y: int, good: int) -> None:
        self._set_color(x, y, _IDX_GROUND_APPLE if good == APPLE else _IDX_GROUND_BANANA)

    def _repaint_terrain(self, x: int, y: int) -> None:
        g = self.grid
        if g.kind[y, x] == world.TREE:
            self._paint_tree(x, y, ripe=g.is_ripe(x, y, self.tick))
        else:
            self._set_color(x, y, _KIND_TO_IDX[int(g.kind[y, x])])

    def _refresh_ripeness(self) -> None:
        heap = self._ripe_heap
        while heap and heap[0][0] <= self.tick:
            _, x, y = heapq.heappop(heap)
            if self.grid.is_ripe(x, y, self.tick):
                self._paint_tree(x, y, ripe=True)

    def render_vision(self, observer: int) -> np.ndarray:
        """Egocentric (15, 15, 3) view for one player at the current tick."""
        self._refresh_ripeness()
        saved = self._paint_avatars()
        out = self._vision(self.players[observer])
        self._unpaint_avatars(saved)
        return out

    def _paint_avatars(self) -> list[tuple[int, int, int]]:
        saved = []
        pad = self._pad
        colors, rgb = self._colors, self._rgb
        for p in self.players:
            yy, xx = p.y + pad, p.x + pad
            saved.append((yy, xx, int(colors[yy, xx])))
            cidx = _IDX_AVATAR0 + (p.pid % _N_AVATARS)
            colors[yy, xx] = cidx
            rgb[yy, xx] = _PALETTE[cidx]
        return saved

    def _unpaint_avatars(self, saved) -> None:
        colors, rgb = self._colors, self._rgb
        for yy, xx, v in reversed(saved):
            colors[yy, xx] = v
            rgb[yy, xx] = _PALETTE[v]

    def _window(self, p: PlayerState) -> np.ndarray:
        pad = self._pad
        cy, cx = p.y + pad, p.x + pad
        block = self._colors[cy - pad:cy + pad + 1, cx - pad:cx + pad + 1]
        o = p.orientation
        # quarter-turn views, equivalent to np.rot90(block, _ROT_K[o])
        if o == economy.WEST:
            block = block.T[:, ::-1]
        elif o == economy.SOUTH:
            block = block[::-1, ::-1]
        elif o == economy.EAST:
            block = block.T[::-1]
        return block[:VISION_AHEAD + 1, pad - VISION_SIDE:pad + VISION_SIDE + 1]

    def _vision(self, p: PlayerState) -> np.ndarray:
        return _PALETTE[self._window(p)]

    def _build_gather_offsets(self) -> None:
        # For each orientation, the flat offsets (into the padded color grid)
        # of every vision cell relative to the observer, derived from the
        # same windowing code render_vision uses.
        pad = self._pad
        h, w = self._colors.shape
        idx_grid = np.arange(h * w, dtype=np.int64).reshape(h, w)
        center = (0 + pad) * w + (0 + pad)  # probe player at (0, 0)
        saved_colors = self._colors
        self._colors = idx_grid
        rel = []
        probe = PlayerState(pid=-1, role=self.players[0].role, x=0, y=0)
        for orientation in (economy.NORTH, economy.WEST, economy.SOUTH, economy.EAST):
            probe.orientation = orientation
            rel.append(self._window(probe).astype(np.int64) - center)
        self._colors = saved_colors
        self._rel_offsets = np.stack([r.ravel() for r in rel])  # (4, 225)
        self._idx_buf = np.empty(
            (len(self.players), self._rel_offsets.shape[1]), dtype=np.int64)

    def _vision_batch(self) -> np.ndarray:
        players = self.players
        n = len(players)
        pad = self._pad
        w = self._colors.shape[1]
        centers = np.empty((n, 1), dtype=np.int64)
        orients = np.empty(n, dtype=np.int64)
        for i, p in enumerate(players):
            centers[i, 0] = (p.y + pad) * w + (p.x + pad)
            orients[i] = p.orientation
        buf = self._idx_buf
        np.take(self._rel_offsets, orients, axis=0, out=buf)
        buf += centers
        flat = self._rgb.reshape(-1, 3)
        shape = (n, VISION_AHEAD + 1, 2 * VISION_SIDE + 1, 3)
        return np.take(flat, buf.ravel(), axis=0).reshape(shape)

    # -- observations ------------------------------------------------------

    def _observe(self) -> list[Observation]:
        players = self.players
        self._refresh_ripeness()
        saved = self._paint_avatars()

        n = len(players)
        r2 = self.config.constants.offer_visibility_radius ** 2
        active = [(j, q.x, q.y, q.offer) for j, q in enumerate(players)
                  if q.offer != NULL_OFFER]
        visions = self._vision_batch()
        inventories = np.array([p.inventory for p in players], dtype=np.int32)
        own_offers = np.array([p.offer for p in players], dtype=np.int8)

        out = []
        rewards = self._tick_rewards.tolist()
        prev = self._prev_actions
        for i, p in enumerate(players):
            rows = np.zeros((n, 2), dtype=np.int8)
            px, py = p.x, p.y
            for j, qx, qy, offer in active:
                if j != i and (px - qx) ** 2 + (py - qy) ** 2 <= r2:
                    rows[j, 0], rows[j, 1] = offer
            out.append(Observation(
                vision=visions[i],
                inventory=inventories[i],
                needs=p.satiation,
                own_offer=own_offers[i],
                offers=rows,
                previous_action=prev[i],
                reward=rewards[i],
            ))
        self._unpaint_avatars(saved)
        return out

    # -- accounting helpers --------------------------------------------------

    def ledger_values(self, pid: int) -> dict[str, float]:
        return self.players[pid].ledger.values(self._units[pid])

    def episodic_return(self, pid: int) -> float:
        return self.players[pid].ledger.total(self._units[pid])
