"""Player roles, inventories, satiation, and every non-trade reward source.

Reward bookkeeping is integer-exact: the ledger stores event counts per
source and multiplies by the per-event value only when read, so an episode's
return decomposes into its sources without accumulated float error.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import world
from .exchange import APPLE, BANANA, GOODS, NULL_OFFER, Offer, validated_offer

APPLE_FARMER = 0
BANANA_FARMER = 1
ROLE_NAMES = ("apple_farmer", "banana_farmer")

# Orientations, counterclockwise; "forward" follows the facing vector.
NORTH, WEST, SOUTH, EAST = 0, 1, 2, 3
FACING = {NORTH: (0, -1), WEST: (-1, 0), SOUTH: (0, 1), EAST: (1, 0)}

# Movement actions
STAND, STEP_LEFT, STEP_RIGHT, STEP_FWD, STEP_BACK, TURN_LEFT, TURN_RIGHT = range(7)


@dataclass(frozen=True)
class Role:
    """Production skill and consumption taste for one player archetype."""

    role_id: int
    harvest_prob: tuple[float, float]    # per-good success chance per tick on a ripe tree
    consume_reward: tuple[float, float]  # per-good reward for eating one unit
    harvest_quantity: int = 2

    @property
    def name(self) -> str:
        return ROLE_NAMES[self.role_id]

    @property
    def preferred_good(self) -> int:
        return int(np.argmax(self.consume_reward))

    @property
    def produced_good(self) -> int:
        return int(np.argmax(self.harvest_prob))


def default_roles(
    *,
    cross_harvest_prob: float = 0.05,
    restricted: bool = False,
    reward_multipliers: dict[tuple[int, int], float] | None = None,
) -> tuple[Role, Role]:
    """The two standard roles; restricted mode zeroes cross-good harvesting."""
    cross = 0.0 if restricted else cross_harvest_prob
    mults = reward_multipliers or {}

    def m(role: int, good: int) -> float:
        return mults.get((role, good), 1.0)

    af = Role(
        APPLE_FARMER,
        harvest_prob=(1.0, cross),
        consume_reward=(1.0 * m(APPLE_FARMER, APPLE), 8.0 * m(APPLE_FARMER, BANANA)),
    )
    bf = Role(
        BANANA_FARMER,
        harvest_prob=(cross, 1.0),
        consume_reward=(8.0 * m(BANANA_FARMER, APPLE), 1.0 * m(BANANA_FARMER, BANANA)),
    )
    return af, bf


# Ledger components, in the fixed accumulation order.
LEDGER_COMPONENTS = ("eat_apple", "eat_banana", "hunger", "movement", "water")


@dataclass
class RewardLedger:
    """Per-source reward accounting via exact event counts."""

    eat_apple: int = 0
    eat_banana: int = 0
    hunger: int = 0
    movement: int = 0
    water: int = 0

    def values(self, unit: "RewardUnits") -> dict[str, float]:
        return {
            "eat_apple": self.eat_apple * unit.eat[APPLE],
            "eat_banana": self.eat_banana * unit.eat[BANANA],
            "hunger": self.hunger * -unit.hunger_penalty,
            "movement": self.movement * -unit.movement_penalty,
            "water": self.water * -unit.water_penalty,
        }

    def total(self, unit: "RewardUnits") -> float:
        v = self.values(unit)
        out = 0.0
        for name in LEDGER_COMPONENTS:
            out += v[name]
        return out


@dataclass(frozen=True)
class RewardUnits:
    """Per-event reward magnitudes for one player (role-dependent via eat)."""

    eat: tuple[float, float]
    hunger_penalty: float
    movement_penalty: float
    water_penalty: float


@dataclass
class PlayerState:
    """Everything the environment tracks about one embodied player."""

    pid: int
    role: Role
    x: int
    y: int
    orientation: int = NORTH
    inventory: list[int] = field(default_factory=lambda: [0, 0])
    satiation: int = 30
    offer: Offer = NULL_OFFER
    ledger: RewardLedger = field(default_factory=RewardLedger)
    region: int | None = None

    @property
    def position(self) -> tuple[int, int]:
        return (self.x, self.y)

    def revalidate_offer(self) -> bool:
        """Reset the active offer to null if the inventory no longer covers it.

        Returns True when the offer was reset.
        """
        if self.offer != NULL_OFFER and validated_offer(self.offer, self.inventory) == NULL_OFFER:
            self.offer = NULL_OFFER
            return True
        return False


def facing_tile(player: PlayerState) -> tuple[int, int]:
    dx, dy = FACING[player.orientation]
    return (player.x + dx, player.y + dy)


def step_vector(orientation: int, action: int) -> tuple[int, int]:
    """Map an egocentric step action onto a world-frame offset."""
    fx, fy = FACING[orientation]
    if action == STEP_FWD:
        return (fx, fy)
    if action == STEP_BACK:
        return (-fx, -fy)
    if action == STEP_LEFT:
        return (fy, -fx)
    if action == STEP_RIGHT:
        return (-fy, fx)
    raise ValueError(f"not a step action: {action}")


def apply_move(
    grid: world.MapState,
    players: list[PlayerState],
    actor: PlayerState,
    action: int,
    occupied: set | None = None,
) -> bool:
    """Execute one movement action; returns True when the player changed tiles.

    Turns are free. A step onto a wall, marketplace, map edge, or another
    player is a silent no-op. A successful step costs one movement-penalty
    event; water costs accrue separately, per tick of occupancy. Callers
    resolving many moves per tick may pass (and maintain) an ``occupied``
    position set instead of the linear player scan.
    """
    if action == STAND:
        return False
    if action == TURN_LEFT:
        actor.orientation = (actor.orientation + 1) % 4
        return False
    if action == TURN_RIGHT:
        actor.orientation = (actor.orientation - 1) % 4
        return False
    dx, dy = step_vector(actor.orientation, action)
    nx, ny = actor.x + dx, actor.y + dy
    if not grid.passable(nx, ny):
        return False
    if occupied is not None:
        if (nx, ny) in occupied:
            return False
        occupied.discard((actor.x, actor.y))
        occupied.add((nx, ny))
    elif any(p.x == nx and p.y == ny for p in players if p is not actor):
        return False
    actor.x, actor.y = nx, ny
    actor.ledger.movement += 1
    return True


def harvest_tick(
    grid: world.MapState,
    player: PlayerState,
    tick: int,
    ripen_time: int,
    rng: np.random.Generator,
) -> tuple[int, int] | None:
    """Passive harvest check for a player standing on a ripe tree.

    On success the player gains the role's harvest quantity of the tree's
    good and the tree goes dormant until tick + ripen_time.
    """
    if not grid.is_ripe(player.x, player.y, tick):
        return None
    good = int(grid.tree_good[player.y, player.x])
    prob = player.role.harvest_prob[good]
    if prob <= 0.0 or rng.random() >= prob:
        return None
    world.harvest_tree(grid, player.x, player.y, tick, ripen_time)
    qty = player.role.harvest_quantity
    player.inventory[good] += qty
    return good, qty


def consume(player: PlayerState, good: int, satiation_max: int = 30) -> float:
    """Eat one unit of ``good`` if held: reward, satiation refill, offer recheck.

    An empty-handed consume action is a silent no-op worth zero.
    """
    if player.inventory[good] < 1:
        return 0.0
    player.inventory[good] -= 1
    if good == APPLE:
        player.ledger.eat_apple += 1
    else:
        player.ledger.eat_banana += 1
    player.satiation = satiation_max
    player.revalidate_offer()
    return player.role.consume_reward[good]


def hunger_tick(player: PlayerState, enabled: bool = True) -> bool:
    """Starvation check, then satiation decay. Returns True if penalized."""
    starving = player.satiation == 0
    if starving and enabled:
        player.ledger.hunger += 1
    player.satiation = max(0, player.satiation - 1)
    return starving and enabled
