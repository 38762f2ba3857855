"""Hand-written policies: test fixtures and benchmark drivers.

These act on the same observations a learning agent would see; the harvester
literally looks for tree-colored pixels in its egocentric view.
"""

from __future__ import annotations

import random

import numpy as np

from .. import env as env_mod
from ..economy import APPLE_FARMER
from ..env import Observation, action_table
from ..exchange import APPLE, BANANA, NULL_OFFER, Offer, affordable


class RandomPolicy:
    """Uniform over the mode's legal actions."""

    def __init__(self, num_actions: int, rng: np.random.Generator):
        self.num_actions = num_actions
        # stdlib randrange is several times faster per draw; seed it from the
        # caller's stream so determinism still flows from one master seed
        self._rand = random.Random(int(rng.integers(2 ** 63)))

    def reset(self) -> None:
        pass

    def act(self, obs: Observation) -> int:
        return self._rand.randrange(self.num_actions)


class _ActionIndex:
    """Name/offer -> index lookups for one mechanism's action table."""

    def __init__(self, mechanism: str):
        table = action_table(mechanism)
        self.by_name = {a["name"]: a["index"] for a in table}
        self.offer_actions = {
            tuple(a["offer"]): a["index"] for a in table if a["kind"] == "offer"
        }
        self.num_actions = len(table)

    @property
    def stand(self) -> int:
        return self.by_name["stand"]

    def eat(self, good: int) -> int:
        return self.by_name["eat-apple" if good == APPLE else "eat-banana"]


# Palette rows for ripe trees, used to spot targets in the vision field.
_RIPE_COLOR = {
    APPLE: env_mod._PALETTE[env_mod._IDX_APPLE_RIPE],
    BANANA: env_mod._PALETTE[env_mod._IDX_BANANA_RIPE],
}


class HarvesterPolicy:
    """Walks to the nearest visible ripe tree of its target good; eats when hungry.

    With no target in sight it wanders (seeded): mostly forward, with random
    turns, away from whatever blocks it.
    """

    def __init__(
        self,
        mechanism: str,
        rng: np.random.Generator,
        target_good: int = APPLE,
        eat_threshold: int = 5,
        prefer_good: int | None = None,
    ):
        self.actions = _ActionIndex(mechanism)
        self.rng = rng
        self.target_good = target_good
        self.eat_threshold = eat_threshold
        # good eaten first when hungry; default the other one (trade proceeds)
        self.prefer_good = prefer_good if prefer_good is not None else 1 - target_good
        self.reset()

    def reset(self) -> None:
        self._stuck = 0

    def act(self, obs: Observation) -> int:
        if obs.needs < self.eat_threshold:
            for good in (self.prefer_good, 1 - self.prefer_good):
                if obs.inventory[good] > 0:
                    return self.actions.eat(good)
        move = self._toward_tree(obs)
        if move is not None:
            return move
        return self._wander()

    def _toward_tree(self, obs: Observation) -> int | None:
        color = _RIPE_COLOR[self.target_good]
        hits = np.argwhere(np.all(obs.vision == color, axis=2))
        if hits.size == 0:
            return None
        ahead = env_mod.VISION_AHEAD - hits[:, 0]
        lateral = hits[:, 1] - env_mod.VISION_SIDE
        dist = ahead + np.abs(lateral)
        i = int(np.argmin(dist))
        if dist[i] == 0:
            return self.actions.stand  # standing on it; wait out the harvest roll
        if abs(int(lateral[i])) > int(ahead[i]):
            name = "right" if lateral[i] > 0 else "left"
        else:
            name = "forward"
        return self.actions.by_name[name]

    def _wander(self) -> int:
        r = self.rng.random()
        if r < 0.55:
            return self.actions.by_name["forward"]
        if r < 0.7:
            return self.actions.by_name["turn-left"]
        if r < 0.85:
            return self.actions.by_name["turn-right"]
        return self.actions.by_name["left" if r < 0.93 else "right"]


class TraderPolicy(HarvesterPolicy):
    """A harvester that keeps a fixed offer posted whenever it can afford it."""

    def __init__(
        self,
        mechanism: str,
        rng: np.random.Generator,
        offer: Offer,
        target_good: int | None = None,
        eat_threshold: int = 5,
    ):
        give_good = APPLE if offer[APPLE] < 0 else BANANA
        want_good = 1 - give_good
        super().__init__(
            mechanism, rng,
            target_good=give_good if target_good is None else target_good,
            eat_threshold=eat_threshold,
            prefer_good=want_good,
        )
        self.offer = offer
        self._offer_action = self.actions.offer_actions[tuple(offer)]

    def act(self, obs: Observation) -> int:
        own = tuple(int(v) for v in obs.own_offer)
        if own == NULL_OFFER and affordable(self.offer, obs.inventory):
            # keep enough on hand that posting never starves us
            if obs.needs >= self.eat_threshold or obs.inventory[self.prefer_good] > 0:
                return self._offer_action
        return super().act(obs)


def make_scripted(kind: str, mechanism: str, rng: np.random.Generator, **kw):
    """Factory for the named fixture policies: random | harvester | trader."""
    if kind == "random":
        return RandomPolicy(len(action_table(mechanism)), rng)
    if kind == "harvester":
        return HarvesterPolicy(mechanism, rng, **kw)
    if kind == "trader":
        return TraderPolicy(mechanism, rng, **kw)
    raise ValueError(f"unknown scripted policy {kind!r}")
