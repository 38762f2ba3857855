"""Barter offers and the spatial exchange-matching engine.

An offer is a signed per-good quantity vector ``(apples, bananas)``: negative
entries are quantities the owner gives away, positive entries are quantities
it requests in return. ``(0, 0)`` is the null offer ("not trading"). A
*complete* offer both gives and requests something; only complete offers ever
match.

The engine pairs nearby complete offers into atomic exchanges once per tick.
Matching prefers the most generous counterparty (dominated offers are
ignored), requires the preference to be mutual, breaks ties by distance and
then uniformly at random, and transfers the minimum quantities that satisfy
both sides.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Sequence

import numpy as np

APPLE = 0
BANANA = 1
GOODS = (APPLE, BANANA)
GOOD_NAMES = ("apple", "banana")

Offer = tuple[int, int]

NULL_OFFER: Offer = (0, 0)
MAX_OFFER_QTY = 3

# The 18 single-action offers: give 1..3 of one good for 1..3 of the other,
# in the same order the discrete actions enumerate them.
STANDARD_OFFERS: tuple[Offer, ...] = (
    (-1, 1), (-1, 2), (-2, 1), (-2, 2), (-1, 3), (-2, 3), (-3, 1), (-3, 2), (-3, 3),
    (1, -1), (2, -1), (1, -2), (2, -2), (3, -1), (3, -2), (1, -3), (2, -3), (3, -3),
)


def is_complete(offer: Offer) -> bool:
    """A complete offer gives at least one good and requests at least one."""
    a, b = offer
    return (a < 0 or b < 0) and (a > 0 or b > 0)


def is_compatible(a: Offer, b: Offer) -> bool:
    """True iff each side gives at least as much of every good as the other requests."""
    if not (is_complete(a) and is_complete(b)):
        return False
    for g in GOODS:
        if b[g] > 0 and -a[g] < b[g]:
            return False
        if a[g] > 0 and -b[g] < a[g]:
            return False
    return True


def is_inverse(a: Offer, b: Offer) -> bool:
    """Exact mirror offers; a subset of compatible pairs."""
    return is_complete(a) and all(a[g] == -b[g] for g in GOODS)


def exchange_quantities(a: Offer, b: Offer) -> Offer:
    """Per-good transfer for a compatible pair, from ``a``'s perspective.

    Each good moves in the amount the requesting side asked for, which is the
    minimum quantity satisfying both parties.
    """
    out = [0, 0]
    for g in GOODS:
        if a[g] > 0:
            out[g] = a[g]
        elif b[g] > 0:
            out[g] = -b[g]
    return (out[0], out[1])


def dominates(x: Offer, y: Offer, relative_to: Offer) -> bool:
    """True iff ``x`` is a strictly better counterparty offer than ``y``.

    Judged from ``relative_to``'s perspective: ``x`` gives at least as much of
    every good ``relative_to`` requests, requests no more of every good
    ``relative_to`` gives, and is strictly better in at least one good.
    """
    strict = False
    for g in GOODS:
        if relative_to[g] > 0:
            if -x[g] < -y[g]:
                return False
            if -x[g] > -y[g]:
                strict = True
        elif relative_to[g] < 0:
            if x[g] > y[g]:
                return False
            if x[g] < y[g]:
                strict = True
    return strict


# Dense lookup tables over every representable vector in [-3, 3]^2 (49 of
# them), so the per-tick engine does integer indexing instead of arithmetic.
_SPAN = 2 * MAX_OFFER_QTY + 1


def offer_index(offer: Offer) -> int:
    return (offer[0] + MAX_OFFER_QTY) * _SPAN + (offer[1] + MAX_OFFER_QTY)


def _build_tables() -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    n = _SPAN * _SPAN
    vectors = [(a, b) for a in range(-MAX_OFFER_QTY, MAX_OFFER_QTY + 1)
               for b in range(-MAX_OFFER_QTY, MAX_OFFER_QTY + 1)]
    compat = np.zeros((n, n), dtype=bool)
    inverse = np.zeros((n, n), dtype=bool)
    domin = np.zeros((n, n, n), dtype=bool)
    for i, a in enumerate(vectors):
        for j, b in enumerate(vectors):
            compat[i, j] = is_compatible(a, b)
            inverse[i, j] = is_inverse(a, b) and is_inverse(b, a)
            for k, rel in enumerate(vectors):
                domin[i, j, k] = dominates(a, b, rel)
    return compat, inverse, domin


_COMPAT, _INVERSE, _DOMINATES = _build_tables()
# plain nested lists index faster than numpy scalars in the per-tick loops
_COMPAT_L = _COMPAT.tolist()
_INVERSE_L = _INVERSE.tolist()
_DOMINATES_L = _DOMINATES.tolist()


@dataclass
class Participant:
    """One side the matching engine can pair up.

    Players have ``pid >= 0`` and a bounded inventory they trade out of;
    marketplace offers have ``pid < 0``, an unbounded inventory, and an offer
    that survives every exchange.
    """

    pid: int
    x: int
    y: int
    offer: Offer
    inventory: list[int] | None = None  # None = unbounded (marketplace)

    @property
    def is_marketplace(self) -> bool:
        return self.pid < 0


@dataclass(frozen=True)
class ExchangeRecord:
    """One executed exchange: who moved which quantities where."""

    tick: int
    apple_buyer: int
    apple_seller: int
    apple_buyer_pos: tuple[int, int]
    apple_seller_pos: tuple[int, int]
    apples: int
    bananas: int
    via_accept: bool = False

    @property
    def price(self) -> Fraction:
        """Bananas paid per apple, exact."""
        return Fraction(self.bananas, self.apples)


def euclidean_distance(a: tuple[int, int], b: tuple[int, int]) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


def _dist2(a: Participant, b: Participant) -> int:
    return (a.x - b.x) ** 2 + (a.y - b.y) ** 2


def _undominated(cands: list[Participant], rel_idx: int) -> list[Participant]:
    dom = _DOMINATES_L
    keep = []
    idxs = [offer_index(c.offer) for c in cands]
    for i, c in enumerate(cands):
        ci = idxs[i]
        if not any(dom[oj][ci][rel_idx]
                   for j, oj in enumerate(idxs) if j != i):
            keep.append(c)
    return keep


def _candidates(
    me: Participant,
    scene: Sequence[Participant],
    r2: float,
    compat: list,
) -> list[Participant]:
    out = []
    row = compat[offer_index(me.offer)]
    mx, my = me.x, me.y
    me_mkt = me.pid < 0
    for q in scene:
        if q is me:
            continue
        if me_mkt and q.pid < 0:
            continue  # marketplaces only ever face players
        if row[offer_index(q.offer)] and (mx - q.x) ** 2 + (my - q.y) ** 2 <= r2:
            out.append(q)
    return out


def _mutual_set(
    me: Participant,
    scene: Sequence[Participant],
    r2: float,
    compat: list,
    memo: dict,
) -> list[Participant]:
    """me's undominated candidate set, memoized per resolution pass."""
    key = id(me)
    got = memo.get(key)
    if got is None:
        got = _undominated(_candidates(me, scene, r2, compat), offer_index(me.offer))
        memo[key] = got
    return got


def _pick(cands: list[Participant], me: Participant, rng: np.random.Generator) -> Participant:
    best = min(_dist2(me, c) for c in cands)
    nearest = [c for c in cands if _dist2(me, c) == best]
    if len(nearest) == 1:
        return nearest[0]
    nearest.sort(key=lambda c: c.pid)
    return nearest[int(rng.integers(len(nearest)))]


def resolve_exchanges(
    scene: Sequence[Participant],
    trade_radius: float,
    rng: np.random.Generator,
    *,
    inverse_only: bool = False,
    tick: int = 0,
    order: Sequence[int] | None = None,
) -> list[ExchangeRecord]:
    """Run one tick of exchange matching over ``scene``; mutates inventories.

    Players with complete offers initiate in a uniformly random order (or the
    explicit ``order`` of pids, for deterministic tests). Marketplace offers
    never initiate but can be chosen as partners any number of times. Offers
    of both player parties reset to null after a trade.
    """
    compat = _INVERSE_L if inverse_only else _COMPAT_L
    r2 = trade_radius * trade_radius
    initiators = [p for p in scene if not p.is_marketplace and is_complete(p.offer)]
    if order is None:
        initiators = [initiators[i] for i in rng.permutation(len(initiators))]
    else:
        by_pid = {p.pid: p for p in initiators}
        initiators = [by_pid[pid] for pid in order if pid in by_pid]

    records: list[ExchangeRecord] = []
    memo: dict = {}  # valid only while no offer changes; cleared after trades
    for me in initiators:
        if not is_complete(me.offer):
            continue  # already traded earlier this tick
        mutual = []
        for c in _mutual_set(me, scene, r2, compat, memo):
            if any(k is me for k in _mutual_set(c, scene, r2, compat, memo)):
                mutual.append(c)
        if not mutual:
            continue
        partner = _pick(mutual, me, rng)
        records.append(execute_exchange(me, partner, tick))
        memo.clear()
    return records


def execute_exchange(
    me: Participant,
    partner: Participant,
    tick: int,
    *,
    via_accept: bool = False,
) -> ExchangeRecord:
    """Atomically swap the minimum satisfying quantities between two parties."""
    transfer = exchange_quantities(me.offer, partner.offer)
    _apply_transfer(me, transfer)
    _apply_transfer(partner, (-transfer[0], -transfer[1]))
    if transfer[APPLE] > 0:
        buyer, seller = me, partner
        apples, bananas = transfer[APPLE], -transfer[BANANA]
    else:
        buyer, seller = partner, me
        apples, bananas = -transfer[APPLE], transfer[BANANA]
    rec = ExchangeRecord(
        tick=tick,
        apple_buyer=buyer.pid,
        apple_seller=seller.pid,
        apple_buyer_pos=(buyer.x, buyer.y),
        apple_seller_pos=(seller.x, seller.y),
        apples=apples,
        bananas=bananas,
        via_accept=via_accept,
    )
    for side in (me, partner):
        if not side.is_marketplace:
            side.offer = NULL_OFFER
    return rec


def _apply_transfer(p: Participant, delta: Offer) -> None:
    if p.inventory is None:
        return
    for g in GOODS:
        p.inventory[g] += delta[g]
        if p.inventory[g] < 0:
            raise AssertionError(
                f"exchange drove inventory negative: pid={p.pid} good={g}"
            )


def accept_best(
    actor: Participant,
    scene: Sequence[Participant],
    desired_good: int,
    trade_radius: float,
    rng: np.random.Generator,
    tick: int = 0,
) -> ExchangeRecord | None:
    """Immediately take the best nearby offer giving ``desired_good``.

    Among affordable complete offers within the radius that give the desired
    good, picks the one with the highest (given desired)/(requested other)
    ratio, ties broken by distance then uniformly at random. Executes as if
    the actor had posted the exact inverse offer. Returns None when nothing
    qualifies.
    """
    other = BANANA if desired_good == APPLE else APPLE
    r2 = trade_radius * trade_radius
    cands = []
    for q in scene:
        if q is actor:
            continue
        if not is_complete(q.offer):
            continue
        if q.offer[desired_good] >= 0 or q.offer[other] <= 0:
            continue
        if _dist2(actor, q) > r2:
            continue
        if actor.inventory is not None and actor.inventory[other] < q.offer[other]:
            continue  # cannot pay the full request
        cands.append(q)
    if not cands:
        return None
    ratio = lambda q: Fraction(-q.offer[desired_good], q.offer[other])
    best = max(ratio(q) for q in cands)
    cands = [q for q in cands if ratio(q) == best]
    partner = _pick(cands, actor, rng)
    actor.offer = (-partner.offer[0], -partner.offer[1])
    return execute_exchange(actor, partner, tick, via_accept=True)


def affordable(offer: Offer, inventory: Sequence[int]) -> bool:
    """Whether ``inventory`` covers every give component of ``offer``."""
    a, b = offer
    if a < 0 and inventory[0] < -a:
        return False
    if b < 0 and inventory[1] < -b:
        return False
    return True


def validated_offer(offer: Offer, inventory: Sequence[int]) -> Offer:
    """The offer itself if affordable, else the null offer."""
    return offer if affordable(offer, inventory) else NULL_OFFER


def apply_dynamic(offer: Offer, good: int, step: int, inventory: Sequence[int]) -> Offer:
    """Increment/decrement one component of an offer vector, clamped to +/-3.

    A result whose give components exceed the inventory resets to null, like
    any other unaffordable offer.
    """
    delta = list(offer)
    delta[good] = max(-MAX_OFFER_QTY, min(MAX_OFFER_QTY, delta[good] + step))
    return validated_offer((delta[0], delta[1]), inventory)
