"""Slow reference implementation of the trade rules, written from the prose.

Everything here is derived by enumeration rather than sign arithmetic so it
can disagree with the production engine if either mis-encodes a rule:
compatibility is decided by searching for a feasible transfer, the swap
amounts by picking the minimal satisfying transfer, and domination by
comparing give/request decompositions good by good.

Scenes are plain dicts: {"pid": int, "x": int, "y": int, "offer": (a, b),
"inventory": [a, b] or None}. Marketplace entries have pid < 0, inventory
None, and keep their offer after trading.
"""

from __future__ import annotations

import itertools
import math
from functools import lru_cache

GOODS = (0, 1)
MAXQ = 3


def gives(offer, g):
    return max(0, -offer[g])


def requests(offer, g):
    return max(0, offer[g])


def complete(offer):
    return any(gives(offer, g) > 0 for g in GOODS) and any(
        requests(offer, g) > 0 for g in GOODS
    )


def _satisfies(offer, transfer):
    """Would this party sign off on `transfer` (from its own perspective)?"""
    for g in GOODS:
        received = max(0, transfer[g])
        given = max(0, -transfer[g])
        if received < requests(offer, g) or given > gives(offer, g):
            return False
    return True


@lru_cache(maxsize=None)
def feasible_transfers(a, b):
    """All transfers (from a's perspective) both sides would sign off on."""
    out = []
    for ta in range(-MAXQ, MAXQ + 1):
        for tb in range(-MAXQ, MAXQ + 1):
            t = (ta, tb)
            mirror = (-ta, -tb)
            if _satisfies(a, t) and _satisfies(b, mirror):
                out.append(t)
    return tuple(out)


@lru_cache(maxsize=None)
def compatible(a, b):
    if not (complete(a) and complete(b)):
        return False
    return len(feasible_transfers(a, b)) > 0


def exact_inverse(a, b):
    return complete(a) and complete(b) and all(a[g] == -b[g] for g in GOODS)


@lru_cache(maxsize=None)
def swap_amounts(a, b):
    """The minimum-volume feasible transfer; unique for compatible pairs."""
    options = feasible_transfers(a, b)
    assert options, "swap_amounts called on an incompatible pair"
    best = min(options, key=lambda t: sum(abs(x) for x in t))
    ties = [t for t in options if sum(abs(x) for x in t) == sum(abs(x) for x in best)]
    assert len(ties) == 1, f"minimal transfer not unique for {a} vs {b}: {ties}"
    return best


@lru_cache(maxsize=None)
def more_generous(x, y, rel):
    """x beats y as a counterparty for rel: >= everywhere, > somewhere."""
    at_least = True
    strictly = False
    for g in GOODS:
        if requests(rel, g) > 0:
            if gives(x, g) < gives(y, g):
                at_least = False
            if gives(x, g) > gives(y, g):
                strictly = True
        if gives(rel, g) > 0:
            if requests(x, g) > requests(y, g):
                at_least = False
            if requests(x, g) < requests(y, g):
                strictly = True
    return at_least and strictly


def _within(a, b, radius):
    return math.hypot(a["x"] - b["x"], a["y"] - b["y"]) <= radius


def _match_test(inverse_only):
    return exact_inverse if inverse_only else compatible


def potential_partners(me, scene, radius, inverse_only):
    match = _match_test(inverse_only)
    out = []
    for other in scene:
        if other is me:
            continue
        if me["pid"] < 0 and other["pid"] < 0:
            continue
        if not complete(other["offer"]):
            continue
        if match(me["offer"], other["offer"]) and _within(me, other, radius):
            out.append(other)
    return out


def most_generous(me, scene, radius, inverse_only):
    partners = potential_partners(me, scene, radius, inverse_only)
    return [
        p for p in partners
        if not any(
            more_generous(q["offer"], p["offer"], me["offer"])
            for q in partners if q is not p
        )
    ]


def resolve(scene, radius, rng, inverse_only=False, order=None):
    """The per-tick exchange procedure, executed naively.

    Players with live offers act in `order` (or a random order); each builds
    its undominated partner list, keeps partners whose own undominated lists
    include it back, picks the nearest (random among exact ties, consuming
    one draw only when needed), swaps the minimal amounts, and both players'
    offers reset.
    """
    records = []
    actors = [p for p in scene if p["pid"] >= 0 and complete(p["offer"])]
    if order is None:
        actors = [actors[i] for i in rng.permutation(len(actors))]
    else:
        index = {p["pid"]: p for p in actors}
        actors = [index[pid] for pid in order if pid in index]
    for me in actors:
        if not complete(me["offer"]):
            continue
        keep = []
        for partner in most_generous(me, scene, radius, inverse_only):
            theirs = most_generous(partner, scene, radius, inverse_only)
            if any(q is me for q in theirs):
                keep.append(partner)
        if not keep:
            continue
        dist = lambda q: math.hypot(me["x"] - q["x"], me["y"] - q["y"])
        closest = min(dist(q) for q in keep)
        finalists = sorted((q for q in keep if dist(q) == closest),
                           key=lambda q: q["pid"])
        chosen = finalists[0] if len(finalists) == 1 else \
            finalists[int(rng.integers(len(finalists)))]
        transfer = swap_amounts(me["offer"], chosen["offer"])
        for g in GOODS:
            if me["inventory"] is not None:
                me["inventory"][g] += transfer[g]
                assert me["inventory"][g] >= 0
            if chosen["inventory"] is not None:
                chosen["inventory"][g] -= transfer[g]
                assert chosen["inventory"][g] >= 0
        if transfer[0] > 0:
            buyer, seller = me, chosen
            qa, qb = transfer[0], -transfer[1]
        else:
            buyer, seller = chosen, me
            qa, qb = -transfer[0], transfer[1]
        records.append({
            "buyer": buyer["pid"], "seller": seller["pid"],
            "bpos": (buyer["x"], buyer["y"]), "spos": (seller["x"], seller["y"]),
            "apples": qa, "bananas": qb,
        })
        for side in (me, chosen):
            if side["pid"] >= 0:
                side["offer"] = (0, 0)
    return records


def enumerate_offers():
    """The 18 complete single-action offers plus the null offer."""
    out = [(0, 0)]
    for qty_give in (1, 2, 3):
        for qty_want in (1, 2, 3):
            out.append((-qty_give, qty_want))
            out.append((qty_want, -qty_give))
    return out
