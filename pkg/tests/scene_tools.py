"""Build identical trade scenes for the production engine and the oracle."""

from __future__ import annotations

import numpy as np

from fruitmarket.exchange import Participant

from .reference_engine import enumerate_offers, gives

OFFERS = enumerate_offers()


def random_scene(rng: np.random.Generator, max_players=5, box=7, market_prob=0.25):
    """A neutral scene description both implementations can consume.

    Returns a list of dicts: pid, x, y, offer, inventory (None = marketplace).
    Player inventories always cover their give components, sometimes exactly.
    """
    scene = []
    n_markets = 0
    if rng.random() < market_prob and max_players > 1:
        n_markets = int(rng.integers(1, 3))
    n_players = int(rng.integers(1, max_players + 1 - n_markets))
    for pid in range(n_players):
        offer = OFFERS[int(rng.integers(len(OFFERS)))]
        inv = [gives(offer, g) + int(rng.integers(0, 3)) for g in (0, 1)]
        scene.append({
            "pid": pid,
            "x": int(rng.integers(0, box)),
            "y": int(rng.integers(0, box)),
            "offer": offer,
            "inventory": inv,
        })
    if n_markets:
        mx, my = int(rng.integers(0, box)), int(rng.integers(0, box))
        for j in range(n_markets):
            offer = (0, 0)
            while offer == (0, 0):
                offer = OFFERS[int(rng.integers(1, len(OFFERS)))]
            scene.append({
                "pid": -(1 + j), "x": mx, "y": my, "offer": offer, "inventory": None,
            })
    return scene


def to_participants(scene):
    return [
        Participant(
            pid=d["pid"], x=d["x"], y=d["y"], offer=tuple(d["offer"]),
            inventory=None if d["inventory"] is None else list(d["inventory"]),
        )
        for d in scene
    ]


def to_oracle(scene):
    return [
        {
            "pid": d["pid"], "x": d["x"], "y": d["y"], "offer": tuple(d["offer"]),
            "inventory": None if d["inventory"] is None else list(d["inventory"]),
        }
        for d in scene
    ]


def engine_record_tuple(rec):
    return (rec.apple_buyer, rec.apple_seller, rec.apple_buyer_pos,
            rec.apple_seller_pos, rec.apples, rec.bananas)


def oracle_record_tuple(rec):
    return (rec["buyer"], rec["seller"], rec["bpos"], rec["spos"],
            rec["apples"], rec["bananas"])
