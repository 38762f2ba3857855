"""Deterministic gridworld barter economy with a desk-scale training harness."""

from .env import Environment, EpisodeConfig, Observation, action_table, decode_action
from .exchange import (
    ExchangeRecord,
    Offer,
    Participant,
    accept_best,
    dominates,
    exchange_quantities,
    is_compatible,
    resolve_exchanges,
)
from .world import MapSpec, MapState, generate_map

__version__ = "0.1.0"

__all__ = [
    "Environment",
    "EpisodeConfig",
    "Observation",
    "action_table",
    "decode_action",
    "ExchangeRecord",
    "Offer",
    "Participant",
    "accept_best",
    "dominates",
    "exchange_quantities",
    "is_compatible",
    "resolve_exchanges",
    "MapSpec",
    "MapState",
    "generate_map",
]
