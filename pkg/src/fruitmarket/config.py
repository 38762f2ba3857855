"""Experiment configuration: one YAML document drives every experiment.

Loading is strict: unknown keys are rejected with their dotted path, enum
fields are checked against the known values, and CLI overrides address
fields by dotted path. The resolved config round-trips through to_dict /
from_dict unchanged, which is what run directories snapshot.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields
from typing import Any

import yaml

from . import world
from .economy import APPLE_FARMER, BANANA_FARMER
from .env import Constants, EpisodeConfig, MarketplaceSpec, MECHANISMS, RosterEntry
from .exchange import APPLE, BANANA


class ConfigError(ValueError):
    """A configuration document failed validation; message names the field."""


_MULT_KEYS = {
    "af_apple": (APPLE_FARMER, APPLE),
    "af_banana": (APPLE_FARMER, BANANA),
    "bf_apple": (BANANA_FARMER, APPLE),
    "bf_banana": (BANANA_FARMER, BANANA),
}
_ROLE_TOKENS = {"apple_farmer": APPLE_FARMER, "banana_farmer": BANANA_FARMER,
                "af": APPLE_FARMER, "bf": BANANA_FARMER}


@dataclass
class NetConfig:
    conv_channels: int = 24
    dense: int = 256
    lstm: int = 128
    head: int = 64


@dataclass
class LearnerConfig:
    algorithm: str = "vmpo"          # "vmpo" | "a2c"
    discount: float = 0.99
    n_step: int = 20
    learning_rate: float = 1e-4
    target_period: int = 10
    temperature: float = 0.1
    entropy_coef: float = 0.003
    value_coef: float = 0.5
    grad_clip: float = 10.0
    net: NetConfig = field(default_factory=NetConfig)

    def validate(self) -> None:
        if self.algorithm not in ("vmpo", "a2c"):
            raise ConfigError(f"learner.algorithm: unknown value {self.algorithm!r}")
        if not 0 <= self.discount <= 1:
            raise ConfigError("learner.discount must lie in [0, 1]")
        if self.temperature <= 0:
            raise ConfigError("learner.temperature must be positive")
        if self.n_step < 1:
            raise ConfigError("learner.n_step must be at least 1")


@dataclass
class TrainRun:
    target_steps: float = 2e6
    workers: int = 4
    agents: int = 16
    checkpoint_every: int = 500      # episodes between checkpoints
    log_events: bool = False         # write full per-tick event logs per episode

    def validate(self) -> None:
        if self.target_steps < 0:
            raise ConfigError("train.target_steps must be non-negative")
        if self.workers < 1:
            raise ConfigError("train.workers must be at least 1")
        if self.agents < 2:
            raise ConfigError("train.agents must be at least 2")


@dataclass
class SweepSpec:
    path: str
    values: list

    def validate(self) -> None:
        if not self.values:
            raise ConfigError("sweep.values must not be empty")


@dataclass
class ExperimentConfig:
    seed: int = 0
    out_root: str | None = None
    episode: EpisodeConfig = field(default_factory=EpisodeConfig)
    learner: LearnerConfig = field(default_factory=LearnerConfig)
    train: TrainRun = field(default_factory=TrainRun)
    sweep: SweepSpec | None = None

    def validate(self) -> None:
        self.episode.validate()
        self.learner.validate()
        self.train.validate()
        if self.sweep is not None:
            self.sweep.validate()


# -- episode config <-> plain dict -------------------------------------------


def episode_config_to_dict(cfg: EpisodeConfig) -> dict:
    mults = {k: cfg.reward_multipliers.get(v, 1.0) for k, v in _MULT_KEYS.items()}
    m = cfg.marketplace
    return {
        "map": {
            "template": cfg.map.template,
            "apple_multiplier": cfg.map.apple_multiplier,
            "banana_multiplier": cfg.map.banana_multiplier,
            "neutral_penalty": cfg.map.neutral_penalty,
            "base_spawn_prob": cfg.map.base_spawn_prob,
            "custom": cfg.map.custom,
        },
        "mechanism": cfg.mechanism,
        "constants": asdict(cfg.constants),
        "reward_multipliers": mults,
        "episode_length": cfg.episode_length,
        "marketplace": None if m is None else {
            "offers": [list(o) for o in m.offers],
            "site": m.site,
            "position": None if m.position is None else list(m.position),
        },
        "hunger_enabled": cfg.hunger_enabled,
        "restricted_production": cfg.restricted_production,
        "roster": None if cfg.roster is None else [
            {"role": e.role, "region": e.region, "agent": e.agent} for e in cfg.roster
        ],
    }


def episode_config_from_dict(d: dict) -> EpisodeConfig:
    d = _checked_keys(d, (
        "map", "mechanism", "constants", "reward_multipliers", "episode_length",
        "marketplace", "hunger_enabled", "restricted_production", "roster",
    ), "episode")
    map_d = _checked_keys(d.get("map", {}), (
        "template", "apple_multiplier", "banana_multiplier", "neutral_penalty",
        "base_spawn_prob", "custom",
    ), "episode.map")
    spec = world.MapSpec(
        template=map_d.get("template", "uniform"),
        apple_multiplier=float(map_d.get("apple_multiplier", 1.0)),
        banana_multiplier=float(map_d.get("banana_multiplier", 1.0)),
        neutral_penalty=float(map_d.get("neutral_penalty", 1.0)),
        base_spawn_prob=float(map_d.get("base_spawn_prob", 0.15)),
        custom=map_d.get("custom"),
    )
    if spec.template != "custom" and spec.template not in world.template_names():
        raise ConfigError(
            f"episode.map.template: unknown value {spec.template!r}; "
            f"expected one of {world.template_names() + ['custom']}"
        )
    consts_d = _checked_keys(
        d.get("constants", {}), tuple(f.name for f in fields(Constants)), "episode.constants"
    )
    constants = Constants(**{k: type(getattr(Constants(), k))(v) for k, v in consts_d.items()})

    mults: dict[tuple[int, int], float] = {}
    for key, val in _checked_keys(
        d.get("reward_multipliers", {}), tuple(_MULT_KEYS), "episode.reward_multipliers"
    ).items():
        mults[_MULT_KEYS[key]] = float(val)

    market = d.get("marketplace")
    mspec = None
    if market is not None:
        market = _checked_keys(market, ("offers", "site", "position"), "episode.marketplace")
        offers = tuple(tuple(int(x) for x in o) for o in market.get("offers", ()))
        if not offers:
            raise ConfigError("episode.marketplace.offers must not be empty")
        pos = market.get("position")
        mspec = MarketplaceSpec(
            offers=offers,
            site=int(market.get("site", 0)),
            position=None if pos is None else (int(pos[0]), int(pos[1])),
        )

    roster = d.get("roster")
    entries = None
    if roster is not None:
        entries = []
        for i, e in enumerate(roster):
            e = _checked_keys(e, ("role", "region", "agent"), f"episode.roster[{i}]")
            role = e.get("role")
            if isinstance(role, str):
                if role not in _ROLE_TOKENS:
                    raise ConfigError(f"episode.roster[{i}].role: unknown value {role!r}")
                role = _ROLE_TOKENS[role]
            entries.append(RosterEntry(role=int(role), region=e.get("region"),
                                       agent=e.get("agent")))

    mechanism = d.get("mechanism", "standard")
    if mechanism not in MECHANISMS:
        raise ConfigError(
            f"episode.mechanism: unknown value {mechanism!r}; expected one of {MECHANISMS}"
        )
    return EpisodeConfig(
        map=spec,
        mechanism=mechanism,
        constants=constants,
        reward_multipliers=mults,
        episode_length=int(d.get("episode_length", 1000)),
        marketplace=mspec,
        hunger_enabled=bool(d.get("hunger_enabled", True)),
        restricted_production=bool(d.get("restricted_production", False)),
        roster=entries,
    )


# -- experiment config --------------------------------------------------------


def experiment_to_dict(cfg: ExperimentConfig) -> dict:
    return {
        "seed": cfg.seed,
        "out_root": cfg.out_root,
        "episode": episode_config_to_dict(cfg.episode),
        "learner": {**asdict(cfg.learner), "net": asdict(cfg.learner.net)},
        "train": asdict(cfg.train),
        "sweep": None if cfg.sweep is None else {
            "path": cfg.sweep.path, "values": list(cfg.sweep.values)
        },
    }


def experiment_from_dict(d: dict) -> ExperimentConfig:
    d = _checked_keys(d, ("seed", "out_root", "episode", "learner", "train", "sweep"),
                      "(top level)")
    learner_d = _checked_keys(
        d.get("learner", {}),
        tuple(f.name for f in fields(LearnerConfig)), "learner",
    )
    net_d = _checked_keys(
        learner_d.pop("net", {}), tuple(f.name for f in fields(NetConfig)), "learner.net"
    )
    learner = LearnerConfig(
        **_coerced(learner_d, LearnerConfig(), "learner"),
        net=NetConfig(**{k: int(v) for k, v in net_d.items()}),
    )
    train_d = _coerced(
        _checked_keys(d.get("train", {}), tuple(f.name for f in fields(TrainRun)), "train"),
        TrainRun(), "train",
    )
    sweep = d.get("sweep")
    sweep_spec = None
    if sweep is not None:
        sweep = _checked_keys(sweep, ("path", "values"), "sweep")
        if "path" not in sweep or "values" not in sweep:
            raise ConfigError("sweep needs both path and values")
        sweep_spec = SweepSpec(path=str(sweep["path"]), values=list(sweep["values"]))
    cfg = ExperimentConfig(
        seed=int(d.get("seed", 0)),
        out_root=d.get("out_root"),
        episode=episode_config_from_dict(d.get("episode", {})),
        learner=learner,
        train=TrainRun(**train_d),
        sweep=sweep_spec,
    )
    try:
        cfg.validate()
    except ConfigError:
        raise
    except ValueError as err:
        raise ConfigError(str(err)) from err
    return cfg


def _coerced(d: dict, defaults, where: str) -> dict:
    """Coerce scalar values to the field's default type (YAML leaves 1e-4 a str)."""
    out = {}
    for k, v in d.items():
        target = type(getattr(defaults, k))
        if target in (int, float, bool, str) and not isinstance(v, dict):
            try:
                out[k] = target(v)
            except (TypeError, ValueError):
                raise ConfigError(f"{where}.{k}: cannot read {v!r} as {target.__name__}")
        else:
            out[k] = v
    return out


def _checked_keys(d: Any, allowed: tuple[str, ...], where: str) -> dict:
    if d is None:
        return {}
    if not isinstance(d, dict):
        raise ConfigError(f"{where}: expected a mapping, got {type(d).__name__}")
    for k in d:
        if k not in allowed:
            raise ConfigError(f"{where}.{k}: unknown key (allowed: {', '.join(allowed)})")
    return dict(d)


def apply_override(doc: dict, dotted: str) -> None:
    """Apply one ``a.b.c=value`` override onto a raw config document."""
    if "=" not in dotted:
        raise ConfigError(f"override {dotted!r} must look like path.to.field=value")
    path, raw = dotted.split("=", 1)
    keys = path.strip().split(".")
    value = yaml.safe_load(raw)
    node = doc
    for k in keys[:-1]:
        nxt = node.get(k)
        if nxt is None:
            nxt = node[k] = {}
        if not isinstance(nxt, dict):
            raise ConfigError(f"override {dotted!r}: {k} is not a mapping")
        node = nxt
    node[keys[-1]] = value


def load_experiment(path, overrides: list[str] | None = None) -> ExperimentConfig:
    with open(path) as f:
        doc = yaml.safe_load(f) or {}
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: config document must be a mapping")
    for ov in overrides or []:
        apply_override(doc, ov)
    return experiment_from_dict(doc)


def save_experiment(path, cfg: ExperimentConfig) -> None:
    with open(path, "w") as f:
        yaml.safe_dump(experiment_to_dict(cfg), f, sort_keys=True)
