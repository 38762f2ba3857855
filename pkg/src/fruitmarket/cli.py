"""Command-line entry point: run | sweep | replay | bench | dump-map.

Exit codes: 0 ok, 1 configuration error, 2 runtime failure. The default
output root comes from $FRUITMARKET_OUT (falling back to ./runs).
"""

from __future__ import annotations

import argparse
import json
import os
import statistics
import sys
import time
from pathlib import Path

import numpy as np

from . import metrics, world
from .config import (
    ConfigError,
    ExperimentConfig,
    apply_override,
    experiment_from_dict,
    experiment_to_dict,
    load_experiment,
)
from .env import Environment, EpisodeConfig
from .rng import substream
from .world import MapSpec

OUT_ENV_VAR = "FRUITMARKET_OUT"


def _out_root(cfg: ExperimentConfig | None = None) -> Path:
    if cfg is not None and cfg.out_root:
        return Path(cfg.out_root)
    return Path(os.environ.get(OUT_ENV_VAR, "runs"))


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 1
    except FileNotFoundError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 1
    except Exception as err:  # noqa: BLE001 - the CLI boundary reports and exits
        print(f"error: {type(err).__name__}: {err}", file=sys.stderr)
        return 2


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fruitmarket")
    sub = p.add_subparsers(required=True)

    run = sub.add_parser("run", help="train one population from a config file")
    run.add_argument("config", type=Path)
    run.add_argument("--seed", type=int, default=None, help="override the config seed")
    run.add_argument("--set", action="append", default=[], metavar="PATH=VALUE",
                     help="override a dotted config path")
    run.add_argument("--out", type=Path, default=None, help="run directory")
    run.add_argument("--resume", action="store_true")
    run.set_defaults(fn=cmd_run)

    sweep = sub.add_parser("sweep", help="run one training per sweep value, then aggregate")
    sweep.add_argument("config", type=Path)
    sweep.add_argument("--set", action="append", default=[], metavar="PATH=VALUE")
    sweep.add_argument("--out", type=Path, default=None, help="sweep directory")
    sweep.add_argument("--window", type=float, default=0.25,
                       help="trailing fraction for the aggregate table")
    sweep.set_defaults(fn=cmd_sweep)

    replay = sub.add_parser("replay", help="re-simulate a logged episode and diff")
    replay.add_argument("log", type=Path)
    replay.set_defaults(fn=cmd_replay)

    bench = sub.add_parser("bench", help="environment throughput measurement")
    bench.add_argument("--scenario", choices=("tiny", "default", "regions"), default="tiny")
    bench.add_argument("--policy", choices=("random", "trader"), default="random")
    bench.add_argument("--ticks", type=int, default=2000)
    bench.add_argument("--trials", type=int, default=5)
    bench.add_argument("--baseline", type=Path, default=None,
                       help="record/check a throughput baseline (fails 20%% below)")
    bench.set_defaults(fn=cmd_bench)

    dump = sub.add_parser("dump-map", help="print one generated map as characters")
    dump.add_argument("--template", default="uniform")
    dump.add_argument("--seed", type=int, default=0)
    dump.add_argument("--apple-multiplier", type=float, default=1.0)
    dump.add_argument("--banana-multiplier", type=float, default=1.0)
    dump.add_argument("--neutral-penalty", type=float, default=1.0)
    dump.set_defaults(fn=cmd_dump_map)
    return p


# -- run / sweep -------------------------------------------------------------


def cmd_run(args) -> int:
    cfg = load_experiment(args.config, args.set)
    if args.seed is not None:
        cfg.seed = args.seed
    if cfg.sweep is not None:
        print("config error: config has a sweep block; use the sweep command",
              file=sys.stderr)
        return 1
    out = args.out or _out_root(cfg) / f"run_{args.config.stem}_seed{cfg.seed}"
    from .trainer import run_training

    run_training(cfg, out, resume=args.resume)
    print(out)
    return 0


def cmd_sweep(args) -> int:
    cfg = load_experiment(args.config, args.set)
    if cfg.sweep is None:
        print("config error: sweep command needs a sweep block", file=sys.stderr)
        return 1
    base_doc = experiment_to_dict(cfg)
    out = args.out or _out_root(cfg) / f"sweep_{args.config.stem}"
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    from .trainer import run_training

    runs = []
    for value in cfg.sweep.values:
        doc = json.loads(json.dumps(base_doc))
        doc["sweep"] = None
        apply_override(doc, f"{cfg.sweep.path}={value}")
        run_cfg = experiment_from_dict(doc)
        run_dir = out / f"{cfg.sweep.path.split('.')[-1]}_{value}"
        if run_dir.exists():
            raise ConfigError(f"sweep output {run_dir} already exists")
        run_training(run_cfg, run_dir)
        rows = metrics.read_csv_rows(run_dir / "episodes.csv")
        runs.append((cfg.sweep.path, value, rows))
        print(run_dir)
    table = metrics.sweep_aggregate(runs, window=args.window)
    metrics.write_csv(out / "sweep.csv", metrics.SWEEP_COLUMNS, table)
    print(out / "sweep.csv")
    return 0


# -- replay --------------------------------------------------------------------


def cmd_replay(args) -> int:
    report = metrics.replay_episode(args.log)
    print(report.describe())
    return 0 if report.exact else 2


# -- bench ---------------------------------------------------------------------


def bench_scenario(name: str) -> EpisodeConfig:
    if name == "tiny":
        return EpisodeConfig(map=MapSpec(template="tiny"), episode_length=10 ** 9)
    if name == "default":
        return EpisodeConfig(map=MapSpec(template="uniform"), episode_length=10 ** 9)
    if name == "regions":
        return EpisodeConfig(map=MapSpec(template="walls"), episode_length=10 ** 9)
    raise ConfigError(f"unknown scenario {name!r}")


def run_bench(scenario: str, policy: str, ticks: int, trials: int, seed: int = 0) -> dict:
    """Median steps/sec over trials; also reports matching throughput."""
    from .agents.scripted import make_scripted
    from .exchange import APPLE

    cfg = bench_scenario(scenario)
    rates = []
    exchanges = 0
    player_ticks = 0
    for trial in range(trials):
        env = Environment(cfg, seed=seed + trial)
        obs = env.reset()
        n = len(env.players)
        if policy == "random":
            policies = [
                make_scripted("random", cfg.mechanism, substream(seed, "bench", trial, i))
                for i in range(n)
            ]
        else:
            policies = [
                make_scripted("trader", cfg.mechanism, substream(seed, "bench", trial, i),
                              offer=(-1, 1) if env.players[i].role.role_id == 0 else (1, -1))
                for i in range(n)
            ]
        t0 = time.perf_counter()
        for _ in range(ticks):
            obs, _, _ = env.step([p.act(o) for p, o in zip(policies, obs)])
        dt = time.perf_counter() - t0
        rates.append(ticks * n / dt)
        exchanges += len(env.exchange_records)
        player_ticks += ticks * n
    return {
        "scenario": scenario,
        "policy": policy,
        "players": n,
        "ticks_per_trial": ticks,
        "trials": trials,
        "player_ticks_per_sec": statistics.median(rates),
        "exchanges_per_1k_player_ticks": 1000.0 * exchanges / player_ticks,
    }


def cmd_bench(args) -> int:
    result = run_bench(args.scenario, args.policy, args.ticks, args.trials)
    print(json.dumps(result, indent=1))
    if args.baseline is not None:
        key = f"{args.scenario}/{args.policy}"
        baselines = {}
        if args.baseline.exists():
            baselines = json.loads(args.baseline.read_text())
        if key in baselines:
            floor = 0.8 * baselines[key]
            if result["player_ticks_per_sec"] < floor:
                print(
                    f"regression: {result['player_ticks_per_sec']:.0f} ticks/s "
                    f"under baseline floor {floor:.0f}", file=sys.stderr,
                )
                return 2
        else:
            baselines[key] = result["player_ticks_per_sec"]
            args.baseline.write_text(json.dumps(baselines, indent=1))
            print(f"recorded baseline for {key}")
    return 0


# -- dump-map --------------------------------------------------------------------


def cmd_dump_map(args) -> int:
    spec = MapSpec(
        template=args.template,
        apple_multiplier=args.apple_multiplier,
        banana_multiplier=args.banana_multiplier,
        neutral_penalty=args.neutral_penalty,
    )
    try:
        grid = world.generate_map(spec, substream(args.seed, "map"))
    except ValueError as err:
        raise ConfigError(str(err)) from err
    print(world.dump_grid(grid))
    return 0


if __name__ == "__main__":
    sys.exit(main())
