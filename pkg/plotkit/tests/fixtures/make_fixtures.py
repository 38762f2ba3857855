"""Regenerate the shipped fixtures from a real simulator run.

Run from the repository root with both packages installed:

    python3 plotkit/tests/fixtures/make_fixtures.py

The outputs are committed; tests never regenerate them.
"""

import json
import pathlib

import numpy as np

from fruitmarket import metrics
from fruitmarket.config import episode_config_to_dict
from fruitmarket.env import Environment, EpisodeConfig, MarketplaceSpec
from fruitmarket.rng import substream
from fruitmarket.world import MapSpec

HERE = pathlib.Path(__file__).parent


def run_episode(cfg, seed, policy_seed):
    env = Environment(cfg, seed=seed)
    env.reset()
    rng = substream(policy_seed, "fixture")
    done = False
    while not done:
        _, _, done = env.step(rng.integers(0, env.num_actions, size=len(env.players)))
    return env


def main():
    # episodes.csv + one full event log, from a marketplace-enabled map so the
    # stackplot fixture has both partner kinds
    cfg = EpisodeConfig(
        map=MapSpec(template="uniform"),
        episode_length=200,
        marketplace=MarketplaceSpec(offers=((-2, 1), (1, -2)), site=0),
    )
    cfg_dict = episode_config_to_dict(cfg)
    rows = []
    for ep in range(30):
        env = run_episode(cfg, seed=100 + ep, policy_seed=ep)
        lines = metrics.episode_log_lines(env, cfg_dict)
        header = json.loads(lines[0])
        events = [json.loads(x) for x in lines[1:-1]]
        summary = metrics.summarize(header, events)
        returns = [env.episodic_return(p.pid) for p in env.players]
        rows.append(metrics.episode_row(ep, env.seed, (ep + 1) * 200.0, summary, returns))
        if ep == 0:
            metrics.write_episode_log(HERE / "events_ep0.jsonl", env, cfg_dict)
    metrics.write_csv(HERE / "episodes.csv", metrics.EPISODE_COLUMNS, rows)

    # sweep.csv via the real aggregator over synthetic constant-metric runs
    runs = []
    for value, price, produced in [
        (0.2, 3.0, 120.0), (0.33, 2.0, 150.0), (0.5, 1.5, 180.0),
        (1.0, 1.0, 240.0), (2.0, 0.6667, 420.0), (3.0, 0.5, 560.0),
        (5.0, 0.3333, 700.0),
    ]:
        ep_rows = [
            {"avg_agent_steps": s, "avg_price": price,
             "apples_produced": produced, "apples_consumed": produced * 0.97,
             "net_apples_traded": produced * 0.8,
             "bananas_produced": 200.0, "bananas_consumed": 195.0,
             "net_bananas_traded": 160.0, "return_mean": 900.0}
            for s in range(1, 41)
        ]
        runs.append(("episode.map.apple_multiplier", value, ep_rows))
    table = metrics.sweep_aggregate(runs, window=0.25)
    metrics.write_csv(HERE / "sweep.csv", metrics.SWEEP_COLUMNS, table)

    # hand-built two-region log: apples cheap on the left, dear on the right
    header = {"schema": 1, "config_hash": "fixture", "seed": 0,
              "width": 8, "height": 4, "roster": [], "config": {}}
    lines = [json.dumps(header, separators=(",", ":"))]
    t = 1
    for y in range(4):
        for _ in range(3):
            lines.append(json.dumps({
                "t": t, "e": "exch", "buyer": 0, "seller": 1,
                "bx": 1, "by": y, "sx": 1, "sy": y, "qa": 3, "qb": 1, "acc": 0,
            }, separators=(",", ":")))
            lines.append(json.dumps({
                "t": t, "e": "exch", "buyer": 2, "seller": 3,
                "bx": 6, "by": y, "sx": 6, "sy": y, "qa": 1, "qb": 3, "acc": 0,
            }, separators=(",", ":")))
            t += 1
    lines.append(json.dumps({"e": "end", "t": t, "inv": [], "ret": []},
                            separators=(",", ":")))
    (HERE / "two_region.jsonl").write_text("\n".join(lines) + "\n")
    print("fixtures written to", HERE)


if __name__ == "__main__":
    main()
