"""Population training: roster sampling, interleaved episodes, experience routing.

A population of independent learners (fixed role, and fixed region on region
maps) is larger than one episode's cast; every episode samples its cast
uniformly without replacement within each role (or role-region) group.

Worker slots are environment instances stepped round-robin in one process,
so runs are bit-deterministic for a fixed seed; each finished episode routes
every player's trajectory to exactly the learner that acted it.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .agents.learning import Learner, Trajectory
from .agents.nets import load_checkpoint, save_checkpoint
from .config import ExperimentConfig, episode_config_to_dict, experiment_to_dict
from .env import Environment, EpisodeConfig, RosterEntry
from . import metrics
from .rng import substream


@dataclass
class Population:
    """Learner pool with enough agents of each role-region group to fill casts."""

    agents: list[Learner]
    composition: list[RosterEntry]   # one episode's cast shape

    @classmethod
    def build(cls, composition: list[RosterEntry], num_agents: int,
              num_actions: int, nonvisual_size: int, learner_cfg, master_seed: int
              ) -> "Population":
        slots = len(composition)
        groups = _groups(composition)
        agents: list[Learner] = []
        for (role, region), count in groups.items():
            pool = num_agents * count
            if pool % slots != 0:
                raise ValueError(
                    f"train.agents={num_agents} cannot split evenly over the "
                    f"{slots}-player cast ({count} slots for role {role}, region {region})"
                )
            pool //= slots
            if pool < count:
                raise ValueError(
                    f"need at least {count} agents for role {role} region {region}, "
                    f"got {pool}"
                )
            for _ in range(pool):
                aid = len(agents)
                agents.append(Learner(
                    aid, role, num_actions, nonvisual_size, learner_cfg,
                    seed=int(substream(master_seed, "agent", aid).integers(2 ** 62)),
                    region=region,
                ))
        return cls(agents=agents, composition=composition)

    def sample_roster(self, rng: np.random.Generator) -> list[RosterEntry]:
        """Fill the cast: uniform without replacement within each group."""
        picks: list[int | None] = [None] * len(self.composition)
        for (role, region), count in _groups(self.composition).items():
            pool = [a.agent_id for a in self.agents
                    if a.role == role and a.region == region]
            if len(pool) < count:
                raise ValueError(
                    f"population has {len(pool)} agents for role {role} "
                    f"region {region}, episode needs {count}"
                )
            chosen = rng.choice(len(pool), size=count, replace=False)
            slots = [i for i, e in enumerate(self.composition)
                     if e.role == role and e.region == region]
            for slot, c in zip(slots, chosen):
                picks[slot] = pool[int(c)]
        return [replace(e, agent=picks[i]) for i, e in enumerate(self.composition)]


def _groups(composition: list[RosterEntry]) -> dict[tuple[int, int | None], int]:
    out: dict[tuple[int, int | None], int] = {}
    for e in composition:
        key = (e.role, e.region)
        out[key] = out.get(key, 0) + 1
    return out


class _Slot:
    """One worker: an environment running one episode at a time."""

    def __init__(self, wid: int):
        self.wid = wid
        self.env: Environment | None = None
        self.episode: int = -1
        self.obs = None
        self.roster: list[RosterEntry] = []
        self.states: list = []
        self.rngs: list[np.random.Generator] = []
        self.buf: list[dict] = []
        self.versions: list[int] = []


def run_training(cfg: ExperimentConfig, out_dir, resume: bool = False) -> Path:
    """Train a population per the experiment config; returns the run directory."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "checkpoints").mkdir(exist_ok=True)
    if cfg.train.log_events:
        (out / "events").mkdir(exist_ok=True)
    from .config import save_experiment

    save_experiment(out / "config.yaml", cfg)

    probe = Environment(cfg.episode, seed=cfg.seed)
    composition = (cfg.episode.roster if cfg.episode.roster is not None
                   else probe.default_roster())
    n_players = len(composition)
    nonvisual_size = 7 + 2 * n_players
    pop = Population.build(
        composition, cfg.train.agents, probe.num_actions, nonvisual_size,
        cfg.learner, cfg.seed,
    )

    episode_counter = 0
    total_player_ticks = 0
    status = "running"
    if resume and (out / "run.json").exists():
        state = json.loads((out / "run.json").read_text())
        episode_counter = state["episodes"]
        total_player_ticks = state["total_player_ticks"]
        for agent in pop.agents:
            path = out / "checkpoints" / f"agent_{agent.agent_id:02d}.npz"
            if path.exists():
                meta = load_checkpoint(path, agent.net, agent.opt)
                agent.target_net.load_state_dict(agent.net.state_dict())
                agent.version = meta.get("version", 0)
                agent.updates = meta.get("updates", 0)
                agent.norm.mean = meta.get("norm_mean", 0.0)
                agent.norm.sq = meta.get("norm_sq", 1.0)
                agent.norm._updates = meta.get("norm_updates", 0)

    def avg_agent_steps() -> float:
        return total_player_ticks / len(pop.agents)

    def checkpoint() -> None:
        for agent in pop.agents:
            save_checkpoint(
                out / "checkpoints" / f"agent_{agent.agent_id:02d}.npz",
                agent.net, agent.opt,
                meta={
                    "agent": agent.agent_id, "role": agent.role,
                    "region": agent.region,
                    "version": agent.version, "updates": agent.updates,
                    "norm_mean": agent.norm.mean, "norm_sq": agent.norm.sq,
                    "norm_updates": agent.norm._updates,
                    "avg_agent_steps": avg_agent_steps(),
                },
            )

    checkpoint()
    csv_path = out / "episodes.csv"
    new_csv = not (resume and csv_path.exists())
    csv_f = open(csv_path, "w" if new_csv else "a", newline="")
    if new_csv:
        csv_f.write(",".join(metrics.EPISODE_COLUMNS) + "\n")
    jsonl_f = open(out / "episodes.jsonl", "w" if new_csv else "a")

    slots = [_Slot(w) for w in range(cfg.train.workers)]
    episode_cfg_dict = episode_config_to_dict(cfg.episode)

    def start_episode(slot: _Slot) -> None:
        nonlocal episode_counter
        idx = episode_counter
        episode_counter += 1
        roster = pop.sample_roster(substream(cfg.seed, "roster", idx))
        ep_cfg = replace(cfg.episode, roster=roster)
        seed = int(substream(cfg.seed, "episode", idx).integers(2 ** 62))
        slot.env = Environment(ep_cfg, seed=seed)
        slot.episode = idx
        slot.roster = roster
        slot.obs = slot.env.reset()
        slot.states = [pop.agents[e.agent].initial_state() for e in roster]
        slot.rngs = [substream(cfg.seed, "policy", idx, pid)
                     for pid in range(len(roster))]
        slot.versions = [pop.agents[e.agent].version for e in roster]
        slot.buf = [
            {"vision": [], "nonvisual": [], "actions": [], "log_probs": [], "rewards": []}
            for _ in roster
        ]

    def finish_episode(slot: _Slot) -> None:
        nonlocal total_player_ticks
        env = slot.env
        total_player_ticks += env.tick * len(env.players)
        returns = [env.episodic_return(p.pid) for p in env.players]
        for pid, entry in enumerate(slot.roster):
            b = slot.buf[pid]
            traj = Trajectory(
                vision=np.stack(b["vision"]),
                nonvisual=np.stack(b["nonvisual"]),
                actions=np.asarray(b["actions"], dtype=np.int64),
                log_probs=np.asarray(b["log_probs"], dtype=np.float32),
                rewards=np.asarray(b["rewards"], dtype=np.float64),
                terminal=True,
                agent_id=entry.agent,
                version=slot.versions[pid],
            )
            assert traj.agent_id == entry.agent
            pop.agents[entry.agent].update(traj)
        header = {
            "schema": metrics.SCHEMA_VERSION,
            "config_hash": metrics.config_hash(episode_cfg_dict),
            "seed": env.seed,
            "roster": [{"role": e.role, "region": e.region, "agent": e.agent}
                       for e in slot.roster],
            "config": {**episode_cfg_dict,
                       "roster": [{"role": e.role, "region": e.region, "agent": e.agent}
                                  for e in slot.roster]},
        }
        events = [metrics.event_to_dict(ev) for ev in env.events]
        summary = metrics.summarize(header, events)
        row = metrics.episode_row(
            slot.episode, env.seed, avg_agent_steps(), summary, returns)
        csv_f.write(",".join(str(x) for x in row) + "\n")
        csv_f.flush()
        jsonl_f.write(json.dumps({
            "episode": slot.episode, "seed": env.seed,
            "agents": [e.agent for e in slot.roster],
            "avg_agent_steps": avg_agent_steps(),
            "returns": returns,
            "exchanges": summary.exchange_count,
            "avg_price": summary.avg_price,
        }, separators=(",", ":")) + "\n")
        jsonl_f.flush()
        if cfg.train.log_events:
            metrics.write_episode_log(
                out / "events" / f"ep_{slot.episode:06d}.jsonl", env,
                header["config"],
            )
        if cfg.train.checkpoint_every and (slot.episode + 1) % cfg.train.checkpoint_every == 0:
            checkpoint()

    t0 = time.time()
    try:
        if cfg.train.target_steps > 0:
            for slot in slots:
                if avg_agent_steps() < cfg.train.target_steps:
                    start_episode(slot)
            while any(s.env is not None for s in slots):
                for slot in slots:
                    if slot.env is None:
                        continue
                    _step_slot(slot, pop)
                    if slot.env.tick >= slot.env.config.episode_length:
                        finish_episode(slot)
                        if avg_agent_steps() < cfg.train.target_steps:
                            start_episode(slot)
                        else:
                            slot.env = None
        status = "done"
    except BaseException:
        status = "failed"
        raise
    finally:
        checkpoint()
        csv_f.close()
        jsonl_f.close()
        (out / "run.json").write_text(json.dumps({
            "status": status,
            "episodes": episode_counter,
            "total_player_ticks": total_player_ticks,
            "avg_agent_steps": avg_agent_steps(),
            "population": len(pop.agents),
            "wall_seconds": round(time.time() - t0, 3),
        }, indent=1))
    return out


def _step_slot(slot: _Slot, pop: Population) -> None:
    env = slot.env
    actions = []
    feats = []
    for pid, entry in enumerate(slot.roster):
        ob = slot.obs[pid]
        nonvis = ob.flat_nonvisual()
        agent = pop.agents[entry.agent]
        action, logp, slot.states[pid] = agent.act(
            ob.vision, nonvis, slot.states[pid], slot.rngs[pid])
        actions.append(action)
        feats.append((ob.vision, nonvis, logp))
    obs, rewards, _ = env.step(actions)
    for pid in range(len(slot.roster)):
        b = slot.buf[pid]
        vision, nonvis, logp = feats[pid]
        b["vision"].append(vision)
        b["nonvisual"].append(nonvis)
        b["actions"].append(actions[pid])
        b["log_probs"].append(logp)
        b["rewards"].append(float(rewards[pid]))
    slot.obs = obs
