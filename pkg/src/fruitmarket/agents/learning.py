"""Returns, losses, and the per-agent learner.

Two update rules share one network shape: an advantage-weighted policy
gradient with softmax (temperature eta) weights over the batch's advantages
and a frozen bootstrap network for value targets, and a plain advantage
actor-critic with an entropy bonus. Value targets use n-step bootstrapped
returns either way.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np
import torch

from .nets import PolicyValueNet


def n_step_return(rewards, t: int, n: int, gamma: float, bootstrap_values) -> float:
    """n-step return from step t of one trajectory.

    ``bootstrap_values[k]`` estimates the value of the state at step k;
    index len(rewards) is the terminal bootstrap (0 for a true episode end).
    """
    T = len(rewards)
    m = min(n, T - t)
    out = 0.0
    g = 1.0
    for k in range(m):
        out += g * float(rewards[t + k])
        g *= gamma
    out += g * float(bootstrap_values[t + m])
    return out


def n_step_returns(rewards: np.ndarray, values: np.ndarray, n: int, gamma: float) -> np.ndarray:
    """Vector of n-step returns; ``values`` has length len(rewards) + 1."""
    T = len(rewards)
    assert len(values) == T + 1, "values must include the terminal bootstrap"
    out = np.empty(T, dtype=np.float64)
    for t in range(T):
        out[t] = n_step_return(rewards, t, n, gamma, values)
    return out


def psi_weights(advantages: torch.Tensor, eta: float) -> torch.Tensor:
    """Normalized exp(A/eta) weights, computed stably (max subtracted)."""
    if eta <= 0:
        raise ValueError("eta must be positive")
    z = advantages / eta
    z = z - z.max()
    w = torch.exp(z)
    return w / w.sum()


def value_loss(values: torch.Tensor, targets: torch.Tensor) -> torch.Tensor:
    """Sum of squared errors between predicted values and return targets."""
    return ((values - targets) ** 2).sum()


def policy_loss(log_probs: torch.Tensor, psi: torch.Tensor) -> torch.Tensor:
    """Weighted negative log-likelihood of the taken actions."""
    return -(psi * log_probs).sum()


def a2c_losses(
    log_probs: torch.Tensor,
    entropy: torch.Tensor,
    values: torch.Tensor,
    targets: torch.Tensor,
    entropy_coef: float = 0.0,
    value_coef: float = 0.5,
) -> dict[str, torch.Tensor]:
    """Advantage actor-critic: policy gradient + value regression + entropy bonus."""
    adv = (targets - values).detach()
    policy = -(adv * log_probs).mean()
    value = ((values - targets) ** 2).mean()
    ent = entropy.mean()
    total = policy + value_coef * value - entropy_coef * ent
    return {"policy": policy, "value": value, "entropy": ent, "total": total}


class ReturnNormalizer:
    """Running mean/scale for return targets, with a clamped scale.

    A light-weight stand-in for adaptive output normalization: targets are
    standardized before regression and value estimates are mapped back to the
    raw return scale for bootstrapping and advantages.
    """

    def __init__(self, step_size: float = 1e-3, lo: float = 1e-2, hi: float = 1e6):
        self.step_size = step_size
        self.lo = lo
        self.hi = hi
        self.mean = 0.0
        self.sq = 1.0
        self._updates = 0

    @property
    def scale(self) -> float:
        var = max(self.sq - self.mean * self.mean, 0.0)
        return float(np.clip(np.sqrt(var), self.lo, self.hi))

    def update(self, targets: np.ndarray) -> None:
        # warm-start quickly, then settle to the configured step size
        self._updates += 1
        a = max(self.step_size, 1.0 / self._updates)
        self.mean += a * (float(np.mean(targets)) - self.mean)
        self.sq += a * (float(np.mean(np.square(targets))) - self.sq)

    def normalize(self, g: np.ndarray) -> np.ndarray:
        return (g - self.mean) / self.scale

    def denormalize(self, v: np.ndarray) -> np.ndarray:
        return v * self.scale + self.mean


@dataclass
class Trajectory:
    """One player's episode stream, as consumed by a learner."""

    vision: np.ndarray        # (T, 15, 15, 3) float32
    nonvisual: np.ndarray     # (T, K) float32
    actions: np.ndarray       # (T,) int64
    log_probs: np.ndarray     # (T,) float32, behavior policy log-probabilities
    rewards: np.ndarray       # (T,) float64
    terminal: bool = True
    agent_id: int | None = None
    version: int = 0          # parameter version the behavior policy used

    def __len__(self) -> int:
        return len(self.actions)


class Learner:
    """One independent agent: a net, its optimizer, and its update rule."""

    def __init__(
        self,
        agent_id: int,
        role: int,
        num_actions: int,
        nonvisual_size: int,
        cfg,
        seed: int = 0,
        region: int | None = None,
    ):
        self.agent_id = agent_id
        self.role = role
        self.region = region
        self.cfg = cfg
        with torch.random.fork_rng():
            torch.manual_seed(seed)
            self.net = PolicyValueNet(
                num_actions, nonvisual_size,
                conv_channels=cfg.net.conv_channels, dense=cfg.net.dense,
                lstm=cfg.net.lstm, head=cfg.net.head,
            )
        self.target_net = copy.deepcopy(self.net)
        self.opt = torch.optim.Adam(self.net.parameters(), lr=cfg.learning_rate)
        self.norm = ReturnNormalizer()
        self.version = 0
        self.updates = 0
        self.dropped_stale = 0

    # -- acting -------------------------------------------------------------

    def initial_state(self):
        return self.net.initial_state(1)

    @torch.no_grad()
    def act(self, vision: np.ndarray, nonvisual: np.ndarray, state, rng: np.random.Generator):
        """Sample one action; returns (action, log_prob, new_state)."""
        v = torch.from_numpy(vision).unsqueeze(0)
        nv = torch.from_numpy(nonvisual).unsqueeze(0)
        logits, _, new_state = self.net(v, nv, state)
        probs = torch.softmax(logits[0], dim=-1).numpy().astype(np.float64)
        probs /= probs.sum()
        action = int(rng.choice(len(probs), p=probs))
        return action, float(np.log(probs[action])), new_state

    # -- learning -----------------------------------------------------------

    def update(self, traj: Trajectory) -> dict[str, float] | None:
        """One optimization step from one trajectory; None if it was stale."""
        if self.version - traj.version > 1:
            self.dropped_stale += 1
            return None
        cfg = self.cfg
        T = len(traj)
        vis = torch.from_numpy(traj.vision)
        nonvis = torch.from_numpy(traj.nonvisual)
        actions = torch.from_numpy(traj.actions)

        logits, values = self._unroll(self.net, vis, nonvis)
        if cfg.algorithm == "vmpo":
            with torch.no_grad():
                _, boot_norm = self._unroll(self.target_net, vis, nonvis)
        else:
            boot_norm = values.detach()
        boot = self.norm.denormalize(boot_norm.numpy())
        boot = np.append(boot, 0.0 if traj.terminal else boot[-1])
        targets_raw = n_step_returns(traj.rewards, boot, cfg.n_step, cfg.discount)
        self.norm.update(targets_raw)
        targets = torch.from_numpy(self.norm.normalize(targets_raw)).to(torch.float32)

        log_softmax = torch.log_softmax(logits, dim=-1)
        log_probs = log_softmax.gather(1, actions.view(-1, 1)).squeeze(1)
        entropy = -(log_softmax * torch.softmax(logits, dim=-1)).sum(dim=1)

        if cfg.algorithm == "vmpo":
            adv = torch.from_numpy(
                targets_raw - self.norm.denormalize(boot_norm.detach().numpy())
            ).to(torch.float32)
            psi = psi_weights(adv, cfg.temperature)
            pol = policy_loss(log_probs, psi)
            val = value_loss(values, targets) / T
            total = pol + cfg.value_coef * val
            losses = {"policy": pol, "value": val, "total": total}
        else:
            losses = a2c_losses(
                log_probs, entropy, values, targets,
                entropy_coef=cfg.entropy_coef, value_coef=cfg.value_coef,
            )
        self.opt.zero_grad()
        losses["total"].backward()
        torch.nn.utils.clip_grad_norm_(self.net.parameters(), cfg.grad_clip)
        self.opt.step()
        self.updates += 1
        self.version += 1
        if self.updates % cfg.target_period == 0:
            self.target_net.load_state_dict(self.net.state_dict())
        return {k: float(v.detach()) for k, v in losses.items()}

    def _unroll(self, net: PolicyValueNet, vis: torch.Tensor, nonvis: torch.Tensor):
        state = net.initial_state(1)
        logits_steps = []
        value_steps = []
        for t in range(vis.shape[0]):
            lg, vl, state = net(vis[t:t + 1], nonvis[t:t + 1], state)
            logits_steps.append(lg[0])
            value_steps.append(vl[0])
        return torch.stack(logits_steps), torch.stack(value_steps)
