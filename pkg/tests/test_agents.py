import math

import numpy as np
import pytest
import torch

from fruitmarket.agents.learning import (
    Learner,
    ReturnNormalizer,
    Trajectory,
    a2c_losses,
    n_step_return,
    n_step_returns,
    policy_loss,
    psi_weights,
    value_loss,
)
from fruitmarket.agents.nets import PolicyValueNet, load_checkpoint, save_checkpoint
from fruitmarket.agents.scripted import HarvesterPolicy, RandomPolicy, TraderPolicy
from fruitmarket.config import LearnerConfig, NetConfig
from fruitmarket.env import Environment, EpisodeConfig, RosterEntry
from fruitmarket.exchange import APPLE, BANANA
from fruitmarket.rng import substream
from fruitmarket.world import MapSpec

torch.set_num_threads(2)


def brute_force_return(rewards, t, n, gamma, boot):
    m = min(n, len(rewards) - t)
    total = sum(gamma ** k * rewards[t + k] for k in range(m))
    return total + gamma ** m * boot[t + m]


class TestNStepReturns:
    def test_terminal_sum(self):
        rewards = np.array([1.0, 1.0, 1.0])
        boot = np.array([0.0, 0.0, 0.0, 0.0])
        assert n_step_return(rewards, 0, 3, 1.0, boot) == 3.0

    def test_one_step_bootstrap(self):
        rewards = np.array([1.0])
        boot = np.array([0.0, 4.0])
        assert n_step_return(rewards, 0, 1, 0.5, boot) == 3.0

    def test_random_trajectories_match_brute_force(self):
        rng = np.random.default_rng(8)
        for _ in range(50):
            T = int(rng.integers(1, 40))
            n = int(rng.integers(1, 12))
            gamma = float(rng.uniform(0.5, 1.0))
            rewards = rng.normal(size=T)
            boot = rng.normal(size=T + 1)
            got = n_step_returns(rewards, boot, n, gamma)
            for t in range(T):
                assert got[t] == pytest.approx(
                    brute_force_return(rewards, t, n, gamma, boot), rel=1e-12)


class TestPsiWeights:
    def test_single_sample(self):
        w = psi_weights(torch.tensor([3.7]), eta=0.1)
        assert w.tolist() == [1.0]

    def test_two_equal_advantages(self):
        w = psi_weights(torch.tensor([1.0, 1.0]), eta=0.1)
        assert torch.allclose(w, torch.tensor([0.5, 0.5]))

    def test_log3_spacing(self):
        eta = 0.1
        adv = torch.tensor([0.0, eta * math.log(3.0)])
        w = psi_weights(adv, eta)
        assert torch.allclose(w, torch.tensor([0.25, 0.75]), atol=1e-6)

    def test_sums_to_one_and_shift_invariant(self):
        rng = np.random.default_rng(0)
        adv = torch.tensor(rng.normal(size=32))
        w = psi_weights(adv, 0.1)
        assert float(w.sum()) == pytest.approx(1.0, abs=1e-9)
        w2 = psi_weights(adv + 123.4, 0.1)
        assert torch.allclose(w, w2, atol=1e-9)

    def test_permutation_equivariant(self):
        adv = torch.tensor([0.3, -0.2, 1.4, 0.0])
        perm = [2, 0, 3, 1]
        w = psi_weights(adv, 0.5)
        wp = psi_weights(adv[perm], 0.5)
        assert torch.allclose(w[perm], wp)

    def test_huge_advantages_stay_finite(self):
        w = psi_weights(torch.tensor([1e6, 0.0]), eta=0.1)
        assert torch.isfinite(w).all()

    def test_eta_must_be_positive(self):
        with pytest.raises(ValueError):
            psi_weights(torch.tensor([0.0]), eta=0.0)


class TestLossValues:
    def test_value_loss_zero_when_exact(self):
        v = torch.tensor([1.0, 2.0, 3.0])
        assert float(value_loss(v, v)) == 0.0

    def test_value_loss_unit_proportionality(self):
        assert float(value_loss(torch.tensor([1.0]), torch.tensor([3.0]))) == 4.0

    def test_policy_loss_zero_for_certain_policy(self):
        log_probs = torch.tensor([0.0, 0.0])
        psi = torch.tensor([0.5, 0.5])
        assert float(policy_loss(log_probs, psi)) == 0.0

    def test_policy_loss_uniform_four_actions(self):
        log_probs = torch.tensor([math.log(0.25)])
        psi = torch.tensor([1.0])
        assert float(policy_loss(log_probs, psi)) == pytest.approx(math.log(4.0))

    def test_a2c_zero_advantage_means_zero_policy_gradient(self):
        logits = torch.nn.Parameter(torch.tensor([[0.3, -0.2]]))
        dist = torch.log_softmax(logits, dim=-1)
        log_probs = dist[0, :1]
        values = torch.tensor([1.0])
        targets = torch.tensor([1.0])
        out = a2c_losses(log_probs, torch.tensor([0.0]), values, targets,
                         entropy_coef=0.0)
        out["policy"].backward()
        assert torch.allclose(logits.grad, torch.zeros_like(logits.grad))

    def test_a2c_entropy_zero_recovers_plain_actor_critic(self):
        log_probs = torch.tensor([-0.5, -1.0])
        values = torch.tensor([0.0, 1.0])
        targets = torch.tensor([1.0, 0.0])
        plain = a2c_losses(log_probs, torch.tensor([0.7, 0.7]), values, targets,
                           entropy_coef=0.0)
        adv = targets - values
        assert float(plain["policy"]) == pytest.approx(
            float(-(adv * log_probs).mean()))


def tiny_net(num_actions=3, nonvis=3):
    torch.manual_seed(0)
    return PolicyValueNet(num_actions, nonvis, conv_channels=2, dense=4,
                          lstm=4, head=4, vision_hw=(3, 3)).double()


def fd_check(net, loss_fn, rel_tol=1e-4, h=1e-6):
    loss = loss_fn()
    net.zero_grad()
    loss.backward()
    analytic = torch.cat([
        (p.grad if p.grad is not None else torch.zeros_like(p)).flatten()
        for p in net.parameters()
    ]).numpy()
    numeric = np.zeros_like(analytic)
    i = 0
    with torch.no_grad():
        for p in net.parameters():
            flat = p.view(-1)
            for j in range(flat.numel()):
                orig = float(flat[j])
                flat[j] = orig + h
                up = float(loss_fn())
                flat[j] = orig - h
                down = float(loss_fn())
                flat[j] = orig
                numeric[i] = (up - down) / (2 * h)
                i += 1
    denom = max(np.linalg.norm(analytic), np.linalg.norm(numeric), 1e-12)
    rel = np.linalg.norm(analytic - numeric) / denom
    assert rel <= rel_tol, f"gradient mismatch: rel err {rel:.3e}"
    return rel


class TestGradientChecks:
    T = 4

    def setup_method(self):
        self.net = tiny_net()
        assert self.net.param_count() <= 500
        rng = np.random.default_rng(3)
        self.vision = torch.tensor(rng.uniform(size=(self.T, 3, 3, 3)))
        self.nonvis = torch.tensor(rng.uniform(size=(self.T, 3)))
        self.actions = torch.tensor([0, 2, 1, 0])
        self.targets = torch.tensor(rng.normal(size=self.T))
        self.psi = torch.tensor([0.4, 0.3, 0.2, 0.1], dtype=torch.float64)

    def unroll(self):
        state = tuple(s.double() for s in self.net.initial_state(1))
        logits, values = [], []
        for t in range(self.T):
            lg, vl, state = self.net(self.vision[t:t + 1], self.nonvis[t:t + 1], state)
            logits.append(lg[0])
            values.append(vl[0])
        return torch.stack(logits), torch.stack(values)

    def test_value_loss_gradient(self):
        def loss_fn():
            _, values = self.unroll()
            return value_loss(values, self.targets)

        fd_check(self.net, loss_fn)

    def test_policy_loss_gradient(self):
        def loss_fn():
            logits, _ = self.unroll()
            log_probs = torch.log_softmax(logits, dim=-1).gather(
                1, self.actions.view(-1, 1)).squeeze(1)
            return policy_loss(log_probs, self.psi)

        fd_check(self.net, loss_fn)


class TestBanditSanity:
    def test_a2c_converges_on_two_armed_bandit(self):
        torch.manual_seed(1)
        rng = np.random.default_rng(1)
        logits = torch.nn.Parameter(torch.zeros(2))
        value = torch.nn.Parameter(torch.zeros(1))
        opt = torch.optim.Adam([logits, value], lr=0.05)
        payout = np.array([1.0, 0.0])
        for _ in range(2000):
            probs = torch.softmax(logits, dim=-1)
            arms = rng.choice(2, size=16, p=probs.detach().numpy())
            rewards = torch.tensor(payout[arms])
            log_probs = torch.log(probs[arms])
            values = value.expand(16)
            out = a2c_losses(log_probs, -(probs * probs.log()).sum().expand(16),
                             values, rewards, entropy_coef=0.001)
            opt.zero_grad()
            out["total"].backward()
            opt.step()
        assert float(torch.softmax(logits.detach(), dim=-1)[0]) > 0.99


class TestReturnNormalizer:
    def test_scale_is_clamped(self):
        norm = ReturnNormalizer(lo=1e-2, hi=10.0)
        norm.update(np.zeros(8))
        assert norm.scale >= 1e-2
        big = ReturnNormalizer(lo=1e-2, hi=10.0)
        for _ in range(200):
            big.update(np.array([1e5, -1e5]))
        assert big.scale == 10.0

    def test_round_trip(self):
        norm = ReturnNormalizer()
        for _ in range(50):
            norm.update(np.random.default_rng(0).normal(5.0, 2.0, size=64))
        x = np.array([1.0, 5.0, 9.0])
        assert np.allclose(norm.denormalize(norm.normalize(x)), x)


class TestNetBehaviour:
    def test_recurrent_state_changes_outputs(self):
        net = PolicyValueNet(4, 3, conv_channels=2, dense=8, lstm=8, head=8,
                             vision_hw=(3, 3))
        torch.manual_seed(0)
        vision = torch.rand(1, 3, 3, 3)
        nonvis = torch.rand(1, 3)
        zero = net.initial_state(1)
        logits1, _, state = net(vision, nonvis, zero)
        carried, _, _ = net(vision, nonvis, state)
        fresh, _, _ = net(vision, nonvis, zero)
        assert torch.allclose(logits1, fresh)
        assert not torch.allclose(carried, fresh)

    def test_value_regression_reaches_low_mse(self):
        torch.manual_seed(2)
        net = PolicyValueNet(2, 3, conv_channels=2, dense=16, lstm=16, head=16,
                             vision_hw=(3, 3))
        opt = torch.optim.Adam(net.parameters(), lr=3e-3)
        vision = torch.rand(32, 3, 3, 3)
        nonvis = torch.rand(32, 3)
        targets = (vision.mean(dim=(1, 2, 3)) * 2 - nonvis[:, 0]).detach()
        for _ in range(600):
            state = net.initial_state(32)
            _, values, _ = net(vision, nonvis, state)
            loss = ((values - targets) ** 2).mean()
            opt.zero_grad()
            loss.backward()
            opt.step()
        assert float(loss) < 1e-3

    def test_checkpoint_round_trip(self, tmp_path):
        net = PolicyValueNet(5, 4, conv_channels=2, dense=8, lstm=8, head=8,
                             vision_hw=(3, 3))
        opt = torch.optim.Adam(net.parameters(), lr=1e-3)
        vision = torch.rand(2, 3, 3, 3)
        nonvis = torch.rand(2, 4)
        logits, values, _ = net(vision, nonvis, net.initial_state(2))
        (logits.sum() + values.sum()).backward()
        opt.step()
        path = tmp_path / "ck.npz"
        save_checkpoint(path, net, opt, meta={"updates": 1})
        net2 = PolicyValueNet(5, 4, conv_channels=2, dense=8, lstm=8, head=8,
                              vision_hw=(3, 3))
        opt2 = torch.optim.Adam(net2.parameters(), lr=1e-3)
        meta = load_checkpoint(path, net2, opt2)
        assert meta["updates"] == 1
        for a, b in zip(net.parameters(), net2.parameters()):
            assert torch.equal(a, b)
        for p, q in zip(net.parameters(), net2.parameters()):
            sa, sb = opt.state[p], opt2.state[q]
            assert torch.allclose(sa["exp_avg"], sb["exp_avg"])


def scripted_episode(policies, cfg, seed=0, ticks=None):
    env = Environment(cfg, seed=seed)
    obs = env.reset()
    done = False
    t = 0
    while not done and (ticks is None or t < ticks):
        actions = [p.act(o) for p, o in zip(policies, obs)]
        obs, _, done = env.step(actions)
        t += 1
    return env


class TestScriptedPolicies:
    def test_random_policy_emits_legal_actions(self):
        pol = RandomPolicy(28, substream(0, "p"))
        class Obs:  # the random policy ignores its observation
            pass
        draws = {pol.act(Obs()) for _ in range(500)}
        assert min(draws) >= 0 and max(draws) < 28
        assert len(draws) > 20

    def test_harvester_collects_fruit(self):
        cfg = EpisodeConfig(
            map=MapSpec(template="tiny", apple_multiplier=2.0, banana_multiplier=0.0),
            roster=[RosterEntry(role=0)],
            episode_length=300,
        )
        pol = HarvesterPolicy("standard", substream(1, "p"), target_good=APPLE,
                              prefer_good=APPLE)
        env = scripted_episode([pol], cfg, seed=2)
        harvested = sum(1 for e in env.events if e[0] == "harvest")
        assert harvested >= 5
        assert env.players[0].ledger.eat_apple >= 1
        assert env.episodic_return(0) > -970.0

    def test_two_traders_exchange_within_a_few_ticks(self):
        cfg = EpisodeConfig(
            map=MapSpec(template="tiny", apple_multiplier=1.5, banana_multiplier=1.5),
            roster=[RosterEntry(role=0), RosterEntry(role=1)],
            episode_length=400,
        )
        pols = [
            TraderPolicy("standard", substream(3, "p", 0), offer=(-1, 1)),
            TraderPolicy("standard", substream(3, "p", 1), offer=(1, -1)),
        ]
        env = scripted_episode(pols, cfg, seed=4)
        assert len(env.exchange_records) >= 3


class TestLearner:
    def make_learner(self, algorithm):
        cfg = LearnerConfig(algorithm=algorithm, net=NetConfig(
            conv_channels=2, dense=8, lstm=8, head=8))
        return Learner(0, 0, num_actions=5, nonvisual_size=9, cfg=cfg, seed=1)

    def fake_traj(self, T=6, version=0):
        rng = np.random.default_rng(0)
        return Trajectory(
            vision=rng.uniform(size=(T, 15, 15, 3)).astype(np.float32),
            nonvisual=rng.uniform(size=(T, 9)).astype(np.float32),
            actions=rng.integers(0, 5, size=T),
            log_probs=np.zeros(T, dtype=np.float32),
            rewards=rng.normal(size=T),
            version=version,
        )

    @pytest.mark.parametrize("algorithm", ["vmpo", "a2c"])
    def test_update_runs_and_bumps_version(self, algorithm):
        lrn = self.make_learner(algorithm)
        out = lrn.update(self.fake_traj())
        assert out is not None and np.isfinite(out["total"])
        assert lrn.version == 1

    def test_stale_trajectory_dropped(self):
        lrn = self.make_learner("a2c")
        for _ in range(3):
            assert lrn.update(self.fake_traj(version=lrn.version)) is not None
        assert lrn.update(self.fake_traj(version=0)) is None
        assert lrn.dropped_stale == 1

    def test_target_refresh_period(self):
        lrn = self.make_learner("vmpo")
        before = [p.clone() for p in lrn.target_net.parameters()]
        for k in range(lrn.cfg.target_period - 1):
            lrn.update(self.fake_traj(version=lrn.version))
        assert all(torch.equal(a, b) for a, b in
                   zip(before, lrn.target_net.parameters()))
        lrn.update(self.fake_traj(version=lrn.version))
        assert all(torch.equal(a, b) for a, b in
                   zip(lrn.net.parameters(), lrn.target_net.parameters()))
