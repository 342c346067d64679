"""Off-policy actor-critic training for the navigation tasks.

Deterministic policy gradient with target networks, a uniform replay ring
and Gaussian action exploration that decays linearly over the run.  All
randomness flows from one seed through named child streams, so a training
run is exactly repeatable.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .neural import ActorNet, Adam, CriticNet, soft_update
from .tasks import NavEnv, run_episode
from .worldsim import InvalidSpec, V_MAX, V_MIN, W_MAX, W_MIN


class NonFiniteLoss(Exception):
    """Training diverged: a loss or target became NaN or infinite."""


class ActorPolicy:
    """Adapter from a trained actor network to the policy protocol."""

    def __init__(self, net: ActorNet):
        self.net = net

    def act(self, ctx):
        return self.net.act(ctx.observation)


class ReplayBuffer:
    """Fixed-capacity ring with uniform sampling (with replacement).

    Observations are stored in float32 to halve memory; samples are
    promoted back to float64 for the networks.
    """

    def __init__(self, capacity: int, obs_dim: int, act_dim: int = 2):
        if capacity < 1:
            raise InvalidSpec("buffer capacity must be positive")
        self.capacity = capacity
        self.obs = np.zeros((capacity, obs_dim), dtype=np.float32)
        self.next_obs = np.zeros((capacity, obs_dim), dtype=np.float32)
        self.act = np.zeros((capacity, act_dim))
        self.rew = np.zeros(capacity)
        self.terminal = np.zeros(capacity)
        self._n = 0
        self._head = 0

    def __len__(self):
        return self._n

    def add(self, obs, act, rew, next_obs, terminal: bool):
        i = self._head
        self.obs[i] = obs
        self.act[i] = act
        self.rew[i] = rew
        self.next_obs[i] = next_obs
        self.terminal[i] = 1.0 if terminal else 0.0
        self._head = (i + 1) % self.capacity
        self._n = min(self._n + 1, self.capacity)

    def sample(self, batch_size: int, rng):
        idx = rng.integers(0, self._n, size=batch_size)
        return (self.obs[idx].astype(np.float64),
                self.act[idx],
                self.rew[idx],
                self.next_obs[idx].astype(np.float64),
                self.terminal[idx])


@dataclass
class DdpgConfig:
    total_steps: int = 100_000
    gamma: float = 0.99
    actor_lr: float = 1e-4
    critic_lr: float = 1e-3
    tau: float = 0.005
    batch_size: int = 256
    buffer_capacity: int = 500_000
    warmup_steps: int = 5_000       # uniform random actions, no updates
    noise_v: float = 0.1            # exploration std dev on each axis
    noise_w: float = 0.2
    noise_final_frac: float = 0.1   # linear decay floor, fraction of initial
    updates_per_step: int = 1
    actor_hidden: tuple = (64, 64, 64)
    critic_embed: tuple = (64, 64)
    critic_joint: tuple = (64, 64)
    eval_every: int = 0             # curve cadence in env steps; 0 = off
    eval_episodes: int = 10

    def __post_init__(self):
        if self.total_steps < 1:
            raise InvalidSpec("total_steps must be positive")
        if not 0.0 < self.gamma < 1.0:
            raise InvalidSpec("gamma must lie in (0, 1)")
        if self.warmup_steps < self.batch_size:
            raise InvalidSpec("warmup must cover at least one batch")


@dataclass
class TrainResult:
    actor: ActorNet
    critic: CriticNet
    curve: list                    # (step, mean_true_objective, mean_return)
    steps: int
    episodes: int
    final_eval: tuple | None = None


def _exploration_scale(step: int, cfg: DdpgConfig) -> float:
    frac = min(step / cfg.total_steps, 1.0)
    return 1.0 + (cfg.noise_final_frac - 1.0) * frac


def evaluate_policy(env: NavEnv, policy, n_episodes: int, seed: int):
    """Mean true objective and mean return with exploration disabled."""
    if hasattr(policy, "forward"):  # bare network
        policy = ActorPolicy(policy)
    seeds = np.random.SeedSequence(seed).generate_state(
        n_episodes, dtype=np.uint64)
    objectives = []
    returns = []
    for s in seeds:
        res = run_episode(env, policy, int(s))
        objectives.append(res.true_objective)
        returns.append(res.total_reward)
    return float(np.mean(objectives)), float(np.mean(returns))


def train(env: NavEnv, config: DdpgConfig | None = None,
          seed: int = 0) -> TrainResult:
    cfg = config or DdpgConfig()
    ss = np.random.SeedSequence(seed)
    init_ss, expl_ss, sample_ss, episode_ss, eval_ss = ss.spawn(5)
    rng_expl = np.random.default_rng(expl_ss)
    rng_sample = np.random.default_rng(sample_ss)
    rng_episode = np.random.default_rng(episode_ss)
    eval_seed = int(np.random.default_rng(eval_ss).integers(1 << 62))

    obs_dim = env.obs_dim
    init = np.random.default_rng(init_ss)
    actor = ActorNet(obs_dim, cfg.actor_hidden).init_params(init)
    critic = CriticNet(obs_dim, 2, cfg.critic_embed,
                       cfg.critic_joint).init_params(init)
    target_actor = ActorNet(obs_dim, cfg.actor_hidden).set_params(
        actor.params)
    target_critic = CriticNet(obs_dim, 2, cfg.critic_embed,
                              cfg.critic_joint).set_params(critic.params)
    opt_actor = Adam(actor.n_params, cfg.actor_lr)
    opt_critic = Adam(critic.n_params, cfg.critic_lr)
    buffer = ReplayBuffer(min(cfg.buffer_capacity, cfg.total_steps), obs_dim)

    noise_scale = np.array([cfg.noise_v, cfg.noise_w])
    lo = np.array([V_MIN, W_MIN])
    hi = np.array([V_MAX, W_MAX])
    # evaluation must not disturb the training episode in progress
    eval_env = NavEnv(env.grid, env.config, env._roadmap)

    def update():
        obs, act, rew, nxt, term = buffer.sample(cfg.batch_size, rng_sample)
        a_next = target_actor.forward(nxt)
        q_next = target_critic.forward(nxt, a_next)
        target = rew + cfg.gamma * (1.0 - term) * q_next
        q, cache_q = critic.forward(obs, act, cache=True)
        td = q - target
        critic_loss = float(np.mean(td * td))
        grad_c, _ = critic.backward(cache_q, 2.0 * td / cfg.batch_size)
        a_pi, cache_a = actor.forward(obs, cache=True)
        q_pi, cache_pi = critic.forward(obs, a_pi, cache=True)
        actor_loss = -float(np.mean(q_pi))
        if not (math.isfinite(critic_loss) and math.isfinite(actor_loss)):
            raise NonFiniteLoss(
                f"critic={critic_loss!r} actor={actor_loss!r}")
        opt_critic.step(critic.params, grad_c)
        _, d_act = critic.backward(cache_pi,
                                   np.full(cfg.batch_size,
                                           -1.0 / cfg.batch_size))
        grad_a = actor.backward(cache_a, d_act)
        opt_actor.step(actor.params, grad_a)
        soft_update(target_actor.params, actor.params, cfg.tau)
        soft_update(target_critic.params, critic.params, cfg.tau)

    curve = []
    step = 0
    episodes = 0
    next_eval = cfg.eval_every if cfg.eval_every > 0 else None
    while step < cfg.total_steps:
        ctx = env.reset(int(rng_episode.integers(1 << 62)))
        episodes += 1
        done = False
        while not done and step < cfg.total_steps:
            obs = ctx.observation
            if step < cfg.warmup_steps:
                action = rng_expl.uniform(lo, hi)
            else:
                action = np.asarray(actor.forward(obs))
                action = action + (rng_expl.standard_normal(2) * noise_scale
                                   * _exploration_scale(step, cfg))
                action = np.clip(action, lo, hi)
            ctx, reward, done, info = env.step(action)
            # timeouts are a budget artifact, not environment termination:
            # bootstrap through them, stop only at true terminal states
            terminal = info["collision"] or info["reached"]
            buffer.add(obs, action, reward, ctx.observation, terminal)
            step += 1
            if step >= cfg.warmup_steps and len(buffer) >= cfg.batch_size:
                for _ in range(cfg.updates_per_step):
                    update()
            if next_eval is not None and step >= next_eval:
                mo, mr = evaluate_policy(eval_env, actor, cfg.eval_episodes,
                                         eval_seed)
                curve.append((step, mo, mr))
                next_eval += cfg.eval_every
    final_eval = None
    if cfg.eval_every > 0:
        final_eval = curve[-1][1:] if curve else None
    return TrainResult(actor=actor, critic=critic, curve=curve, steps=step,
                       episodes=episodes, final_eval=final_eval)


# -- learning-curve dumps ------------------------------------------------------

CURVE_HEADER = "step mean_true_objective mean_return"


class CurveFormatError(ValueError):
    """Malformed learning-curve text."""


def curve_to_text(rows) -> str:
    lines = [CURVE_HEADER]
    for step, obj, ret in rows:
        lines.append(f"{int(step)} {float(obj)!r} {float(ret)!r}")
    return "\n".join(lines) + "\n"


def curve_from_text(text: str):
    lines = [ln for ln in text.split("\n") if ln.strip()]
    if not lines or lines[0].split() != CURVE_HEADER.split():
        raise CurveFormatError("missing curve header")
    rows = []
    for i, ln in enumerate(lines[1:], start=2):
        parts = ln.split()
        if len(parts) != 3:
            raise CurveFormatError(f"line {i}: expected 3 fields")
        try:
            rows.append((int(parts[0]), float(parts[1]), float(parts[2])))
        except ValueError as e:
            raise CurveFormatError(f"line {i}: bad number") from e
    return rows


def save_curve(rows, filename) -> None:
    with open(filename, "w") as f:
        f.write(curve_to_text(rows))


def load_curve(filename):
    with open(filename) as f:
        return curve_from_text(f.read())
