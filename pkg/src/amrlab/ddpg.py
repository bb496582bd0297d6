"""DDPG learner: deterministic actor, Q critic, soft-tracked targets.

The per-step cycle in `run_episode` is act -> env step -> optional reward
rewrite -> store -> (once the buffer holds a batch) critic update, actor
update, soft target update.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, fields
from typing import Callable, NamedTuple, Optional

import numpy as np

from . import neural
from .envs import EnvSpec
from .errors import ContractError, EnvironmentFault, InsufficientExperience, NumericFault
from .replay import Batch, ReplayBuffer, Transition


@dataclass
class Hyperparams:
    gamma: float = 0.9
    tau: float = 0.01
    critic_lr: float = 0.002
    actor_lr: float = 0.001
    batch: int = 32
    buffer_capacity: int = 10000
    max_steps_per_episode: int = 2000
    episodes: int = 200
    noise_start: float = 3.0
    noise_end: float = 0.0
    beta: float = 1.0
    critic_hidden: int = 50
    actor_hidden: int = 30
    optimizer: str = "adam"
    grad_clip: Optional[float] = 10.0
    amr_bounded: bool = False

    def __post_init__(self):
        checks = [
            (0.0 <= self.gamma < 1.0, "gamma must lie in [0, 1)"),
            (0.0 < self.tau <= 1.0, "tau must lie in (0, 1]"),
            (self.critic_lr > 0 and self.actor_lr > 0, "learning rates must be positive"),
            (self.batch >= 1, "batch must be positive"),
            (self.buffer_capacity >= 1, "buffer_capacity must be positive"),
            (self.max_steps_per_episode >= 1, "max_steps_per_episode must be positive"),
            (self.episodes >= 1, "episodes must be positive"),
            (self.noise_start >= 0 and self.noise_end >= 0, "noise levels must be non-negative"),
            (np.isfinite(self.beta), "beta must be finite"),
            (self.critic_hidden >= 1 and self.actor_hidden >= 1, "hidden widths must be positive"),
            (self.optimizer in ("adam", "sgd"), "optimizer must be 'adam' or 'sgd'"),
            (self.grad_clip is None or self.grad_clip > 0, "grad_clip must be positive or null"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ContractError(msg)

    @classmethod
    def from_dict(cls, d: dict) -> "Hyperparams":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ContractError(f"unknown hyperparameter(s): {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class Agent:
    actor: neural.Network
    critic: neural.Network
    target_actor: neural.Network
    target_critic: neural.Network
    actor_opt: neural.OptimizerState
    critic_opt: neural.OptimizerState
    hp: Hyperparams
    buffer: ReplayBuffer
    action_low: np.ndarray
    action_high: np.ndarray
    episode: int = 0
    steps: int = 0

    @property
    def action_scale(self):
        return (self.action_high - self.action_low) / 2.0

    @property
    def action_offset(self):
        return (self.action_high + self.action_low) / 2.0


class EpisodeStats(NamedTuple):
    score: float
    steps: int
    sigma: float
    mean_critic_loss: float


def make_agent(spec: EnvSpec, hp: Hyperparams, rng: np.random.Generator) -> Agent:
    """Fresh randomly initialised agent; targets start as exact copies."""
    sd, ad = spec.state_dim, spec.action_dim
    actor = neural.init_network([sd, hp.actor_hidden, ad], ["relu", "tanh"], rng)
    critic = neural.init_network([sd + ad, hp.critic_hidden, 1], ["relu", "linear"], rng)
    return Agent(
        actor=actor,
        critic=critic,
        target_actor=actor.copy(),
        target_critic=critic.copy(),
        actor_opt=neural.make_optimizer(actor, hp.actor_lr, hp.optimizer, hp.grad_clip),
        critic_opt=neural.make_optimizer(critic, hp.critic_lr, hp.optimizer, hp.grad_clip),
        hp=hp,
        buffer=ReplayBuffer(hp.buffer_capacity, sd, ad),
        action_low=spec.action_low.copy(),
        action_high=spec.action_high.copy(),
    )


def _policy(agent, actor, s):
    return neural.forward(actor, s) * agent.action_scale + agent.action_offset


def q_value(critic, s, a):
    return neural.forward(critic, np.concatenate([s, a], axis=-1))[..., 0]


def policy(agent: Agent, s) -> np.ndarray:
    """Deterministic action mu(s) in environment units (unclipped, no noise)."""
    return _policy(agent, agent.actor, s)


def noise_schedule(episode: int, hp: Hyperparams) -> float:
    """Exploration std, linear in the episode index from noise_start to noise_end."""
    if not 0 <= episode <= hp.episodes:
        raise ContractError(f"episode {episode} outside [0, {hp.episodes}]")
    return hp.noise_start + (hp.noise_end - hp.noise_start) * episode / hp.episodes


def select_action(agent: Agent, s, rng: np.random.Generator, sigma: float | None = None):
    if sigma is None:
        sigma = noise_schedule(agent.episode, agent.hp)
    mu = policy(agent, s)
    if not np.all(np.isfinite(mu)):
        raise NumericFault(f"actor produced {mu} for state {s}")
    # always draw, so the random stream does not depend on the noise level
    a = mu + sigma * rng.standard_normal(mu.shape)
    return np.clip(a, agent.action_low, agent.action_high)


def td_target(agent: Agent, batch: Batch) -> np.ndarray:
    """y = r + gamma * Q'(s', mu'(s')), with the bootstrap term dropped on terminal rows."""
    a_next = _policy(agent, agent.target_actor, batch.s_next)
    q_next = q_value(agent.target_critic, batch.s_next, a_next)
    return batch.r + agent.hp.gamma * (1.0 - batch.terminal) * q_next


def critic_loss_and_grads(agent: Agent, batch: Batch):
    """Mean squared TD error and its gradient w.r.t. the critic parameters."""
    y = td_target(agent, batch)
    x = np.concatenate([batch.s, batch.a], axis=1)
    trace = neural.forward_trace(agent.critic, x)
    resid = y - trace[-1][:, 0]
    n = len(y)
    loss = float(resid @ resid) / n
    grads, _ = neural.backward(agent.critic, x, (-2.0 / n * resid)[:, None], trace)
    return loss, grads


def critic_update(agent: Agent, batch: Batch) -> float:
    loss, grads = critic_loss_and_grads(agent, batch)
    if not np.isfinite(loss):
        raise NumericFault(f"critic loss is {loss}")
    neural.apply_update(agent.critic, grads, agent.critic_opt)
    return loss


def actor_objective_and_grads(agent: Agent, batch: Batch):
    """Mean Q(s, mu(s)) over the batch, and the gradient of its negation
    w.r.t. the actor parameters (so a descent step is policy ascent)."""
    s = batch.s
    n = len(s)
    actor_trace = neural.forward_trace(agent.actor, s)
    a = actor_trace[-1] * agent.action_scale + agent.action_offset
    x = np.concatenate([s, a], axis=1)
    critic_trace = neural.forward_trace(agent.critic, x)
    q = critic_trace[-1][:, 0]
    _, dx = neural.backward(agent.critic, x, np.full((n, 1), -1.0 / n), critic_trace)
    da = dx[:, agent.buffer.state_dim:] * agent.action_scale
    grads, _ = neural.backward(agent.actor, s, da, actor_trace)
    return float(q.mean()), grads


def actor_update(agent: Agent, batch: Batch) -> float:
    objective, grads = actor_objective_and_grads(agent, batch)
    neural.apply_update(agent.actor, grads, agent.actor_opt)
    return objective


def soft_update(agent: Agent) -> None:
    neural.soft_update(agent.target_critic, agent.critic, agent.hp.tau)
    neural.soft_update(agent.target_actor, agent.actor, agent.hp.tau)


def learn_step(agent: Agent, rng: np.random.Generator) -> float | None:
    """One sample/critic/actor/target cycle; None while the buffer is short of a batch."""
    try:
        batch = agent.buffer.sample_batch(agent.hp.batch, rng)
    except InsufficientExperience:
        return None
    loss = critic_update(agent, batch)
    actor_update(agent, batch)
    soft_update(agent)
    return loss


Augmenter = Callable[[Agent, Transition], float]


def run_episode(agent: Agent, env, rng: np.random.Generator,
                amr: Augmenter | None = None) -> EpisodeStats:
    """Play one episode with learning; the score is the raw environment return.

    ``amr`` maps (agent, transition with raw reward) to the reward that is
    stored in the buffer. It never touches the reported score.
    """
    hp = agent.hp
    sigma = noise_schedule(agent.episode, hp)
    s = env.reset(rng)
    score = 0.0
    losses = []
    steps = 0
    for _ in range(hp.max_steps_per_episode):
        a = select_action(agent, s, rng, sigma)
        try:
            s_next, r, terminal = env.step(a)
        except Exception as exc:
            raise EnvironmentFault(
                f"environment step failed in episode {agent.episode}, step {steps}: {exc}"
            ) from exc
        steps += 1
        score += r
        t = Transition(s, a, r, s_next, terminal)
        if amr is not None:
            t = t._replace(r=amr(agent, t))
        agent.buffer.push(t)
        loss = learn_step(agent, rng)
        if loss is not None:
            losses.append(loss)
        agent.steps += 1
        s = s_next
        if terminal:
            break
    agent.episode += 1
    mean_loss = float(np.mean(losses)) if losses else float("nan")
    return EpisodeStats(score, steps, sigma, mean_loss)
