"""Deep Q-learning without a target network, driven by any optimizer."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .. import nn
from ..errors import NumericError
from ..losses import LossKind
from ..optimizers import Batch, OptimizerKind, batch_loss, optimizer_step
from .envs import Environment
from .replay import ReplayBuffer, Transition


def q_target(reward: float, done: bool, q_next: np.ndarray, gamma: float) -> float:
    if not 0.0 <= gamma <= 1.0:
        raise ValueError("gamma must lie in [0, 1]")
    if done:
        return float(reward)
    return float(reward + gamma * np.max(q_next))


def q_targets(rewards: np.ndarray, dones: np.ndarray, q_next: np.ndarray, gamma: float) -> np.ndarray:
    """Vectorised :func:`q_target` over a batch."""
    return np.where(dones, rewards, rewards + gamma * q_next.max(axis=1))


def training_batch(model: nn.NetworkState, sample, gamma: float) -> Batch:
    """Regression batch whose loss is the Bellman error of the taken actions.

    Non-chosen actions get their current prediction as target, so they
    contribute neither loss nor gradient at the current parameters.
    """
    s, a, r, s_next, done = sample
    q_next, _ = nn.forward(model, s_next)
    q_pred, _ = nn.forward(model, s)
    targets = q_pred.copy()
    targets[np.arange(len(a)), a] = q_targets(r, done, q_next, gamma)
    return Batch(s, targets)


def linear_epsilon(episode: int, n_episodes: int, start: float = 1.0, end: float = 0.05, fraction: float = 0.5) -> float:
    """Linear decay from ``start`` to ``end`` over the first ``fraction`` of episodes."""
    horizon = max(1.0, fraction * n_episodes)
    progress = min(1.0, episode / horizon)
    return start + (end - start) * progress


@dataclass
class DqnConfig:
    gamma: float = 0.99
    epsilon: float = 1.0
    batch_size: int = 32
    lr: float = 1e-6
    warmup: int = 32
    workers: int = 1


@dataclass
class EpisodeMetrics:
    episode_return: float = 0.0
    steps: int = 0
    losses_before: list[float] = field(default_factory=list)
    losses_after: list[float] = field(default_factory=list)
    q_values: list[float] = field(default_factory=list)
    step_times_ms: list[float] = field(default_factory=list)
    lambdas: list[float] = field(default_factory=list)
    alphas: list[float] = field(default_factory=list)
    accepted: list[bool] = field(default_factory=list)
    failed: bool = False
    failure: str | None = None


def select_action(q_values: np.ndarray, epsilon: float, rng: np.random.Generator) -> int:
    # both draws happen every step so the RNG stream does not depend on epsilon
    explore = rng.random() < epsilon
    random_action = int(rng.integers(q_values.shape[0]))
    return random_action if explore else int(np.argmax(q_values))


def dqn_train_episode(
    env: Environment,
    model: nn.NetworkState,
    kind: OptimizerKind,
    opt_state,
    buffer: ReplayBuffer,
    config: DqnConfig,
    rng: np.random.Generator,
    env_seed: int,
) -> tuple[nn.NetworkState, object, EpisodeMetrics]:
    """Play one episode, storing transitions and taking one optimizer step per
    environment step once the buffer holds ``max(warmup, batch_size)`` entries."""
    metrics = EpisodeMetrics()
    obs = env.reset(env_seed)
    done = False
    while not done:
        q, _ = nn.forward(model, obs)
        action = select_action(q, config.epsilon, rng)
        metrics.q_values.append(float(q[action]))
        obs_next, reward, done = env.step(action)
        buffer.push(Transition(obs, action, reward, obs_next, done))
        metrics.episode_return += reward
        metrics.steps += 1
        obs = obs_next

        if len(buffer) < max(config.warmup, config.batch_size):
            continue
        batch = training_batch(model, buffer.sample(config.batch_size), config.gamma)
        start = time.perf_counter_ns()
        try:
            model, opt_state, report = optimizer_step(
                kind, opt_state, model, batch, LossKind.MSE, config.lr, config.workers
            )
        except NumericError as exc:
            metrics.failed, metrics.failure = True, str(exc)
            break
        metrics.step_times_ms.append((time.perf_counter_ns() - start) / 1e6)
        after = report.loss_after if report.loss_after is not None else batch_loss(model, batch, LossKind.MSE)
        metrics.losses_before.append(report.loss_before)
        metrics.losses_after.append(after)
        metrics.accepted.append(report.accepted)
        if report.lam is not None:
            metrics.lambdas.append(report.lam)
        if report.alpha is not None:
            metrics.alphas.append(report.alpha)
        if not (np.isfinite(report.loss_before) and np.isfinite(after)):
            metrics.failed, metrics.failure = True, "non-finite loss"
            break
    return model, opt_state, metrics
