from .dqn import (
    DqnConfig,
    EpisodeMetrics,
    dqn_train_episode,
    linear_epsilon,
    q_target,
    q_targets,
    select_action,
    training_batch,
)
from .envs import CartPoleEnv, Environment, FlappyEnv, write_pgm
from .replay import ReplayBuffer, Transition

__all__ = [
    "DqnConfig", "EpisodeMetrics", "dqn_train_episode", "linear_epsilon", "q_target", "q_targets",
    "select_action", "training_batch", "CartPoleEnv", "Environment", "FlappyEnv", "write_pgm",
    "ReplayBuffer", "Transition",
]
