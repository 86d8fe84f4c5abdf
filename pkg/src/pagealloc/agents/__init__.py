"""Allocation policies: fixed fit baselines, linear Q-learning, DQN and PPO."""

from .base import BasePolicy
from .dqn import DQNAgent, ReplayBuffer
from .fixed import FixedFitPolicy
from .linear import LinearQAgent, linear_q_update
from .ppo import PPOAgent, clipped_surrogate, compute_gae

AGENT_CLASSES = {
    "linear_q": LinearQAgent,
    "dqn": DQNAgent,
    "ppo": PPOAgent,
}


def baseline_policies(action_mode: str = "high_level"):
    """First-, best- and worst-fit, in high-level action order."""
    return [FixedFitPolicy(kind, action_mode) for kind in ("first", "best", "worst")]


__all__ = [
    "AGENT_CLASSES",
    "BasePolicy",
    "DQNAgent",
    "FixedFitPolicy",
    "LinearQAgent",
    "PPOAgent",
    "ReplayBuffer",
    "baseline_policies",
    "clipped_surrogate",
    "compute_gae",
    "linear_q_update",
]
