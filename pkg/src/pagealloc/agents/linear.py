from __future__ import annotations

import numpy as np

from .. import seeding
from ..features import N_FEATURES, observation_features
from .base import BasePolicy, EpisodeLog, linear_schedule, make_train_env


def linear_q_update(weights: np.ndarray, phi: np.ndarray, action: int, reward: float,
                    phi_next: np.ndarray, terminated: bool, alpha: float, gamma: float) -> np.ndarray:
    """One semi-gradient Q-learning step on ``weights[action]`` (in place)."""
    target = reward
    if not terminated:
        target += gamma * float(np.max(weights @ phi_next))
    delta = target - float(weights[action] @ phi)
    weights[action] += alpha * delta * phi
    return weights


class LinearQAgent(BasePolicy):
    """Q-learning with action values linear in page features.

    Inputs are the nine block statistics of the observed page plus the
    request size, all divided by page_size.
    """

    kind = "linear_q"
    action_modes = ("high_level",)

    def __init__(self, learning_rate=0.003, discount=0.99, total_timesteps=50000,
                 exploration_initial_eps=1.0, exploration_final_eps=0.05,
                 exploration_fraction=0.1, seed=0):
        self.learning_rate = learning_rate
        self.discount = discount
        self.total_timesteps = total_timesteps
        self.exploration_initial_eps = exploration_initial_eps
        self.exploration_final_eps = exploration_final_eps
        self.exploration_fraction = exploration_fraction
        self.seed = seed

    def features(self, obs) -> np.ndarray:
        return observation_features(obs, self.page_size_)

    def fit(self, env_config, y=None, env_factory=None):
        self._check_env_config(env_config)
        self._set_env_attrs(env_config)
        rng = seeding.make_rng(self.seed, seeding.AGENT)
        eps = linear_schedule(self.exploration_initial_eps, self.exploration_final_eps,
                              self.exploration_fraction, self.total_timesteps)
        self.weights_ = np.zeros((self.n_actions_, N_FEATURES + 1))
        log = EpisodeLog()
        env = make_train_env(env_config, env_factory)
        episode = 0
        obs = env.reset(seed=seeding.derive_seed(self.seed, seeding.TRAIN_EPISODES, episode))
        phi = self.features(obs)
        for t in range(self.total_timesteps):
            if rng.random() < eps(t):
                action = int(rng.integers(self.n_actions_))
            else:
                action = int(np.argmax(self.weights_ @ phi))
            res = env.step(action)
            phi_next = self.features(res.observation)
            linear_q_update(self.weights_, phi, action, res.reward, phi_next,
                            res.terminated, self.learning_rate, self.discount)
            log.add(res.reward)
            if res.terminated or res.truncated:
                log.end_episode()
                episode += 1
                obs = env.reset(seed=seeding.derive_seed(self.seed, seeding.TRAIN_EPISODES, episode))
                phi = self.features(obs)
            else:
                phi = phi_next
        self.training_log_ = log.rows
        return self

    def action_scores(self, X: np.ndarray) -> np.ndarray:
        return np.stack([self.weights_ @ self.features(obs) for obs in X])
