"""Shared estimator plumbing for allocation policies."""

from __future__ import annotations

from typing import List, Optional, Tuple

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .._validation import ConfigError, check_observations
from ..env import AllocEnv, EnvConfig


class BasePolicy(BaseEstimator):
    """Allocation policy with an sklearn-style surface.

    ``fit`` takes an :class:`~pagealloc.env.EnvConfig` in place of ``X`` and
    trains against environments built from it. ``predict`` maps one raw
    observation (or a batch) to greedy actions. Fitted state lives in
    trailing-underscore attributes, so ``clone`` yields an untrained copy.
    """

    kind = "base"
    trainable = True
    action_modes: Tuple[str, ...] = ("high_level", "low_level")

    def _check_env_config(self, env_config: EnvConfig) -> None:
        if not isinstance(env_config, EnvConfig):
            raise TypeError(f"fit expects an EnvConfig, got {type(env_config).__name__}")
        if env_config.action_mode not in self.action_modes:
            raise ConfigError(
                "env.action_mode",
                f"{type(self).__name__} supports {self.action_modes}, got {env_config.action_mode!r}",
            )

    def _set_env_attrs(self, env_config: EnvConfig) -> None:
        self.page_size_ = env_config.page_size
        self.history_len_ = env_config.history_len
        self.action_mode_ = env_config.action_mode
        self.n_actions_ = env_config.n_actions
        self.n_features_in_ = env_config.obs_dim

    def _check_fitted(self) -> None:
        if not hasattr(self, "page_size_"):
            raise NotFittedError(f"{type(self).__name__} is not fitted yet; call fit() first")

    def _validate_obs(self, X):
        self._check_fitted()
        return check_observations(X, self.n_features_in_)

    def scale(self, X: np.ndarray) -> np.ndarray:
        """Network input: bitmap unchanged, size fields divided by page_size."""
        out = np.array(X, dtype=np.float64)
        out[..., self.page_size_:] /= self.page_size_
        return out

    def action_scores(self, X: np.ndarray) -> np.ndarray:
        """Per-action scores for a validated 2-D batch; argmax is the greedy action."""
        raise NotImplementedError

    def predict(self, X):
        arr, single = self._validate_obs(X)
        # np.argmax returns the first maximum: ties go to the lowest action
        actions = np.argmax(self.action_scores(arr), axis=1)
        return int(actions[0]) if single else actions

    def act(self, obs, explore: bool = False, rng: Optional[np.random.Generator] = None,
            epsilon: Optional[float] = None) -> int:
        """One action; ``explore`` switches to the policy's behaviour distribution.

        Value-based agents explore epsilon-greedily (``epsilon`` defaults to
        the final exploration rate), PPO samples its softmax.
        """
        if not explore:
            return self.predict(obs)
        if rng is None:
            raise ValueError("explore=True needs an rng")
        return self._explore(obs, rng, epsilon)

    def _explore(self, obs, rng: np.random.Generator, epsilon: Optional[float]) -> int:
        if epsilon is None:
            epsilon = getattr(self, "exploration_final_eps", 0.0)
        self._check_fitted()
        if rng.random() < epsilon:
            return int(rng.integers(self.n_actions_))
        return self.predict(obs)


def linear_schedule(start: float, end: float, fraction: float, total: int):
    """Epsilon at step t: linear from ``start`` to ``end`` over ``fraction * total`` steps."""
    horizon = max(1.0, fraction * total)

    def eps(t: int) -> float:
        return end + (start - end) * max(0.0, 1.0 - t / horizon)

    return eps


class EpisodeLog:
    """Per-episode (episode, steps, return) rows collected during training."""

    def __init__(self):
        self.rows: List[Tuple[int, int, float]] = []
        self._rewards: List[float] = []

    def add(self, reward: float) -> None:
        self._rewards.append(reward)

    def end_episode(self) -> None:
        from ..env import episode_return

        self.rows.append((len(self.rows), len(self._rewards), episode_return(self._rewards)))
        self._rewards = []


def make_train_env(env_config: EnvConfig, env_factory=None):
    """Training environment; ``env_factory(env_config)`` overrides the default."""
    if env_factory is not None:
        return env_factory(env_config)
    return AllocEnv(env_config)
