from __future__ import annotations

import numpy as np

from .. import baselines
from ..features import page_from_observation
from .base import BasePolicy


class FixedFitPolicy(BasePolicy):
    """Always apply one fit heuristic.

    In high-level mode the action is the heuristic's index (first=0, best=1,
    worst=2). In low-level mode the heuristic is run on the observed bitmap
    and its start cell is the action. ``fit`` only records the environment
    shape.
    """

    trainable = False

    def __init__(self, fit_kind: str = "first", action_mode: str = "high_level"):
        self.fit_kind = fit_kind
        self.action_mode = action_mode

    @property
    def kind(self) -> str:
        return f"{self.fit_kind}_fit"

    def fit(self, env_config, y=None):
        if self.fit_kind not in baselines.HIGH_LEVEL_KINDS:
            raise ValueError(f"fit_kind must be one of {baselines.HIGH_LEVEL_KINDS}, got {self.fit_kind!r}")
        self._check_env_config(env_config)
        if env_config.action_mode != self.action_mode:
            raise ValueError(
                f"policy action_mode {self.action_mode!r} does not match env {env_config.action_mode!r}"
            )
        self._set_env_attrs(env_config)
        return self

    def action_scores(self, X: np.ndarray) -> np.ndarray:
        scores = np.zeros((X.shape[0], self.n_actions_))
        if self.action_mode_ == "high_level":
            scores[:, baselines.HIGH_LEVEL_KINDS.index(self.fit_kind)] = 1.0
            return scores
        for i, obs in enumerate(X):
            page = page_from_observation(obs, self.page_size_)
            start = baselines.place(self.fit_kind, page, int(obs[self.page_size_]))
            # unsatisfiable request: any action is equally invalid
            if start is not None:
                scores[i, start] = 1.0
        return scores
