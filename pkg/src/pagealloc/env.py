"""Single-page allocation MDP with high-level (fit choice) or low-level (start cell) actions."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import baselines, seeding
from ._validation import ConfigError, check_choice, check_positive_int
from .page import PageState
from .workloads import RequestScript, Workload, WorkloadConfig

ACTION_MODES = ("high_level", "low_level")
N_HIGH_LEVEL_ACTIONS = len(baselines.HIGH_LEVEL_KINDS)


@dataclass
class EnvConfig:
    page_size: int = 10
    action_mode: str = "high_level"
    history_len: int = 0
    workload: Optional[WorkloadConfig] = None
    step_reward: float = 0.1
    invalid_penalty: float = -10.0
    max_consecutive_invalid: int = 4
    max_episode_steps: int = 2000
    seed: int = 0

    def __post_init__(self):
        self.page_size = check_positive_int(self.page_size, "env.page_size")
        check_choice(self.action_mode, "env.action_mode", ACTION_MODES)
        self.history_len = check_positive_int(self.history_len, "env.history_len", minimum=0)
        if self.workload is None:
            self.workload = WorkloadConfig(self.page_size)
        if self.workload.page_size != self.page_size:
            raise ConfigError(
                ("env.page_size", "workload.page_size"),
                f"disagree: {self.page_size} vs {self.workload.page_size}",
            )
        self.step_reward = float(self.step_reward)
        self.invalid_penalty = float(self.invalid_penalty)
        self.max_consecutive_invalid = check_positive_int(
            self.max_consecutive_invalid, "env.max_consecutive_invalid"
        )
        self.max_episode_steps = check_positive_int(self.max_episode_steps, "env.max_episode_steps")

    @property
    def obs_dim(self) -> int:
        return self.page_size + 1 + self.history_len

    @property
    def n_actions(self) -> int:
        return N_HIGH_LEVEL_ACTIONS if self.action_mode == "high_level" else self.page_size


@dataclass
class StepResult:
    observation: np.ndarray
    reward: float
    terminated: bool
    truncated: bool
    info: dict = field(default_factory=dict)


class EpisodeOver(RuntimeError):
    pass


class AllocEnv:
    """reset/step interface over a :class:`PageState` and a :class:`Workload`.

    Observations are raw int64 vectors: the bitmap, the current request size,
    then ``history_len`` previous request sizes (most recent first, zero
    padded). The environment terminates instead of presenting a request that
    no free block can hold.
    """

    def __init__(self, config: EnvConfig):
        self.config = config
        self.page: Optional[PageState] = None
        self.workload: Optional[Workload] = None
        self.request = 0
        self.history = np.zeros(config.history_len, dtype=np.int64)
        self.done = True
        self.steps = 0
        self.valid_steps = 0
        self.invalid_steps = 0
        self._consecutive_invalid = 0
        self._next_id = 0

    def reset(self, seed: Optional[int] = None, script: Optional[RequestScript] = None) -> np.ndarray:
        """Start an episode on an empty page.

        With ``script`` the episode first replays that script, then continues
        as the configured workload mode would after a script.
        """
        cfg = self.config
        seed = cfg.seed if seed is None else seed
        self.page = PageState(cfg.page_size)
        self.workload = Workload(cfg.workload, seeding.make_rng(seed, seeding.WORKLOAD), script=script)
        self.history = np.zeros(cfg.history_len, dtype=np.int64)
        self.steps = self.valid_steps = self.invalid_steps = 0
        self._consecutive_invalid = 0
        self._next_id = 0
        self.request, _ = self.workload.next_request(self.page)
        self.done = False
        return self.observation()

    def observation(self) -> np.ndarray:
        obs = np.empty(self.config.obs_dim, dtype=np.int64)
        n = self.config.page_size
        obs[:n] = self.page.bitmap
        obs[n] = self.request
        obs[n + 1:] = self.history
        return obs

    def step(self, action: int) -> StepResult:
        if self.config.action_mode == "high_level":
            return self.step_high(action)
        return self.step_low(action)

    def step_high(self, action: int) -> StepResult:
        if self.config.action_mode != "high_level":
            raise ValueError("step_high called on a low-level environment")
        action = int(action)
        if not 0 <= action < N_HIGH_LEVEL_ACTIONS:
            raise ValueError(f"high-level action must be in 0..{N_HIGH_LEVEL_ACTIONS - 1}, got {action}")
        self._check_running()
        start = baselines.place(baselines.HIGH_LEVEL_KINDS[action], self.page, self.request)
        # requests are only presented when satisfiable
        assert start is not None
        return self._serve(start)

    def step_low(self, action: int) -> StepResult:
        if self.config.action_mode != "low_level":
            raise ValueError("step_low called on a high-level environment")
        action = int(action)
        if not 0 <= action < self.config.page_size:
            raise ValueError(f"low-level action must be in 0..{self.config.page_size - 1}, got {action}")
        self._check_running()
        if action + self.request > self.page.page_size or self.page.bitmap[action:action + self.request].any():
            return self._reject()
        return self._serve(action)

    def _check_running(self) -> None:
        if self.done:
            raise EpisodeOver("episode has ended; call reset()")

    def _serve(self, start: int) -> StepResult:
        cfg = self.config
        block_id = self._next_id
        self._next_id += 1
        self.page.allocate(start, self.request, block_id)
        self.workload.bind(block_id)
        self.steps += 1
        self.valid_steps += 1
        self._consecutive_invalid = 0
        if cfg.history_len:
            self.history[1:] = self.history[:-1]
            self.history[0] = self.request
        self.request, frees = self.workload.next_request(self.page)
        terminated = not self.page.can_satisfy(self.request)
        truncated = not terminated and self.steps >= cfg.max_episode_steps
        self.done = terminated or truncated
        info = {"frees_applied": frees, "action_valid": True, "placement": start}
        return StepResult(self.observation(), cfg.step_reward, terminated, truncated, info)

    def _reject(self) -> StepResult:
        cfg = self.config
        self.steps += 1
        self.invalid_steps += 1
        self._consecutive_invalid += 1
        terminated = self._consecutive_invalid >= cfg.max_consecutive_invalid
        truncated = not terminated and self.steps >= cfg.max_episode_steps
        self.done = terminated or truncated
        info = {"frees_applied": 0, "action_valid": False, "placement": None}
        return StepResult(self.observation(), cfg.invalid_penalty, terminated, truncated, info)


def episode_return(rewards: Sequence[float]) -> float:
    """Undiscounted return, correctly rounded regardless of summation order."""
    return math.fsum(rewards)


def make_env(config: EnvConfig) -> AllocEnv:
    return AllocEnv(config)
