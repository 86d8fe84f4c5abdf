"""Rollout batteries, normal-approximation confidence intervals and policy comparison."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from sklearn.base import clone

from . import seeding
from .env import AllocEnv, EnvConfig, episode_return

Z95 = 1.96
SUMMARY_COLUMNS = ("policy", "session", "n", "mean", "ci_low", "ci_high",
                   "mean_episode_len", "invalid_rate", "invalid_episode_rate")
EPISODE_COLUMNS = ("policy", "session", "episode", "return", "length", "valid_steps",
                   "invalid_steps", "terminated", "truncated")


class InsufficientData(ValueError):
    pass


@dataclass
class EpisodeResult:
    ret: float
    length: int
    valid_steps: int
    invalid_steps: int
    terminated: bool
    truncated: bool


def run_episode(policy, env: AllocEnv, seed: int) -> EpisodeResult:
    obs = env.reset(seed=seed)
    rewards = []
    while True:
        res = env.step(policy.predict(obs))
        rewards.append(res.reward)
        if res.terminated or res.truncated:
            return EpisodeResult(episode_return(rewards), len(rewards), env.valid_steps,
                                 env.invalid_steps, res.terminated, res.truncated)
        obs = res.observation


def episode_seed(seed: int, i: int) -> int:
    return seeding.derive_seed(seed, seeding.EVAL_EPISODES, i)


def rollout_details(policy, env_config: EnvConfig, n: int, seed: int) -> List[EpisodeResult]:
    """Greedy episodes; episode ``i`` uses a seed derived from ``(seed, i)``.

    Every policy evaluated with the same ``seed`` therefore faces the same
    workload draws.
    """
    if getattr(policy, "action_mode_", env_config.action_mode) != env_config.action_mode:
        raise ValueError("policy and environment action modes differ")
    env = AllocEnv(env_config)
    return [run_episode(policy, env, episode_seed(seed, i)) for i in range(n)]


def rollout_battery(policy, env_config: EnvConfig, n: int, seed: int) -> List[float]:
    return [r.ret for r in rollout_details(policy, env_config, n, seed)]


def ci95(returns: Sequence[float]) -> Tuple[float, float, float]:
    """Mean and ``mean -+ 1.96 s / sqrt(n)`` with the n-1 sample deviation."""
    x = np.asarray(returns, dtype=np.float64)
    if x.size < 2:
        raise InsufficientData(f"need at least 2 returns for an interval, got {x.size}")
    mean = float(x.mean())
    half = Z95 * float(x.std(ddof=1)) / math.sqrt(x.size)
    return mean, mean - half, mean + half


@dataclass
class EvalReport:
    policy: str
    session: object
    returns: List[float]
    mean: float
    ci_low: float
    ci_high: float
    mean_episode_len: float
    invalid_rate: float
    invalid_episode_rate: float
    degenerate_ci: bool = False
    episodes: List[EpisodeResult] = field(default_factory=list, repr=False)

    @property
    def n_rollouts(self) -> int:
        return len(self.returns)

    @classmethod
    def from_episodes(cls, policy: str, session, episodes: List[EpisodeResult]) -> "EvalReport":
        returns = [e.ret for e in episodes]
        try:
            mean, lo, hi = ci95(returns)
            degenerate = False
        except InsufficientData:
            mean = float(np.mean(returns)) if returns else math.nan
            lo = hi = math.nan
            degenerate = True
        steps = sum(e.length for e in episodes)
        invalid = sum(e.invalid_steps for e in episodes)
        n = max(len(episodes), 1)
        return cls(
            policy=policy,
            session=session,
            returns=returns,
            mean=mean,
            ci_low=lo,
            ci_high=hi,
            mean_episode_len=steps / n,
            invalid_rate=invalid / steps if steps else 0.0,
            invalid_episode_rate=sum(e.invalid_steps > 0 for e in episodes) / n,
            degenerate_ci=degenerate,
            episodes=episodes,
        )

    def row(self) -> Dict[str, object]:
        return {
            "policy": self.policy,
            "session": self.session,
            "n": self.n_rollouts,
            "mean": self.mean,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "mean_episode_len": self.mean_episode_len,
            "invalid_rate": self.invalid_rate,
            "invalid_episode_rate": self.invalid_episode_rate,
        }


def evaluate(policy, env_config: EnvConfig, n: int, seed: int,
             name: Optional[str] = None, session=0) -> EvalReport:
    episodes = rollout_details(policy, env_config, n, seed)
    return EvalReport.from_episodes(name or policy_name(policy), session, episodes)


def policy_name(policy) -> str:
    return getattr(policy, "kind", type(policy).__name__)


def _is_fitted(policy) -> bool:
    return hasattr(policy, "page_size_")


@dataclass
class Comparison:
    sessions: List[EvalReport]
    aggregate: List[EvalReport]

    def by_policy(self, name: str) -> List[EvalReport]:
        return [r for r in self.sessions if r.policy == name]

    def aggregate_for(self, name: str) -> EvalReport:
        for r in self.aggregate:
            if r.policy == name:
                return r
        raise KeyError(name)


def session_seed(seed: int, session: int) -> int:
    return seeding.derive_seed(seed, seeding.SESSION, session)


def compare(policies: Sequence, env_config: EnvConfig, sessions: int, rollouts: int, seed: int,
            names: Optional[Sequence[str]] = None) -> Comparison:
    """Evaluate every policy on the same per-session episode seeds.

    Unfitted trainable policies are cloned and trained once per session with
    a seed derived from ``(seed, session)``; fitted ones are evaluated as
    they are. Fixed baselines are fitted (a no-op) and evaluated per session.
    Aggregate reports pool the returns of all sessions.
    """
    names = list(names) if names is not None else [policy_name(p) for p in policies]
    if len(set(names)) != len(names):
        raise ValueError(f"policy names must be unique, got {names}")
    reports: List[EvalReport] = []
    for s in range(sessions):
        s_seed = session_seed(seed, s)
        for name, template in zip(names, policies):
            if getattr(template, "trainable", False) and not _is_fitted(template):
                policy = clone(template).set_params(
                    seed=seeding.derive_seed(s_seed, seeding.AGENT)
                ).fit(env_config)
            elif not _is_fitted(template):
                policy = clone(template).fit(env_config)
            else:
                policy = template
            reports.append(evaluate(policy, env_config, rollouts, s_seed, name, s))
    aggregate = []
    for name in names:
        episodes = [e for r in reports if r.policy == name for e in r.episodes]
        aggregate.append(EvalReport.from_episodes(name, "all", episodes))
    return Comparison(reports, aggregate)


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_summary_csv(reports: Sequence[EvalReport], path, extra: Optional[Dict[str, object]] = None) -> None:
    extra = extra or {}
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(list(extra) + list(SUMMARY_COLUMNS))
        for r in reports:
            row = r.row()
            writer.writerow([_fmt(v) for v in extra.values()] + [_fmt(row[c]) for c in SUMMARY_COLUMNS])


def write_episodes_csv(reports: Sequence[EvalReport], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(EPISODE_COLUMNS)
        for r in reports:
            for i, e in enumerate(r.episodes):
                writer.writerow([r.policy, r.session, i, _fmt(e.ret), e.length, e.valid_steps,
                                 e.invalid_steps, int(e.terminated), int(e.truncated)])
