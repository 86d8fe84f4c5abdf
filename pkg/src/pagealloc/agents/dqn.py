from __future__ import annotations

import numpy as np

from .. import seeding
from ..nn import AdamState, adam_step, clip_grad_norm, mlp
from .base import BasePolicy, EpisodeLog, linear_schedule, make_train_env


class ReplayBuffer:
    """Fixed-capacity ring of transitions; raw observations stored as int32."""

    def __init__(self, capacity: int, obs_dim: int):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self.obs = np.zeros((capacity, obs_dim), dtype=np.int32)
        self.next_obs = np.zeros((capacity, obs_dim), dtype=np.int32)
        self.actions = np.zeros(capacity, dtype=np.int64)
        self.rewards = np.zeros(capacity, dtype=np.float64)
        self.terminated = np.zeros(capacity, dtype=np.bool_)
        self.pos = 0
        self.size = 0

    def __len__(self) -> int:
        return self.size

    def add(self, obs, action, reward, next_obs, terminated) -> None:
        i = self.pos
        self.obs[i] = obs
        self.next_obs[i] = next_obs
        self.actions[i] = action
        self.rewards[i] = reward
        self.terminated[i] = terminated
        self.pos = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample_indices(self, batch_size: int, rng: np.random.Generator) -> np.ndarray:
        """Uniform indices, distinct within the batch."""
        if batch_size > self.size:
            raise ValueError(f"cannot draw {batch_size} distinct transitions from {self.size}")
        idx = rng.integers(0, self.size, size=batch_size)
        while len(np.unique(idx)) < batch_size:
            # rare at realistic buffer sizes; redraw collisions
            _, first = np.unique(idx, return_index=True)
            dup = np.setdiff1d(np.arange(batch_size), first)
            idx[dup] = rng.integers(0, self.size, size=dup.size)
        return idx

    def sample(self, batch_size: int, rng: np.random.Generator):
        idx = self.sample_indices(batch_size, rng)
        return (self.obs[idx], self.actions[idx], self.rewards[idx],
                self.next_obs[idx], self.terminated[idx])


def huber_grad(diff: np.ndarray, delta: float = 1.0) -> np.ndarray:
    return np.clip(diff, -delta, delta)


def huber_loss(diff: np.ndarray, delta: float = 1.0) -> float:
    a = np.abs(diff)
    return float(np.mean(np.where(a <= delta, 0.5 * diff * diff, delta * (a - 0.5 * delta))))


class DQNAgent(BasePolicy):
    """Deep Q-learning over the scaled observation with a ReLU MLP.

    Uses an experience replay buffer, a hard-synced target network and the
    Huber TD loss. The first ``learning_starts`` steps act uniformly at random.
    """

    kind = "dqn"
    action_modes = ("high_level",)

    def __init__(self, learning_rate=1e-4, discount=0.99, total_timesteps=50000,
                 batch_size=32, buffer_size=50000, learning_starts=1000,
                 target_update_interval=1000, train_freq=4,
                 exploration_initial_eps=1.0, exploration_final_eps=0.05,
                 exploration_fraction=0.1, hidden_sizes=(32, 32), max_grad_norm=10.0,
                 seed=0):
        self.learning_rate = learning_rate
        self.discount = discount
        self.total_timesteps = total_timesteps
        self.batch_size = batch_size
        self.buffer_size = buffer_size
        self.learning_starts = learning_starts
        self.target_update_interval = target_update_interval
        self.train_freq = train_freq
        self.exploration_initial_eps = exploration_initial_eps
        self.exploration_final_eps = exploration_final_eps
        self.exploration_fraction = exploration_fraction
        self.hidden_sizes = hidden_sizes
        self.max_grad_norm = max_grad_norm
        self.seed = seed

    def _init_networks(self) -> None:
        init_rng = seeding.make_rng(self.seed, seeding.INIT)
        self.q_net_ = mlp(self.n_features_in_, list(self.hidden_sizes), self.n_actions_, "relu", init_rng)
        self.target_net_ = self.q_net_.copy()

    def fit(self, env_config, y=None, env_factory=None):
        self._check_env_config(env_config)
        self._set_env_attrs(env_config)
        self._init_networks()
        rng = seeding.make_rng(self.seed, seeding.AGENT)
        eps = linear_schedule(self.exploration_initial_eps, self.exploration_final_eps,
                              self.exploration_fraction, self.total_timesteps)
        opt = AdamState.for_params(self.q_net_.params(), lr=self.learning_rate)
        buf = ReplayBuffer(min(self.buffer_size, max(self.total_timesteps, 1)), self.n_features_in_)
        log = EpisodeLog()
        self.sync_steps_ = []
        env = make_train_env(env_config, env_factory)
        episode = 0
        obs = env.reset(seed=seeding.derive_seed(self.seed, seeding.TRAIN_EPISODES, episode))
        for t in range(self.total_timesteps):
            if t < self.learning_starts or rng.random() < eps(t):
                action = int(rng.integers(self.n_actions_))
            else:
                action = int(np.argmax(self.q_net_.predict(self.scale(obs))))
            res = env.step(action)
            buf.add(obs, action, res.reward, res.observation, res.terminated)
            log.add(res.reward)
            if res.terminated or res.truncated:
                log.end_episode()
                episode += 1
                obs = env.reset(seed=seeding.derive_seed(self.seed, seeding.TRAIN_EPISODES, episode))
            else:
                obs = res.observation
            if t + 1 > self.learning_starts and (t + 1) % self.train_freq == 0 and len(buf) >= self.batch_size:
                self._train_step(buf, opt, rng)
            if (t + 1) % self.target_update_interval == 0:
                self.target_net_.load_params(self.q_net_.params())
                self.sync_steps_.append(t + 1)
        self.training_log_ = log.rows
        return self

    def _train_step(self, buf: ReplayBuffer, opt: AdamState, rng: np.random.Generator) -> float:
        obs, actions, rewards, next_obs, terminated = buf.sample(self.batch_size, rng)
        q_next = self.target_net_.predict(self.scale(next_obs)).max(axis=1)
        target = rewards + self.discount * (1.0 - terminated) * q_next
        q, cache = self.q_net_.forward(self.scale(obs))
        rows = np.arange(len(actions))
        diff = q[rows, actions] - target
        grad_out = np.zeros_like(q)
        grad_out[rows, actions] = huber_grad(diff) / len(actions)
        grads, _ = self.q_net_.backward(cache, grad_out)
        clip_grad_norm(grads, self.max_grad_norm)
        adam_step(self.q_net_.params(), grads, opt)
        return huber_loss(diff)

    def action_scores(self, X: np.ndarray) -> np.ndarray:
        return self.q_net_.predict(self.scale(X))
