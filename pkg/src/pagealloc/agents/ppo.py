from __future__ import annotations

import numpy as np

from .. import seeding
from ..nn import AdamState, adam_step, clip_grad_norm, mlp, orthogonal_
from .base import BasePolicy, EpisodeLog, make_train_env


def log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def compute_gae(rewards, values, next_values, terminated, dones, gamma: float, lam: float):
    """Generalized advantage estimates and value targets for one rollout.

    ``next_values[t]`` is the critic's value of the state reached after step
    ``t``; it is ignored when ``terminated[t]``. ``dones[t]`` marks any episode
    boundary after step ``t`` (termination or truncation) and stops the
    advantage recursion there.
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    n = len(rewards)
    adv = np.zeros(n)
    running = 0.0
    for t in range(n - 1, -1, -1):
        bootstrap = 0.0 if terminated[t] else next_values[t]
        delta = rewards[t] + gamma * bootstrap - values[t]
        if dones[t]:
            running = 0.0
        running = delta + gamma * lam * running
        adv[t] = running
    return adv, adv + values


def clipped_surrogate(logp_new, logp_old, advantages, clip_range: float):
    """Per-sample ``min(r A, clip(r, 1 - eps, 1 + eps) A)`` and its derivative w.r.t. ``logp_new``."""
    ratio = np.exp(np.asarray(logp_new) - np.asarray(logp_old))
    unclipped = ratio * advantages
    clipped = np.clip(ratio, 1.0 - clip_range, 1.0 + clip_range) * advantages
    surrogate = np.minimum(unclipped, clipped)
    # gradient flows through the ratio unless the clipped branch is active and binding
    active = (unclipped <= clipped) | ((ratio >= 1.0 - clip_range) & (ratio <= 1.0 + clip_range))
    return surrogate, np.where(active, unclipped, 0.0)


class PPOAgent(BasePolicy):
    """PPO with separate tanh actor and critic MLPs for the low-level action space.

    Acting greedily takes the argmax of the actor's logits; exploration
    samples the softmax.
    """

    kind = "ppo"
    action_modes = ("low_level",)

    def __init__(self, learning_rate=3e-4, discount=0.99, total_timesteps=200000,
                 n_steps=2048, batch_size=64, n_epochs=10, gae_lambda=0.95,
                 clip_range=0.2, vf_coef=0.5, ent_coef=0.0, max_grad_norm=0.5,
                 hidden_sizes=(64, 64), ortho_init=True, seed=0):
        self.learning_rate = learning_rate
        self.discount = discount
        self.total_timesteps = total_timesteps
        self.n_steps = n_steps
        self.batch_size = batch_size
        self.n_epochs = n_epochs
        self.gae_lambda = gae_lambda
        self.clip_range = clip_range
        self.vf_coef = vf_coef
        self.ent_coef = ent_coef
        self.max_grad_norm = max_grad_norm
        self.hidden_sizes = hidden_sizes
        self.ortho_init = ortho_init
        self.seed = seed

    def _init_networks(self) -> None:
        init_rng = seeding.make_rng(self.seed, seeding.INIT)
        hidden = list(self.hidden_sizes)
        self.actor_ = mlp(self.n_features_in_, hidden, self.n_actions_, "tanh", init_rng)
        self.critic_ = mlp(self.n_features_in_, hidden, 1, "tanh", init_rng)
        if self.ortho_init:
            # hidden gain sqrt(2), near-uniform initial policy, unit-scale value head
            hidden_gains = [np.sqrt(2.0)] * len(hidden)
            orthogonal_(self.actor_, hidden_gains + [0.01], init_rng)
            orthogonal_(self.critic_, hidden_gains + [1.0], init_rng)

    def fit(self, env_config, y=None, env_factory=None):
        self._check_env_config(env_config)
        self._set_env_attrs(env_config)
        self._init_networks()
        rng = seeding.make_rng(self.seed, seeding.AGENT)
        params = self.actor_.params() + self.critic_.params()
        n_actor = len(self.actor_.params())
        opt = AdamState.for_params(params, lr=self.learning_rate, eps=1e-5)
        log = EpisodeLog()
        env = make_train_env(env_config, env_factory)
        episode = 0
        obs = env.reset(seed=seeding.derive_seed(self.seed, seeding.TRAIN_EPISODES, episode))
        dim = self.n_features_in_
        t = 0
        while t < self.total_timesteps:
            n = min(self.n_steps, self.total_timesteps - t)
            buf_obs = np.zeros((n, dim))
            actions = np.zeros(n, dtype=np.int64)
            logps = np.zeros(n)
            rewards = np.zeros(n)
            values = np.zeros(n)
            next_values = np.zeros(n)
            terminated = np.zeros(n, dtype=bool)
            dones = np.zeros(n, dtype=bool)
            for i in range(n):
                x = self.scale(obs)
                logp_all = log_softmax(self.actor_.predict(x))
                action = int(rng.choice(self.n_actions_, p=np.exp(logp_all)))
                buf_obs[i] = x
                actions[i] = action
                logps[i] = logp_all[action]
                values[i] = self.critic_.predict(x)[0]
                res = env.step(action)
                rewards[i] = res.reward
                terminated[i] = res.terminated
                dones[i] = res.terminated or res.truncated
                log.add(res.reward)
                if not res.terminated:
                    next_values[i] = self.critic_.predict(self.scale(res.observation))[0]
                if dones[i]:
                    log.end_episode()
                    episode += 1
                    obs = env.reset(seed=seeding.derive_seed(self.seed, seeding.TRAIN_EPISODES, episode))
                else:
                    obs = res.observation
            t += n
            adv, returns = compute_gae(rewards, values, next_values, terminated, dones,
                                       self.discount, self.gae_lambda)
            self._update(buf_obs, actions, logps, adv, returns, params, n_actor, opt, rng)
        self.training_log_ = log.rows
        return self

    def _update(self, obs, actions, old_logp, adv, returns, params, n_actor, opt, rng) -> None:
        n = len(actions)
        for _ in range(self.n_epochs):
            order = rng.permutation(n)
            for lo in range(0, n, self.batch_size):
                idx = order[lo:lo + self.batch_size]
                b = len(idx)
                a = adv[idx]
                if b > 1:
                    a = (a - a.mean()) / (a.std() + 1e-8)
                logits, a_cache = self.actor_.forward(obs[idx])
                logp_all = log_softmax(logits)
                rows = np.arange(b)
                logp = logp_all[rows, actions[idx]]
                _, dsurr = clipped_surrogate(logp, old_logp[idx], a, self.clip_range)
                probs = np.exp(logp_all)
                onehot = np.zeros_like(logits)
                onehot[rows, actions[idx]] = 1.0
                # loss = -mean(surrogate) - ent_coef * mean(entropy)
                g_logits = (-dsurr / b)[:, None] * (onehot - probs)
                if self.ent_coef:
                    entropy = -(probs * logp_all).sum(axis=1, keepdims=True)
                    g_logits += self.ent_coef / b * probs * (logp_all + entropy)
                a_grads, _ = self.actor_.backward(a_cache, g_logits)
                v, c_cache = self.critic_.forward(obs[idx])
                g_v = self.vf_coef * 2.0 * (v[:, 0] - returns[idx]) / b
                c_grads, _ = self.critic_.backward(c_cache, g_v[:, None])
                grads = a_grads + c_grads
                clip_grad_norm(grads, self.max_grad_norm)
                adam_step(params, grads, opt)

    def action_scores(self, X: np.ndarray) -> np.ndarray:
        return self.actor_.predict(self.scale(X))

    def action_probabilities(self, X) -> np.ndarray:
        arr, single = self._validate_obs(X)
        p = np.exp(log_softmax(self.action_scores(arr)))
        return p[0] if single else p

    def _explore(self, obs, rng, epsilon=None) -> int:
        p = self.action_probabilities(obs)
        return int(rng.choice(self.n_actions_, p=p))
