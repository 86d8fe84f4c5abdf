import numpy as np
import pytest

from pagealloc._validation import ConfigError
from pagealloc.env import AllocEnv, EnvConfig, EpisodeOver, episode_return
from pagealloc.workloads import Alloc, Free, RequestScript, WorkloadConfig


def env_for(page_size=10, action_mode="high_level", history_len=0, **kw):
    wl = kw.pop("workload", WorkloadConfig(page_size, size_range=(1, min(4, page_size))))
    return AllocEnv(EnvConfig(page_size, action_mode, history_len, workload=wl, **kw))


def scripted(env, events, seed=0):
    return env.reset(seed=seed, script=RequestScript(events, "random_segment", env.config.page_size))


def test_reset_shapes():
    obs = env_for().reset(seed=1)
    assert obs.shape == (11,) and not obs[:10].any() and 1 <= obs[10] <= 4
    wl = WorkloadConfig(256)
    obs = AllocEnv(EnvConfig(256, history_len=10, workload=wl)).reset(seed=1)
    assert obs.shape == (267,) and not obs[257:].any()


def test_reset_deterministic():
    a, b = env_for(), env_for()
    assert (a.reset(seed=9) == b.reset(seed=9)).all()


def test_high_level_examples():
    env = env_for()
    scripted(env, [Alloc(4, "a")])
    res = env.step_high(0)
    assert res.info["placement"] == 0 and res.reward == 0.1 and res.info["action_valid"]

    env = env_for()
    scripted(env, [Alloc(3, "a"), Alloc(1, "b"), Alloc(2, "c"), Alloc(4, "d"),
                   Free("a"), Free("c"), Alloc(2, "x")])
    for _ in range(4):
        env.step_high(0)
    assert env.page.free_blocks() == [(0, 3), (4, 2)]
    res = env.step_high(1)
    assert res.info["placement"] == 4 and res.reward == 0.1


def test_unsatisfiable_request_terminates():
    env = env_for()
    scripted(env, [Alloc(7, "a"), Alloc(5, "b")])
    res = env.step_high(0)
    assert res.terminated and not res.truncated and res.reward == 0.1
    assert env.page.largest_free() == 3 and res.observation[10] == 5
    with pytest.raises(EpisodeOver):
        env.step_high(0)


def test_high_level_action_range():
    env = env_for()
    env.reset(seed=0)
    with pytest.raises(ValueError):
        env.step_high(3)
    with pytest.raises(ValueError):
        env.step_low(0)


def test_low_level_examples():
    env = env_for(action_mode="low_level")
    scripted(env, [Alloc(3, "a"), Alloc(2, "b")])
    res = env.step_low(0)
    assert res.reward == 0.1 and "".join(map(str, res.observation[:10])) == "1110000000"
    before = res.observation.copy()
    res = env.step_low(1)
    assert res.reward == -10.0 and not res.info["action_valid"] and res.info["placement"] is None
    assert (res.observation == before).all()
    with pytest.raises(ValueError):
        env.step_low(10)


def test_four_invalid_actions_terminate():
    env = env_for(action_mode="low_level")
    scripted(env, [Alloc(3, "a"), Alloc(2, "b")])
    env.step_low(0)
    rewards = []
    for _ in range(4):
        res = env.step_low(9)
        rewards.append(res.reward)
    assert res.terminated and episode_return(rewards) == -40.0
    assert env.invalid_steps == 4


def test_valid_step_resets_invalid_counter():
    env = env_for(action_mode="low_level")
    scripted(env, [Alloc(1, f"t{i}") for i in range(10)])
    env.step_low(9)
    for cell in range(6):
        for _ in range(3):
            res = env.step_low(9)
            assert not res.info["action_valid"] and not res.terminated
        assert env.step_low(cell).info["action_valid"]
    assert not env.done and env.invalid_steps == 18


def test_history_holds_strictly_previous_requests():
    env = env_for(action_mode="low_level", history_len=3)
    obs = scripted(env, [Alloc(1, "a"), Alloc(2, "b"), Alloc(3, "c")])
    assert list(obs[10:]) == [1, 0, 0, 0]
    obs = env.step_low(0).observation
    assert list(obs[10:]) == [2, 1, 0, 0]
    # invalid steps leave history alone
    obs = env.step_low(0).observation
    assert list(obs[10:]) == [2, 1, 0, 0]
    obs = env.step_low(1).observation
    assert list(obs[10:]) == [3, 2, 1, 0]


def test_truncation():
    wl = WorkloadConfig(10, p_free=0.9, p_alloc=0.1, size_range=(1, 1))
    env = env_for(workload=wl, max_episode_steps=5)
    env.reset(seed=0)
    results = [env.step_high(0) for _ in range(5)]
    assert results[-1].truncated and not results[-1].terminated
    assert not any(r.truncated for r in results[:-1])


def test_config_validation():
    with pytest.raises(ConfigError):
        EnvConfig(10, workload=WorkloadConfig(12))
    with pytest.raises(ConfigError):
        EnvConfig(10, history_len=-1)
    with pytest.raises(ConfigError):
        EnvConfig(10, action_mode="mid_level")
    cfg = EnvConfig(10, "low_level", 5)
    assert cfg.obs_dim == 16 and cfg.n_actions == 10


def test_episode_return_examples():
    assert episode_return([0.1] * 30) == 3.0
    assert episode_return([]) == 0.0


@pytest.mark.parametrize("mode", ["high_level", "low_level"])
def test_random_rollouts_keep_invariants(mode):
    rng = np.random.default_rng(0)
    for ep in range(50):
        env = env_for(action_mode=mode, history_len=2)
        twin = env_for(action_mode=mode, history_len=2)
        obs = env.reset(seed=ep)
        assert (twin.reset(seed=ep) == obs).all()
        rewards = []
        while True:
            assert env.page.can_satisfy(int(obs[10])) and obs.shape == (13,)
            action = int(rng.integers(env.config.n_actions))
            res = env.step(action)
            res2 = twin.step(action)
            assert (res.observation == res2.observation).all() and res.reward == res2.reward
            rewards.append(res.reward)
            obs = res.observation
            if res.terminated or res.truncated:
                break
        assert episode_return(rewards) == pytest.approx(
            0.1 * env.valid_steps - 10.0 * env.invalid_steps, abs=1e-12
        )
