"""Run configuration files.

Format: UTF-8 text, one ``section.key = value`` per line, ``#`` starts a
comment. Sections are ``env``, ``workload``, ``train``, ``eval`` and ``run``.
Every key has a default, so an empty file is a valid configuration. Tuples
are written comma separated (``workload.size_range = 1,32``).

The manifest written next to every run is the same format with every value
resolved, so ``--config run-manifest.cfg`` reproduces the run.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from typing import Dict, Optional, Tuple

from . import seeding
from ._validation import ConfigError, check_choice, check_positive_int
from .agents import AGENT_CLASSES
from .env import EnvConfig
from .workloads import WorkloadConfig


def _int_tuple(text: str) -> Tuple[int, ...]:
    text = text.strip().strip("()[]")
    if not text:
        return ()
    return tuple(int(part) for part in text.split(","))


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _str(text: str) -> str:
    return text.strip()


# train keys that map one-to-one onto estimator parameters
TRAIN_PARAM_KEYS = {
    "total_timesteps": int,
    "learning_rate": float,
    "discount": float,
    "exploration_initial_eps": float,
    "exploration_final_eps": float,
    "exploration_fraction": float,
    "batch_size": int,
    "buffer_size": int,
    "learning_starts": int,
    "target_update_interval": int,
    "train_freq": int,
    "n_steps": int,
    "n_epochs": int,
    "clip_range": float,
    "gae_lambda": float,
    "vf_coef": float,
    "ent_coef": float,
    "max_grad_norm": float,
    "hidden_sizes": _int_tuple,
    "ortho_init": _bool,
}

SCHEMA = {
    "env": {
        "page_size": int,
        "action_mode": _str,
        "history_len": int,
        "step_reward": float,
        "invalid_penalty": float,
        "max_consecutive_invalid": int,
        "max_episode_steps": int,
    },
    "workload": {
        "mode": _str,
        "p_free": float,
        "p_alloc": float,
        "size_range": _int_tuple,
        "segment_random_len": int,
    },
    "train": {"agent": _str, **TRAIN_PARAM_KEYS},
    "eval": {
        "sessions": int,
        "rollouts": int,
        "baselines": _bool,
        "history_lens": _int_tuple,
    },
    "run": {
        "seed": int,
        "output_dir": _str,
    },
}


def parse_config_text(text: str) -> Dict[str, str]:
    """Raw ``{dotted_key: value_text}`` mapping; later lines override earlier ones."""
    out: Dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", f"expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        section, _, name = key.partition(".")
        if section not in SCHEMA or name not in SCHEMA[section]:
            raise ConfigError(key, "unknown configuration key")
        out[key] = value
    return out


@dataclass
class TrainConfig:
    agent: str = "dqn"
    params: Dict[str, object] = field(default_factory=dict)

    def __post_init__(self):
        check_choice(self.agent, "train.agent", tuple(AGENT_CLASSES))
        cls = AGENT_CLASSES[self.agent]
        defaults = cls().get_params()
        for key in self.params:
            if key not in defaults:
                raise ConfigError(f"train.{key}", f"not a parameter of agent {self.agent!r}")
        # resolve every parameter so the manifest is complete
        resolved = {k: v for k, v in defaults.items() if k != "seed"}
        resolved.update(self.params)
        if "hidden_sizes" in resolved:
            resolved["hidden_sizes"] = tuple(resolved["hidden_sizes"])
        for key in ("total_timesteps", "batch_size", "buffer_size", "n_steps", "n_epochs",
                    "train_freq", "target_update_interval"):
            if key in resolved:
                check_positive_int(resolved[key], f"train.{key}")
        if "learning_starts" in resolved:
            check_positive_int(resolved["learning_starts"], "train.learning_starts", minimum=0)
        if "exploration_final_eps" in resolved and resolved["exploration_final_eps"] > resolved["exploration_initial_eps"]:
            raise ConfigError(("train.exploration_final_eps", "train.exploration_initial_eps"),
                              "final epsilon must not exceed the initial epsilon")
        self.params = resolved

    def build(self, seed: int):
        return AGENT_CLASSES[self.agent](seed=seed, **self.params)


@dataclass
class EvalConfig:
    sessions: int = 5
    rollouts: int = 100
    baselines: bool = True
    history_lens: Tuple[int, ...] = (0, 5, 10)

    def __post_init__(self):
        self.sessions = check_positive_int(self.sessions, "eval.sessions")
        self.rollouts = check_positive_int(self.rollouts, "eval.rollouts")
        self.history_lens = tuple(check_positive_int(h, "eval.history_lens", minimum=0)
                                  for h in self.history_lens)


@dataclass
class RunConfig:
    env: EnvConfig
    train: TrainConfig
    eval: EvalConfig
    seed: int = 0
    output_dir: str = "runs/default"

    def agent_seed(self) -> int:
        return seeding.derive_seed(self.seed, seeding.AGENT)

    def to_text(self) -> str:
        return dumps_config(self)


def _convert(key: str, raw: str):
    section, _, name = key.partition(".")
    try:
        return SCHEMA[section][name](raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(key, f"cannot parse {raw!r}: {exc}") from None


def config_from_mapping(raw: Dict[str, str], default_seed: int = 0) -> RunConfig:
    values = {key: _convert(key, text) for key, text in raw.items()}
    by_section: Dict[str, Dict[str, object]] = {s: {} for s in SCHEMA}
    for key, value in values.items():
        section, _, name = key.partition(".")
        by_section[section][name] = value
    env_kw = by_section["env"]
    page_size = env_kw.get("page_size", 10)
    workload = WorkloadConfig(page_size=page_size, **by_section["workload"])
    env = EnvConfig(workload=workload, **env_kw)
    train_kw = dict(by_section["train"])
    agent = train_kw.pop("agent", "dqn")
    train = TrainConfig(agent=agent, params=train_kw)
    ev = EvalConfig(**by_section["eval"])
    run = by_section["run"]
    seed = run.get("seed", default_seed)
    return RunConfig(env=env, train=train, eval=ev, seed=seed,
                     output_dir=run.get("output_dir", "runs/default"))


def loads_config(text: str, default_seed: Optional[int] = None) -> RunConfig:
    if default_seed is None:
        default_seed = seeding.default_seed()
    return config_from_mapping(parse_config_text(text), default_seed)


def load_config(path, default_seed: Optional[int] = None) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return loads_config(fh.read(), default_seed)


def _render(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (tuple, list)):
        return ",".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def dumps_config(cfg: RunConfig) -> str:
    env, wl = cfg.env, cfg.env.workload
    lines = []
    for name in SCHEMA["env"]:
        lines.append(f"env.{name} = {_render(getattr(env, name))}")
    for name in SCHEMA["workload"]:
        lines.append(f"workload.{name} = {_render(getattr(wl, name))}")
    lines.append(f"train.agent = {cfg.train.agent}")
    for name, value in cfg.train.params.items():
        lines.append(f"train.{name} = {_render(value)}")
    for f in fields(cfg.eval):
        lines.append(f"eval.{f.name} = {_render(getattr(cfg.eval, f.name))}")
    lines.append(f"run.seed = {cfg.seed}")
    lines.append(f"run.output_dir = {cfg.output_dir}")
    return "\n".join(lines) + "\n"
