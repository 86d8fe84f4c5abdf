"""Policy checkpoints as canonical JSON documents.

Keys are written in a fixed order and floats use Python's shortest
round-trip repr, so loading a checkpoint and writing it again reproduces it
byte for byte.
"""

from __future__ import annotations

import json

import numpy as np

from .agents import AGENT_CLASSES, FixedFitPolicy
from .nn import net_from_dict, net_to_dict

FORMAT_VERSION = 1


class ArtifactError(ValueError):
    pass


def _jsonable(value):
    if isinstance(value, tuple):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.generic):
        return value.item()
    return value


def policy_to_document(policy) -> dict:
    if not hasattr(policy, "page_size_"):
        raise ArtifactError("only fitted policies can be serialized")
    params = {k: _jsonable(v) for k, v in policy.get_params().items()}
    doc = {
        "format_version": FORMAT_VERSION,
        "kind": policy.kind,
        "action_mode": policy.action_mode_,
        "page_size": policy.page_size_,
        "history_len": policy.history_len_,
        "params": params,
        "seed": params.get("seed"),
    }
    if isinstance(policy, FixedFitPolicy):
        doc["architecture"] = {"fit_kind": policy.fit_kind}
        doc["weights"] = {}
    elif policy.kind == "linear_q":
        doc["architecture"] = {"n_actions": policy.weights_.shape[0],
                               "n_features": policy.weights_.shape[1]}
        doc["weights"] = {"linear": policy.weights_.tolist()}
    elif policy.kind == "dqn":
        online, target = net_to_dict(policy.q_net_), net_to_dict(policy.target_net_)
        doc["architecture"] = {"dims": online["dims"], "activations": online["activations"]}
        doc["weights"] = {"online": online["layers"], "target": target["layers"]}
    elif policy.kind == "ppo":
        actor, critic = net_to_dict(policy.actor_), net_to_dict(policy.critic_)
        doc["architecture"] = {
            "actor": {"dims": actor["dims"], "activations": actor["activations"]},
            "critic": {"dims": critic["dims"], "activations": critic["activations"]},
        }
        doc["weights"] = {"actor": actor["layers"], "critic": critic["layers"]}
    else:
        raise ArtifactError(f"cannot serialize policy kind {policy.kind!r}")
    return doc


def _set_env_attrs(policy, doc: dict, n_actions: int) -> None:
    policy.page_size_ = int(doc["page_size"])
    policy.history_len_ = int(doc["history_len"])
    policy.action_mode_ = doc["action_mode"]
    policy.n_actions_ = n_actions
    policy.n_features_in_ = policy.page_size_ + 1 + policy.history_len_


def policy_from_document(doc: dict):
    if doc.get("format_version") != FORMAT_VERSION:
        raise ArtifactError(f"unsupported format_version {doc.get('format_version')!r}")
    kind = doc["kind"]
    params = dict(doc["params"])
    if "hidden_sizes" in params:
        params["hidden_sizes"] = tuple(params["hidden_sizes"])
    page_size = int(doc["page_size"])
    arch, weights = doc["architecture"], doc["weights"]
    if kind.endswith("_fit"):
        policy = FixedFitPolicy(**params)
        n_actions = 3 if doc["action_mode"] == "high_level" else page_size
    elif kind == "linear_q":
        policy = AGENT_CLASSES[kind](**params)
        policy.weights_ = np.asarray(weights["linear"], dtype=np.float64)
        n_actions = policy.weights_.shape[0]
    elif kind == "dqn":
        policy = AGENT_CLASSES[kind](**params)
        policy.q_net_ = net_from_dict({**arch, "layers": weights["online"]})
        policy.target_net_ = net_from_dict({**arch, "layers": weights["target"]})
        n_actions = arch["dims"][-1]
    elif kind == "ppo":
        policy = AGENT_CLASSES[kind](**params)
        policy.actor_ = net_from_dict({**arch["actor"], "layers": weights["actor"]})
        policy.critic_ = net_from_dict({**arch["critic"], "layers": weights["critic"]})
        n_actions = arch["actor"]["dims"][-1]
    else:
        raise ArtifactError(f"unknown policy kind {kind!r}")
    _set_env_attrs(policy, doc, n_actions)
    return policy


def dumps_artifact(policy) -> str:
    return json.dumps(policy_to_document(policy), indent=1, allow_nan=False) + "\n"


def loads_artifact(text: str):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ArtifactError(f"checkpoint is not valid JSON: {exc}") from exc
    return policy_from_document(doc)


def save_policy(policy, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps_artifact(policy))


def load_policy(path):
    with open(path, encoding="utf-8") as fh:
        return loads_artifact(fh.read())
