"""Small dense networks in float64 numpy with hand-written backprop and Adam."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np

ACTIVATIONS = ("relu", "tanh", "identity")


class StaleCache(ValueError):
    pass


@dataclass
class Layer:
    W: np.ndarray  # (out, in)
    b: np.ndarray  # (out,)
    activation: str = "identity"

    @property
    def shape(self) -> Tuple[int, int]:
        return self.W.shape


def _act(name: str, z: np.ndarray) -> np.ndarray:
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "tanh":
        return np.tanh(z)
    return z


def _act_grad(name: str, z: np.ndarray, a: np.ndarray, g: np.ndarray) -> np.ndarray:
    if name == "relu":
        return g * (z > 0.0)
    if name == "tanh":
        return g * (1.0 - a * a)
    return g


@dataclass
class Cache:
    net_id: int
    version: int
    inputs: List[np.ndarray]
    pre: List[np.ndarray]
    post: List[np.ndarray]
    single: bool


class DenseNet:
    """A stack of affine layers, each followed by its activation."""

    def __init__(self, layers: Sequence[Layer]):
        self.layers = list(layers)
        for prev, nxt in zip(self.layers, self.layers[1:]):
            if prev.W.shape[0] != nxt.W.shape[1]:
                raise ValueError(
                    f"layer dims do not compose: {prev.W.shape} then {nxt.W.shape}"
                )
        for layer in self.layers:
            if layer.activation not in ACTIVATIONS:
                raise ValueError(f"unknown activation {layer.activation!r}")
        # bumped whenever parameters are replaced wholesale; guards stale caches
        self.version = 0

    @property
    def dims(self) -> List[int]:
        return [self.layers[0].W.shape[1]] + [layer.W.shape[0] for layer in self.layers]

    @property
    def activations(self) -> List[str]:
        return [layer.activation for layer in self.layers]

    @property
    def in_dim(self) -> int:
        return self.layers[0].W.shape[1]

    def params(self) -> List[np.ndarray]:
        out = []
        for layer in self.layers:
            out.extend((layer.W, layer.b))
        return out

    def n_params(self) -> int:
        return sum(p.size for p in self.params())

    def forward(self, x, keep_cache: bool = True):
        """Return ``(output, cache)``; ``x`` may be one vector or a batch of rows."""
        h = np.asarray(x, dtype=np.float64)
        single = h.ndim == 1
        if single:
            h = h[None, :]
        if h.shape[-1] != self.in_dim:
            raise ValueError(f"input has {h.shape[-1]} features, network expects {self.in_dim}")
        inputs, pre, post = [], [], []
        for layer in self.layers:
            z = h @ layer.W.T + layer.b
            a = _act(layer.activation, z)
            if keep_cache:
                inputs.append(h)
                pre.append(z)
                post.append(a)
            h = a
        out = h[0] if single else h
        cache = Cache(id(self), self.version, inputs, pre, post, single) if keep_cache else None
        return out, cache

    def predict(self, x) -> np.ndarray:
        return self.forward(x, keep_cache=False)[0]

    def backward(self, cache: Cache, grad_out) -> Tuple[List[np.ndarray], np.ndarray]:
        """Gradients of ``sum(grad_out * output)``.

        Returns parameter gradients in :meth:`params` order and the input gradient.
        """
        if cache is None or cache.net_id != id(self) or cache.version != self.version:
            raise StaleCache("cache does not come from the latest forward pass of this network")
        g = np.asarray(grad_out, dtype=np.float64)
        if cache.single:
            g = g[None, :]
        if g.shape != cache.post[-1].shape:
            raise ValueError(f"output gradient shape {g.shape} != output shape {cache.post[-1].shape}")
        grads: List[np.ndarray] = [None] * (2 * len(self.layers))
        for i in range(len(self.layers) - 1, -1, -1):
            layer = self.layers[i]
            g = _act_grad(layer.activation, cache.pre[i], cache.post[i], g)
            grads[2 * i] = g.T @ cache.inputs[i]
            grads[2 * i + 1] = g.sum(axis=0)
            g = g @ layer.W
        return grads, (g[0] if cache.single else g)

    def copy(self) -> "DenseNet":
        return DenseNet([Layer(l.W.copy(), l.b.copy(), l.activation) for l in self.layers])

    def load_params(self, params: Sequence[np.ndarray]) -> None:
        """Overwrite parameters in place (same shapes)."""
        own = self.params()
        if len(own) != len(params):
            raise ValueError("parameter count mismatch")
        for dst, src in zip(own, params):
            if dst.shape != np.shape(src):
                raise ValueError(f"shape mismatch {dst.shape} vs {np.shape(src)}")
            dst[...] = src
        self.version += 1


def init_net(dims: Sequence[int], activations: Sequence[str], rng: np.random.Generator) -> DenseNet:
    """Glorot-uniform weights, zero biases."""
    if len(activations) != len(dims) - 1:
        raise ValueError("need one activation per layer")
    layers = []
    for fan_in, fan_out, act in zip(dims[:-1], dims[1:], activations):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        W = rng.uniform(-limit, limit, size=(fan_out, fan_in))
        layers.append(Layer(W, np.zeros(fan_out), act))
    return DenseNet(layers)


def orthogonal_(net: DenseNet, gains: Sequence[float], rng: np.random.Generator) -> DenseNet:
    """Re-initialise every layer with a scaled orthogonal matrix and zero bias (in place)."""
    if len(gains) != len(net.layers):
        raise ValueError("need one gain per layer")
    for layer, gain in zip(net.layers, gains):
        rows, cols = layer.W.shape
        a = rng.normal(size=(max(rows, cols), min(rows, cols)))
        q, r = np.linalg.qr(a)
        # sign fix makes q uniformly distributed over orthogonal matrices
        q *= np.sign(np.diag(r))
        layer.W[...] = gain * (q if rows >= cols else q.T)
        layer.b[...] = 0.0
    net.version += 1
    return net


def mlp(in_dim: int, hidden: Sequence[int], out_dim: int, activation: str,
        rng: np.random.Generator) -> DenseNet:
    dims = [in_dim, *hidden, out_dim]
    return init_net(dims, [activation] * len(hidden) + ["identity"], rng)


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: List[np.ndarray] = field(default_factory=list)
    v: List[np.ndarray] = field(default_factory=list)

    @classmethod
    def for_params(cls, params: Sequence[np.ndarray], lr: float = 1e-3, **kw) -> "AdamState":
        return cls(lr=lr, m=[np.zeros_like(p) for p in params],
                   v=[np.zeros_like(p) for p in params], **kw)


def adam_step(params: Sequence[np.ndarray], grads: Sequence[np.ndarray], state: AdamState):
    """In-place bias-corrected Adam update; returns ``(params, state)``."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ValueError("params, grads and optimizer state must have the same length")
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    corr1 = 1.0 - b1 ** state.t
    corr2 = 1.0 - b2 ** state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape:
            raise ValueError(f"gradient shape {g.shape} != parameter shape {p.shape}")
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= state.lr * (m / corr1) / (np.sqrt(v / corr2) + state.eps)
    return params, state


def clip_grad_norm(grads: List[np.ndarray], max_norm: float) -> float:
    """Scale gradients in place so their global L2 norm is at most ``max_norm``."""
    total = float(np.sqrt(sum(float(np.vdot(g, g)) for g in grads)))
    if max_norm > 0 and total > max_norm:
        scale = max_norm / (total + 1e-6)
        for g in grads:
            g *= scale
    return total


def net_to_dict(net: DenseNet) -> dict:
    return {
        "dims": net.dims,
        "activations": net.activations,
        "layers": [{"W": l.W.tolist(), "b": l.b.tolist()} for l in net.layers],
    }


def net_from_dict(d: dict) -> DenseNet:
    layers = [
        Layer(np.asarray(ld["W"], dtype=np.float64).reshape(out, inp),
              np.asarray(ld["b"], dtype=np.float64).reshape(out), act)
        for ld, act, inp, out in zip(d["layers"], d["activations"], d["dims"][:-1], d["dims"][1:])
    ]
    return DenseNet(layers)
