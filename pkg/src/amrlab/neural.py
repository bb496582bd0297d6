"""Dense feed-forward networks with exact reverse-mode gradients.

Networks are plain parameter containers; the functions in this module
(`forward`, `backward`, `apply_update`, ...) operate on them. Inputs may be
a single vector of shape ``(in_dim,)`` or a batch of shape ``(n, in_dim)``.
For batched inputs parameter gradients are summed over the batch, so the
caller folds any averaging into ``upstream_grad``.

Flattening order is layer-major; inside a layer the weight matrix
``(out_dim, in_dim)`` is emitted row-major, followed by the biases.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ContractError, NumericFault

ACTIVATIONS = ("relu", "tanh", "linear")
SAVE_FORMAT = "amrlab.network"
SAVE_VERSION = 1


@dataclass(eq=False)
class LayerParams:
    weights: np.ndarray
    biases: np.ndarray
    activation: str = "linear"

    def __post_init__(self):
        self.weights = np.array(self.weights, dtype=float, ndmin=2)
        self.biases = np.array(self.biases, dtype=float, ndmin=1)
        if self.activation not in ACTIVATIONS:
            raise ContractError(f"unknown activation {self.activation!r}")
        out_dim, in_dim = self.weights.shape
        if out_dim < 1 or in_dim < 1:
            raise ContractError("layer dimensions must be positive")
        if self.biases.shape != (out_dim,):
            raise ContractError(
                f"bias shape {self.biases.shape} does not match {out_dim} outputs"
            )
        if not (np.all(np.isfinite(self.weights)) and np.all(np.isfinite(self.biases))):
            raise ContractError("layer parameters must be finite")

    @property
    def in_dim(self) -> int:
        return self.weights.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weights.shape[0]


@dataclass(eq=False)
class Network:
    """Ordered dense layers.

    On construction all parameters are moved into one contiguous vector,
    ``flat``, and each layer's ``weights``/``biases`` become views into it.
    Update parameters in place (``layer.weights[...] = ...``) to keep the
    two in sync.
    """

    layers: list

    def __post_init__(self):
        if not self.layers:
            raise ContractError("a network needs at least one layer")
        for prev, layer in zip(self.layers, self.layers[1:]):
            if layer.in_dim != prev.out_dim:
                raise ContractError(
                    f"layer expects {layer.in_dim} inputs, previous layer gives {prev.out_dim}"
                )
        self.flat = np.concatenate(
            [np.concatenate([l.weights.ravel(), l.biases]) for l in self.layers]
        )
        pos = 0
        for l in self.layers:
            nw = l.weights.size
            l.weights = self.flat[pos:pos + nw].reshape(l.weights.shape)
            pos += nw
            l.biases = self.flat[pos:pos + l.out_dim]
            pos += l.out_dim

    @property
    def input_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def output_dim(self) -> int:
        return self.layers[-1].out_dim

    @property
    def n_params(self) -> int:
        return self.flat.size

    def params(self):
        """Parameter arrays in flattening order (views, not copies)."""
        out = []
        for layer in self.layers:
            out.append(layer.weights)
            out.append(layer.biases)
        return out

    def copy(self) -> "Network":
        return unflatten(self, self.flat)


def init_network(sizes, activations, rng: np.random.Generator) -> Network:
    """Build a network with weights and biases drawn from U(-1/sqrt(fan_in), 1/sqrt(fan_in)).

    ``sizes`` lists layer widths including the input, e.g. ``[4, 4, 1]``.
    """
    if len(activations) != len(sizes) - 1:
        raise ContractError("need one activation per layer")
    layers = []
    for fan_in, fan_out, act in zip(sizes[:-1], sizes[1:], activations):
        bound = 1.0 / np.sqrt(fan_in)
        w = rng.uniform(-bound, bound, size=(fan_out, fan_in))
        b = rng.uniform(-bound, bound, size=fan_out)
        layers.append(LayerParams(w, b, act))
    return Network(layers)


def zeros_like(net: Network) -> Network:
    return Network(
        [LayerParams(np.zeros_like(l.weights), np.zeros_like(l.biases), l.activation)
         for l in net.layers]
    )


def _check_input(net, x):
    x = np.asarray(x, dtype=float)
    if x.ndim not in (1, 2) or x.shape[-1] != net.input_dim:
        raise ContractError(
            f"input of shape {x.shape} does not fit network input_dim {net.input_dim}"
        )
    return x


def forward_trace(net: Network, x):
    """Activations of every layer, input first; can be handed to `backward`."""
    x = _check_input(net, x)
    outs = [x]
    h = x
    for layer in net.layers:
        h = h @ layer.weights.T + layer.biases
        if layer.activation == "relu":
            np.maximum(h, 0.0, out=h)
        elif layer.activation == "tanh":
            np.tanh(h, out=h)
        outs.append(h)
    return outs


def forward(net: Network, x) -> np.ndarray:
    """Return the last-layer activations for ``x``."""
    return forward_trace(net, x)[-1]


def backward(net: Network, x, upstream_grad, trace=None):
    """Reverse-mode derivatives of ``upstream_grad . forward(net, x)``.

    Returns ``(param_grads, input_grad)`` where ``param_grads`` is a list of
    arrays in the same order as ``net.params()``. Pass ``trace`` (from
    `forward_trace` on the same ``x``) to skip recomputing the forward pass.
    """
    outs = forward_trace(net, x) if trace is None else trace
    x = outs[0]
    g = np.asarray(upstream_grad, dtype=float)
    expected = x.shape[:-1] + (net.output_dim,)
    if g.shape != expected:
        raise ContractError(f"upstream gradient shape {g.shape}, expected {expected}")
    batched = x.ndim == 2
    grads = [None] * (2 * len(net.layers))
    for i in range(len(net.layers) - 1, -1, -1):
        layer = net.layers[i]
        y = outs[i + 1]
        if layer.activation == "relu":
            g = g * (y > 0.0)
        elif layer.activation == "tanh":
            g = g * (1.0 - y * y)
        h_in = outs[i]
        if batched:
            grads[2 * i] = g.T @ h_in
            grads[2 * i + 1] = g.sum(axis=0)
        else:
            grads[2 * i] = np.outer(g, h_in)
            grads[2 * i + 1] = g.copy()
        g = g @ layer.weights
    return grads, g


@dataclass
class OptimizerState:
    """Adam (default) or plain SGD state for one network.

    ``clip_norm`` rescales the whole gradient when its global L2 norm
    exceeds it; ``None`` disables clipping.
    """

    lr: float
    kind: str = "adam"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    clip_norm: float | None = None
    step: int = 0
    m: np.ndarray | None = None
    v: np.ndarray | None = None

    def __post_init__(self):
        if not self.lr > 0:
            raise ContractError("learning rate must be positive")
        if self.kind not in ("adam", "sgd"):
            raise ContractError(f"unknown optimizer {self.kind!r}")


def make_optimizer(net: Network, lr: float, kind: str = "adam", clip_norm=None) -> OptimizerState:
    opt = OptimizerState(lr=lr, kind=kind, clip_norm=clip_norm)
    if kind == "adam":
        opt.m = np.zeros_like(net.flat)
        opt.v = np.zeros_like(net.flat)
    return opt


def flat_grad(grads) -> np.ndarray:
    """Concatenate a gradient list into the network's flat parameter order."""
    return np.concatenate([np.ravel(g) for g in grads])


def apply_update(net: Network, grads, opt: OptimizerState) -> Network:
    """Move ``net`` one optimizer step against ``grads`` (in place; returns ``net``).

    ``grads`` is either the list returned by `backward` or a flat vector.
    """
    if isinstance(grads, np.ndarray) and grads.ndim == 1:
        g = grads
    else:
        params = net.params()
        if len(grads) != len(params):
            raise ContractError("gradient list does not mirror the network")
        for p, gi in zip(params, grads):
            if np.shape(gi) != p.shape:
                raise ContractError(f"gradient shape {np.shape(gi)} vs parameter {p.shape}")
        g = flat_grad(grads)
    if g.shape != net.flat.shape:
        raise ContractError(f"flat gradient of length {g.size}, network has {net.flat.size}")
    sq = float(g @ g)
    if not np.isfinite(sq) and not np.all(np.isfinite(g)):
        raise NumericFault("non-finite gradient entry")
    if opt.clip_norm is not None and sq > opt.clip_norm ** 2:
        g = g * (opt.clip_norm / np.sqrt(sq))
    opt.step += 1
    if opt.kind == "sgd":
        net.flat -= opt.lr * g
        return net
    t = opt.step
    opt.m *= opt.beta1
    opt.m += (1.0 - opt.beta1) * g
    opt.v *= opt.beta2
    opt.v += (1.0 - opt.beta2) * (g * g)
    mhat = opt.m / (1.0 - opt.beta1 ** t)
    vhat = opt.v / (1.0 - opt.beta2 ** t)
    net.flat -= opt.lr * mhat / (np.sqrt(vhat) + opt.eps)
    return net


def soft_update(target: Network, online: Network, tau: float) -> None:
    """target <- tau * online + (1 - tau) * target, in place."""
    target.flat *= 1.0 - tau
    target.flat += tau * online.flat


def flatten(net: Network) -> np.ndarray:
    return net.flat.copy()


def unflatten(template: Network, v) -> Network:
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.size != template.n_params:
        raise ContractError(
            f"vector of length {v.size} does not fit {template.n_params} parameters"
        )
    layers = []
    pos = 0
    for l in template.layers:
        nw = l.weights.size
        w = v[pos:pos + nw].reshape(l.weights.shape).copy()
        pos += nw
        b = v[pos:pos + l.out_dim].copy()
        pos += l.out_dim
        layers.append(LayerParams(w, b, l.activation))
    return Network(layers)


def to_dict(net: Network) -> dict:
    """JSON-ready description: shape header plus flat parameter list."""
    return {
        "format": SAVE_FORMAT,
        "version": SAVE_VERSION,
        "input_dim": net.input_dim,
        "layers": [
            {"in_dim": l.in_dim, "out_dim": l.out_dim, "activation": l.activation}
            for l in net.layers
        ],
        "params": [float(x) for x in flatten(net)],
    }


def from_dict(d: dict) -> Network:
    if d.get("format") != SAVE_FORMAT or d.get("version") != SAVE_VERSION:
        raise ContractError("not a version-1 amrlab network document")
    layers = [
        LayerParams(np.zeros((s["out_dim"], s["in_dim"])), np.zeros(s["out_dim"]), s["activation"])
        for s in d["layers"]
    ]
    template = Network(layers)
    if template.input_dim != d["input_dim"]:
        raise ContractError("input_dim disagrees with first layer")
    return unflatten(template, d["params"])


def save_network(net: Network, path) -> None:
    Path(path).write_text(json.dumps(to_dict(net), indent=1, allow_nan=False))


def load_network(path) -> Network:
    return from_dict(json.loads(Path(path).read_text()))
