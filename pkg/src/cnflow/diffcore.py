"""Dense numeric core with hand-written reverse-mode gradients.

Batches are plain 2-D C-contiguous float64 numpy arrays (rows = samples).
The module provides exactly what the coupling subnetworks need: MLP
forward/backward with an activation cache, a central-difference gradient
oracle for testing, and an in-place Adam step over a ParamStore.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DimensionError, NumericError

Array = np.ndarray

ACTIVATIONS = ("relu", "softplus")


def as_batch(x, cols: int | None = None) -> Array:
    """Coerce to a 2-D float64 array, optionally checking the column count."""
    a = np.ascontiguousarray(x, dtype=np.float64)
    if a.ndim == 1:
        a = a[None, :]
    if a.ndim != 2:
        raise DimensionError(f"expected a 2-D batch, got ndim={a.ndim}")
    if cols is not None and a.shape[1] != cols:
        raise DimensionError(f"expected {cols} columns, got {a.shape[1]}")
    return a


@dataclass
class MlpSpec:
    """Fully connected network: in -> hidden * n_hidden_layers -> out."""

    in_width: int
    out_width: int
    hidden_width: int = 512
    n_hidden_layers: int = 2
    activation: str = "relu"

    def __post_init__(self):
        if self.in_width < 0 or self.out_width < 1 or self.hidden_width < 1:
            raise DimensionError("MlpSpec widths must be positive")
        if self.n_hidden_layers < 0:
            raise DimensionError("n_hidden_layers must be >= 0")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")

    def layer_dims(self) -> list[tuple[int, int]]:
        """(fan_in, fan_out) per linear layer, input to output order."""
        widths = [self.in_width] + [self.hidden_width] * self.n_hidden_layers + [self.out_width]
        return list(zip(widths[:-1], widths[1:]))

    def param_names(self) -> list[str]:
        names = []
        for layer in range(len(self.layer_dims())):
            names += [f"w{layer}", f"b{layer}"]
        return names


@dataclass
class ParamStore:
    """Named parameter arrays with parallel gradient and Adam moment arrays."""

    params: dict[str, Array] = field(default_factory=dict)
    grads: dict[str, Array] = field(default_factory=dict)
    m: dict[str, Array] = field(default_factory=dict)
    v: dict[str, Array] = field(default_factory=dict)
    step: int = 0

    def register(self, name: str, value: Array) -> None:
        if name in self.params:
            raise ValueError(f"parameter {name!r} already registered")
        value = np.asarray(value, dtype=np.float64)
        self.params[name] = value
        self.grads[name] = np.zeros_like(value)
        self.m[name] = np.zeros_like(value)
        self.v[name] = np.zeros_like(value)

    def zero_grads(self) -> None:
        for g in self.grads.values():
            g[...] = 0.0

    def accumulate(self, grads: dict[str, Array]) -> None:
        for name, g in grads.items():
            self.grads[name] += g

    def copy_params(self) -> dict[str, Array]:
        return {name: p.copy() for name, p in self.params.items()}

    def load_params(self, snapshot: dict[str, Array]) -> None:
        for name, p in snapshot.items():
            self.params[name][...] = p

    def reset_optimizer(self) -> None:
        for name in self.params:
            self.m[name][...] = 0.0
            self.v[name][...] = 0.0
        self.step = 0

    def n_params(self) -> int:
        return sum(p.size for p in self.params.values())


def init_mlp_params(spec: MlpSpec, rng: np.random.Generator, zero_last: bool = False) -> dict[str, Array]:
    """Uniform +-sqrt(1/fan_in) init; zero_last zeroes the output layer."""
    out: dict[str, Array] = {}
    dims = spec.layer_dims()
    for layer, (fan_in, fan_out) in enumerate(dims):
        bound = math.sqrt(1.0 / max(fan_in, 1))
        w = rng.uniform(-bound, bound, size=(fan_in, fan_out))
        b = np.zeros(fan_out)
        if zero_last and layer == len(dims) - 1:
            w[...] = 0.0
        out[f"w{layer}"] = w
        out[f"b{layer}"] = b
    return out


def register_mlp(store: ParamStore, spec: MlpSpec, prefix: str,
                 rng: np.random.Generator, zero_last: bool = False) -> None:
    for name, value in init_mlp_params(spec, rng, zero_last=zero_last).items():
        store.register(prefix + name, value)


def _activate(kind: str, h: Array) -> Array:
    if kind == "relu":
        return np.maximum(h, 0.0)
    return np.logaddexp(0.0, h)  # softplus


def _activate_grad(kind: str, h: Array) -> Array:
    if kind == "relu":
        return (h > 0.0).astype(np.float64)
    # sigmoid, stable for large |h|
    return 0.5 * (1.0 + np.tanh(0.5 * h))


@dataclass
class MlpCache:
    """Activation record from mlp_forward; valid until the parameters change."""

    spec: MlpSpec
    prefix: str
    weights: list[Array]
    inputs: list[Array]   # activation entering each linear layer
    pre: list[Array]      # pre-activation of each hidden layer
    out_shape: tuple[int, int]


def mlp_forward(store: ParamStore, spec: MlpSpec, x: Array, prefix: str = "") -> tuple[Array, MlpCache]:
    x = as_batch(x, spec.in_width)
    dims = spec.layer_dims()
    weights, inputs, pre = [], [], []
    a = x
    for layer, (fan_in, fan_out) in enumerate(dims):
        w = store.params[prefix + f"w{layer}"]
        b = store.params[prefix + f"b{layer}"]
        if w.shape != (fan_in, fan_out):
            raise DimensionError(f"{prefix}w{layer} has shape {w.shape}, spec wants {(fan_in, fan_out)}")
        inputs.append(a)
        weights.append(w)
        h = a @ w + b
        if layer < len(dims) - 1:
            pre.append(h)
            a = _activate(spec.activation, h)
        else:
            a = h
    cache = MlpCache(spec, prefix, weights, inputs, pre, a.shape)
    return a, cache


def mlp_backward(cache: MlpCache, grad_out: Array) -> tuple[dict[str, Array], Array]:
    grad_out = np.asarray(grad_out, dtype=np.float64)
    if grad_out.shape != cache.out_shape:
        raise DimensionError(f"grad_out shape {grad_out.shape} != forward output {cache.out_shape}")
    spec, prefix = cache.spec, cache.prefix
    grads: dict[str, Array] = {}
    g = grad_out
    n_layers = len(cache.weights)
    for layer in range(n_layers - 1, -1, -1):
        if layer < n_layers - 1:
            g = g * _activate_grad(spec.activation, cache.pre[layer])
        a = cache.inputs[layer]
        grads[prefix + f"w{layer}"] = a.T @ g
        grads[prefix + f"b{layer}"] = g.sum(axis=0)
        g = g @ cache.weights[layer].T
    return grads, g


def finite_difference_grad(loss_fn: Callable[[], float], store: ParamStore,
                           h: float = 1e-5) -> dict[str, Array]:
    """Central differences (L(t+h)-L(t-h))/2h per coordinate.

    loss_fn must be deterministic and read its parameters from `store`.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    out: dict[str, Array] = {}
    for name, arr in store.params.items():
        g = np.zeros_like(arr)
        flat = arr.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            lp = float(loss_fn())
            flat[i] = orig - h
            lm = float(loss_fn())
            flat[i] = orig
            if not (math.isfinite(lp) and math.isfinite(lm)):
                raise NumericError(f"non-finite loss while perturbing {name}[{i}]")
            gflat[i] = (lp - lm) / (2.0 * h)
        out[name] = g
    return out


def adam_step(store: ParamStore, lr: float, beta1: float = 0.9,
              beta2: float = 0.999, eps: float = 1e-8) -> None:
    """In-place Adam update with bias correction; zeroes gradients afterward."""
    if not (0.0 <= beta1 < 1.0 and 0.0 <= beta2 < 1.0):
        raise ValueError("betas must lie in [0, 1)")
    for name, g in store.grads.items():
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient for {name!r}; parameters unchanged")
    t = store.step + 1
    c1 = 1.0 - beta1 ** t
    c2 = 1.0 - beta2 ** t
    for name, p in store.params.items():
        g = store.grads[name]
        m = store.m[name]
        v = store.v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        p -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
        g[...] = 0.0
    store.step = t
