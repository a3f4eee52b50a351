"""Minimal dense-network substrate: MLPs with manual backprop and Adam.

Everything downstream (policy ensemble, risk critic, discrepancy
classifier) trains through this module. All math is float64 so that
seeded runs reproduce bit-for-bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

HIDDEN_ACTIVATIONS = ("relu",)
OUTPUT_ACTIVATIONS = ("tanh", "sigmoid", "identity")


def _apply(name: str, z: np.ndarray) -> np.ndarray:
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "tanh":
        return np.tanh(z)
    if name == "sigmoid":
        return 1.0 / (1.0 + np.exp(-z))
    if name == "identity":
        return z
    raise ValueError(f"unknown activation {name!r}")


def _apply_grad(name: str, z: np.ndarray, out: np.ndarray) -> np.ndarray:
    """Derivative of the activation at pre-activation z (out = activation(z))."""
    if name == "relu":
        return (z > 0.0).astype(np.float64)
    if name == "tanh":
        return 1.0 - out * out
    if name == "sigmoid":
        return out * (1.0 - out)
    if name == "identity":
        return np.ones_like(z)
    raise ValueError(f"unknown activation {name!r}")


@dataclass
class ParameterGradients:
    """Gradients with the same nesting as Mlp parameters."""

    d_weights: list[np.ndarray]
    d_biases: list[np.ndarray]


class Mlp:
    """Fully-connected net with one activation for hidden layers and one for the head.

    Weights are stored as (fan_in, fan_out) matrices so a forward pass is
    ``x @ W + b``; inputs may be a single vector ``(d,)`` or a batch ``(n, d)``.
    """

    def __init__(
        self,
        layer_sizes: list[int],
        weights: list[np.ndarray],
        biases: list[np.ndarray],
        hidden_activation: str = "relu",
        output_activation: str = "identity",
    ):
        if len(layer_sizes) < 2 or any(s <= 0 for s in layer_sizes):
            raise ValueError(f"need >= 2 positive layer sizes, got {layer_sizes}")
        if hidden_activation not in HIDDEN_ACTIVATIONS:
            raise ValueError(f"unsupported hidden activation {hidden_activation!r}")
        if output_activation not in OUTPUT_ACTIVATIONS:
            raise ValueError(f"unsupported output activation {output_activation!r}")
        for i, (w, b) in enumerate(zip(weights, biases)):
            if w.shape != (layer_sizes[i], layer_sizes[i + 1]) or b.shape != (layer_sizes[i + 1],):
                raise ValueError(f"layer {i} parameter shapes inconsistent with {layer_sizes}")
        self.layer_sizes = list(layer_sizes)
        self.weights = weights
        self.biases = biases
        self.hidden_activation = hidden_activation
        self.output_activation = output_activation

    @property
    def input_dim(self) -> int:
        return self.layer_sizes[0]

    @property
    def output_dim(self) -> int:
        return self.layer_sizes[-1]

    def num_params(self) -> int:
        return sum(w.size for w in self.weights) + sum(b.size for b in self.biases)

    def clone(self) -> "Mlp":
        return Mlp(
            list(self.layer_sizes),
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            self.hidden_activation,
            self.output_activation,
        )

    def _activations(self, x: np.ndarray) -> tuple[list[np.ndarray], list[np.ndarray]]:
        """Forward pass keeping (pre-activation, post-activation) per layer."""
        pre: list[np.ndarray] = []
        post: list[np.ndarray] = [x]
        h = x
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ w + b
            act = self.output_activation if i == last else self.hidden_activation
            h = _apply(act, z)
            pre.append(z)
            post.append(h)
        return pre, post

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.input_dim:
            raise ValueError(f"input dim {x.shape[-1]} != expected {self.input_dim}")
        _, post = self._activations(x)
        return post[-1]

    def backward(self, x: np.ndarray, upstream_grad: np.ndarray) -> ParameterGradients:
        """Exact reverse-mode gradients of sum(output * upstream_grad) w.r.t. parameters.

        For batched inputs the gradients are summed over the batch.
        """
        x = np.asarray(x, dtype=np.float64)
        upstream = np.asarray(upstream_grad, dtype=np.float64)
        batched = x.ndim == 2
        if not batched:
            x = x[None, :]
            upstream = upstream[None, :]
        if x.shape[-1] != self.input_dim or upstream.shape[-1] != self.output_dim:
            raise ValueError("backward shapes inconsistent with network dims")
        if upstream.shape[0] != x.shape[0]:
            raise ValueError("batch sizes of x and upstream_grad differ")

        pre, post = self._activations(x)
        d_weights = [np.zeros_like(w) for w in self.weights]
        d_biases = [np.zeros_like(b) for b in self.biases]
        grad = upstream
        last = len(self.weights) - 1
        for i in range(last, -1, -1):
            act = self.output_activation if i == last else self.hidden_activation
            dz = grad * _apply_grad(act, pre[i], post[i + 1])
            d_weights[i] = post[i].T @ dz
            d_biases[i] = dz.sum(axis=0)
            grad = dz @ self.weights[i].T
        return ParameterGradients(d_weights, d_biases)


def mlp_new(
    layer_sizes: list[int],
    hidden_activation: str = "relu",
    output_activation: str = "identity",
    seed: int = 0,
) -> Mlp:
    """Build an MLP with Glorot-uniform weights (+-sqrt(6/(fan_in+fan_out))) and zero biases.

    Deterministic for a fixed seed.
    """
    if len(layer_sizes) < 2 or any(s <= 0 for s in layer_sizes):
        raise ValueError(f"need >= 2 positive layer sizes, got {layer_sizes}")
    rng = np.random.default_rng(seed)
    weights = []
    biases = []
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        limit = math.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return Mlp(layer_sizes, weights, biases, hidden_activation, output_activation)


@dataclass
class AdamState:
    """Adam moment buffers mirroring an Mlp's parameter shapes."""

    m_weights: list[np.ndarray]
    v_weights: list[np.ndarray]
    m_biases: list[np.ndarray]
    v_biases: list[np.ndarray]
    step_count: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_mlp(cls, mlp: Mlp, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> "AdamState":
        return cls(
            m_weights=[np.zeros_like(w) for w in mlp.weights],
            v_weights=[np.zeros_like(w) for w in mlp.weights],
            m_biases=[np.zeros_like(b) for b in mlp.biases],
            v_biases=[np.zeros_like(b) for b in mlp.biases],
            beta1=beta1,
            beta2=beta2,
            eps=eps,
        )

    def clone(self) -> "AdamState":
        return AdamState(
            [m.copy() for m in self.m_weights],
            [v.copy() for v in self.v_weights],
            [m.copy() for m in self.m_biases],
            [v.copy() for v in self.v_biases],
            self.step_count,
            self.beta1,
            self.beta2,
            self.eps,
        )


def _adam_update(p: np.ndarray, g: np.ndarray, m: np.ndarray, v: np.ndarray, state: AdamState, lr: float) -> None:
    m *= state.beta1
    m += (1.0 - state.beta1) * g
    v *= state.beta2
    v += (1.0 - state.beta2) * g * g
    m_hat = m / (1.0 - state.beta1 ** state.step_count)
    v_hat = v / (1.0 - state.beta2 ** state.step_count)
    p -= lr * m_hat / (np.sqrt(v_hat) + state.eps)


def adam_step(mlp: Mlp, grads: ParameterGradients, state: AdamState, lr: float) -> None:
    """One bias-corrected Adam update, in place on the mlp and state."""
    if len(grads.d_weights) != len(mlp.weights):
        raise ValueError("gradient layer count does not match parameters")
    state.step_count += 1
    for i in range(len(mlp.weights)):
        if grads.d_weights[i].shape != mlp.weights[i].shape:
            raise ValueError(f"gradient shape mismatch at layer {i}")
        _adam_update(mlp.weights[i], grads.d_weights[i], state.m_weights[i], state.v_weights[i], state, lr)
        _adam_update(mlp.biases[i], grads.d_biases[i], state.m_biases[i], state.v_biases[i], state, lr)


def mse(pred: np.ndarray, target: np.ndarray) -> float:
    """Mean of squared componentwise differences (mean over batch and components)."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch {pred.shape} vs {target.shape}")
    diff = pred - target
    return float(np.mean(diff * diff))


def mse_grad(pred: np.ndarray, target: np.ndarray) -> np.ndarray:
    """d mse / d pred, matching the mean-over-all-entries reduction."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch {pred.shape} vs {target.shape}")
    return 2.0 * (pred - target) / pred.size


def train_step(mlp: Mlp, x: np.ndarray, target: np.ndarray, state: AdamState, lr: float) -> float:
    """One MSE gradient step; returns the pre-step loss."""
    pred = mlp.forward(x)
    loss = mse(pred, target)
    grads = mlp.backward(x, mse_grad(pred, target))
    adam_step(mlp, grads, state, lr)
    return loss


def gradient_check(mlp: Mlp, x: np.ndarray, target: np.ndarray, step: float = 1e-5) -> float:
    """Max relative error between analytic and central finite-difference MSE gradients.

    Intended for small nets (<= ~1e3 parameters); cost is two forwards per parameter.
    """
    x = np.asarray(x, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    pred = mlp.forward(x)
    analytic = mlp.backward(x, mse_grad(pred, target))

    def loss() -> float:
        return mse(mlp.forward(x), target)

    worst = 0.0
    params = list(zip(mlp.weights, analytic.d_weights)) + list(zip(mlp.biases, analytic.d_biases))
    for arr, grad in params:
        flat = arr.reshape(-1)
        gflat = grad.reshape(-1)
        for j in range(flat.size):
            orig = flat[j]
            flat[j] = orig + step
            hi = loss()
            flat[j] = orig - step
            lo = loss()
            flat[j] = orig
            numeric = (hi - lo) / (2.0 * step)
            denom = max(abs(gflat[j]), abs(numeric), 1e-8)
            worst = max(worst, abs(gflat[j] - numeric) / denom)
    return worst
