"""Compact permutation-invariant classifier with exact analytic gradients.

Each node row (one-hot area code + acoustic features) passes through a shared
two-layer ReLU encoder; encodings are mean-pooled across nodes and an affine
head produces n logits. All weights live in one flat float64 vector so any
parameter can be addressed by a single index.
"""
from dataclasses import dataclass, fields
from typing import Dict, List, Optional, Tuple

import numpy as np

from soft_label_loc.errors import DimensionMismatchError, InvalidConfigurationError, NonFiniteError

TARGET_SUM_TOL = 1e-6


def _layout(n: int, feature_dim: int, hidden: int) -> List[Tuple[str, Tuple[int, ...], int]]:
    """(name, shape, fan_in) in flat-vector order."""
    d = n + feature_dim
    return [
        ("W1", (d, hidden), d),
        ("b1", (hidden,), d),
        ("W2", (hidden, hidden), hidden),
        ("b2", (hidden,), hidden),
        ("W3", (hidden, n), hidden),
        ("b3", (n,), hidden),
    ]


@dataclass
class ClassifierParams:
    flat: np.ndarray
    n: int
    feature_dim: int
    hidden: int
    seed: int = 0

    def __post_init__(self):
        self.flat = np.asarray(self.flat, dtype=np.float64)
        expected = self.expected_size(self.n, self.feature_dim, self.hidden)
        if self.flat.shape != (expected,):
            raise DimensionMismatchError("parameter vector length", expected, self.flat.shape)

    @staticmethod
    def expected_size(n: int, feature_dim: int, hidden: int) -> int:
        return sum(int(np.prod(shape)) for _, shape, _ in _layout(n, feature_dim, hidden))

    @property
    def input_dim(self) -> int:
        return self.n + self.feature_dim

    @property
    def size(self) -> int:
        return self.flat.shape[0]

    def tensors(self, flat: Optional[np.ndarray] = None) -> Dict[str, np.ndarray]:
        """Named reshaped views into ``flat`` (default: this object's vector)."""
        flat = self.flat if flat is None else flat
        out, offset = {}, 0
        for name, shape, _ in _layout(self.n, self.feature_dim, self.hidden):
            size = int(np.prod(shape))
            out[name] = flat[offset:offset + size].reshape(shape)
            offset += size
        return out

    def copy(self) -> "ClassifierParams":
        return ClassifierParams(self.flat.copy(), self.n, self.feature_dim, self.hidden, self.seed)


@dataclass
class ForwardTrace:
    inputs: np.ndarray
    z1: np.ndarray
    a1: np.ndarray
    z2: np.ndarray
    a2: np.ndarray
    pooled: np.ndarray
    logits: np.ndarray
    log_probs: np.ndarray
    probs: np.ndarray

    def sample(self, b: int) -> "ForwardTrace":
        return ForwardTrace(**{f.name: getattr(self, f.name)[b] for f in fields(self)})


def init_params(n: int, feature_dim: int, hidden: int, seed: int) -> ClassifierParams:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for every weight and bias."""
    if n < 1 or feature_dim < 1 or hidden < 1:
        raise InvalidConfigurationError(f"dimensions must be positive, got n={n}, feature_dim={feature_dim}, hidden={hidden}")
    rng = np.random.default_rng(seed)
    chunks = []
    for _, shape, fan_in in _layout(n, feature_dim, hidden):
        scale = 1.0 / np.sqrt(fan_in)
        chunks.append(rng.uniform(-scale, scale, size=int(np.prod(shape))))
    return ClassifierParams(np.concatenate(chunks), n, feature_dim, hidden, seed)


def _check_inputs(params: ClassifierParams, inputs: np.ndarray) -> np.ndarray:
    inputs = np.asarray(inputs, dtype=np.float64)
    if inputs.ndim != 3 or inputs.shape[2] != params.input_dim or inputs.shape[1] < 1:
        raise DimensionMismatchError("input shape (batch, nodes, n + feature_dim)", f"(*, *, {params.input_dim})", inputs.shape)
    if not np.all(np.isfinite(inputs)):
        raise NonFiniteError("model input contains NaN or infinity")
    return inputs


def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - np.max(logits, axis=-1, keepdims=True)
    return shifted - np.log(np.sum(np.exp(shifted), axis=-1, keepdims=True))


def forward_batch(params: ClassifierParams, inputs: np.ndarray) -> ForwardTrace:
    """Forward pass over a (batch, nodes, n + feature_dim) tensor."""
    x = _check_inputs(params, inputs)
    t = params.tensors()
    z1 = x @ t["W1"] + t["b1"]
    a1 = np.maximum(z1, 0.0)
    z2 = a1 @ t["W2"] + t["b2"]
    a2 = np.maximum(z2, 0.0)
    pooled = a2.mean(axis=1)
    logits = pooled @ t["W3"] + t["b3"]
    log_probs = log_softmax(logits)
    return ForwardTrace(x, z1, a1, z2, a2, pooled, logits, log_probs, np.exp(log_probs))


def forward(params: ClassifierParams, inputs: np.ndarray) -> ForwardTrace:
    """Forward pass for one scene's (nodes, n + feature_dim) matrix."""
    inputs = np.asarray(inputs, dtype=np.float64)
    if inputs.ndim != 2:
        raise DimensionMismatchError("input shape (nodes, n + feature_dim)", f"(*, {params.input_dim})", inputs.shape)
    return forward_batch(params, inputs[None]).sample(0)


def predict(params: ClassifierParams, inputs: np.ndarray) -> np.ndarray:
    """1-based predicted areas for a batch; ties resolve to the lowest index."""
    return np.argmax(forward_batch(params, inputs).logits, axis=1) + 1


def _check_targets(params: ClassifierParams, targets: np.ndarray, batch: int) -> np.ndarray:
    targets = np.asarray(targets, dtype=np.float64)
    if targets.shape != (batch, params.n):
        raise DimensionMismatchError("target shape", (batch, params.n), targets.shape)
    if np.any(np.abs(targets.sum(axis=1) - 1.0) > TARGET_SUM_TOL):
        raise InvalidConfigurationError("target rows must sum to 1")
    return targets


def loss_and_gradient_batch(
    params: ClassifierParams, inputs: np.ndarray, targets: np.ndarray
) -> Tuple[float, np.ndarray, ForwardTrace]:
    """Mean soft-target cross-entropy over the batch and its gradient w.r.t. ``params.flat``."""
    trace = forward_batch(params, inputs)
    batch, nodes, _ = trace.inputs.shape
    targets = _check_targets(params, targets, batch)
    loss = float(-np.sum(targets * trace.log_probs) / batch)

    t = params.tensors()
    grad = np.zeros_like(params.flat)
    g = params.tensors(grad)

    # Softmax + cross-entropy against a distribution: dL/dlogits = p - target.
    dlogits = (trace.probs - targets) / batch
    g["W3"][...] = trace.pooled.T @ dlogits
    g["b3"][...] = dlogits.sum(axis=0)

    dpooled = dlogits @ t["W3"].T
    dz2 = np.broadcast_to(dpooled[:, None, :] / nodes, trace.z2.shape) * (trace.z2 > 0)
    hidden = params.hidden
    g["W2"][...] = trace.a1.reshape(-1, hidden).T @ dz2.reshape(-1, hidden)
    g["b2"][...] = dz2.sum(axis=(0, 1))

    dz1 = (dz2 @ t["W2"].T) * (trace.z1 > 0)
    g["W1"][...] = trace.inputs.reshape(-1, params.input_dim).T @ dz1.reshape(-1, hidden)
    g["b1"][...] = dz1.sum(axis=(0, 1))
    return loss, grad, trace


def loss_and_gradient(params: ClassifierParams, inputs: np.ndarray, target_row: np.ndarray) -> Tuple[float, np.ndarray]:
    """Cross-entropy -sum_k target_k log y_k for one scene, and its exact gradient."""
    inputs = np.asarray(inputs, dtype=np.float64)
    if inputs.ndim != 2:
        raise DimensionMismatchError("input shape (nodes, n + feature_dim)", f"(*, {params.input_dim})", inputs.shape)
    loss, grad, _ = loss_and_gradient_batch(params, inputs[None], np.asarray(target_row)[None])
    return loss, grad


def gradient_check(
    params: ClassifierParams,
    inputs: np.ndarray,
    targets: np.ndarray,
    probes: int = 50,
    step: float = 1e-5,
    seed: int = 0,
) -> float:
    """Largest relative error between analytic and central-difference gradients.

    Relative error is |a - f| / max(|a| + |f|, 1e-4) over ``probes`` random
    coordinates of the flat parameter vector.
    """
    _, analytic, _ = loss_and_gradient_batch(params, inputs, targets)
    rng = np.random.default_rng(seed)
    coords = rng.choice(params.size, size=min(probes, params.size), replace=False)
    probe = params.copy()
    worst = 0.0
    for c in coords:
        original = probe.flat[c]
        probe.flat[c] = original + step
        plus, _, _ = loss_and_gradient_batch(probe, inputs, targets)
        probe.flat[c] = original - step
        minus, _, _ = loss_and_gradient_batch(probe, inputs, targets)
        probe.flat[c] = original
        numeric = (plus - minus) / (2.0 * step)
        error = abs(analytic[c] - numeric) / max(abs(analytic[c]) + abs(numeric), 1e-4)
        worst = max(worst, error)
    return worst


class AdamOptimizer:
    """Adam over one flat parameter vector.

    Args:
        size: Number of parameters.
        lr: Learning rate.
        beta1: Exponential decay for the first moment.
        beta2: Exponential decay for the second moment.
        eps: Numerical stability term.
    """

    def __init__(self, size: int, lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = np.zeros(size)
        self.v = np.zeros(size)

    def step(self, flat: np.ndarray, grad: np.ndarray) -> None:
        """Apply one update to ``flat`` in place."""
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * (grad ** 2)
        m_hat = self.m / (1 - self.beta1 ** self.t)
        v_hat = self.v / (1 - self.beta2 ** self.t)
        flat -= self.lr * (m_hat / (np.sqrt(v_hat) + self.eps))

    def load_state(self, t: int, m: np.ndarray, v: np.ndarray) -> None:
        if m.shape != self.m.shape or v.shape != self.v.shape:
            raise DimensionMismatchError("optimizer state length", self.m.shape, m.shape)
        self.t = int(t)
        self.m = np.array(m, dtype=np.float64)
        self.v = np.array(v, dtype=np.float64)
