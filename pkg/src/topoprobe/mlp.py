"""A small fully connected binary classifier in plain numpy.

Layers compute ``act(W @ z + b)``; the network is their composition.
Parameters are kept as a list of :class:`Layer` objects whose arrays are
also exposed as a flat list (``W1, b1, W2, b2, ...``) for the optimizer.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .errors import DivergenceError, NumericOverflowError, ParameterError, ShapeError
from .geometry import LabeledDataset, as_cloud, rng

PROB_CLIP = 1e-7
DET_TOL = 1e-10


class Activation(str, Enum):
    RELU = "relu"
    TANH = "tanh"
    SIGMOID = "sigmoid"

    @classmethod
    def parse(cls, value) -> "Activation":
        if isinstance(value, Activation):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ParameterError(f"unknown activation {value!r}") from None

    def __call__(self, z: np.ndarray) -> np.ndarray:
        if self is Activation.RELU:
            return np.maximum(z, 0.0)
        if self is Activation.TANH:
            return np.tanh(z)
        # split by sign so exp never overflows
        out = np.empty_like(z)
        pos = z >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
        ez = np.exp(z[~pos])
        out[~pos] = ez / (1.0 + ez)
        return out

    def derivative(self, a: np.ndarray) -> np.ndarray:
        """Derivative expressed through the activation output ``a``."""
        if self is Activation.RELU:
            return (a > 0).astype(a.dtype)
        if self is Activation.TANH:
            return 1.0 - a * a
        return a * (1.0 - a)


@dataclass(frozen=True)
class LayerSpec:
    in_dim: int
    out_dim: int
    activation: Activation

    def __post_init__(self):
        object.__setattr__(self, "activation", Activation.parse(self.activation))
        if self.in_dim < 1 or self.out_dim < 1:
            raise ParameterError("layer widths must be positive")


@dataclass
class Layer:
    W: np.ndarray
    b: np.ndarray
    activation: Activation

    @property
    def spec(self) -> LayerSpec:
        return LayerSpec(self.W.shape[1], self.W.shape[0], self.activation)


@dataclass
class NetworkParams:
    layers: List[Layer]

    def __post_init__(self):
        for i, layer in enumerate(self.layers):
            layer.W = np.asarray(layer.W, dtype=np.float64)
            layer.b = np.asarray(layer.b, dtype=np.float64).reshape(-1)
            layer.activation = Activation.parse(layer.activation)
            if layer.W.ndim != 2 or layer.b.shape[0] != layer.W.shape[0]:
                raise ShapeError(f"layer {i + 1}: W {layer.W.shape} and b {layer.b.shape} disagree")
            if i and layer.W.shape[1] != self.layers[i - 1].W.shape[0]:
                raise ShapeError(f"layer {i + 1} input width does not match layer {i} output")
            if not (np.all(np.isfinite(layer.W)) and np.all(np.isfinite(layer.b))):
                raise ParameterError(f"layer {i + 1} has non-finite parameters")

    @property
    def arrays(self) -> List[np.ndarray]:
        out = []
        for layer in self.layers:
            out.extend([layer.W, layer.b])
        return out

    def with_arrays(self, arrays: Sequence[np.ndarray]) -> "NetworkParams":
        layers = [
            Layer(arrays[2 * i].copy(), arrays[2 * i + 1].copy(), layer.activation)
            for i, layer in enumerate(self.layers)
        ]
        return NetworkParams(layers)

    def copy(self) -> "NetworkParams":
        return self.with_arrays(self.arrays)

    @property
    def input_dim(self) -> int:
        return self.layers[0].W.shape[1]

    def to_json(self, path=None) -> str:
        doc = {
            "layers": [
                {
                    "in_dim": int(l.W.shape[1]),
                    "out_dim": int(l.W.shape[0]),
                    "activation": l.activation.value,
                    "weights": l.W.tolist(),
                    "bias": l.b.tolist(),
                }
                for l in self.layers
            ]
        }
        text = json.dumps(doc, indent=1)
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_json(cls, text_or_path) -> "NetworkParams":
        text = str(text_or_path)
        if not text.lstrip().startswith("{"):
            text = Path(text_or_path).read_text()
        doc = json.loads(text)
        layers = [
            Layer(np.array(l["weights"], dtype=np.float64).reshape(l["out_dim"], l["in_dim"]),
                  np.array(l["bias"], dtype=np.float64), l["activation"])
            for l in doc["layers"]
        ]
        return cls(layers)


def default_architecture(hidden_activation="relu") -> List[LayerSpec]:
    """4 -> 10 -> 30 -> 10 hidden units with a single sigmoid output."""
    act = Activation.parse(hidden_activation)
    return [
        LayerSpec(4, 10, act),
        LayerSpec(10, 30, act),
        LayerSpec(30, 10, act),
        LayerSpec(10, 1, Activation.SIGMOID),
    ]


def check_architecture(arch: Sequence[LayerSpec]) -> None:
    if not arch:
        raise ParameterError("architecture needs at least one layer")
    for prev, nxt in zip(arch, arch[1:]):
        if prev.out_dim != nxt.in_dim:
            raise ShapeError(f"layer widths do not chain: {prev.out_dim} -> {nxt.in_dim}")


def init_params(arch: Sequence[LayerSpec], seed: int = 0) -> NetworkParams:
    """He-uniform weights for ReLU layers, Xavier-uniform otherwise; zero biases."""
    check_architecture(arch)
    gen = rng(seed)
    layers = []
    for spec in arch:
        if spec.activation is Activation.RELU:
            limit = np.sqrt(6.0 / spec.in_dim)
        else:
            limit = np.sqrt(6.0 / (spec.in_dim + spec.out_dim))
        W = gen.uniform(-limit, limit, size=(spec.out_dim, spec.in_dim))
        layers.append(Layer(W, np.zeros(spec.out_dim), spec.activation))
    return NetworkParams(layers)


def forward(params: NetworkParams, inputs) -> Tuple[np.ndarray, List[np.ndarray]]:
    """Run the network; returns (output, post-activation output of every layer)."""
    z = as_cloud(inputs) if np.asarray(inputs).ndim == 2 else np.asarray(inputs, dtype=np.float64)
    if z.ndim != 2 or z.shape[1] != params.input_dim:
        raise ShapeError(f"input width {z.shape[-1]} != network input {params.input_dim}")
    reps = []
    with np.errstate(over="ignore", invalid="ignore"):
        for i, layer in enumerate(params.layers):
            z = layer.activation(z @ layer.W.T + layer.b)
            if not np.all(np.isfinite(z)):
                raise NumericOverflowError(f"non-finite activations in layer {i + 1}")
            reps.append(z)
    return z, reps


def extract_representations(params: NetworkParams, cloud) -> List[np.ndarray]:
    """Post-activation outputs of layers 1..n (hidden layers and the output)."""
    cloud = np.asarray(cloud, dtype=np.float64)
    if cloud.size == 0:
        cloud = cloud.reshape(0, params.input_dim)
    return forward(params, cloud)[1]


def bce_loss(prob: np.ndarray, labels: np.ndarray) -> float:
    """Mean binary cross-entropy with probabilities clipped away from 0 and 1."""
    p = np.clip(prob.reshape(-1), PROB_CLIP, 1 - PROB_CLIP)
    y = np.asarray(labels, dtype=np.float64).reshape(-1)
    return float(-np.mean(y * np.log(p) + (1 - y) * np.log1p(-p)))


def gradients(params: NetworkParams, inputs, labels) -> List[np.ndarray]:
    """Exact gradient of :func:`bce_loss` w.r.t. ``params.arrays`` (same order)."""
    x = np.asarray(inputs, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64).reshape(-1, 1)
    out, reps = forward(params, x)
    n = x.shape[0]
    p = out
    inside = (p > PROB_CLIP) & (p < 1 - PROB_CLIP)
    pc = np.clip(p, PROB_CLIP, 1 - PROB_CLIP)
    grad_a = np.where(inside, (pc - y) / (pc * (1 - pc)), 0.0) / n
    grads: List[np.ndarray] = [None] * (2 * len(params.layers))
    for i in range(len(params.layers) - 1, -1, -1):
        layer = params.layers[i]
        delta = grad_a * layer.activation.derivative(reps[i])
        prev = reps[i - 1] if i else x
        grads[2 * i] = delta.T @ prev
        grads[2 * i + 1] = delta.sum(axis=0)
        grad_a = delta @ layer.W
    return grads


def accuracy(params: NetworkParams, inputs, labels) -> float:
    out, _ = forward(params, inputs)
    return float(np.mean((out.reshape(-1) >= 0.5) == (np.asarray(labels).reshape(-1) == 1)))


@dataclass
class AdamState:
    m: List[np.ndarray]
    v: List[np.ndarray]
    t: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ParameterError("Adam betas must lie in [0, 1)")
        if self.lr <= 0 or self.eps <= 0:
            raise ParameterError("Adam lr and eps must be positive")

    @classmethod
    def fresh(cls, arrays: Sequence[np.ndarray], **hyper) -> "AdamState":
        return cls([np.zeros_like(a) for a in arrays], [np.zeros_like(a) for a in arrays], **hyper)


def adam_step(
    state: AdamState, params: Sequence[np.ndarray], grads: Sequence[np.ndarray]
) -> Tuple[AdamState, List[np.ndarray]]:
    """One bias-corrected Adam update; inputs are left untouched."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ShapeError("params, grads and optimizer state differ in length")
    t = state.t + 1
    b1, b2 = state.beta1, state.beta2
    new_m, new_v, new_p = [], [], []
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape or p.shape != m.shape:
            raise ShapeError(f"shape mismatch {p.shape} vs {g.shape}")
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        m_hat = m / (1 - b1**t)
        v_hat = v / (1 - b2**t)
        new_p.append(p - state.lr * m_hat / (np.sqrt(v_hat) + state.eps))
        new_m.append(m)
        new_v.append(v)
    return replace(state, m=new_m, v=new_v, t=t), new_p


@dataclass
class TrainConfig:
    epochs: int = 300
    batch_size: int = 64
    lr: float = 1e-3
    seed: int = 0
    validation_fraction: float = 0.2


@dataclass
class TrainHistory:
    loss: List[float] = field(default_factory=list)
    accuracy: List[float] = field(default_factory=list)
    val_accuracy: List[float] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.loss)

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        buf.write("epoch,loss,accuracy\n")
        for i, (l, a) in enumerate(zip(self.loss, self.accuracy), start=1):
            buf.write(f"{i},{l:.17g},{a:.17g}\n")
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    def summary(self) -> Dict[str, float]:
        if not self.loss:
            return {"epochs": 0}
        return {
            "epochs": len(self.loss),
            "initial_loss": self.loss[0],
            "final_loss": self.loss[-1],
            "final_accuracy": self.accuracy[-1],
            "best_accuracy": max(self.accuracy),
            "final_val_accuracy": self.val_accuracy[-1] if self.val_accuracy else None,
        }


def split_indices(n: int, fraction: float, seed: int) -> Tuple[np.ndarray, np.ndarray]:
    """Seeded (train, validation) split; ``fraction`` goes to validation."""
    order = rng(seed).permutation(n)
    n_val = int(round(n * fraction))
    return np.sort(order[n_val:]), np.sort(order[:n_val])


def train(
    dataset: LabeledDataset, arch: Sequence[LayerSpec], config: TrainConfig = TrainConfig()
) -> Tuple[NetworkParams, TrainHistory]:
    """Minimise binary cross-entropy with minibatch Adam.

    The reported accuracy is on the training split; the held-out split's
    accuracy is kept in ``history.val_accuracy``.
    """
    if len(dataset) == 0:
        raise ParameterError("cannot train on an empty dataset")
    check_architecture(arch)
    if arch[0].in_dim != dataset.dim:
        raise ShapeError(f"architecture expects {arch[0].in_dim} inputs, data has {dataset.dim}")
    if arch[-1].out_dim != 1 or arch[-1].activation is not Activation.SIGMOID:
        raise ParameterError("the last layer must be a width-1 sigmoid")
    if config.epochs < 0 or config.batch_size < 1:
        raise ParameterError("epochs must be >= 0 and batch_size >= 1")

    params = init_params(arch, seed=config.seed)
    history = TrainHistory()
    if config.epochs == 0:
        return params, history

    train_idx, val_idx = split_indices(len(dataset), config.validation_fraction, config.seed + 1)
    x, y = dataset.points[train_idx], dataset.labels[train_idx]
    xv, yv = dataset.points[val_idx], dataset.labels[val_idx]
    gen = rng(config.seed + 2)
    arrays = params.arrays
    state = AdamState.fresh(arrays, lr=config.lr)
    for epoch in range(1, config.epochs + 1):
        order = gen.permutation(x.shape[0])
        for start in range(0, x.shape[0], config.batch_size):
            batch = order[start : start + config.batch_size]
            grads = gradients(params, x[batch], y[batch])
            state, arrays = adam_step(state, arrays, grads)
            params = params.with_arrays(arrays)
        out, _ = forward(params, x)
        loss = bce_loss(out, y)
        if not np.isfinite(loss):
            raise DivergenceError(f"loss became non-finite at epoch {epoch}", epoch)
        history.loss.append(loss)
        history.accuracy.append(float(np.mean((out.reshape(-1) >= 0.5) == (y == 1))))
        if xv.shape[0]:
            history.val_accuracy.append(accuracy(params, xv, yv))
    return params, history


def homeomorphism_diagnostic(W, b=None, activation="relu") -> Dict[str, bool]:
    """Necessary conditions for ``x -> act(W x + b)`` to be a homeomorphism onto R^n.

    ``invertible`` scales ``W`` by its spectral norm before testing the
    determinant.  Only tanh counts as a bijective activation; the sigmoid
    is a bijection onto (0, 1) only, reported as ``bijective_onto_image``.
    """
    W = np.atleast_2d(np.asarray(W, dtype=np.float64))
    act = Activation.parse(activation)
    square = W.shape[0] == W.shape[1]
    invertible = False
    if square:
        norm = np.linalg.norm(W, 2)
        invertible = bool(norm > 0 and abs(np.linalg.det(W / norm)) > DET_TOL)
    bijective = act is Activation.TANH
    return {
        "square": bool(square),
        "invertible": invertible,
        "bijective_activation": bijective,
        "bijective_onto_image": act in (Activation.TANH, Activation.SIGMOID),
        "possibly_homeomorphic": bool(square and invertible and bijective),
    }
