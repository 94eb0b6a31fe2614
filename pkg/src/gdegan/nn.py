"""Small dense-network building blocks used by the embedding and GDA layers.

All parameter arrays are float32-representable; arithmetic runs in float64.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError

LN_EPS = 1e-5


def sigmoid(x: np.ndarray) -> np.ndarray:
    # exp overflow saturates to inf, which IEEE division turns into the
    # correct limit (0); suppress the spurious warning only
    with np.errstate(over="ignore"):
        return 1.0 / (1.0 + np.exp(-x))


def silu(x: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        return x / (1.0 + np.exp(-x))


def softplus(x):
    x = np.asarray(x, dtype=np.float64)
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


def inverse_softplus(y: float) -> float:
    return float(np.log(np.expm1(y)))


def quantize32(a: np.ndarray) -> np.ndarray:
    """Round to the nearest float32 value, kept as float64 storage."""
    return np.asarray(a, dtype=np.float32).astype(np.float64)


def uniform_fan_in(rng: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialization, fan_in = shape[0]."""
    bound = 1.0 / np.sqrt(shape[0])
    return quantize32(rng.uniform(-bound, bound, size=shape))


@dataclass
class Linear:
    """y = x @ w (+ b).  ``w`` is (in, out)."""

    w: np.ndarray
    b: np.ndarray | None = None

    def __call__(self, x: np.ndarray) -> np.ndarray:
        if x.shape[-1] != self.w.shape[0]:
            raise ShapeError(f"input width {x.shape[-1]} != {self.w.shape[0]}")
        y = x @ self.w
        return y if self.b is None else y + self.b

    @staticmethod
    def init(rng, n_in: int, n_out: int, bias: bool = True) -> "Linear":
        return Linear(
            w=uniform_fan_in(rng, (n_in, n_out)),
            b=np.zeros(n_out) if bias else None,
        )


@dataclass
class MLP2:
    """Two-layer perceptron with SiLU after the hidden layer."""

    lin1: Linear
    lin2: Linear

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.lin2(silu(self.lin1(x)))

    @staticmethod
    def init(rng, n_in: int, n_hidden: int, n_out: int) -> "MLP2":
        return MLP2(Linear.init(rng, n_in, n_hidden), Linear.init(rng, n_hidden, n_out))


@dataclass
class LayerNorm:
    """Feature-axis normalization with learned scale and shift."""

    scale: np.ndarray
    shift: np.ndarray

    def __call__(self, x: np.ndarray) -> np.ndarray:
        width = x.shape[-1]
        mean = x.sum(axis=-1, keepdims=True) / width
        centered = x - mean
        var = (centered * centered).sum(axis=-1, keepdims=True) / width
        return centered / np.sqrt(var + LN_EPS) * self.scale + self.shift

    @staticmethod
    def init(width: int) -> "LayerNorm":
        return LayerNorm(scale=np.ones(width), shift=np.zeros(width))


def scatter_add(values: np.ndarray, index: np.ndarray, n: int) -> np.ndarray:
    """Sum ``values`` rows into ``n`` buckets given by ``index`` (deterministic)."""
    out = np.zeros((n,) + values.shape[1:], dtype=values.dtype)
    np.add.at(out, index, values)
    return out
