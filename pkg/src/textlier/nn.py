"""Minimal tensor/NN core: Conv2D, Dense, ReLU, nearest-neighbor upsampling,
MSE loss and Adam.

Tensors are plain float64 numpy arrays. Everything runs single-sample,
single-threaded and deterministic; mini-batching is done by the caller by
accumulating gradients. Analytic gradients are verified against central
finite differences in the test suite, so keep forward/backward pairs exact,
not approximate.
"""

from __future__ import annotations

import numpy as np

from .errors import ShapeError, StateError, TrainingError


def as_tensor(x) -> np.ndarray:
    """Coerce to a float64 array and reject non-finite entries."""
    arr = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValueError("tensor contains non-finite entries")
    return arr


def glorot_uniform(shape: tuple[int, ...], fan_in: int, fan_out: int,
                   rng: np.random.Generator) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


class Layer:
    """Base layer: index-aligned, shape-congruent parameter/gradient lists."""

    @property
    def parameters(self) -> list[np.ndarray]:
        return []

    @property
    def gradients(self) -> list[np.ndarray]:
        return []

    def forward(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def backward(self, upstream: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def zero_grad(self) -> None:
        for g in self.gradients:
            g[...] = 0.0


class Conv2D(Layer):
    """2D convolution (cross-correlation) on a single (C, H, W) sample.

    Zero padding; output spatial dims floor((in + 2p - k)/s) + 1. Forward is
    vectorized over spatial positions per kernel offset; the nested-loop
    reference used to check it lives in the tests, not here.
    """

    def __init__(self, in_channels: int, out_channels: int,
                 kernel_h: int, kernel_w: int,
                 stride: int = 1, padding: int = 0,
                 rng: np.random.Generator | None = None):
        if min(in_channels, out_channels, kernel_h, kernel_w, stride) < 1 or padding < 0:
            raise ValueError("invalid Conv2D configuration")
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel_h = kernel_h
        self.kernel_w = kernel_w
        self.stride = stride
        self.padding = padding
        fan_in = in_channels * kernel_h * kernel_w
        fan_out = out_channels * kernel_h * kernel_w
        if rng is None:
            rng = np.random.default_rng(0)
        self.weight = glorot_uniform(
            (out_channels, in_channels, kernel_h, kernel_w), fan_in, fan_out, rng)
        self.bias = np.zeros(out_channels)
        self.grad_weight = np.zeros_like(self.weight)
        self.grad_bias = np.zeros_like(self.bias)
        self._cached_input: np.ndarray | None = None

    @property
    def parameters(self) -> list[np.ndarray]:
        return [self.weight, self.bias]

    @property
    def gradients(self) -> list[np.ndarray]:
        return [self.grad_weight, self.grad_bias]

    def output_shape(self, h: int, w: int) -> tuple[int, int]:
        oh = (h + 2 * self.padding - self.kernel_h) // self.stride + 1
        ow = (w + 2 * self.padding - self.kernel_w) // self.stride + 1
        if oh < 1 or ow < 1:
            raise ShapeError(
                f"Conv2D: kernel {self.kernel_h}x{self.kernel_w} stride {self.stride} "
                f"padding {self.padding} leaves no output for input {h}x{w}")
        return oh, ow

    def _pad(self, x: np.ndarray) -> np.ndarray:
        p = self.padding
        if p == 0:
            return x
        return np.pad(x, ((0, 0), (p, p), (p, p)))

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = as_tensor(x)
        if x.ndim != 3 or x.shape[0] != self.in_channels:
            raise ShapeError(
                f"Conv2D expects ({self.in_channels}, H, W), got {x.shape}")
        _, h, w = x.shape
        oh, ow = self.output_shape(h, w)
        xp = self._pad(x)
        s = self.stride
        out = np.tile(self.bias[:, None, None], (1, oh, ow))
        for ky in range(self.kernel_h):
            for kx in range(self.kernel_w):
                patch = xp[:, ky:ky + s * oh:s, kx:kx + s * ow:s]
                # (C_out, C_in) @ (C_in, oh*ow) accumulated per kernel offset
                out += np.einsum("oi,iyx->oyx", self.weight[:, :, ky, kx], patch)
        self._cached_input = x
        return out

    def backward(self, upstream: np.ndarray) -> np.ndarray:
        if self._cached_input is None:
            raise StateError("Conv2D.backward called before forward")
        x = self._cached_input
        _, h, w = x.shape
        oh, ow = self.output_shape(h, w)
        upstream = np.asarray(upstream, dtype=np.float64)
        if upstream.shape != (self.out_channels, oh, ow):
            raise ShapeError(
                f"upstream shape {upstream.shape} != forward output "
                f"{(self.out_channels, oh, ow)}")
        xp = self._pad(x)
        p, s = self.padding, self.stride
        grad_xp = np.zeros_like(xp)
        self.grad_bias[...] = upstream.sum(axis=(1, 2))
        for ky in range(self.kernel_h):
            for kx in range(self.kernel_w):
                patch = xp[:, ky:ky + s * oh:s, kx:kx + s * ow:s]
                self.grad_weight[:, :, ky, kx] = np.einsum(
                    "oyx,iyx->oi", upstream, patch)
                grad_xp[:, ky:ky + s * oh:s, kx:kx + s * ow:s] += np.einsum(
                    "oi,oyx->iyx", self.weight[:, :, ky, kx], upstream)
        if p:
            return grad_xp[:, p:-p, p:-p]
        return grad_xp


class Dense(Layer):
    """Affine map weight @ x + bias on a flat input vector."""

    def __init__(self, in_dim: int, out_dim: int,
                 rng: np.random.Generator | None = None):
        if in_dim < 1 or out_dim < 1:
            raise ValueError("Dense dims must be positive")
        self.in_dim = in_dim
        self.out_dim = out_dim
        if rng is None:
            rng = np.random.default_rng(0)
        self.weight = glorot_uniform((out_dim, in_dim), in_dim, out_dim, rng)
        self.bias = np.zeros(out_dim)
        self.grad_weight = np.zeros_like(self.weight)
        self.grad_bias = np.zeros_like(self.bias)
        self._cached_input: np.ndarray | None = None

    @property
    def parameters(self) -> list[np.ndarray]:
        return [self.weight, self.bias]

    @property
    def gradients(self) -> list[np.ndarray]:
        return [self.grad_weight, self.grad_bias]

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = as_tensor(x).ravel()
        if x.shape[0] != self.in_dim:
            raise ShapeError(f"Dense expects length {self.in_dim}, got {x.shape[0]}")
        self._cached_input = x
        return self.weight @ x + self.bias

    def backward(self, upstream: np.ndarray) -> np.ndarray:
        if self._cached_input is None:
            raise StateError("Dense.backward called before forward")
        upstream = np.asarray(upstream, dtype=np.float64).ravel()
        if upstream.shape[0] != self.out_dim:
            raise ShapeError(
                f"upstream length {upstream.shape[0]} != out_dim {self.out_dim}")
        self.grad_weight[...] = np.outer(upstream, self._cached_input)
        self.grad_bias[...] = upstream
        return self.weight.T @ upstream


class ReLU(Layer):
    def __init__(self):
        self._mask: np.ndarray | None = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = as_tensor(x)
        self._mask = x > 0
        return np.where(self._mask, x, 0.0)

    def backward(self, upstream: np.ndarray) -> np.ndarray:
        if self._mask is None:
            raise StateError("ReLU.backward called before forward")
        upstream = np.asarray(upstream, dtype=np.float64)
        if upstream.shape != self._mask.shape:
            raise ShapeError(
                f"upstream shape {upstream.shape} != forward shape {self._mask.shape}")
        return np.where(self._mask, upstream, 0.0)


class Upsample2x(Layer):
    """Nearest-neighbor 2x upsampling of (C, H, W); backward sums each 2x2 block."""

    def __init__(self):
        self._in_shape: tuple[int, ...] | None = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = as_tensor(x)
        if x.ndim != 3:
            raise ShapeError(f"Upsample2x expects (C, H, W), got {x.shape}")
        self._in_shape = x.shape
        return x.repeat(2, axis=1).repeat(2, axis=2)

    def backward(self, upstream: np.ndarray) -> np.ndarray:
        if self._in_shape is None:
            raise StateError("Upsample2x.backward called before forward")
        c, h, w = self._in_shape
        upstream = np.asarray(upstream, dtype=np.float64)
        if upstream.shape != (c, 2 * h, 2 * w):
            raise ShapeError(
                f"upstream shape {upstream.shape} != {(c, 2 * h, 2 * w)}")
        return upstream.reshape(c, h, 2, w, 2).sum(axis=(2, 4))


class Flatten(Layer):
    def __init__(self):
        self._in_shape: tuple[int, ...] | None = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = as_tensor(x)
        self._in_shape = x.shape
        return x.ravel()

    def backward(self, upstream: np.ndarray) -> np.ndarray:
        if self._in_shape is None:
            raise StateError("Flatten.backward called before forward")
        return np.asarray(upstream, dtype=np.float64).reshape(self._in_shape)


class Reshape(Layer):
    def __init__(self, shape: tuple[int, ...]):
        self.shape = tuple(shape)

    def forward(self, x: np.ndarray) -> np.ndarray:
        return as_tensor(x).reshape(self.shape)

    def backward(self, upstream: np.ndarray) -> np.ndarray:
        return np.asarray(upstream, dtype=np.float64).ravel()


def mse_loss(prediction: np.ndarray, target: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean squared error over all elements and its gradient w.r.t. prediction."""
    prediction = np.asarray(prediction, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if prediction.shape != target.shape:
        raise ShapeError(
            f"mse_loss shapes differ: {prediction.shape} vs {target.shape}")
    diff = prediction - target
    n = diff.size
    loss = float(np.dot(diff.ravel(), diff.ravel()) / n)
    return loss, 2.0 * diff / n


class AdamState:
    """Bias-corrected Adam over a flat list of parameter arrays."""

    def __init__(self, params: list[np.ndarray], lr: float = 1e-3,
                 beta1: float = 0.9, beta2: float = 0.999, epsilon: float = 1e-8):
        if min(lr, beta1, beta2, epsilon) <= 0:
            raise ValueError("Adam hyperparameters must be positive")
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.step = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]


def adam_step(params: list[np.ndarray], grads: list[np.ndarray],
              state: AdamState) -> None:
    """One in-place Adam update. Deterministic; rejects non-finite gradients."""
    if not (len(params) == len(grads) == len(state.m)):
        raise ShapeError("params/grads/state length mismatch")
    for p, g in zip(params, grads):
        if p.shape != g.shape:
            raise ShapeError(f"param shape {p.shape} != grad shape {g.shape}")
        if not np.all(np.isfinite(g)):
            raise TrainingError("non-finite gradient: training diverged")
    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= b1
        m += (1 - b1) * g
        v *= b2
        v += (1 - b2) * g * g
        m_hat = m / (1 - b1 ** t)
        v_hat = v / (1 - b2 ** t)
        p -= state.lr * m_hat / (np.sqrt(v_hat) + state.epsilon)
