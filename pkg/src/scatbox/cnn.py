"""Small convolutional classifier, forward and backward passes in numpy.

Architecture: a chain of conv stacks (3x3 same-padding convolution,
ReLU, 2x2 average pooling with floor truncation) followed by one dense
layer producing class logits. Four stacks with 64/64/64 kernels in the
first three is the reference configuration; the fourth stack's kernel
count defaults to whatever keeps the total trainable parameter count
near the low-80k budget for the given input shape, so the three input
representations train networks of comparable capacity.

All math runs in float64; parameters are exported as float32 only at
checkpoint time.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, ParameterError
from .prng import SplitMix64

PARAM_BUDGET = 82_462  # target for the auto-sized fourth stack
_CHUNK_ELEMENTS = 1 << 24  # cap scratch memory in the conv loops


@dataclass(frozen=True)
class StackSpec:
    kernels: int
    kernel_size: int = 3
    pool: int = 2

    def __post_init__(self):
        if self.kernels < 1:
            raise ParameterError("kernel count must be >= 1")
        if self.kernel_size % 2 != 1:
            raise ParameterError("kernel size must be odd (same padding)")
        if self.pool < 1:
            raise ParameterError("pool size must be >= 1")


@dataclass(frozen=True)
class ConvClassifierSpec:
    """Input shape, conv stacks, and head of one classifier."""

    input_shape: tuple[int, int, int]
    stacks: tuple[StackSpec, ...]
    classes: int = 6
    l2_weight: float = 0.001

    def __post_init__(self):
        if len(self.input_shape) != 3 or min(self.input_shape) < 1:
            raise ParameterError("input_shape must be (channels, freq, frames)")
        if not self.stacks:
            raise ParameterError("at least one conv stack is required")
        if self.classes < 2:
            raise ParameterError("need at least two classes")
        if self.feature_shape()[1] < 1 or self.feature_shape()[2] < 1:
            raise ParameterError("input too small: pooling erases the feature map")

    def feature_shape(self) -> tuple[int, int, int]:
        """Shape after the last pool."""
        c, h, w = self.input_shape
        for s in self.stacks:
            c, h, w = s.kernels, h // s.pool, w // s.pool
        return c, h, w

    def flat_features(self) -> int:
        c, h, w = self.feature_shape()
        return c * h * w

    def parameter_count(self) -> int:
        total = 0
        c_in = self.input_shape[0]
        for s in self.stacks:
            total += s.kernels * (c_in * s.kernel_size**2 + 1)
            c_in = s.kernels
        return total + self.flat_features() * self.classes + self.classes


def _auto_fourth_stack(input_shape, kernels, kernel_size, pool, classes, l2_weight):
    best = None
    for c4 in range(1, 65):
        spec = ConvClassifierSpec(
            input_shape=input_shape,
            stacks=tuple(StackSpec(k, kernel_size, pool) for k in (*kernels, c4)),
            classes=classes,
            l2_weight=l2_weight,
        )
        gap = abs(spec.parameter_count() - PARAM_BUDGET)
        if best is None or gap < best[0]:
            best = (gap, spec)
    return best[1]


def default_spec(
    input_shape: tuple[int, int, int],
    kernels: tuple[int, ...] = (64, 64, 64),
    fourth_kernels: int | None = None,
    kernel_size: int = 3,
    pool: int = 2,
    classes: int = 6,
    l2_weight: float = 0.001,
) -> ConvClassifierSpec:
    """Four-stack spec; the fourth kernel count is auto-sized by default."""
    if fourth_kernels is None:
        return _auto_fourth_stack(input_shape, kernels, kernel_size, pool, classes, l2_weight)
    return ConvClassifierSpec(
        input_shape=input_shape,
        stacks=tuple(StackSpec(k, kernel_size, pool) for k in (*kernels, fourth_kernels)),
        classes=classes,
        l2_weight=l2_weight,
    )


def _conv_same(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    """3x3 (or kxk) same-padding convolution, correlation orientation."""
    n, c_in, h, wd = x.shape
    k = w.shape[2]
    half = k // 2
    xp = np.pad(x, ((0, 0), (0, 0), (half, half), (half, half)))
    out = np.empty((n, w.shape[0], h, wd))
    step = max(1, _CHUNK_ELEMENTS // max(1, c_in * h * wd * k * k))
    for lo in range(0, n, step):
        hi = min(n, lo + step)
        acc = np.zeros((hi - lo, h, wd, w.shape[0]))
        for i in range(k):
            for j in range(k):
                patch = xp[lo:hi, :, i : i + h, j : j + wd]
                acc += np.tensordot(patch, w[:, :, i, j], axes=([1], [1]))
        out[lo:hi] = acc.transpose(0, 3, 1, 2)
    return out + b[None, :, None, None]


def _conv_backward(x, w, dout):
    """Gradients of the same-padding convolution."""
    n, c_in, h, wd = x.shape
    k = w.shape[2]
    half = k // 2
    xp = np.pad(x, ((0, 0), (0, 0), (half, half), (half, half)))
    dxp = np.zeros_like(xp)
    dw = np.zeros_like(w)
    for i in range(k):
        for j in range(k):
            patch = xp[:, :, i : i + h, j : j + wd]
            dw[:, :, i, j] = np.tensordot(dout, patch, axes=([0, 2, 3], [0, 2, 3]))
            dxp[:, :, i : i + h, j : j + wd] += np.tensordot(
                dout, w[:, :, i, j], axes=([1], [0])
            ).transpose(0, 3, 1, 2)
    db = dout.sum(axis=(0, 2, 3))
    dx = dxp[:, :, half : half + h, half : half + wd] if half else dxp
    return dx, dw, db


def _pool_forward(x: np.ndarray, p: int):
    n, c, h, w = x.shape
    h2, w2 = h // p, w // p
    cropped = x[:, :, : h2 * p, : w2 * p]
    out = cropped.reshape(n, c, h2, p, w2, p).mean(axis=(3, 5))
    return out, (h, w)


def _pool_backward(dout: np.ndarray, p: int, in_hw):
    n, c, h2, w2 = dout.shape
    h, w = in_hw
    dx = np.zeros((n, c, h, w))
    spread = np.repeat(np.repeat(dout, p, axis=2), p, axis=3) / (p * p)
    dx[:, :, : h2 * p, : w2 * p] = spread
    return dx


class ConvClassifier:
    """Parameters plus forward/backward for one spec.

    Parameter declaration order (also the checkpoint order): for each
    stack its kernel tensor (out, in, k, k) then bias, finally the dense
    weight (flat_features, classes) and dense bias.
    """

    def __init__(self, spec: ConvClassifierSpec, params: list[np.ndarray]):
        self.spec = spec
        self.params = params

    @classmethod
    def initialize(cls, spec: ConvClassifierSpec, seed: int = 0) -> "ConvClassifier":
        """He-style uniform init scaled by fan-in; biases start at zero."""
        rng = SplitMix64(seed).numpy_rng("conv-init")
        params: list[np.ndarray] = []
        c_in = spec.input_shape[0]
        for s in spec.stacks:
            fan_in = c_in * s.kernel_size**2
            limit = np.sqrt(6.0 / fan_in)
            params.append(rng.uniform(-limit, limit, (s.kernels, c_in, s.kernel_size, s.kernel_size)))
            params.append(np.zeros(s.kernels))
            c_in = s.kernels
        flat = spec.flat_features()
        limit = np.sqrt(6.0 / flat)
        params.append(rng.uniform(-limit, limit, (flat, spec.classes)))
        params.append(np.zeros(spec.classes))
        return cls(spec, params)

    @property
    def parameter_count(self) -> int:
        return int(sum(p.size for p in self.params))

    def weight_indices(self) -> list[int]:
        """Indices of weight tensors (L2-regularized); biases excluded."""
        return [i for i in range(0, len(self.params), 2)]

    def _check_input(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 3:
            x = x[None]
        if x.ndim != 4 or x.shape[1:] != self.spec.input_shape:
            raise InputError(
                f"input shape {x.shape[1:]} does not match spec {self.spec.input_shape}"
            )
        return x

    def forward(self, x: np.ndarray):
        """Logits plus the cache consumed by `backward`."""
        x = self._check_input(x)
        cache = []
        out = x
        for si, s in enumerate(self.spec.stacks):
            w, b = self.params[2 * si], self.params[2 * si + 1]
            pre = _conv_same(out, w, b)
            mask = pre > 0
            act = pre * mask
            pooled, in_hw = _pool_forward(act, s.pool)
            cache.append((out, mask, in_hw))
            out = pooled
        flat = out.reshape(out.shape[0], -1)
        wd, bd = self.params[-2], self.params[-1]
        logits = flat @ wd + bd
        cache.append((flat, out.shape))
        return logits, cache

    def logits(self, x: np.ndarray) -> np.ndarray:
        return self.forward(x)[0]

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        logits = self.logits(x)
        shifted = logits - logits.max(axis=1, keepdims=True)
        e = np.exp(shifted)
        return e / e.sum(axis=1, keepdims=True)

    def backward(self, cache, dlogits: np.ndarray) -> list[np.ndarray]:
        """Parameter gradients for an upstream logits gradient."""
        grads: list[np.ndarray] = [None] * len(self.params)
        flat, pooled_shape = cache[-1]
        wd = self.params[-2]
        grads[-2] = flat.T @ dlogits
        grads[-1] = dlogits.sum(axis=0)
        dflat = dlogits @ wd.T
        dout = dflat.reshape(pooled_shape)
        for si in range(len(self.spec.stacks) - 1, -1, -1):
            s = self.spec.stacks[si]
            x_in, mask, in_hw = cache[si]
            dact = _pool_backward(dout, s.pool, in_hw)
            dpre = dact * mask
            dx, dw, db = _conv_backward(x_in, self.params[2 * si], dpre)
            grads[2 * si] = dw
            grads[2 * si + 1] = db
            dout = dx
        return grads

    def clone_params(self) -> list[np.ndarray]:
        return [p.copy() for p in self.params]
