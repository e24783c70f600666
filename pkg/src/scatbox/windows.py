"""Analysis window generation: Tukey, Hann, Gaussian, rectangular.

All windows are symmetric about their midpoint with values in [0, 1].
The Tukey family interpolates between rectangular (taper 0) and Hann
(taper 1) exactly, which the segmenter relies on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError

WINDOW_KINDS = ("tukey", "hann", "gauss", "rectangular")


@dataclass(frozen=True)
class WindowSpec:
    """One analysis window.

    `shape_param` is the taper fraction in [0, 1] for `tukey` and the
    standard deviation in samples for `gauss`; other kinds ignore it.
    """

    kind: str
    length: int
    shape_param: float = 0.0

    def __post_init__(self):
        if self.kind not in WINDOW_KINDS:
            raise ParameterError(f"unknown window kind {self.kind!r}")
        if self.length < 1:
            raise ParameterError("window length must be >= 1")
        if self.kind == "tukey" and not 0.0 <= self.shape_param <= 1.0:
            raise ParameterError("tukey taper fraction must lie in [0, 1]")
        if self.kind == "gauss" and not self.shape_param > 0.0:
            raise ParameterError("gauss standard deviation must be > 0")


def _mirror(w: np.ndarray) -> np.ndarray:
    """Copy the left half onto the right so symmetry is bit-exact."""
    half = w.size // 2
    w[w.size - half:] = w[:half][::-1]
    return w


def _hann(length: int) -> np.ndarray:
    n = np.arange(length)
    return _mirror(0.5 * (1.0 - np.cos(2.0 * np.pi * n / (length - 1))))


def _tukey(length: int, alpha: float) -> np.ndarray:
    if alpha == 0.0:
        return np.ones(length)
    t = np.arange(length) / (length - 1)
    w = np.ones(length)
    taper = t < alpha / 2.0
    w[taper] = 0.5 * (1.0 + np.cos(np.pi * (2.0 * t[taper] / alpha - 1.0)))
    return _mirror(w)


def _gauss(length: int, sigma: float) -> np.ndarray:
    n = np.arange(length)
    center = (length - 1) / 2.0
    return np.exp(-0.5 * ((n - center) / sigma) ** 2)


def make_window(spec: WindowSpec) -> np.ndarray:
    """Generate window samples for `spec` as float64."""
    if spec.length == 1:
        return np.ones(1)
    if spec.kind == "rectangular":
        return np.ones(spec.length)
    if spec.kind == "hann":
        return _hann(spec.length)
    if spec.kind == "tukey":
        return _tukey(spec.length, spec.shape_param)
    return _gauss(spec.length, spec.shape_param)
