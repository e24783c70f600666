"""Sampled Gabor analysis: a windowed DFT on a time-frequency lattice.

Coefficients are plain inner products of the signal with modulated,
translated copies of the analysis window; no normalization is applied
anywhere in the transform path, so results match a direct-summation
computation of the same inner products to near machine precision.

Conventions (fixed, and relied on by every consumer):

* Frame ``k`` starts at sample ``hop * k`` of the *padded* signal
  (causal window placement).
* The signal is centered inside a reflection pad sized so that exactly
  ``frame_count`` frames exist; when the natural frame count already
  fits, no padding is added.
* Channel ``j`` is DFT bin ``j`` of ``fft_size``, i.e. frequency
  ``j * sample_rate / fft_size``; the modulation phase is measured on
  the padded time axis.
* Everything is computed in float64/complex128.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError, ParameterError
from .prng import SplitMix64
from .windows import WindowSpec, make_window


@dataclass
class SampledSignal:
    """Mono audio buffer plus its sample rate in Hz."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64).ravel()
        if int(self.sample_rate) <= 0:
            raise ParameterError("sample_rate must be a positive integer")
        self.sample_rate = int(self.sample_rate)
        if self.samples.size and not np.all(np.isfinite(self.samples)):
            raise InputError("signal samples must be finite")

    def __len__(self) -> int:
        return self.samples.size


@dataclass(frozen=True)
class GaborParams:
    """Window plus lattice of one Gabor transform layer.

    `hop` is the lattice time step in samples; `kept_channels` is the
    number of retained DFT bins counted from bin 0 (the frequency step
    is `sample_rate / fft_size` Hz). `kept_channels` may run up to
    `fft_size` so that complete (orthogonal-basis) configurations are
    expressible; representation defaults stay within the non-negative
    frequencies `fft_size // 2 + 1`.
    """

    window: WindowSpec
    hop: int
    fft_size: int
    kept_channels: int
    frame_count: int

    def __post_init__(self):
        if self.hop < 1:
            raise ParameterError("hop must be >= 1")
        if self.fft_size < 1:
            raise ParameterError("fft_size must be >= 1")
        if not 1 <= self.kept_channels <= self.fft_size:
            raise ParameterError("kept_channels must lie in [1, fft_size]")
        if self.frame_count < 1:
            raise ParameterError("frame_count must be >= 1")
        if self.window.length > self.fft_size:
            raise ParameterError("window may not be longer than fft_size")


@dataclass
class ComplexTFMatrix:
    """kept_channels x frame_count complex lattice coefficients."""

    values: np.ndarray
    params: GaborParams


def natural_frame_count(num_samples: int, params_or_hop, window_length: int | None = None) -> int:
    """Largest frame count needing no padding, at least 1."""
    if window_length is None:
        hop, wl = params_or_hop.hop, params_or_hop.window.length
    else:
        hop, wl = params_or_hop, window_length
    if num_samples < wl:
        return 1
    return (num_samples - wl) // hop + 1


def pad_for_frames(x: np.ndarray, params: GaborParams) -> np.ndarray:
    """Center `x` in a reflection pad so `frame_count` frames fit."""
    need = params.hop * (params.frame_count - 1) + params.window.length
    total = max(0, need - x.shape[-1])
    left = total // 2
    pad = [(0, 0)] * (x.ndim - 1) + [(left, total - left)]
    return np.pad(x, pad, mode="reflect") if total else x


def transform_rows(rows: np.ndarray, params: GaborParams) -> np.ndarray:
    """Gabor-transform each row of a (R, n) array along its last axis.

    Returns (R, kept_channels, frame_count) complex coefficients. This
    is the workhorse shared by the signal transform (R = 1) and the
    second scattering layer (one row per frequency channel).
    """
    rows = np.atleast_2d(np.asarray(rows, dtype=np.float64))
    if rows.shape[-1] == 0:
        raise InputError("cannot transform an empty signal")
    window = make_window(params.window)
    padded = pad_for_frames(rows, params)
    starts = params.hop * np.arange(params.frame_count)
    idx = starts[:, None] + np.arange(params.window.length)[None, :]
    chunks = padded[:, idx] * window            # (R, frames, win_len)
    spec = np.fft.fft(chunks, n=params.fft_size, axis=-1)[..., : params.kept_channels]
    # restore the absolute-time modulation phase the windowed FFT drops
    bins = np.arange(params.kept_channels)
    phase = np.exp(-2j * np.pi * np.outer(starts, bins) / params.fft_size)
    return (spec * phase).transpose(0, 2, 1)


def gabor_transform(signal: SampledSignal, params: GaborParams) -> ComplexTFMatrix:
    """Lattice coefficients <f, M_w T_x g> of one signal.

    Entry (j, k) is the inner product of the (padded) signal with the
    window translated to ``hop * k`` and modulated to DFT bin ``j``.
    """
    if len(signal) == 0:
        raise InputError("cannot transform an empty signal")
    values = transform_rows(signal.samples[None, :], params)[0]
    return ComplexTFMatrix(values=values, params=params)


def frame_bounds(
    params: GaborParams,
    signal_length: int,
    trials: int,
    seed: int,
) -> tuple[float, float]:
    """Randomized estimate of the Gabor-system frame bounds.

    Draws `trials` unit-norm white-noise signals and returns the min and
    max of the coefficient energy ratio ``sum |c|^2 / ||f||^2``, with the
    atoms taken as unit-norm copies of the window (the raw ratio scales
    by ``||g||^2``, and normalizing makes the complete rectangular
    configuration an exact orthonormal basis with ratio 1).
    """
    if trials < 1:
        raise ParameterError("trials must be >= 1")
    if signal_length < 1:
        raise ParameterError("signal_length must be >= 1")
    rng = SplitMix64(seed).numpy_rng("frame-bounds")
    window_energy = float(np.sum(make_window(params.window) ** 2))
    lo, hi = np.inf, -np.inf
    for _ in range(trials):
        f = rng.standard_normal(signal_length)
        f /= np.linalg.norm(f)
        coeffs = transform_rows(f[None, :], params)[0]
        ratio = float(np.sum(np.abs(coeffs) ** 2)) / window_energy
        lo, hi = min(lo, ratio), max(hi, ratio)
    return lo, hi
