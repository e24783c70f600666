"""Triangular mel filter bank and frequency-averaged spectrogram rows."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, ParameterError


def hz_to_mel(freq_hz):
    """Perceptual mel value of a frequency in Hz (2595 log10 form)."""
    return 2595.0 * np.log10(1.0 + np.asarray(freq_hz, dtype=np.float64) / 700.0)


def mel_to_hz(mel):
    return 700.0 * (10.0 ** (np.asarray(mel, dtype=np.float64) / 2595.0) - 1.0)


@dataclass
class MelFilterBank:
    """K x kept_channels non-negative triangular weights.

    Filter centers are mel-uniform between `fmin` and `fmax`; each
    triangle spans its two neighboring centers. With `normalized` the
    rows are scaled to unit sum so channel magnitudes stay comparable
    across bank sizes.
    """

    filters: np.ndarray
    centers_hz: np.ndarray
    fmin: float
    fmax: float
    sample_rate: int
    fft_size: int
    normalized: bool = True
    kept_channels: int = field(init=False)

    def __post_init__(self):
        self.kept_channels = self.filters.shape[1]

    @property
    def n_filters(self) -> int:
        return self.filters.shape[0]


def default_fmax(sample_rate: int, fft_size: int, kept_channels: int) -> float:
    """Highest frequency representable by the kept bins, capped at Nyquist."""
    return min(sample_rate / 2.0, kept_channels * sample_rate / fft_size)


def _triangle_cell_means(lower, center, upper, cell_lo, cell_hi):
    """Mean of each triangle over each frequency cell.

    Averaging the triangle over the bin's cell instead of sampling it at
    the bin center keeps filters narrower than one bin from vanishing
    (an issue for fine banks at low frequencies); for triangles wide
    relative to a cell it coincides with center sampling, since the mean
    of a linear ramp over an interval is its midpoint value.
    """
    lower, center, upper = lower[:, None], center[:, None], upper[:, None]
    rise_lo = np.clip(cell_lo[None, :], lower, center)
    rise_hi = np.clip(cell_hi[None, :], lower, center)
    mass = ((rise_hi - lower) ** 2 - (rise_lo - lower) ** 2) / (2.0 * (center - lower))
    fall_lo = np.clip(cell_lo[None, :], center, upper)
    fall_hi = np.clip(cell_hi[None, :], center, upper)
    mass += ((upper - fall_lo) ** 2 - (upper - fall_hi) ** 2) / (2.0 * (upper - center))
    return mass / (cell_hi - cell_lo)[None, :]


def build_mel_bank(
    sample_rate: int,
    fft_size: int,
    kept_channels: int,
    n_filters: int,
    fmin: float = 0.0,
    fmax: float | None = None,
    normalize: bool = True,
) -> MelFilterBank:
    """Build `n_filters` triangular filters over the kept DFT bins.

    Raises ParameterError when a filter lies entirely outside the band
    the kept bins cover (its row would be empty).
    """
    if fmax is None:
        fmax = default_fmax(sample_rate, fft_size, kept_channels)
    if n_filters < 1:
        raise ParameterError("n_filters must be >= 1")
    if not 0.0 <= fmin < fmax <= sample_rate / 2.0:
        raise ParameterError("need 0 <= fmin < fmax <= sample_rate / 2")
    edges_hz = mel_to_hz(np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), n_filters + 2))
    bin_width = sample_rate / fft_size
    bin_freqs = np.arange(kept_channels) * bin_width
    filters = _triangle_cell_means(
        edges_hz[:-2], edges_hz[1:-1], edges_hz[2:],
        bin_freqs - bin_width / 2.0, bin_freqs + bin_width / 2.0,
    )

    empty = np.flatnonzero(filters.sum(axis=1) == 0.0)
    if empty.size:
        raise ParameterError(
            f"{empty.size} mel filter(s) cover no DFT bin (first: {empty[0]}); "
            "reduce n_filters or raise the frequency resolution"
        )
    if normalize:
        filters = filters / filters.sum(axis=1, keepdims=True)
    return MelFilterBank(
        filters=filters,
        centers_hz=edges_hz[1:-1].copy(),
        fmin=float(fmin),
        fmax=float(fmax),
        sample_rate=int(sample_rate),
        fft_size=int(fft_size),
        normalized=normalize,
    )


def apply_bank(bank: MelFilterBank, tf: np.ndarray) -> np.ndarray:
    """Weighted frequency averaging: out[v, k] = sum_j tf[j, k] * filt[v, j]."""
    tf = np.asarray(tf, dtype=np.float64)
    if tf.shape[0] != bank.kept_channels:
        raise InputError(
            f"time-frequency matrix has {tf.shape[0]} rows, "
            f"bank expects {bank.kept_channels}"
        )
    return bank.filters @ tf
