"""The three audio representations: MT, GS, and MS.

MT is the classic mel-spectrogram (squared-modulus Gabor coefficients,
mel-averaged). GS iterates magnitude Gabor transforms: the first layer
resolves frequency content, the second layer resolves the modulation of
each frequency channel's envelope, and a low-pass "output atom" smooths
each layer before export. MS is GS with mel averaging inserted after
the first-layer modulus, shrinking the frequency axis.

Channel layout for GS/MS tensors (all three share one shape):

* A: the first-layer magnitudes (mel-averaged for MS),
* B: A convolved with the first output atom,
* C: second-layer modulation coefficients, atom-smoothed and collapsed
  over modulation bins.

Note the deliberate asymmetry: MT averages squared magnitudes while the
MS first layer averages plain magnitudes.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import InputError, ParameterError
from .gabor import GaborParams, SampledSignal, transform_rows
from .mel import MelFilterBank, apply_bank, build_mel_bank
from .windows import WindowSpec, make_window

KINDS = ("mt", "gs", "ms")

# repository-wide defaults for one 1 s segment at 44.1 kHz
DEFAULT_SAMPLE_RATE = 44_100
DEFAULT_SEGMENT_LENGTH = 44_100
DEFAULT_FFT_SIZE = 1024
DEFAULT_HOP = 275
DEFAULT_KEPT_CHANNELS = 480
DEFAULT_FRAME_COUNT = 160
DEFAULT_MEL_FILTERS = 120
DEFAULT_LAYER2_FFT = 32
DEFAULT_ATOM_LENGTH = 8

AGGREGATIONS = ("sum", "bin")


@dataclass(frozen=True)
class ScatteringConfig:
    """Both transform layers plus the export smoothing and collapsing.

    `layer2` runs along the frame axis of layer 1, one transform per
    frequency channel. `aggregation` collapses the second layer's
    modulation axis into the single exported channel C: `"sum"` adds the
    smoothed magnitudes of all non-DC modulation bins (total modulation
    energy), `"bin"` exports exactly `aggregation_bin`.
    """

    layer1: GaborParams
    layer2: GaborParams
    atom1: WindowSpec
    atom2: WindowSpec
    atom1_hop: int = 1
    atom2_hop: int = 1
    mel: MelFilterBank | None = None
    aggregation: str = "sum"
    aggregation_bin: int = 1
    log_compress: bool = False

    def __post_init__(self):
        if self.aggregation not in AGGREGATIONS:
            raise ParameterError(f"unknown aggregation {self.aggregation!r}")
        if self.aggregation == "bin" and not 0 <= self.aggregation_bin < self.layer2.kept_channels:
            raise ParameterError("aggregation_bin outside the kept modulation bins")
        if self.atom1_hop < 1 or self.atom2_hop < 1:
            raise ParameterError("atom hops must be >= 1")
        if self.mel is not None and self.mel.kept_channels != self.layer1.kept_channels:
            raise ParameterError(
                "mel bank must cover exactly the layer-1 kept channels"
            )


@dataclass
class FeatureTensor:
    """channels x freq_bins x frames network input, non-negative."""

    values: np.ndarray
    kind: str

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.kind not in KINDS:
            raise ParameterError(f"unknown tensor kind {self.kind!r}")
        if self.values.ndim != 3:
            raise InputError("feature tensor must be channels x freq x frames")
        if not np.all(np.isfinite(self.values)) or np.any(self.values < 0):
            raise InputError("feature tensor values must be finite and >= 0")

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.values.shape


def default_config(
    kind: str,
    sample_rate: int = DEFAULT_SAMPLE_RATE,
    segment_length: int = DEFAULT_SEGMENT_LENGTH,
    *,
    fft_size: int = DEFAULT_FFT_SIZE,
    hop: int = DEFAULT_HOP,
    kept_channels: int = DEFAULT_KEPT_CHANNELS,
    frame_count: int | None = None,
    mel_filters: int = DEFAULT_MEL_FILTERS,
    layer2_fft: int = DEFAULT_LAYER2_FFT,
    layer2_window: str = "hann",
    atom_length: int = DEFAULT_ATOM_LENGTH,
    aggregation: str = "sum",
    aggregation_bin: int = 1,
    log_compress: bool = False,
) -> ScatteringConfig:
    """The lattice defaults that give 480x160 (GS) and 120x160 (MT/MS)
    for a one-second 44.1 kHz segment."""
    if kind not in KINDS:
        raise ParameterError(f"unknown representation kind {kind!r}")
    if frame_count is None:
        frame_count = max(1, int(round(segment_length / hop)))
    layer1 = GaborParams(
        window=WindowSpec("hann", fft_size),
        hop=hop,
        fft_size=fft_size,
        kept_channels=kept_channels,
        frame_count=frame_count,
    )
    layer2 = GaborParams(
        window=WindowSpec(layer2_window, layer2_fft),
        hop=1,
        fft_size=layer2_fft,
        kept_channels=layer2_fft // 2 + 1,
        frame_count=frame_count,
    )
    mel = None
    if kind in ("mt", "ms"):
        mel = build_mel_bank(sample_rate, fft_size, kept_channels, mel_filters)
    return ScatteringConfig(
        layer1=layer1,
        layer2=layer2,
        atom1=WindowSpec("hann", atom_length),
        atom2=WindowSpec("hann", atom_length),
        mel=mel,
        aggregation=aggregation,
        aggregation_bin=aggregation_bin,
        log_compress=log_compress,
    )


def layer1(signal: SampledSignal, cfg: ScatteringConfig) -> np.ndarray:
    """First-layer magnitudes; mel-averaged when a bank is configured."""
    mags = np.abs(transform_rows(signal.samples[None, :], cfg.layer1))[0]
    if cfg.mel is not None:
        mags = apply_bank(cfg.mel, mags)
    return mags


def output_atom(layer: np.ndarray, atom: WindowSpec, hop: int = 1) -> np.ndarray:
    """Smooth along the frame axis with a unit-sum low-pass atom.

    Same-length correlation with reflection padding, then subsampling by
    `hop`. Atoms are symmetric, so correlation equals convolution.
    """
    layer = np.asarray(layer, dtype=np.float64)
    length = atom.length
    if length > layer.shape[-1]:
        raise ParameterError("output atom longer than the frame axis")
    if hop < 1:
        raise ParameterError("atom hop must be >= 1")
    kernel = make_window(atom)
    kernel = kernel / kernel.sum()
    if length == 1 and hop == 1:
        return layer.copy()
    pad = [(0, 0)] * (layer.ndim - 1) + [((length - 1) // 2, length // 2)]
    padded = np.pad(layer, pad, mode="reflect")
    smoothed = sliding_window_view(padded, length, axis=-1) @ kernel
    return smoothed[..., ::hop]


def layer2(f1: np.ndarray, cfg: ScatteringConfig) -> np.ndarray:
    """Magnitude Gabor transform of every frequency channel's envelope.

    Input is the layer-1 matrix (freq_bins x frames); output is
    freq_bins x modulation_bins x frames.
    """
    f1 = np.asarray(f1, dtype=np.float64)
    if f1.ndim != 2:
        raise InputError("layer-1 input must be a 2-D matrix")
    return np.abs(transform_rows(f1, cfg.layer2))


def _aggregate(smoothed: np.ndarray, cfg: ScatteringConfig) -> np.ndarray:
    if cfg.aggregation == "bin":
        return smoothed[:, cfg.aggregation_bin, :]
    return smoothed[:, 1:, :].sum(axis=1)


def assemble(signal: SampledSignal, cfg: ScatteringConfig, kind: str) -> FeatureTensor:
    """Produce the network input tensor of the requested kind."""
    if kind not in KINDS:
        raise ParameterError(f"unknown representation kind {kind!r}")
    if kind in ("mt", "ms") and cfg.mel is None:
        raise ParameterError(f"kind {kind!r} requires a mel bank in the config")
    if kind == "gs" and cfg.mel is not None:
        raise ParameterError("kind 'gs' must not carry a mel bank")

    if kind == "mt":
        power = np.abs(transform_rows(signal.samples[None, :], cfg.layer1))[0] ** 2
        channels = apply_bank(cfg.mel, power)[None, :, :]
    else:
        a = layer1(signal, cfg)
        b = output_atom(a, cfg.atom1, cfg.atom1_hop)
        smoothed2 = output_atom(layer2(a, cfg), cfg.atom2, cfg.atom2_hop)
        c = _aggregate(smoothed2, cfg)
        a = a[..., :: cfg.atom1_hop]
        if not a.shape == b.shape == c.shape:
            raise ParameterError(
                f"channel shapes diverge: A{a.shape} B{b.shape} C{c.shape}; "
                "align the layer-2 frame count and atom hops"
            )
        channels = np.stack([a, b, c])
    if cfg.log_compress:
        channels = np.log1p(channels)
    return FeatureTensor(values=channels, kind=kind)


def gs_to_ms_config(cfg: ScatteringConfig, mel: MelFilterBank) -> ScatteringConfig:
    """Attach a mel bank to a GS config, shrinking layer 2 to the mel rows."""
    return replace(cfg, mel=mel)
