import numpy as np
import pytest

from oracles import gabor_direct, rel_error
from scatbox.errors import InputError, ParameterError
from scatbox.gabor import (
    GaborParams,
    SampledSignal,
    frame_bounds,
    gabor_transform,
    natural_frame_count,
)
from scatbox.windows import WindowSpec, make_window

RATE = 44_100


def params(kind="hann", win=64, hop=32, fft=64, kept=33, frames=4, shape=0.0):
    return GaborParams(
        window=WindowSpec(kind, win, shape),
        hop=hop,
        fft_size=fft,
        kept_channels=kept,
        frame_count=frames,
    )


def test_zero_signal_gives_zero_matrix():
    p = params(frames=5)
    out = gabor_transform(SampledSignal(np.zeros(256), RATE), p)
    assert out.values.shape == (33, 5)
    assert np.all(out.values == 0)


def test_unit_impulse_rectangular_window():
    # impulse at frame start 2*hop: that column carries the conjugated
    # modulation, unit magnitude; frames not covering it stay zero
    hop, fft = 32, 32
    p = params(kind="rectangular", win=32, hop=hop, fft=fft, kept=17, frames=5)
    x = np.zeros(160)
    k0 = 2
    x[k0 * hop] = 1.0
    out = gabor_transform(SampledSignal(x, RATE), p).values
    j = np.arange(17)
    expected = np.exp(-2j * np.pi * j * (k0 * hop) / fft)
    np.testing.assert_allclose(out[:, k0], expected, atol=1e-12)
    np.testing.assert_allclose(np.abs(out[:, k0]), 1.0, atol=1e-12)
    other = [k for k in range(5) if k != k0]
    assert np.all(np.abs(out[:, other]) < 1e-12)


def test_sinusoid_peaks_in_matching_channel():
    win = fft = 64
    j0 = 8
    frames = 13
    p = params(win=win, hop=16, fft=fft, kept=33, frames=frames)
    n = 16 * (frames - 1) + win
    t = np.arange(n)
    x = np.sin(2 * np.pi * j0 * t / fft)
    out = np.abs(gabor_transform(SampledSignal(x, RATE), p).values)
    for k in range(2, frames - 2):  # interior frames
        assert out[:, k].argmax() == j0


@pytest.mark.parametrize("n,win,hop,fft,kept,pad", [
    (256, 32, 16, 32, 17, False),
    (333, 64, 17, 128, 50, True),
    (1024, 64, 64, 64, 64, False),
    (800, 48, 25, 64, 33, True),
])
def test_matches_direct_summation_oracle(n, win, hop, fft, kept, pad):
    rng = np.random.default_rng(n)
    x = rng.standard_normal(n)
    frames = natural_frame_count(n, hop, win) + (3 if pad else 0)
    p = params(win=win, hop=hop, fft=fft, kept=kept, frames=frames)
    got = gabor_transform(SampledSignal(x, RATE), p).values
    want = gabor_direct(x, make_window(p.window), hop, fft, kept, frames)
    assert rel_error(got, want) <= 1e-10


def test_linearity():
    rng = np.random.default_rng(3)
    p = params(frames=9)
    n = 32 * 8 + 64
    f, h = rng.standard_normal(n), rng.standard_normal(n)
    a, b = 1.7, -0.4
    combo = gabor_transform(SampledSignal(a * f + b * h, RATE), p).values
    parts = (
        a * gabor_transform(SampledSignal(f, RATE), p).values
        + b * gabor_transform(SampledSignal(h, RATE), p).values
    )
    assert rel_error(combo, parts) <= 1e-10


def test_time_shift_covariance_on_moduli():
    # hop-shifting the input rolls the frame axis; complex values pick up
    # a constant per-channel phase, so moduli are compared
    rng = np.random.default_rng(5)
    hop, win = 32, 64
    frames = 12
    n = hop * (frames - 1) + win
    x = rng.standard_normal(n + hop)
    p = params(win=win, hop=hop, fft=64, kept=33, frames=frames)
    base = np.abs(gabor_transform(SampledSignal(x[:n], RATE), p).values)
    shifted = np.abs(gabor_transform(SampledSignal(x[hop : n + hop], RATE), p).values)
    np.testing.assert_allclose(shifted[:, :-1], base[:, 1:], rtol=1e-10, atol=1e-12)


def test_time_shift_covariance_exact_when_hop_is_fft_multiple():
    rng = np.random.default_rng(6)
    hop = win = fft = 64
    frames = 6
    n = hop * frames
    x = rng.standard_normal(n + hop)
    p = params(win=win, hop=hop, fft=fft, kept=64, frames=frames)
    base = gabor_transform(SampledSignal(x[:n], RATE), p).values
    shifted = gabor_transform(SampledSignal(x[hop : n + hop], RATE), p).values
    np.testing.assert_allclose(shifted[:, :-1], base[:, 1:], rtol=1e-12, atol=1e-12)


def test_empty_signal_rejected():
    with pytest.raises(InputError):
        gabor_transform(SampledSignal(np.array([]), RATE), params())


def test_invalid_params_rejected():
    with pytest.raises(ParameterError):
        params(hop=0)
    with pytest.raises(ParameterError):
        params(kept=0)
    with pytest.raises(ParameterError):
        params(kept=100, fft=64)
    with pytest.raises(ParameterError):
        params(win=128, fft=64)


class TestFrameBounds:
    def test_min_le_max(self):
        a, b = frame_bounds(params(frames=6), 256, trials=8, seed=1)
        assert 0 <= a <= b

    def test_orthonormal_configuration_is_tight(self):
        p = params(kind="rectangular", win=64, hop=64, fft=64, kept=64, frames=8)
        a, b = frame_bounds(p, 8 * 64, trials=10, seed=2)
        assert abs(a - 1.0) <= 1e-10
        assert abs(b - 1.0) <= 1e-10

    def test_hann_overlap_bounds_positive(self):
        win = fft = 1024
        hop = fft // 4
        frames = natural_frame_count(RATE, hop, win)
        p = params(win=win, hop=hop, fft=fft, kept=513, frames=frames)
        a, b = frame_bounds(p, RATE, trials=10, seed=3)
        assert a > 0

    def test_held_out_signals_land_inside_slack_band(self):
        p = params(win=64, hop=16, fft=64, kept=33, frames=13)
        n = 16 * 12 + 64
        a, b = frame_bounds(p, n, trials=50, seed=4)
        window_energy = np.sum(make_window(p.window) ** 2)
        rng = np.random.default_rng(99)
        inside = 0
        for _ in range(100):
            f = rng.standard_normal(n)
            f /= np.linalg.norm(f)
            c = gabor_transform(SampledSignal(f, RATE), p).values
            ratio = np.sum(np.abs(c) ** 2) / window_energy
            inside += a * 0.5 <= ratio <= b * 1.5
        assert inside >= 90

    def test_trials_validated(self):
        with pytest.raises(ParameterError):
            frame_bounds(params(), 256, trials=0, seed=0)
