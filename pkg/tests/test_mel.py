import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import apply_bank_naive, rel_error
from scatbox.errors import InputError, ParameterError
from scatbox.mel import apply_bank, build_mel_bank, hz_to_mel, mel_to_hz


def test_single_filter_spans_whole_band():
    bank = build_mel_bank(44100, 1024, 513, 1, fmin=100.0, fmax=8000.0)
    assert bank.n_filters == 1
    mid_mel = (hz_to_mel(100.0) + hz_to_mel(8000.0)) / 2
    assert bank.centers_hz[0] == pytest.approx(float(mel_to_hz(mid_mel)), rel=1e-12)
    support = np.flatnonzero(bank.filters[0])
    freqs = support * 44100 / 1024
    assert freqs.min() >= 100.0 - 44100 / 1024
    assert freqs.max() <= 8000.0 + 44100 / 1024


@pytest.mark.parametrize("n_filters,kept", [(8, 257), (40, 513), (120, 480)])
def test_centers_increase_and_supports_are_contiguous(n_filters, kept):
    bank = build_mel_bank(44100, 1024, kept, n_filters)
    assert np.all(np.diff(bank.centers_hz) > 0)
    assert np.all(bank.filters >= 0)
    for row in bank.filters:
        support = np.flatnonzero(row)
        assert support.size >= 1
        assert np.all(np.diff(support) == 1)


def test_center_frequencies_match_scalar_formula():
    # independent scalar evaluation of the mel spacing
    bank = build_mel_bank(44100, 1024, 513, 120, fmin=0.0, fmax=22050.0)
    lo, hi = 2595 * np.log10(1 + 0 / 700), 2595 * np.log10(1 + 22050 / 700)
    for nu in (1, 60, 120):
        mel_center = lo + nu * (hi - lo) / 121
        expected = 700 * (10 ** (mel_center / 2595) - 1)
        assert bank.centers_hz[nu - 1] == pytest.approx(expected, rel=1e-12)


def test_too_fine_bank_rejected():
    # filters above the covered band have empty rows
    with pytest.raises(ParameterError):
        build_mel_bank(44100, 1024, 64, 40, fmin=0.0, fmax=22050.0)


def test_apply_bank_zero_in_zero_out():
    bank = build_mel_bank(44100, 512, 257, 24)
    out = apply_bank(bank, np.zeros((257, 7)))
    assert out.shape == (24, 7)
    assert np.all(out == 0)


def test_apply_bank_ones_gives_row_sums():
    bank = build_mel_bank(44100, 512, 257, 24, normalize=False)
    out = apply_bank(bank, np.ones((257, 5)))
    sums = bank.filters.sum(axis=1)
    for k in range(5):
        np.testing.assert_allclose(out[:, k], sums, rtol=1e-12)
    normalized = build_mel_bank(44100, 512, 257, 24, normalize=True)
    np.testing.assert_allclose(apply_bank(normalized, np.ones((257, 5))), 1.0, rtol=1e-12)


def test_apply_bank_indicator_column():
    bank = build_mel_bank(44100, 512, 257, 24)
    tf = np.zeros((257, 4))
    tf[100, 2] = 1.0
    out = apply_bank(bank, tf)
    np.testing.assert_array_equal(out[:, 2], bank.filters[:, 100])
    assert np.all(out[:, [0, 1, 3]] == 0)


def test_apply_bank_matches_naive_oracle():
    rng = np.random.default_rng(0)
    bank = build_mel_bank(44100, 512, 128, 16, fmin=50.0, fmax=10000.0)
    tf = rng.random((128, 9))
    assert rel_error(apply_bank(bank, tf), apply_bank_naive(bank.filters, tf)) <= 1e-12


def test_apply_bank_linearity():
    rng = np.random.default_rng(1)
    bank = build_mel_bank(44100, 512, 128, 16)
    a, b = rng.random((128, 6)), rng.random((128, 6))
    combo = apply_bank(bank, 2.0 * a - 0.5 * b)
    np.testing.assert_allclose(
        combo, 2.0 * apply_bank(bank, a) - 0.5 * apply_bank(bank, b), atol=1e-12
    )


@settings(max_examples=25, deadline=None)
@given(data=st.data())
def test_monotone_and_nonnegative(data):
    bank = build_mel_bank(44100, 512, 128, 12)
    rng = np.random.default_rng(data.draw(st.integers(0, 2**31)))
    tf = rng.random((128, 4))
    out = apply_bank(bank, tf)
    assert np.all(out >= 0)
    j = data.draw(st.integers(0, 127))
    k = data.draw(st.integers(0, 3))
    bumped = tf.copy()
    bumped[j, k] += data.draw(st.floats(0.1, 5.0))
    assert np.all(apply_bank(bank, bumped) >= out - 1e-15)


def test_shape_mismatch_rejected():
    bank = build_mel_bank(44100, 512, 128, 12)
    with pytest.raises(InputError):
        apply_bank(bank, np.zeros((64, 4)))


def test_invalid_frequency_range_rejected():
    with pytest.raises(ParameterError):
        build_mel_bank(44100, 512, 257, 12, fmin=-1.0)
    with pytest.raises(ParameterError):
        build_mel_bank(44100, 512, 257, 12, fmin=9000.0, fmax=8000.0)
    with pytest.raises(ParameterError):
        build_mel_bank(44100, 512, 257, 12, fmax=30000.0)
    with pytest.raises(ParameterError):
        build_mel_bank(44100, 512, 257, 0)
