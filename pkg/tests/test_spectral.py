import math

import numpy as np
import pytest

from perimid.errors import SpectralError
from perimid.spectral import (
    PeriodSet,
    amplitude_spectrum,
    detect_periods,
    patch_periods,
    select_periods,
)


def tone(length, freq, amp=1.0, channels=1):
    t = np.arange(length)[:, None]
    return np.repeat(amp * np.sin(2 * math.pi * freq * t / length), channels, axis=1)


def dft_oracle(x):
    length = x.shape[0]
    t = np.arange(length)
    out = []
    for j in range(math.ceil(length / 2) + 1):
        basis = np.exp(-2j * math.pi * j * t / length)
        out.append(np.mean(np.abs(basis @ x)))
    return np.array(out)


class TestAmplitudeSpectrum:
    @pytest.mark.parametrize("length", [7, 12, 16, 33])
    def test_matches_direct_dft(self, length, rng):
        x = rng.normal(size=(length, 3))
        np.testing.assert_allclose(amplitude_spectrum(x), dft_oracle(x), atol=1e-8)

    def test_single_tone_peak(self):
        amps = amplitude_spectrum(tone(64, 4))
        assert int(np.argmax(amps[1:])) + 1 == 4

    def test_constant_series_has_only_dc(self):
        amps = amplitude_spectrum(np.full((32, 2), 3.0))
        np.testing.assert_allclose(amps[1:], 0.0, atol=1e-9)

    def test_two_tones_ordered_by_amplitude(self):
        amps = amplitude_spectrum(tone(64, 2, 2.0) + tone(64, 8, 1.0))
        others = np.delete(amps, [0, 2, 8])
        assert amps[2] > amps[8] > others.max()

    def test_too_short(self):
        with pytest.raises(SpectralError):
            amplitude_spectrum(np.ones((3, 1)))


class TestSelectPeriods:
    def test_two_peaks(self):
        amps = amplitude_spectrum(tone(64, 4, 2.0) + tone(64, 8, 1.0))
        periods = select_periods(amps, 3, 64)
        assert periods.frequencies == (1, 4, 8)
        assert periods.periods == (64, 16, 8)

    @pytest.mark.parametrize("length", [16, 32, 64])
    def test_recovers_every_tone_with_k2(self, length):
        for freq in range(2, length // 4 + 1):
            amps = amplitude_spectrum(tone(length, freq))
            assert select_periods(amps, 2, length).frequencies == (1, freq)

    def test_tie_goes_to_lower_frequency(self):
        amps = np.zeros(9)
        amps[3] = amps[5] = 1.0
        assert select_periods(amps, 2, 16).frequencies == (1, 3)

    def test_duplicate_period_is_skipped(self):
        amps = np.zeros(6)
        amps[4], amps[3], amps[2] = 5.0, 4.0, 1.0
        periods = select_periods(amps, 3, 9)
        assert periods.frequencies == (1, 2, 4)
        assert periods.periods == (9, 5, 3)

    def test_k_exceeds_distinct_periods(self):
        with pytest.raises(SpectralError):
            select_periods(np.ones(6), 5, 9)

    def test_k_below_two(self):
        with pytest.raises(SpectralError):
            select_periods(np.ones(9), 1, 16)

    def test_periods_strictly_descending(self, rng):
        for _ in range(100):
            length = int(rng.integers(8, 129))
            amps = rng.random(math.ceil(length / 2) + 1)
            periods = select_periods(amps, int(rng.integers(2, 5)), length)
            assert all(a > b for a, b in zip(periods.periods, periods.periods[1:]))
            periods.validate(length)


class TestPeriodSet:
    def test_equality_ignores_amplitudes(self):
        a = PeriodSet((1, 4), (16, 4), (1.0, 2.0))
        b = PeriodSet((1, 4), (16, 4), (9.0, 9.0))
        assert a == b
        assert hash(a) == hash(b)

    def test_dict_round_trip(self):
        periods = PeriodSet((1, 2, 4), (12, 6, 3), (0.0, 1.5, 0.5))
        restored = PeriodSet.from_dict(periods.to_dict())
        assert restored == periods
        assert restored.amplitudes == periods.amplitudes

    def test_validate_rejects_wrong_length(self):
        with pytest.raises(SpectralError):
            PeriodSet((1, 2), (12, 6), (0.0, 0.0)).validate(16)

    def test_validate_rejects_frequency_above_half(self):
        with pytest.raises(SpectralError):
            PeriodSet((1, 7), (12, 2), (0.0, 0.0)).validate(12)


def test_patch_periods():
    periods = patch_periods(16, 3)
    assert periods.frequencies == (1, 2, 4)
    assert periods.periods == (16, 8, 4)
    with pytest.raises(SpectralError):
        patch_periods(4, 4)


def test_detect_periods_on_decomposed_series():
    x = tone(96, 8, 1.0, channels=2) + tone(96, 16, 0.5, channels=2) + 0.05 * np.arange(96)[:, None]
    periods = detect_periods(x, 3, kernel=25)
    assert periods.frequencies == (1, 8, 16)
    assert periods.periods == (96, 12, 6)
