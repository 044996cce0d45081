import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oqpsk_burst.config import ModemConfig
from oqpsk_burst.pulses import make_pulses
from oqpsk_burst.rxfront import (
    demodulate,
    front_end,
    upsample_matched_filter,
    upsample_matched_filter_reference,
)
from oqpsk_burst.tx import modulate_passband, shape_oqpsk


def rc(t, b=0.4):
    return np.sinc(t) * np.cos(np.pi * b * t) / (1 - (2 * b * t) ** 2)


def test_demodulate_example():
    r = np.array([1.0, 0.0, -1.0, 0.0])
    np.testing.assert_allclose(demodulate(r, 0.0), [1, 0, 1, 0], atol=1e-15)
    n = np.arange(8)
    np.testing.assert_allclose(
        demodulate(np.ones(8), 0.1, 0.3), np.exp(-1j * ((np.pi / 2 + 0.1) * n + 0.3)), atol=1e-15
    )


@given(st.integers(0, 2**32 - 1), st.integers(1, 300), st.sampled_from([1, 2, 4, 8]))
def test_polyphase_matches_literal_upsampling(seed, n, I):
    rng = np.random.default_rng(seed)
    y = rng.normal(size=n) + 1j * rng.normal(size=n)
    taps = rng.normal(size=24 * I + 1)
    fast = upsample_matched_filter(y, taps, I)
    ref = upsample_matched_filter_reference(y, taps, I)
    np.testing.assert_allclose(fast[: len(ref)], ref, atol=1e-12)
    np.testing.assert_allclose(fast[len(ref) :], 0, atol=1e-12)


def test_empty_and_zero_inputs(pulses):
    assert len(upsample_matched_filter(np.zeros(0), pulses.mf_taps, 4)) == 0
    assert not np.any(front_end(np.zeros(50), pulses, 0.1))
    with pytest.raises(ValueError):
        upsample_matched_filter(np.ones(3), pulses.mf_taps, 0)


@given(st.integers(0, 2**32 - 1), st.integers(0, 30))
def test_linearity_and_shift_covariance(seed, shift):
    p = make_pulses(ModemConfig())
    rng = np.random.default_rng(seed)
    a, b = rng.normal(size=(2, 64))
    f = lambda y: upsample_matched_filter(y, p.mf_taps, p.I)
    np.testing.assert_allclose(f(2 * a - 3 * b), 2 * f(a) - 3 * f(b), atol=1e-12)
    shifted = f(np.concatenate([np.zeros(shift), a]))
    np.testing.assert_allclose(shifted[p.I * shift :], f(a), atol=1e-12)


@pytest.mark.parametrize("n0", [0, 1, 7])
def test_cascade_peak_position_and_height(pulses, n0):
    # through passband and back: the MF gain of 2 undoes the demodulator's 1/2
    y = modulate_passband(np.concatenate([np.zeros(n0), pulses.tx_taps]), 0.0, 0.0)
    x = front_end(y, pulses, 0.0).real
    assert int(np.argmax(x)) == pulses.peak + pulses.I * n0
    # residue of the double-frequency image is ~4e-5
    assert x.max() == pytest.approx(1.0, abs=1e-4)
    assert pulses.peak == 96


def worst_case_peak(I):
    cfg = ModemConfig(I=I, mf_len=24 * I + 1)
    p = make_pulses(cfg)
    peaks = []
    for alpha in np.linspace(0, 1, 41, endpoint=False):
        bb, _ = shape_oqpsk(np.array([1.0 + 0j]), alpha, 0.0, cfg, guard=2)
        peaks.append(front_end(modulate_passband(bb, 0.0, 0.0), p, 0.0).real.max())
    return min(peaks)


def test_alpha_sweep_peak_bound_and_monotone_in_I():
    worst = {I: worst_case_peak(I) for I in (1, 2, 4, 8)}
    for I, v in worst.items():
        # half a Ts1 is the largest possible misalignment; truncation costs a little
        assert v >= rc(0.5 / (4 * I)) - 2e-3
    assert worst[1] < worst[2] < worst[4] <= worst[8] + 1e-6


def test_noise_at_symbol_spacing_is_white(pulses):
    rng = np.random.default_rng(9)
    N0 = 1.0
    chunks = []
    for _ in range(10):
        r = rng.normal(0, np.sqrt(N0 / 2), 200_000)
        chunks.append(front_end(r, pulses, 0.0)[200:-200][:: pulses.M * pulses.I])
    x = np.concatenate(chunks)
    assert np.var(x.real) == pytest.approx(N0, rel=0.03)
    assert np.var(x.imag) == pytest.approx(N0, rel=0.03)
    for lag in range(1, 6):
        c = np.mean(x[lag:] * np.conj(x[:-lag])) / np.mean(np.abs(x) ** 2)
        assert abs(c) < 0.02
    assert abs(np.mean(x.real * x.imag)) < 0.02
