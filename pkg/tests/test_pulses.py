import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oqpsk_burst.config import ModemConfig
from oqpsk_burst.errors import AliasingError, ConfigError
from oqpsk_burst.pulses import (
    build_beta,
    design_rrc,
    effective_offset,
    make_beta,
    make_postamble,
    make_preamble,
    make_pulses,
    rrc,
)


def raised_cosine(t, b):
    """Closed-form RC (the ideal tx * MF cascade), t in symbols."""
    t = np.asarray(t, float)
    return np.sinc(t) * np.cos(np.pi * b * t) / (1 - (2 * b * t) ** 2)


def test_rrc_design_shape():
    taps = design_rrc(0.4, 25, 4)
    assert len(taps) == 25
    assert int(np.argmax(taps)) == 12
    np.testing.assert_allclose(taps, taps[::-1], atol=0)


@given(
    st.floats(0.05, 1.0),
    st.integers(2, 200),
    st.integers(2, 32),
)
def test_rrc_taps_symmetric(rolloff, span, sps):
    taps = design_rrc(rolloff, span, sps)
    np.testing.assert_allclose(taps, taps[::-1], rtol=0, atol=1e-12)
    assert np.all(np.isfinite(taps))


def test_rrc_singular_points_are_continuous():
    b = 0.4
    ts = 1 / (4 * b)
    for t in (0.0, ts, -ts):
        near = rrc(np.array([t - 1e-7, t + 1e-7]), b)
        assert rrc(np.array([t]), b)[0] == pytest.approx(near.mean(), abs=1e-6)


@pytest.mark.parametrize("args", [(0.0, 25, 4), (1.5, 25, 4), (0.4, 0, 4), (0.4, 25, 1)])
def test_design_rrc_rejects_bad_input(args):
    with pytest.raises(ConfigError):
        design_rrc(*args)


def test_tx_pulse_has_unit_energy_and_matches_taps(pulses):
    # truncation to 25 taps loses a tiny part of the energy
    assert np.sum(pulses.tx_taps**2) == pytest.approx(1.0, abs=1e-3)
    np.testing.assert_allclose(pulses.tx_pulse(np.arange(25)), pulses.tx_taps, atol=1e-15)


def test_cascade_peak_is_unity(pulses):
    assert pulses.cascade[pulses.peak] == pytest.approx(1.0, abs=1e-12)
    assert pulses.peak == int(pulses.tx_delay * pulses.I + pulses.mf_delay)
    np.testing.assert_allclose(pulses.mf_taps, pulses.mf_taps[::-1], atol=1e-15)


def test_h_taps_follow_the_ideal_raised_cosine(pulses):
    expected = raised_cosine(np.arange(6) - 2.5, 0.4)
    np.testing.assert_allclose(expected[:3], [0.0424, -0.1490, 0.6131], atol=1e-4)
    np.testing.assert_allclose(pulses.h, expected, atol=2e-3)
    np.testing.assert_allclose(pulses.h, pulses.h[::-1], atol=1e-12)


def beta_oracle(preamble, h, L_isi):
    """Literal double loop for S_kI + j sum_j S_{k+L_isi-1-j,Q} h_j."""
    sq = preamble.imag
    out = []
    for k in range(len(preamble) - L_isi + 1):
        g = 0.0
        for j in range(2 * L_isi):
            m = k + L_isi - 1 - j
            if 0 <= m < len(preamble):
                g += sq[m] * h[j]
        out.append(preamble[k].real + 1j * g)
    return np.array(out)


@given(st.integers(0, 2**32 - 1), st.integers(7, 80))
def test_build_beta_matches_direct_sum(seed, n):
    rng = np.random.default_rng(seed)
    pre = (1 - 2 * rng.integers(0, 2, n)) + 1j * (1 - 2 * rng.integers(0, 2, n))
    h = rng.normal(size=6)
    b = build_beta(pre, h, 3)
    assert b.count == n - 2
    np.testing.assert_allclose(b.beta_i, beta_oracle(pre, h, 3), atol=1e-12)
    assert np.all(b.beta_i.real == pre[: n - 2].real)
    assert np.all(np.abs(b.beta_i) ** 2 >= 1)


def test_build_beta_constant_quadrature(pulses):
    pre = np.ones(40) + 1j * np.ones(40)
    b = build_beta(pre, pulses.h, 3)
    interior = b.beta_i[3:-3].imag
    np.testing.assert_allclose(interior, pulses.h.sum(), atol=1e-12)
    # six taps each within 2e-3 of reference values that sum to 1.012
    assert pulses.h.sum() == pytest.approx(1.012, abs=6 * 2e-3)


def test_build_beta_without_isi_is_the_preamble():
    pre = np.array([1 + 1j, -1 + 1j, 1 - 1j, -1 - 1j] * 5)
    b = build_beta(pre, np.zeros(6), 3)
    np.testing.assert_array_equal(b.beta_i, pre[: len(pre) - 2].real + 0j)


def test_build_beta_alternating_quadrature(pulses):
    pre = np.ones(30) + 1j * (1 - 2 * (np.arange(30) % 2))
    np.testing.assert_allclose(build_beta(pre, pulses.h, 3).beta_i, beta_oracle(pre, pulses.h, 3), atol=1e-12)


def test_build_beta_rejects_short_preamble():
    with pytest.raises(ConfigError):
        build_beta(np.ones(5, complex), np.zeros(6), 3)
    with pytest.raises(ConfigError):
        build_beta(np.ones(10, complex), np.zeros(4), 3)


def test_preamble_is_seeded_and_fixed():
    a, b = ModemConfig(seed=1), ModemConfig(seed=2)
    np.testing.assert_array_equal(make_preamble(a), make_preamble(a))
    assert not np.array_equal(make_preamble(a), make_preamble(b))
    assert len(make_postamble(a)) == a.Lo
    assert set(np.unique(make_preamble(a).real)) == {-1.0, 1.0}
    assert make_beta(a).count == a.Lp - a.L_isi + 1


def test_effective_offset_examples():
    fs = 4.0  # M = 4 samples per unit symbol period
    assert effective_offset(0.1, 100.0, fs, 0.0) == pytest.approx(2 * math.pi * 0.1 / fs)
    assert effective_offset(0.3, 100.0, fs, 0.0) == pytest.approx(0.15 * math.pi)
    w = effective_offset(0.0, 1e3, 1.0, 25.0)
    assert abs(w) == pytest.approx(2 * math.pi * 0.05)
    assert effective_offset(0.0, 1e3, 1.0, 25.0, sign=-1) == pytest.approx(-w)


def test_effective_offset_aliasing_and_bad_rate():
    with pytest.raises(AliasingError):
        effective_offset(0.4, 0.0, 4.0, 0.0)
    with pytest.raises(ConfigError):
        effective_offset(0.1, 0.0, 0.0, 0.0)
