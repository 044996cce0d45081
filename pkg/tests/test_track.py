import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import norm

from oqpsk_burst.acq import acquire
from oqpsk_burst.config import ModemConfig
from oqpsk_burst.errors import TruncatedFrameError
from oqpsk_burst.harness import draw_frame, run_frame
from oqpsk_burst.pulses import make_beta, make_pulses
from oqpsk_burst.track import (
    PhaseLoopState,
    TimingArray,
    beta_hat,
    detect_symbol,
    phase_acquire_preamble,
    run_tracking,
    timing_update,
    wrap_phase,
)


def loop_over(z, rho):
    """Drive the loop with unit references so each input is its own single-symbol estimate."""
    s = PhaseLoopState(0j, 0.0, rho)
    return np.array([s.update(complex(v), 1 + 0j) for v in z]), s


# --- phase loop ---------------------------------------------------------------------


def test_wrap_phase():
    assert wrap_phase(-0.1) == pytest.approx(2 * math.pi - 0.1)
    assert wrap_phase(2 * math.pi) == 0.0
    assert wrap_phase(-1e-20) == 0.0


@given(st.lists(st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False), min_size=1, max_size=50))
def test_loop_without_memory_follows_last_estimate(z):
    th, _ = loop_over(z, 0.0)
    for t, v in zip(th, z):
        if abs(v) > 1e-12:
            assert math.remainder(t - math.atan2(v.imag, v.real), 2 * math.pi) == pytest.approx(0.0, abs=1e-12)


@given(
    st.lists(st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False), min_size=1, max_size=50),
    st.floats(0.0, 0.999),
)
def test_loop_average_is_bounded(z, rho):
    _, s = loop_over(z, rho)
    assert abs(s.z_avg) <= max(abs(v) for v in z) + 1e-12
    assert math.isfinite(s.theta_hat) and 0 <= s.theta_hat < 2 * math.pi


def test_constant_phase_converges():
    th, _ = loop_over(np.full(500, np.exp(0.5j)), 0.98)
    assert th[-1] == pytest.approx(0.5, abs=1e-12)


def test_step_response_is_geometric():
    rho, eps, k0 = 0.97, 0.01, 300
    z = np.exp(1j * eps * (np.arange(600) >= k0))
    th, _ = loop_over(z, rho)
    th = np.array([math.remainder(t, 2 * math.pi) for t in th])
    n = np.arange(1, 600 - k0 + 1)
    # linear first-order filter: increments eps (1 - rho) rho^k, summed
    np.testing.assert_allclose(th[k0:], eps * (1 - rho**n), atol=1e-6)
    np.testing.assert_allclose(np.diff(th[k0 - 1 :]), eps * (1 - rho) * rho ** (n - 1), atol=1e-6)


def test_ramp_lag_matches_first_order_filter():
    rho, omega_r, M = 0.98, 5e-5, 4
    d = omega_r * M  # phase advance per symbol
    k = np.arange(3000)
    th, _ = loop_over(np.exp(1j * d * k), rho)
    lag = d * k[-1] - th[-1]
    assert lag == pytest.approx(math.atan2(rho * math.sin(d), 1 - rho * math.cos(d)), abs=1e-9)
    assert lag == pytest.approx(rho * d / (1 - rho), rel=1e-3)
    # measured against the phase of the next symbol, where it is applied
    assert lag + d == pytest.approx(d / (1 - rho), rel=1e-3)


def test_single_decision_error_decays_with_ratio_rho(pulses):
    rho = 0.98
    h = pulses.h
    rng = np.random.default_rng(4)
    s_i = 1 - 2.0 * rng.integers(0, 2, 400)
    s_q = 1 - 2.0 * rng.integers(0, 2, 400)
    x = [beta_hat(s_i, s_q, k, h, 3) for k in range(400)]
    wrong_q = s_q.copy()
    wrong_q[201] *= -1  # one wrong quadrature decision feeds the reference at k = 199..204
    state = PhaseLoopState(0j, 0.0, rho)
    th = []
    for k in range(400):
        th.append(math.remainder(state.update(x[k], beta_hat(s_i, wrong_q, k, h, 3)), 2 * math.pi))
    th = np.array(th)
    assert np.all(np.abs(th[:199]) < 1e-12)
    tail = th[210:260]
    np.testing.assert_allclose(tail[1:] / tail[:-1], rho, rtol=1e-3)


def test_preamble_phase_on_ideal_references(beta):
    MI = 16
    x = np.zeros(MI * beta.count + 10, complex)
    x[MI * np.arange(beta.count)] = beta.beta_i * np.exp(0.5j)
    state = phase_acquire_preamble(x, 0, beta, 0.98, MI)
    assert state.theta_hat == pytest.approx(0.5, abs=1e-12)


# --- detection ------------------------------------------------------------------------


def test_detect_symbol_example():
    assert detect_symbol(1 + 0.3j, 0.2 - 1j, 0.0) == (1.0, -1.0, 1.0, -1.0)


@given(st.complex_numbers(max_magnitude=5), st.complex_numbers(max_magnitude=5), st.floats(0, 2 * math.pi))
def test_phase_error_of_pi_flips_both_decisions(xi, xq, theta):
    a, b, u, v = detect_symbol(xi, xq, theta)
    a2, b2, u2, v2 = detect_symbol(xi, xq, theta + math.pi)
    assert u2 == pytest.approx(-u, abs=1e-9) and v2 == pytest.approx(-v, abs=1e-9)
    if abs(u) > 1e-9:
        assert a2 == -a
    if abs(v) > 1e-9:
        assert b2 == -b


# --- timing array -------------------------------------------------------------------


@given(st.lists(st.floats(-10, 10), min_size=5, max_size=5), st.sampled_from([-1, 0, 1]))
def test_array_shift_keeps_five_cells_and_zeroes_vacated(cells, c):
    arr = TimingArray(np.array(cells), 100, 0.995)
    arr.shift(c)
    assert arr.cells.shape == (5,)
    if c == 1:
        assert arr.cells[-1] == 0.0
        np.testing.assert_array_equal(arr.cells[:4], cells[1:])
    elif c == -1:
        assert arr.cells[0] == 0.0
        np.testing.assert_array_equal(arr.cells[1:], cells[:4])
    else:
        np.testing.assert_array_equal(arr.cells, cells)


@given(st.lists(st.floats(-10, 10), min_size=5, max_size=5))
def test_array_decision_ignores_outer_cells(cells):
    arr = TimingArray(np.array(cells), 0, 0.995)
    c = arr.decide()
    assert c in (-1, 0, 1)
    assert cells[c + 2] == max(cells[1:4])


def test_array_ties():
    assert TimingArray(np.array([9.0, 1, 1, 1, 9]), 0, 0.9).decide() == 0
    assert TimingArray(np.array([0.0, 2, 1, 2, 0]), 0, 0.9).decide() == -1


def test_timing_update_on_symmetric_peak():
    x = np.zeros(20, complex)
    x[8:13] = [0.2, 0.6, 1.0, 0.6, 0.2]
    arr = TimingArray.start(10, 0.5)
    assert timing_update(arr, x, 0.0, 1.0) == 0
    x[8:13] = [0.2, 0.6, 0.9, 1.0, 0.6]
    arr = TimingArray.start(10, 0.0)
    assert timing_update(arr, x, 0.0, 1.0) == 1
    assert arr.cells[-1] == 0.0


# --- full chain (noiseless) -----------------------------------------------------------


def track_frame(cfg, index=0):
    pulses = make_pulses(cfg)
    beta = make_beta(cfg, pulses)
    setup = draw_frame(cfg, index)
    rep, x3 = acquire(setup.frame.samples, cfg, pulses, beta)
    return setup, rep, x3, run_tracking(x3, rep, beta, cfg), pulses, beta


def test_no_clock_offset_means_no_shifts():
    cfg = ModemConfig(delta_ppm=0, alpha=0.0, omega3=0.0, theta0=0.0, N0=0.0, Ld=2000)
    setup, rep, x3, det, pulses, _ = track_frame(cfg)
    assert not det.shifts.any()
    assert np.all(np.diff(det.sample_index) == cfg.MI)
    np.testing.assert_array_equal(det.hard_i, setup.burst.data_symbols.real)
    np.testing.assert_array_equal(det.hard_q, setup.burst.data_symbols.imag)
    # soft error stays below the ISI the cross-rail model leaves out, plus phase leakage
    cas = pulses.cascade
    in_phase_isi = sum(abs(cas[pulses.peak + m * cfg.MI]) for m in range(-6, 7) if m and 0 <= pulses.peak + m * cfg.MI < len(cas))
    ref = setup.truth.theta0 + (setup.truth.omega3 - rep.omega_total) * (det.sample_index - pulses.mf_delay) / cfg.I
    dphi = np.max(np.abs(np.angle(np.exp(1j * (det.theta - ref)))))
    bound = (1 + in_phase_isi) / rep.A_hat - 1 + in_phase_isi + math.sin(dphi) * np.abs(pulses.h).sum()
    assert np.max(np.abs(det.soft_i - setup.burst.data_symbols.real)) <= bound
    assert np.max(np.abs(det.soft_q - setup.burst.data_symbols.imag)) <= bound


@pytest.mark.parametrize("delta", [10, 50, 100])
def test_net_shift_follows_clock_offset(delta):
    cfg = ModemConfig(delta_ppm=delta, N0=0.0)
    _, _, _, det, _, _ = track_frame(cfg, 1)
    expected = round(cfg.Ld * cfg.MI * abs(cfg.epsilon))
    assert abs(abs(det.net_shift) - expected) <= 2
    # a faster receive clock (epsilon < 0) means more samples per symbol
    assert np.sign(det.net_shift) == -np.sign(cfg.epsilon)


def test_quadrature_sample_is_half_a_symbol_late():
    cfg = ModemConfig(N0=0.0, Ld=500)
    _, rep, x3, det, _, _ = track_frame(cfg, 2)
    half = cfg.MI // 2
    for i in range(0, cfg.Ld, 37):
        v = (x3[det.sample_index[i] + half] * np.exp(-1j * det.theta[i])).imag
        assert det.soft_q[i] == pytest.approx(v / rep.A_hat, abs=1e-12)


def test_truncated_buffer_raises():
    cfg = ModemConfig(N0=0.0, Ld=500)
    pulses = make_pulses(cfg)
    beta = make_beta(cfg, pulses)
    setup = draw_frame(cfg, 0)
    rep, x3 = acquire(setup.frame.samples, cfg, pulses, beta)
    with pytest.raises(TruncatedFrameError):
        run_tracking(x3[: rep.n3 + (cfg.Lp + 100) * cfg.MI], rep, beta, cfg)


def test_trace_csv(tmp_path):
    cfg = ModemConfig(N0=0.0, Ld=300)
    _, _, _, det, _, _ = track_frame(cfg)
    lines = det.write_trace(tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "# schema=1"
    assert lines[1] == "symbol_index,theta_hat,c_shift,sampling_index_mod_MI"
    assert len(lines) == 2 + cfg.Ld


# --- 1.5 dB full chain ----------------------------------------------------------------


@pytest.mark.slow
def test_full_impairment_frames_decode_at_1p5_db():
    cfg = ModemConfig().with_ebno(1.5)
    ok, jumps = 0, []
    errs = symbols = 0
    q_oracle = []
    for i in range(100):
        o = run_frame(cfg, i)
        ok += o.bit_errors == 0 and o.failure is None
        det = o.detected
        jumps.append(np.max(np.abs(np.angle(np.exp(1j * np.diff(det.theta))))))
        if i < 10:
            data = draw_frame(cfg, i).burst.data_symbols
            errs += np.count_nonzero(det.hard_i != data.real) + np.count_nonzero(det.hard_q != data.imag)
            symbols += 2 * cfg.Ld
            # Q-function at the measured post-MF SNR of this frame
            proj = np.concatenate([det.soft_i * data.real, det.soft_q * data.imag])
            q_oracle.append(norm.sf(proj.mean() / proj.std()))
    assert ok >= 99
    assert max(jumps) < 0.1
    hard_ber = errs / symbols
    assert symbols >= 1e5
    # ideal sync already gives Q(sqrt(10^0.15)) = 0.117, so the oracle is the measured SNR
    assert hard_ber == pytest.approx(np.mean(q_oracle), rel=0.05)
    assert hard_ber >= 0.05
