"""Preamble acquisition: frame start, coarse and fine frequency, phase, amplitude, noise.

All indices are matched-filter output indices at Ts1'. The four passes run on the
same stored passband frame, each one re-demodulating it with a better estimate.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .config import ModemConfig
from .errors import ConfigError, EmptyInputError
from .pulses import BetaSequence, PulseBank
from .rxfront import front_end

AVERAGING_SPAN = 2048


@dataclass
class SyncReport:
    n1: int
    n2: int
    n3: int
    omega3_hat: float  # pass 1, differential correlation
    omega2_hat: float  # pass 2 differential estimate of the residual (diagnostic)
    omega_ml1: float  # step 1 of the ML search (residual)
    omegaf_hat: float  # final ML estimate of the residual
    theta0_hat: float
    A_hat: float
    sigma2_hat: float
    R_i: float
    detected: bool = True
    diagnostics: dict = field(default_factory=dict)

    @property
    def omega_total(self) -> float:
        return self.omega3_hat + self.omegaf_hat


def _gather(x, starts, count, MI):
    idx = np.asarray(starts)[:, None] + MI * np.arange(count)[None, :]
    return x[idx]


def _strided_correlate(x, c, window, MI):
    """y(n) = sum_i x(n + i MI) c_i for n < window, one polyphase branch at a time."""
    count = len(c)
    blocks = -(-window // MI) + count - 1
    x = np.asarray(x)[: blocks * MI]
    if len(x) < blocks * MI:
        x = np.concatenate([x, np.zeros(blocks * MI - len(x), x.dtype)])
    cols = x.reshape(blocks, MI)
    # np.correlate conjugates its second argument
    y = np.stack([np.correlate(cols[:, r], np.conj(c), "valid") for r in range(MI)], axis=1)
    return y.ravel()[:window]


def _check_span(x, window, count, MI):
    if len(x) == 0:
        raise EmptyInputError("no matched-filter samples")
    need = window + (count - 1) * MI + 1
    if len(x) < need:
        raise ConfigError(
            f"buffer of {len(x)} samples cannot hold a {window}-sample search window "
            f"plus the preamble ({need} needed)"
        )


def differential_correlate(x, beta: BetaSequence, M: int, I: int, window: int = AVERAGING_SPAN):
    """Differential-correlation frame detector over candidate starts 0..window-1.

    Returns (n_peak, omega_hat, R_i, |y|^2 trace).
    """
    if window < AVERAGING_SPAN:
        raise ConfigError(f"search window must cover the {AVERAGING_SPAN}-sample average")
    MI = M * I
    K1 = beta.count
    x = np.asarray(x)
    _check_span(x, window, K1, MI)
    # y(n) = sum_i conj(x(n+iMI) b*_i) x(n+(i+1)MI) b*_{i+1}
    nd = window + (K1 - 2) * MI
    d = np.conj(x[:nd]) * x[MI : MI + nd]
    c = beta.beta_i[:-1] * np.conj(beta.beta_i[1:])
    y = _strided_correlate(d, c, window, MI)
    power = np.abs(y) ** 2
    n_peak = int(np.argmax(power))
    omega_hat = float(np.angle(y[n_peak]) / M)
    R = float(power[n_peak] / power.mean()) if power.mean() > 0 else math.inf
    return n_peak, omega_hat, R, power


def ml_grid_search(z, M: int, centre: float, half_width: float, bins: int):
    """argmax of |sum_k z_k exp(-j w M k)| over w_i = w_min + i step, strictly inside (w_min, w_max).

    The lattice contains ``centre`` itself. Returns (w, index, metric).
    """
    step = 2 * half_width / bins
    grid = centre - half_width + np.arange(1, bins) * step
    k = np.arange(len(z))
    metric = np.abs(np.exp(-1j * M * np.outer(grid, k)) @ z)
    i = int(np.argmax(metric))
    return float(grid[i]), i, metric


def ml_reference_terms(x2, n2: int, beta: BetaSequence, MI: int) -> np.ndarray:
    x2 = np.asarray(x2)
    idx = n2 + MI * np.arange(beta.count)
    if idx[-1] >= len(x2) or n2 < 0:
        raise ConfigError("preamble extends past the matched-filter buffer")
    return x2[idx] * np.conj(beta.beta_i)


def ml_fine_frequency(x2, n2: int, beta: BetaSequence, cfg: ModemConfig):
    """Two-step ML search for the residual offset; returns (omegaf_hat, diagnostics)."""
    z = ml_reference_terms(x2, n2, beta, cfg.MI)
    w1, i1, _ = ml_grid_search(z[: cfg.ml_L1], cfg.M, 0.0, cfg.ml_half_width, cfg.ml_B1)
    w2, i2, _ = ml_grid_search(z, cfg.M, w1, cfg.ml_step2_half_width, cfg.ml_B2)
    diag = {
        "omega_ml1": w1,
        "step1_on_boundary": i1 in (0, cfg.ml_B1 - 2),
        "step2_on_boundary": i2 in (0, cfg.ml_B2 - 2),
    }
    return w2, diag


def ml_single_step(x2, n2: int, beta: BetaSequence, cfg: ModemConfig, bins: int = 10_000) -> float:
    """One-shot search of the full +-half_width range (complexity reference)."""
    z = ml_reference_terms(x2, n2, beta, cfg.MI)
    return ml_grid_search(z, cfg.M, 0.0, cfg.ml_half_width, bins)[0]


def correlation_trace(x3, beta: BetaSequence, MI: int, window: int) -> np.ndarray:
    x3 = np.asarray(x3)
    _check_span(x3, window, beta.count, MI)
    w = np.conj(beta.beta_i) / np.abs(beta.beta_i) ** 2
    return _strided_correlate(x3, w, window, MI)


def correlate_frame(x3, beta: BetaSequence, M: int, I: int, window: int = AVERAGING_SPAN):
    """Correlation frame detector; returns (n3, theta0_hat in [0, 2pi), y3 trace)."""
    y = correlation_trace(x3, beta, M * I, window)
    n3 = int(np.argmax(np.abs(y) ** 2))
    theta = float(np.mod(np.angle(y[n3]), 2 * np.pi))
    if theta >= 2 * np.pi:
        theta = 0.0
    return n3, theta, y


def estimate_amplitude(x3, n3: int, theta0_hat: float, beta: BetaSequence, MI: int) -> float:
    z = _gather(np.asarray(x3), [n3], beta.count, MI)[0]
    y3 = np.sum(z * np.conj(beta.beta_i) / np.abs(beta.beta_i) ** 2)
    return float(np.real(y3 * np.exp(-1j * theta0_hat)) / beta.count)


def estimate_noise_variance(
    x3, n3: int, theta0_hat: float, A_hat: float, beta: BetaSequence, MI: int
) -> float:
    """Mean squared deviation from A_hat of the de-rotated I (at kT) and Q (at kT + T/2) rails."""
    x3 = np.asarray(x3)
    K1 = beta.count
    rot = np.exp(-1j * theta0_hat)
    xi = _gather(x3, [n3], K1, MI)[0] * rot
    xq = _gather(x3, [n3 + MI // 2], K1, MI)[0] * rot
    pre = beta.preamble[:K1]
    dev_i = xi.real * pre.real - A_hat
    dev_q = xq.imag * pre.imag - A_hat
    return float(np.sum(dev_i**2 + dev_q**2) / (2 * K1))


def acquisition_span(cfg: ModemConfig, pulses: PulseBank) -> int:
    """Passband samples needed to evaluate every candidate start over the preamble."""
    mf_need = cfg.search_window + (cfg.Lp + 1) * cfg.MI + len(pulses.mf_taps)
    return mf_need // cfg.I + 2


def acquire(r, cfg: ModemConfig, pulses: PulseBank, beta: BetaSequence):
    """Run the four acquisition passes on stored samples ``r``.

    Returns (SyncReport, x3) where x3 is the full-frame MF output after the final
    demodulation by pi/2 + omega3_hat + omegaf_hat.
    """
    r = np.asarray(r)
    if len(r) == 0:
        raise EmptyInputError("empty receive buffer")
    span = acquisition_span(cfg, pulses)
    W = cfg.search_window

    x1 = front_end(r, pulses, 0.0, n_samples=span)
    n1, w3, R, _ = differential_correlate(x1, beta, cfg.M, cfg.I, W)

    x2 = front_end(r, pulses, w3, n_samples=span)
    n2, w2, _, _ = differential_correlate(x2, beta, cfg.M, cfg.I, W)
    wf, diag = ml_fine_frequency(x2, n2, beta, cfg)

    x3 = front_end(r, pulses, w3 + wf)
    n3, theta, _ = correlate_frame(x3, beta, cfg.M, cfg.I, W)
    A = estimate_amplitude(x3, n3, theta, beta, cfg.MI)
    s2 = estimate_noise_variance(x3, n3, theta, A, beta, cfg.MI)

    report = SyncReport(
        n1=n1,
        n2=n2,
        n3=n3,
        omega3_hat=w3,
        omega2_hat=w2,
        omega_ml1=diag.pop("omega_ml1"),
        omegaf_hat=wf,
        theta0_hat=theta,
        A_hat=A,
        sigma2_hat=s2,
        R_i=R,
        detected=R >= cfg.detect_threshold,
        diagnostics=diag,
    )
    return report, x3
