"""Burst assembly, OQPSK shaping with a drifting sample clock, passband synthesis, AWGN.

Time is measured in transmit sample periods Ts = T/M throughout. The receiver
samples at Ts' = Ts (1 + epsilon); output sample n therefore sees the burst at
continuous time n (1 + epsilon) - delay.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import ModemConfig, alias_limit
from .errors import AliasingError, ConfigError
from .pulses import PulseBank, make_postamble, make_preamble, make_pulses
from .turbo import TurboCodeword, make_interleaver, puncture, turbo_encode


@dataclass(frozen=True)
class Burst:
    symbols: np.ndarray  # complex S_kI + j S_kQ, length L
    info_bits: np.ndarray
    codeword: TurboCodeword
    Lp: int
    Ld: int
    Lo: int

    def __post_init__(self):
        if len(self.symbols) != self.Lp + self.Ld + self.Lo:
            raise ConfigError("burst length differs from Lp + Ld + Lo")

    @property
    def data_symbols(self) -> np.ndarray:
        return self.symbols[self.Lp : self.Lp + self.Ld]


@dataclass(frozen=True)
class TxTruth:
    """Ground truth for the harness; never handed to receiver code."""

    t0: float  # MF-output index (at Ts1') of the first in-phase symbol peak
    omega3: float
    theta0: float
    alpha: float  # fraction of T
    guard: int  # leading silence in Ts samples
    epsilon: float
    drift_events: int

    def symbol_index(self, k, cfg: ModemConfig) -> np.ndarray:
        """Fractional MF-output index of in-phase symbol k."""
        pulses = make_pulses(cfg)
        tx_time = self.guard + self.alpha * cfg.M + pulses.tx_delay + np.asarray(k) * cfg.M
        return cfg.I * tx_time / (1 + self.epsilon) + pulses.mf_delay


@dataclass(frozen=True)
class PassbandFrame:
    samples: np.ndarray
    epsilon: float


def interleaver_for(cfg: ModemConfig) -> np.ndarray:
    return make_interleaver(cfg.info_bits, cfg.interleaver_seed)


def assemble_burst(info_bits, cfg: ModemConfig, perm: np.ndarray | None = None) -> Burst:
    info_bits = np.asarray(info_bits, dtype=np.int8)
    if len(info_bits) != cfg.info_bits:
        raise ConfigError(f"need {cfg.info_bits} info bits for Ld={cfg.Ld}, got {len(info_bits)}")
    perm = interleaver_for(cfg) if perm is None else perm
    cw = turbo_encode(info_bits, perm, cfg.info_bits)
    i_bits, q_bits = puncture(cw)
    data = (1 - 2.0 * i_bits) + 1j * (1 - 2.0 * q_bits)
    symbols = np.concatenate([make_preamble(cfg), data, make_postamble(cfg)])
    return Burst(symbols, info_bits, cw, cfg.Lp, cfg.Ld, cfg.Lo)


def _shape_rail(rail, start, epsilon, n_out, pulses: PulseBank):
    """One rail of the time-varying filter.

    For output n the burst time t = n (1 + epsilon) - start is split into an
    integer input index j and a tap phase phi in [-1/2, 1/2); the taps are the
    analytic pulse at i + phi. When phi would leave that range the input index
    advances by 0 or 2 instead of 1, i.e. one input sample is repeated or dropped.
    """
    M = pulses.M
    N = len(pulses.tx_taps) - 1
    n = np.arange(n_out)
    t = n * (1 + epsilon) - start
    j = np.floor(t + 0.5).astype(np.int64)
    phi = t - j
    # only taps landing on a symbol instant (multiple of M) contribute
    first = np.mod(j, M)
    n_taps = N // M + 1
    i = first[:, None] + M * np.arange(n_taps)[None, :]
    m = (j[:, None] - i) // M
    valid = (i <= N) & (m >= 0) & (m < len(rail))
    taps = pulses.tx_pulse(i + phi[:, None])
    vals = np.where(valid, rail[np.clip(m, 0, len(rail) - 1)], 0.0)
    out = np.sum(np.where(valid, taps * vals, 0.0), axis=1)
    events = int(np.count_nonzero(np.diff(j) != 1))
    return out, events


def frame_length(cfg: ModemConfig, guard: int) -> int:
    """Receive-buffer length in Ts' samples: burst, filter tail and search headroom."""
    pulses = make_pulses(cfg)
    burst_end = guard + (cfg.L + 1) * cfg.M + len(pulses.tx_taps)
    acq_need = (cfg.search_window + (cfg.Lp + 2) * cfg.MI + len(pulses.mf_taps)) // cfg.I + 1
    return int(math.ceil(max(burst_end, acq_need) * (1 + abs(cfg.epsilon)))) + 8


def shape_oqpsk(
    symbols,
    alpha: float,
    epsilon: float,
    cfg: ModemConfig,
    guard: int = 0,
    n_out: int | None = None,
):
    """Complex baseband at Ts' for the given symbols; returns (samples, drift_events).

    ``alpha`` is a fraction of T; the quadrature rail is delayed by T/2.
    """
    symbols = np.asarray(symbols, dtype=complex)
    pulses = make_pulses(cfg)
    if n_out is None:
        n_out = guard + (len(symbols) + 1) * cfg.M + len(pulses.tx_taps)
    start = guard + alpha * cfg.M
    s_i, events = _shape_rail(symbols.real, start, epsilon, n_out, pulses)
    s_q, _ = _shape_rail(symbols.imag, start + cfg.M / 2, epsilon, n_out, pulses)
    return s_i + 1j * s_q, events


def modulate_passband(
    baseband, omega3: float, theta0: float, M: int = 4, rolloff: float = 0.4
) -> np.ndarray:
    """Re{ s[n] exp(j((pi/2 + omega3) n + theta0)) }."""
    limit = alias_limit(M, rolloff)
    if abs(omega3) > limit + 1e-12:
        raise AliasingError(f"|omega3| = {abs(omega3):.6g} exceeds {limit:.6g}")
    n = np.arange(len(baseband))
    return np.real(np.asarray(baseband) * np.exp(1j * ((np.pi / 2 + omega3) * n + theta0)))


def add_awgn(samples, N0: float, rng: np.random.Generator) -> np.ndarray:
    samples = np.asarray(samples, dtype=float)
    if N0 < 0:
        raise ConfigError("N0 must be >= 0")
    if N0 == 0:
        return samples.copy()
    return samples + rng.normal(0.0, math.sqrt(N0 / 2), size=samples.shape)


def transmit(
    burst: Burst,
    cfg: ModemConfig,
    *,
    alpha: float,
    theta0: float,
    guard: int,
    noise_rng: np.random.Generator,
) -> tuple[PassbandFrame, TxTruth]:
    n_out = frame_length(cfg, guard)
    bb, events = shape_oqpsk(burst.symbols, alpha, cfg.epsilon, cfg, guard, n_out)
    r = modulate_passband(bb, cfg.omega3, theta0, cfg.M, cfg.rolloff)
    r = add_awgn(r, cfg.N0, noise_rng)
    pulses = make_pulses(cfg)
    t0 = cfg.I * (guard + alpha * cfg.M + pulses.tx_delay) / (1 + cfg.epsilon) + pulses.mf_delay
    truth = TxTruth(t0, cfg.omega3, theta0, alpha, guard, cfg.epsilon, events)
    return PassbandFrame(r, cfg.epsilon), truth


def dump_frame(frame: PassbandFrame, directory: str | Path, index: int) -> Path:
    path = Path(directory) / f"frame_{index}.f32"
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.samples.astype("<f4").tofile(path)
    return path
