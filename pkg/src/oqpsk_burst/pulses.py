"""Root-raised-cosine pulses, the ISI reference sequence and offset arithmetic."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.signal import upfirdn

from .config import ModemConfig, alias_limit
from .errors import AliasingError, ConfigError
from .rng import substream


def rrc(t, rolloff: float) -> np.ndarray:
    """Unit-symbol-period RRC impulse response at times ``t`` (in symbols).

    The t = 0 and t = +-1/(4 rolloff) points use their analytic limits.
    """
    t = np.asarray(t, dtype=float)
    b = rolloff
    out = np.empty_like(t)
    at_zero = np.abs(t) < 1e-12
    at_sing = np.abs(np.abs(t) - 1 / (4 * b)) < 1e-12
    reg = ~(at_zero | at_sing)
    tr = t[reg]
    out[reg] = (np.sin(np.pi * tr * (1 - b)) + 4 * b * tr * np.cos(np.pi * tr * (1 + b))) / (
        np.pi * tr * (1 - (4 * b * tr) ** 2)
    )
    out[at_zero] = 1 - b + 4 * b / np.pi
    out[at_sing] = (b / math.sqrt(2)) * (
        (1 + 2 / np.pi) * math.sin(np.pi / (4 * b)) + (1 - 2 / np.pi) * math.cos(np.pi / (4 * b))
    )
    return out


def design_rrc(rolloff: float, span_samples: int, samples_per_symbol: int) -> np.ndarray:
    """Causal RRC taps, ``span_samples`` long, peak at the centre (unit-symbol scaling)."""
    if not 0 < rolloff <= 1:
        raise ConfigError(f"rolloff must lie in (0, 1], got {rolloff}")
    if span_samples < 1:
        raise ConfigError("span_samples must be >= 1")
    if samples_per_symbol < 2:
        raise ConfigError("samples_per_symbol must be >= 2")
    n = np.arange(span_samples)
    return rrc((n - (span_samples - 1) / 2) / samples_per_symbol, rolloff)


@dataclass(frozen=True)
class PulseBank:
    tx_taps: np.ndarray  # p(n Ts), causal, energy-normalized so sum(p^2) ~ 1
    mf_taps: np.ndarray  # at Fs1 = I Fs; includes the x2 that undoes demodulation
    h: np.ndarray  # T-spaced half-symbol ISI taps h_0 .. h_{2 L_isi - 1}
    cascade: np.ndarray  # baseband-equivalent tx -> demod -> MF response at Ts1
    peak: int  # index of the cascade peak
    M: int
    I: int
    rolloff: float

    @property
    def tx_delay(self) -> float:
        """Centre of the transmit pulse, in Ts samples."""
        return (len(self.tx_taps) - 1) / 2

    @property
    def mf_delay(self) -> float:
        return (len(self.mf_taps) - 1) / 2

    def tx_pulse(self, x) -> np.ndarray:
        """Causal transmit pulse evaluated at arbitrary ``x`` (in Ts units)."""
        return rrc((np.asarray(x, float) - self.tx_delay) / self.M, self.rolloff) / math.sqrt(self.M)


def make_pulses(cfg: ModemConfig) -> PulseBank:
    return _make_pulses(cfg.M, cfg.I, cfg.rolloff, cfg.tx_span, cfg.mf_len, cfg.L_isi)


@lru_cache(maxsize=16)
def _make_pulses(M, I, rolloff, tx_span, mf_len, L_isi) -> PulseBank:
    tx = design_rrc(rolloff, tx_span, M) / math.sqrt(M)
    mf = design_rrc(rolloff, mf_len, M * I)
    # the demodulator halves the baseband; fold the x2 and the peak normalization into mf
    raw = upfirdn(mf, tx, up=I) / 2
    peak = int(np.argmax(raw))
    mf = mf / raw[peak]
    cascade = upfirdn(mf, tx, up=I) / 2
    MI = M * I
    offsets = peak + MI * (np.arange(2 * L_isi) - L_isi) + MI // 2
    if offsets[0] < 0 or offsets[-1] >= len(cascade):
        raise ConfigError("L_isi span exceeds the filter cascade")
    h = cascade[offsets]
    for arr in (tx, mf, cascade, h):
        arr.setflags(write=False)
    return PulseBank(tx, mf, h, cascade, peak, M, I, rolloff)


@dataclass(frozen=True)
class BetaSequence:
    beta_i: np.ndarray  # beta(kT) = S_kI + j gamma_kQ, 0 <= k <= Lp - L_isi
    beta_q: np.ndarray  # beta(kT + T/2) = gamma_kI + j S_kQ
    preamble: np.ndarray  # complex S_kI + j S_kQ, length Lp
    L_isi: int

    @property
    def count(self) -> int:
        return len(self.beta_i)


def gamma_q(sq: np.ndarray, k, h: np.ndarray, L_isi: int) -> np.ndarray:
    """Quadrature-arm ISI at the in-phase instant of symbol k (zero outside ``sq``)."""
    k = np.atleast_1d(np.asarray(k))
    idx = k[:, None] + L_isi - 1 - np.arange(2 * L_isi)[None, :]
    valid = (idx >= 0) & (idx < len(sq))
    vals = np.where(valid, sq[np.clip(idx, 0, len(sq) - 1)], 0.0)
    return vals @ h


def gamma_i(si: np.ndarray, k, h: np.ndarray, L_isi: int) -> np.ndarray:
    k = np.atleast_1d(np.asarray(k))
    idx = k[:, None] + L_isi - np.arange(2 * L_isi)[None, :]
    valid = (idx >= 0) & (idx < len(si))
    vals = np.where(valid, si[np.clip(idx, 0, len(si) - 1)], 0.0)
    return vals @ h


def build_beta(preamble: np.ndarray, h: np.ndarray, L_isi: int) -> BetaSequence:
    """Precompute the ISI-corrupted pilot references for the known preamble.

    Symbols before the burst count as zero; quadrature-arm references that would
    need data symbols use only the preamble part.
    """
    preamble = np.asarray(preamble, dtype=complex)
    if len(preamble) < 2 * L_isi:
        raise ConfigError(f"preamble of {len(preamble)} symbols shorter than 2*L_isi")
    h = np.asarray(h, dtype=float)
    if len(h) != 2 * L_isi:
        raise ConfigError("h must hold 2*L_isi taps")
    si, sq = preamble.real, preamble.imag
    k = np.arange(len(preamble) - L_isi + 1)
    beta_i = si[k] + 1j * gamma_q(sq, k, h, L_isi)
    beta_q = gamma_i(si, k, h, L_isi) + 1j * sq[k]
    for arr in (beta_i, beta_q, preamble):
        arr.setflags(write=False)
    return BetaSequence(beta_i, beta_q, preamble, L_isi)


def random_qpsk(rng: np.random.Generator, n: int) -> np.ndarray:
    bits = rng.integers(0, 2, size=(2, n))
    return (1 - 2 * bits[0]) + 1j * (1 - 2 * bits[1])


def make_preamble(cfg: ModemConfig) -> np.ndarray:
    return random_qpsk(substream(cfg.seed, 0, "preamble"), cfg.Lp)


def make_postamble(cfg: ModemConfig) -> np.ndarray:
    return random_qpsk(substream(cfg.seed, 0, "postamble"), cfg.Lo)


def make_beta(cfg: ModemConfig, pulses: PulseBank | None = None) -> BetaSequence:
    pulses = pulses or make_pulses(cfg)
    return build_beta(make_preamble(cfg), pulses.h, cfg.L_isi)


def effective_offset(
    delta_f: float,
    fc: float,
    fs: float,
    delta_ppm: float,
    sign: int = 1,
    limit: float = alias_limit(4, 0.4),
) -> float:
    """Total digital frequency offset (rad/sample) including the clock-error term.

    ``sign=+1`` means the receive clock runs fast (Fs' = Fs(1 + 2 delta 1e-6)).
    """
    if fs <= 0:
        raise ConfigError("fs must be positive")
    w3 = 2 * math.pi * (delta_f - sign * (fc + delta_f) * 2 * delta_ppm * 1e-6) / fs
    if abs(w3) > limit + 1e-12:
        raise AliasingError(f"|omega3| = {abs(w3):.6g} rad exceeds {limit:.6g}")
    return w3
