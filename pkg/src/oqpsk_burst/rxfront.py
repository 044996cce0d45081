"""Digital local-oscillator demodulation and the up-sampled matched filter."""
import numpy as np
from scipy.signal import upfirdn


def demodulate(r, omega_lo: float, theta_lo: float = 0.0) -> np.ndarray:
    """r[n] exp(-j((pi/2 + omega_lo) n + theta_lo)); the image is left for the MF."""
    r = np.asarray(r, dtype=float)
    n = np.arange(len(r))
    return r * np.exp(-1j * ((np.pi / 2 + omega_lo) * n + theta_lo))


def upsample_matched_filter(y, mf_taps, I: int) -> np.ndarray:
    """Zero-insert by I, then filter with taps designed at Fs1 = I Fs (polyphase)."""
    if I < 1:
        raise ValueError("I must be >= 1")
    y = np.asarray(y)
    if len(y) == 0:
        return np.zeros(0, dtype=complex)
    return upfirdn(np.asarray(mf_taps), y, up=I)


def upsample_matched_filter_reference(y, mf_taps, I: int) -> np.ndarray:
    """Literal construction: explicit zero-insertion followed by direct convolution."""
    y = np.asarray(y)
    up = np.zeros(len(y) * I - (I - 1), dtype=np.result_type(y, float))
    up[::I] = y
    return np.convolve(up, np.asarray(mf_taps))


def front_end(r, pulses, omega_lo: float, theta_lo: float = 0.0, n_samples: int | None = None):
    """Demodulate (optionally only the first ``n_samples``) and matched-filter."""
    r = np.asarray(r)
    if n_samples is not None:
        r = r[:n_samples]
    return upsample_matched_filter(demodulate(r, omega_lo, theta_lo), pulses.mf_taps, pulses.I)
