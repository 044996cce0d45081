"""Decision-directed phase tracking, five-cell timing tracking and symbol detection."""
from __future__ import annotations

import cmath
import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .acq import SyncReport
from .config import ModemConfig
from .errors import TruncatedFrameError
from .pulses import BetaSequence, make_pulses

TWO_PI = 2 * math.pi


def wrap_phase(theta: float) -> float:
    t = math.fmod(theta, TWO_PI)
    if t < 0:
        t += TWO_PI
    return 0.0 if t >= TWO_PI else t


@dataclass
class PhaseLoopState:
    z_avg: complex
    theta_hat: float
    rho_c: float

    def update(self, x: complex, beta_hat: complex) -> float:
        z = x * beta_hat.conjugate() / (abs(beta_hat) ** 2)
        self.z_avg = self.rho_c * self.z_avg + (1 - self.rho_c) * z
        # atan2 rather than cmath.phase, which raises on subnormal imaginary parts
        self.theta_hat = wrap_phase(math.atan2(self.z_avg.imag, self.z_avg.real))
        return self.theta_hat


@dataclass
class TimingArray:
    """u_avg at offsets -2..2 around the current in-phase sampling index."""

    cells: np.ndarray
    index: int
    rho_t: float
    c: int = 0

    @classmethod
    def start(cls, index: int, rho_t: float) -> "TimingArray":
        return cls(np.zeros(5), int(index), rho_t)

    def accumulate(self, u) -> None:
        self.cells = self.rho_t * self.cells + (1 - self.rho_t) * np.asarray(u, dtype=float)

    def decide(self) -> int:
        """Winning offset among -1, 0, 1; ties go to 0, then to -1."""
        mid = self.cells[1:4]
        best = mid[1]
        c = 0
        for off in (-1, 1):
            if mid[off + 1] > best:
                best, c = mid[off + 1], off
        self.c = c
        return c

    def shift(self, c: int) -> None:
        if c == 1:
            self.cells = np.concatenate([self.cells[1:], [0.0]])
        elif c == -1:
            self.cells = np.concatenate([[0.0], self.cells[:-1]])


@dataclass
class DetectedFrame:
    hard_i: np.ndarray
    hard_q: np.ndarray
    soft_i: np.ndarray  # de-rotated, divided by A_hat
    soft_q: np.ndarray
    sample_index: np.ndarray  # in-phase MF index per data symbol
    theta: np.ndarray  # phase estimate used to detect each data symbol
    shifts: np.ndarray  # c per data symbol
    A_hat: float
    sigma2: float  # noise variance seen by the decoder, sigma2_hat / A_hat^2
    MI: int = 16
    diagnostics: dict = field(default_factory=dict)

    @property
    def net_shift(self) -> int:
        return int(self.shifts.sum())

    def write_trace(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            fh.write("# schema=1\n")
            w = csv.writer(fh)
            w.writerow(["symbol_index", "theta_hat", "c_shift", "sampling_index_mod_MI"])
            for k in range(len(self.theta)):
                w.writerow([k, f"{self.theta[k]:.9f}", int(self.shifts[k]), int(self.sample_index[k] % self.MI)])
        return path


def _sign(v: float) -> float:
    return 1.0 if v >= 0 else -1.0


def phase_acquire_preamble(x3, n3: int, beta: BetaSequence, rho_c: float, MI: int) -> PhaseLoopState:
    """Run the loop over the known references beta(lT), 0 <= l <= Lp - L_isi."""
    state = PhaseLoopState(0j, 0.0, rho_c)
    for l in range(beta.count):
        phase_track_step(state, complex(x3[n3 + l * MI]), complex(beta.beta_i[l]))
    return state


def phase_track_step(state: PhaseLoopState, x: complex, beta_hat: complex) -> float:
    return state.update(x, beta_hat)


def detect_symbol(x_i: complex, x_q: complex, theta_hat: float):
    """Return (S_I, S_Q, soft I, soft Q) after de-rotation by theta_hat."""
    rot = cmath.exp(-1j * theta_hat)
    si = (x_i * rot).real
    sq = (x_q * rot).imag
    return _sign(si), _sign(sq), si, sq


def timing_samples(x3, index: int, theta: float, s_i: float) -> np.ndarray:
    """u at offsets -2..2: real part after de-rotation, times the in-phase symbol."""
    seg = np.asarray(x3[index - 2 : index + 3])
    return (seg * cmath.exp(-1j * theta)).real * s_i


def timing_update(array: TimingArray, x3, theta: float, s_i: float, track: bool = True) -> int:
    """Accumulate one symbol into the array; when tracking, pick and apply a shift."""
    array.accumulate(timing_samples(x3, array.index, theta, s_i))
    if not track:
        return 0
    c = array.decide()
    array.shift(c)
    return c


def beta_hat(s_i: np.ndarray, s_q: np.ndarray, k: int, h: np.ndarray, L_isi: int) -> complex:
    """S_kI + j gamma_kQ from (known or decided) symbols; symbols outside the burst count as 0."""
    g = 0.0
    for j in range(2 * L_isi):
        idx = k + L_isi - 1 - j
        if 0 <= idx < len(s_q):
            g += h[j] * s_q[idx]
    return complex(s_i[k], g)


def run_tracking(x3, report: SyncReport, beta: BetaSequence, cfg: ModemConfig) -> DetectedFrame:
    """Track phase and timing over the data part and emit soft symbols for decoding."""
    x3 = np.asarray(x3)
    MI, Lp, Ld, L_isi = cfg.MI, cfg.Lp, cfg.Ld, cfg.L_isi
    h = make_pulses(cfg).h
    n3 = report.n3
    if n3 - 2 < 0 or n3 + Lp * MI + 2 >= len(x3):
        raise TruncatedFrameError("preamble runs off the matched-filter buffer")

    loop = phase_acquire_preamble(x3, n3, beta, cfg.rho_c, MI)
    timing = TimingArray.start(n3, cfg.rho_t)
    pre = beta.preamble
    for l in range(Lp):
        timing.index = n3 + l * MI
        timing_update(timing, x3, report.theta0_hat, pre[l].real, track=False)

    s_i = np.zeros(Lp + Ld)
    s_q = np.zeros(Lp + Ld)
    s_i[:Lp], s_q[:Lp] = pre.real, pre.imag
    pos = np.zeros(Lp + Ld, dtype=np.int64)
    pos[:Lp] = n3 + MI * np.arange(Lp)

    hard_i, hard_q = np.zeros(Ld), np.zeros(Ld)
    soft_i, soft_q = np.zeros(Ld), np.zeros(Ld)
    thetas, shifts = np.zeros(Ld), np.zeros(Ld, dtype=np.int64)
    A = report.A_hat
    p = n3 + Lp * MI
    half = MI // 2
    for i in range(Ld):
        l = i - L_isi
        if l >= -L_isi + 1:
            k = Lp + l
            loop.update(complex(x3[pos[k]]), beta_hat(s_i, s_q, k, h, L_isi))
        theta = loop.theta_hat
        if p - 2 < 0 or p + max(half, 2) >= len(x3):
            raise TruncatedFrameError(f"sampling index {p} left the buffer at data symbol {i}")
        a, b, u, v = detect_symbol(complex(x3[p]), complex(x3[p + half]), theta)
        k = Lp + i
        s_i[k], s_q[k], pos[k] = a, b, p
        hard_i[i], hard_q[i] = a, b
        soft_i[i], soft_q[i] = u / A, v / A
        thetas[i] = theta
        timing.index = p
        c = timing_update(timing, x3, theta, a)
        shifts[i] = c
        p += MI + c

    sigma2 = max(report.sigma2_hat / A**2, cfg.sigma2_floor) if A != 0 else math.inf
    return DetectedFrame(
        hard_i, hard_q, soft_i, soft_q, pos[Lp:], thetas, shifts, A, sigma2, MI,
        {"theta_preamble": report.theta0_hat},
    )
