"""Rate-1/2 punctured turbo code built from two 16-state RSC encoders.

Constituent code: G(D) = [1, (1 + D^2 + D^3 + D^4) / (1 + D + D^4)].
Encoder 1 is terminated with 4 feedback-driven tail bits, encoder 2 is left
open. Parity from encoder 1 is sent at odd info positions (and on the tail),
parity from encoder 2 at even positions.

The decoder is the normalized probability-domain BCJR: every forward and
backward stage is divided by its sum. Branch likelihoods are computed with a
per-stage common factor removed, exp((r S - |r|) / sigma2), which the stage
normalization cancels; punctured parity contributes a factor of 1.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numba
import numpy as np

from .config import TAIL_BITS
from .errors import ConfigError, NumericError

MEMORY = 4
FEEDBACK = (1, 1, 0, 0, 1)  # 1 + D + D^4
FEEDFORWARD = (1, 0, 1, 1, 1)  # 1 + D^2 + D^3 + D^4


@dataclass(frozen=True)
class TurboTrellis:
    next_state: np.ndarray  # (S, 2) indexed by input bit
    parity: np.ndarray  # (S, 2) parity bit on that branch
    tail_input: np.ndarray  # (S,) input that drives the register toward zero

    @property
    def state_count(self) -> int:
        return len(self.next_state)

    def diverge(self, n: int) -> tuple[int, ...]:
        return tuple(int(s) for s in self.next_state[n])

    def converge(self, n: int) -> tuple[int, ...]:
        return tuple(int(m) for m in np.nonzero((self.next_state == n).any(axis=1))[0])

    @property
    def rho_plus(self) -> np.ndarray:
        """Successor for input symbol +1 (bit 0)."""
        return self.next_state[:, 0]

    @property
    def rho_minus(self) -> np.ndarray:
        return self.next_state[:, 1]


def _register_step(state: int, bit: int) -> tuple[int, int]:
    # state bit j holds a_{k-1-j}
    a = [(state >> j) & 1 for j in range(MEMORY)]
    fb = bit
    for j in range(1, MEMORY + 1):
        fb ^= FEEDBACK[j] & a[j - 1]
    par = FEEDFORWARD[0] & fb
    for j in range(1, MEMORY + 1):
        par ^= FEEDFORWARD[j] & a[j - 1]
    new = ((state << 1) | fb) & ((1 << MEMORY) - 1)
    return new, par


@lru_cache(maxsize=1)
def make_trellis() -> TurboTrellis:
    S = 1 << MEMORY
    nxt = np.zeros((S, 2), dtype=np.int64)
    par = np.zeros((S, 2), dtype=np.int64)
    tail = np.zeros(S, dtype=np.int64)
    for s in range(S):
        for b in (0, 1):
            nxt[s, b], par[s, b] = _register_step(s, b)
        # input equal to the feedback sum shifts a zero into the register
        tail[s] = 0 if nxt[s, 0] & 1 == 0 else 1
    for arr in (nxt, par, tail):
        arr.setflags(write=False)
    return TurboTrellis(nxt, par, tail)


def rsc_encode(bits, terminate: bool = False, trellis: TurboTrellis | None = None):
    """Parity stream of one constituent encoder starting from state 0.

    With ``terminate`` the 4 tail inputs are appended; returns
    (systematic, parity, final_state).
    """
    tr = trellis or make_trellis()
    bits = np.asarray(bits, dtype=np.int64)
    sys_out = list(bits)
    par_out = []
    state = 0
    for b in bits:
        par_out.append(tr.parity[state, b])
        state = tr.next_state[state, b]
    if terminate:
        for _ in range(MEMORY):
            b = tr.tail_input[state]
            sys_out.append(b)
            par_out.append(tr.parity[state, b])
            state = tr.next_state[state, b]
    return np.array(sys_out, dtype=np.int8), np.array(par_out, dtype=np.int8), int(state)


def make_interleaver(length: int, seed: int) -> np.ndarray:
    """``perm`` with interleaved[m] = original[perm[m]]."""
    return np.random.default_rng(seed).permutation(length)


@dataclass(frozen=True)
class TurboCodeword:
    systematic: np.ndarray  # L_info + 4 (tail included)
    parity1: np.ndarray  # L_info + 4
    parity2: np.ndarray  # L_info
    perm: np.ndarray

    @property
    def info_length(self) -> int:
        return len(self.parity2)

    def punctured_parity(self) -> np.ndarray:
        """One parity bit per systematic bit: c1 on odd i and on the tail, c2 on even i."""
        K = self.info_length
        q = self.parity1.copy()
        q[:K:2] = self.parity2[::2]
        return q

    @property
    def coded_length(self) -> int:
        return 2 * len(self.systematic)


def turbo_encode(bits, perm: np.ndarray, expected_length: int | None = None) -> TurboCodeword:
    bits = np.asarray(bits, dtype=np.int8)
    if expected_length is not None and len(bits) != expected_length:
        raise ConfigError(f"expected {expected_length} info bits, got {len(bits)}")
    if len(perm) != len(bits):
        raise ConfigError("interleaver length does not match the info block")
    sys1, par1, final = rsc_encode(bits, terminate=True)
    assert final == 0
    _, par2, _ = rsc_encode(bits[perm])
    return TurboCodeword(sys1, par1, par2, perm)


def puncture(cw: TurboCodeword) -> tuple[np.ndarray, np.ndarray]:
    """Bits carried on the in-phase and quadrature rails."""
    return cw.systematic.copy(), cw.punctured_parity()


def depuncture(q_soft: np.ndarray, info_length: int) -> tuple[np.ndarray, np.ndarray]:
    """Split the quadrature stream back into (r_c1, r_c2) with NaN at punctured slots."""
    q_soft = np.asarray(q_soft, dtype=float)
    K = info_length
    r_c1 = q_soft.copy()
    r_c1[:K:2] = np.nan
    r_c2 = np.full(K, np.nan)
    r_c2[::2] = q_soft[:K:2]
    return r_c1, r_c2


@dataclass(frozen=True)
class SoftFrame:
    r_b1: np.ndarray  # L_info + tail
    r_c1: np.ndarray  # L_info + tail, NaN where punctured
    r_c2: np.ndarray  # L_info, NaN where punctured
    sigma2: float
    perm: np.ndarray
    inv_perm: np.ndarray = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "inv_perm", np.argsort(self.perm))
        if len(self.r_b1) != len(self.r_c1) or len(self.r_c2) != len(self.perm):
            raise ConfigError("inconsistent soft-frame lengths")

    @property
    def info_length(self) -> int:
        return len(self.perm)

    @property
    def r_b2(self) -> np.ndarray:
        return self.r_b1[: self.info_length][self.perm]

    @classmethod
    def from_symbols(cls, soft_i, soft_q, sigma2, perm, floor: float = 1e-6) -> "SoftFrame":
        K = len(perm)
        r_c1, r_c2 = depuncture(soft_q, K)
        return cls(np.asarray(soft_i, float), r_c1, r_c2, max(float(sigma2), floor), perm)

    def decoder_inputs(self, decoder: int):
        """(r_sys, r_par, terminated) seen by constituent decoder 1 or 2."""
        if decoder == 1:
            return self.r_b1, self.r_c1, True
        if decoder == 2:
            return self.r_b2, self.r_c2, False
        raise ValueError("decoder must be 1 or 2")


@dataclass
class Posteriors:
    F1: np.ndarray  # (L, 2) extrinsic of decoder 1, columns (+1, -1)
    F2: np.ndarray  # (L, 2) extrinsic of decoder 2 after deinterleaving
    app: np.ndarray  # (L, 2) P(S_b1,k = +-1 | r1)


@dataclass
class TurboResult:
    bits: np.ndarray
    posteriors: Posteriors
    history: list = field(default_factory=list)  # hard bits after each iteration


def branch_likelihoods(r: np.ndarray, sigma2: float) -> np.ndarray:
    """(L, 2) likelihoods for symbols (+1, -1), each row scaled so its max is 1."""
    r = np.asarray(r, dtype=float)
    g = np.ones((len(r), 2))
    ok = ~np.isnan(r)
    ro = r[ok]
    g[ok, 0] = np.exp((ro - np.abs(ro)) / sigma2)
    g[ok, 1] = np.exp((-ro - np.abs(ro)) / sigma2)
    return g


@numba.njit(cache=True)
def _forward(g_sys, g_par, prior, nxt, par, alpha0):
    L = g_sys.shape[0]
    S = nxt.shape[0]
    alpha = np.zeros((L + 1, S))
    alpha[0] = alpha0 / alpha0.sum()
    for i in range(L):
        for n in range(S):
            a = alpha[i, n]
            if a == 0.0:
                continue
            for u in range(2):
                alpha[i + 1, nxt[n, u]] += a * g_sys[i, u] * g_par[i, par[n, u]] * prior[i, u]
        s = alpha[i + 1].sum()
        if not (s > 0.0) or not np.isfinite(s):
            return alpha, i + 1
        alpha[i + 1] /= s
    return alpha, -1


@numba.njit(cache=True)
def _backward(g_sys, g_par, prior, nxt, par, beta_end):
    L = g_sys.shape[0]
    S = nxt.shape[0]
    beta = np.zeros((L + 1, S))
    beta[L] = beta_end / beta_end.sum()
    for i in range(L - 1, -1, -1):
        for n in range(S):
            acc = 0.0
            for u in range(2):
                acc += beta[i + 1, nxt[n, u]] * g_sys[i, u] * g_par[i, par[n, u]] * prior[i, u]
            beta[i, n] = acc
        s = beta[i].sum()
        if not (s > 0.0) or not np.isfinite(s):
            return beta, i
        beta[i] /= s
    return beta, -1


@numba.njit(cache=True)
def _extrinsic(alpha, beta, g_par, nxt, par):
    L = g_par.shape[0]
    S = nxt.shape[0]
    G = np.zeros((L, 2))
    for k in range(L):
        for n in range(S):
            for u in range(2):
                G[k, u] += alpha[k, n] * g_par[k, par[n, u]] * beta[k + 1, nxt[n, u]]
    return G


def _boundary(trellis, kind):
    S = trellis.state_count
    if kind == "uniform":
        return np.ones(S)
    v = np.zeros(S)
    v[0] = 1.0
    return v


def _stage_inputs(frame: SoftFrame, priors, decoder: int):
    r_sys, r_par, terminated = frame.decoder_inputs(decoder)
    L = len(r_sys)
    if frame.sigma2 <= 0:
        raise NumericError("sigma2 must be positive")
    prior = np.full((L, 2), 0.5)
    if priors is not None:
        priors = np.asarray(priors, dtype=float)
        prior[: len(priors)] = priors
    return (
        branch_likelihoods(r_sys, frame.sigma2),
        branch_likelihoods(r_par, frame.sigma2),
        prior,
        terminated,
    )


def bcjr_forward(frame: SoftFrame, priors=None, decoder: int = 1, start: str = "uniform"):
    """Normalized forward sums alpha[i, n], i = 0..L.

    ``start="uniform"`` sets alpha_0 = 1 for every state; ``"zero"`` pins the
    known all-zero start state.
    """
    tr = make_trellis()
    g_sys, g_par, prior, _ = _stage_inputs(frame, priors, decoder)
    alpha, bad = _forward(g_sys, g_par, prior, tr.next_state, tr.parity, _boundary(tr, start))
    if bad >= 0:
        raise NumericError(
            f"forward recursion vanished at stage {bad}; raise the sigma2 floor"
        )
    return alpha


def bcjr_backward(frame: SoftFrame, priors=None, decoder: int = 1, end: str | None = None):
    """Normalized backward sums beta[i, n]; beta_L is uniform unless terminated."""
    tr = make_trellis()
    g_sys, g_par, prior, terminated = _stage_inputs(frame, priors, decoder)
    if end is None:
        end = "zero" if terminated else "uniform"
    beta, bad = _backward(g_sys, g_par, prior, tr.next_state, tr.parity, _boundary(tr, end))
    if bad >= 0:
        raise NumericError(
            f"backward recursion vanished at stage {bad}; raise the sigma2 floor"
        )
    return beta


def bcjr_extrinsic(alpha, beta, frame: SoftFrame, decoder: int = 1) -> np.ndarray:
    """F_k(+-) from parity likelihoods only, normalized per bit; shape (L, 2)."""
    tr = make_trellis()
    _, r_par, _ = frame.decoder_inputs(decoder)
    g_par = branch_likelihoods(r_par, frame.sigma2)
    G = _extrinsic(alpha, beta, g_par, tr.next_state, tr.parity)
    tot = G.sum(axis=1)
    if np.any(~(tot > 0)) or not np.all(np.isfinite(tot)):
        raise NumericError("extrinsic terms vanished for some bit")
    return G / tot[:, None]


def _siso(frame, priors, decoder, start):
    alpha = bcjr_forward(frame, priors, decoder, start)
    beta = bcjr_backward(frame, priors, decoder)
    return bcjr_extrinsic(alpha, beta, frame, decoder)


def turbo_decode(frame: SoftFrame, iterations: int = 8, start: str = "zero") -> TurboResult:
    """Iterative decoding; decisions come from decoder 1's APP each iteration.

    Iteration 1 is a single MAP pass of decoder 1 with uniform priors; each later
    iteration first runs decoder 2 on the interleaved extrinsics.
    """
    if iterations < 1:
        raise ConfigError("iterations must be >= 1")
    K = frame.info_length
    L1 = len(frame.r_b1)
    F2 = np.full((L1, 2), 0.5)
    F1 = None
    g_sys = branch_likelihoods(frame.r_b1, frame.sigma2)
    history = []
    for it in range(iterations):
        if it:
            ext2 = _siso(frame, F1[:K][frame.perm], 2, start)
            F2 = np.full((L1, 2), 0.5)
            F2[:K][frame.perm] = ext2
        F1 = _siso(frame, F2, 1, start)
        app = F1 * F2 * g_sys
        tot = app.sum(axis=1)
        if np.any(~(tot > 0)):
            raise NumericError("a-posteriori probabilities vanished")
        app = app / tot[:, None]
        history.append((app[:K, 1] > app[:K, 0]).astype(np.int8))
    return TurboResult(history[-1], Posteriors(F1, F2, app), history)
