"""Monte Carlo experiments: full-chain frames, BER sweeps, estimator statistics.

This is the only module that looks at the transmitter's ground truth.
"""
from __future__ import annotations

import csv
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .acq import SyncReport, acquire
from .config import ModemConfig
from .errors import ConfigError, ModemError
from .pulses import BetaSequence, make_beta, make_pulses
from .rng import substream
from .rxfront import front_end
from .track import DetectedFrame, run_tracking, wrap_phase
from .turbo import SoftFrame, puncture, turbo_decode, turbo_encode
from .tx import Burst, PassbandFrame, TxTruth, assemble_burst, dump_frame, interleaver_for, transmit

SCHEMA = "# schema=1"
KINDS = ("ber_sweep", "estimator_stats", "frame_detect", "codec_test")


@dataclass
class ExperimentSpec:
    kind: str
    snr_db: list
    frames: int
    overrides: dict = field(default_factory=dict)
    out: Path | None = None
    workers: int = 1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}")
        if self.frames < 1:
            raise ConfigError("frame count must be >= 1")
        if len(self.snr_db) == 0:
            raise ConfigError("snr list is empty")


@dataclass
class MetricsRow:
    lp: int
    snr_db: float
    frames: int
    ber: float = math.nan
    fer: float = math.nan
    bit_errors: int = 0
    bits: int = 0
    failures: int = 0
    genie_ber: float = math.nan
    timing_var_norm: float = math.nan
    timing_max: float = math.nan
    freq_rms: float = math.nan
    freq_max: float = math.nan
    amp_rms: float = math.nan
    noisevar_rms_norm: float = math.nan
    R_avg: float = math.nan
    R_min: float = math.nan
    runtime: float = 0.0


# --- single frames -----------------------------------------------------------------


@dataclass
class FrameSetup:
    burst: Burst
    frame: PassbandFrame
    truth: TxTruth


def draw_frame(cfg: ModemConfig, index: int, perm=None) -> FrameSetup:
    """Payload, timing phase, carrier phase, guard and noise for frame ``index``."""
    bits = substream(cfg.seed, index, "data").integers(0, 2, cfg.info_bits)
    alpha = cfg.alpha if cfg.alpha is not None else substream(cfg.seed, index, "alpha").uniform(0, 1)
    theta0 = (
        cfg.theta0 if cfg.theta0 is not None else substream(cfg.seed, index, "theta").uniform(0, 2 * np.pi)
    )
    guard = int(substream(cfg.seed, index, "guard").integers(0, cfg.guard_max + 1))
    burst = assemble_burst(bits, cfg, perm)
    frame, truth = transmit(
        burst, cfg, alpha=alpha, theta0=theta0, guard=guard, noise_rng=substream(cfg.seed, index, "noise")
    )
    return FrameSetup(burst, frame, truth)


def phase_reference(truth: TxTruth, cfg: ModemConfig, omega_hat: float) -> float:
    """Phase the correlator should report given the residual offset left by ``omega_hat``.

    A residual w_r rotates symbol k by w_r times the passband sample index of its
    pulse centre; the correlator sees the average of these over the reference span.
    """
    beta_count = cfg.Lp - cfg.L_isi + 1
    centres = (truth.t0 + cfg.MI * np.arange(beta_count) - make_pulses(cfg).mf_delay) / cfg.I
    return wrap_phase(truth.theta0 + (truth.omega3 - omega_hat) * float(centres.mean()))


@dataclass
class FrameOutcome:
    index: int
    truth: TxTruth
    report: SyncReport | None
    detected: DetectedFrame | None
    bit_errors: int
    frame_error: bool
    failure: str | None = None
    genie_bit_errors: int | None = None


def _decode(soft_i, soft_q, sigma2, perm, cfg: ModemConfig):
    frame = SoftFrame.from_symbols(soft_i, soft_q, sigma2, perm, cfg.sigma2_floor)
    return turbo_decode(frame, cfg.turbo_iterations).bits


def genie_receive(setup: FrameSetup, cfg: ModemConfig, perm) -> np.ndarray:
    """Decode with the true offset, phase, sampling instants and noise variance."""
    truth = setup.truth
    x = front_end(setup.frame.samples, make_pulses(cfg), truth.omega3)
    k = cfg.Lp + np.arange(cfg.Ld)
    idx_i = np.rint(truth.symbol_index(k, cfg)).astype(np.int64)
    idx_q = np.rint(truth.symbol_index(k + 0.5, cfg)).astype(np.int64)
    rot = np.exp(-1j * truth.theta0)
    soft_i = (x[idx_i] * rot).real
    soft_q = (x[idx_q] * rot).imag
    return _decode(soft_i, soft_q, max(cfg.N0, cfg.sigma2_floor), perm, cfg)


def receive(samples, cfg: ModemConfig, beta: BetaSequence | None = None):
    """Synchronizing receiver on stored samples; returns (report, detected frame, bits)."""
    pulses = make_pulses(cfg)
    beta = beta or make_beta(cfg, pulses)
    report, x3 = acquire(samples, cfg, pulses, beta)
    detected = run_tracking(x3, report, beta, cfg)
    bits = _decode(detected.soft_i, detected.soft_q, detected.sigma2, interleaver_for(cfg), cfg)
    return report, detected, bits


def run_frame(cfg: ModemConfig, index: int, genie: bool = False, dump_dir=None) -> FrameOutcome:
    """Full chain for one frame. Receiver failures count as frame errors, never raise."""
    perm = interleaver_for(cfg)
    setup = draw_frame(cfg, index, perm)
    if dump_dir is not None:
        dump_frame(setup.frame, dump_dir, index)
    payload = setup.burst.info_bits
    report = detected = None
    failure = None
    try:
        report, detected, bits = receive(setup.frame.samples, cfg)
        errors = int(np.count_nonzero(bits != payload))
    except (ModemError, FloatingPointError) as exc:
        failure = f"{type(exc).__name__}: {exc}"
        errors = len(payload) // 2
    genie_errors = None
    if genie:
        try:
            genie_errors = int(np.count_nonzero(genie_receive(setup, cfg, perm) != payload))
        except ModemError:
            genie_errors = len(payload) // 2
    return FrameOutcome(
        index, setup.truth, report, detected, errors, errors > 0 or failure is not None, failure, genie_errors
    )


# --- parallel map ------------------------------------------------------------------


def _pmap(fn, args, workers: int):
    """Ordered map; results never depend on the worker count."""
    args = list(args)
    if workers <= 1 or len(args) <= 1:
        return [fn(*a) for a in args]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_star, [(fn, a) for a in args], chunksize=max(1, len(args) // (4 * workers))))


def _star(packed):
    fn, a = packed
    return fn(*a)


def _config_for(spec: ExperimentSpec, base: ModemConfig | None) -> ModemConfig:
    base = base or ModemConfig()
    return base.replace(**spec.overrides) if spec.overrides else base


# --- BER sweep ---------------------------------------------------------------------


def _ber_frame(cfg: ModemConfig, index: int, genie: bool, dump_dir=None):
    o = run_frame(cfg, index, genie=genie, dump_dir=dump_dir)
    return o.bit_errors, o.frame_error, o.failure is not None, o.genie_bit_errors


def ber_sweep(
    spec: ExperimentSpec, base: ModemConfig | None = None, genie: bool = True, dump_dir=None
) -> list[MetricsRow]:
    """BER and FER per SNR. The same frame indices (payload, offsets) are reused at every SNR."""
    cfg0 = _config_for(spec, base)
    rows = []
    for snr in spec.snr_db:
        cfg = cfg0.with_ebno(snr)
        t = time.perf_counter()
        res = _pmap(_ber_frame, [(cfg, i, genie, dump_dir) for i in range(spec.frames)], spec.workers)
        bits = spec.frames * cfg.info_bits
        errs = sum(r[0] for r in res)
        row = MetricsRow(cfg.Lp, snr, spec.frames, bits=bits, bit_errors=errs)
        row.ber = errs / bits
        row.fer = sum(r[1] for r in res) / spec.frames
        row.failures = sum(r[2] for r in res)
        if genie:
            row.genie_ber = sum(r[3] for r in res) / bits
        row.runtime = time.perf_counter() - t
        rows.append(row)
    if spec.out:
        write_ber_csv(rows, spec.out)
    return rows


def write_ber_csv(rows, path) -> Path:
    cols = ["lp", "snr_db", "ber", "fer", "bit_errors", "bits", "failures", "genie_ber", "frames", "runtime_s"]
    vals = [
        [r.lp, r.snr_db, r.ber, r.fer, r.bit_errors, r.bits, r.failures, r.genie_ber, r.frames, f"{r.runtime:.3f}"]
        for r in rows
    ]
    return _write_csv(path, cols, vals)


def _write_csv(path, cols, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(SCHEMA + "\n")
        w = csv.writer(fh)
        w.writerow(cols)
        w.writerows(rows)
    return path


# --- estimator statistics ----------------------------------------------------------


@dataclass
class AcqSample:
    """Per-frame acquisition estimates next to the truth they should match."""

    t0: float
    n: tuple  # n1, n2, n3
    omega3: float
    omega: tuple  # total offset estimates after passes a, b, c, d
    theta_err: float  # against the residual-corrected reference
    A_hat: float
    sigma2_hat: float
    R_i: float
    boundary: bool
    failed: bool = False


def acquisition_sample(cfg: ModemConfig, index: int) -> AcqSample:
    setup = draw_frame(cfg, index)
    pulses = make_pulses(cfg)
    beta = make_beta(cfg, pulses)
    truth = setup.truth
    try:
        rep, _ = acquire(setup.frame.samples, cfg, pulses, beta)
    except ModemError:
        nan = math.nan
        return AcqSample(truth.t0, (nan,) * 3, truth.omega3, (nan,) * 4, nan, nan, nan, nan, True, True)
    w3 = rep.omega3_hat
    omegas = (w3, w3 + rep.omega2_hat, w3 + rep.omega_ml1, rep.omega_total)
    ref = phase_reference(truth, cfg, rep.omega_total)
    theta_err = math.remainder(rep.theta0_hat - ref, 2 * math.pi)
    boundary = bool(rep.diagnostics.get("step1_on_boundary") or rep.diagnostics.get("step2_on_boundary"))
    return AcqSample(
        truth.t0, (rep.n1, rep.n2, rep.n3), truth.omega3, omegas, theta_err,
        rep.A_hat, rep.sigma2_hat, rep.R_i, boundary,
    )


def collect_acquisition(cfg: ModemConfig, frames: int, workers: int = 1, start: int = 0) -> list[AcqSample]:
    return _pmap(acquisition_sample, [(cfg, i) for i in range(start, start + frames)], workers)


def amplitude_theory_rms(cfg: ModemConfig, beta: BetaSequence | None = None) -> float:
    beta = beta or make_beta(cfg)
    K = beta.count
    return math.sqrt(cfg.N0 / K**2 * float(np.sum(1 / np.abs(beta.beta_i) ** 2)))


def noisevar_theory_rms_norm(cfg: ModemConfig) -> float:
    return math.sqrt(2 * cfg.N0 / (2 * (cfg.Lp - cfg.L_isi + 1)))


def estimator_rows(samples: list[AcqSample], cfg: ModemConfig, snr_db: float) -> list[dict]:
    """Rows for passes a (differential), b (second differential), c (ML step 1), d (ML / correlation).

    A final ``theory`` row carries the closed-form amplitude and noise-variance RMS.
    """
    good = [s for s in samples if not s.failed]
    frames = len(good)
    rows = []
    t0 = np.array([s.t0 for s in good])
    for p, name in enumerate("abcd"):
        row = {"lp": cfg.Lp, "snr_db": snr_db, "pass": name, "frames": frames}
        if name != "c":
            ni = {"a": 0, "b": 1, "d": 2}[name]
            dn = np.array([s.n[ni] for s in good]) - t0
            row["timing_var_norm"] = float(np.mean((dn / cfg.MI) ** 2))
            row["timing_max_samples"] = float(np.max(np.abs(dn)))
        dw = np.array([s.omega3 - s.omega[p] for s in good])
        row["freq_rms_rad"] = float(np.sqrt(np.mean(dw**2)))
        row["freq_max_rad"] = float(np.max(np.abs(dw)))
        if name == "d":
            A = np.array([s.A_hat for s in good])
            s2 = np.array([s.sigma2_hat for s in good])
            row["amp_rms"] = float(np.sqrt(np.mean((A - 1) ** 2)))
            row["noisevar_rms_norm"] = float(np.sqrt(np.mean((s2 - cfg.N0) ** 2) / cfg.N0)) if cfg.N0 > 0 else 0.0
        rows.append(row)
    rows.append(
        {
            "lp": cfg.Lp, "snr_db": snr_db, "pass": "theory", "frames": frames,
            "amp_rms": amplitude_theory_rms(cfg), "noisevar_rms_norm": noisevar_theory_rms_norm(cfg),
        }
    )
    return rows


ESTIMATOR_COLUMNS = [
    "lp", "snr_db", "pass", "timing_var_norm", "timing_max_samples", "freq_rms_rad",
    "freq_max_rad", "amp_rms", "noisevar_rms_norm", "frames",
]


def timing_conditions(cfg: ModemConfig) -> ModemConfig:
    """delta = 0 and alpha = 0, so the true start falls on the MF output grid."""
    return cfg.replace(delta_ppm=0.0, alpha=0.0)


def estimator_stats(
    spec: ExperimentSpec,
    base: ModemConfig | None = None,
    short_ld: int | None = 64,
    force_timing: bool = True,
) -> list[dict]:
    """Acquisition statistics; data length is cut to ``short_ld`` since only the preamble matters.

    Timing errors are only meaningful with ``force_timing`` (delta = 0, alpha = 0).
    """
    cfg0 = _config_for(spec, base)
    if short_ld is not None:
        cfg0 = cfg0.replace(Ld=short_ld)
    if force_timing:
        cfg0 = timing_conditions(cfg0)
    rows = []
    for snr in spec.snr_db:
        cfg = cfg0.with_ebno(snr)
        rows += estimator_rows(collect_acquisition(cfg, spec.frames, spec.workers), cfg, snr)
    if spec.out:
        write_estimator_csv(rows, spec.out)
    return rows


def write_estimator_csv(rows, path) -> Path:
    def cell(r, c):
        v = r.get(c, "")
        return "" if isinstance(v, float) and math.isnan(v) else v

    return _write_csv(path, ESTIMATOR_COLUMNS, [[cell(r, c) for c in ESTIMATOR_COLUMNS] for r in rows])


# --- frame detection ---------------------------------------------------------------


def frame_detect_stats(
    spec: ExperimentSpec, base: ModemConfig | None = None, threshold: float | None = None
) -> list[dict]:
    """R_avg, R_min and detection rate at ``threshold`` (default: the config's)."""
    cfg0 = _config_for(spec, base).replace(Ld=64)
    rows = []
    for snr in spec.snr_db:
        cfg = cfg0.with_ebno(snr)
        thr = cfg.detect_threshold if threshold is None else threshold
        samples = [s for s in collect_acquisition(cfg, spec.frames, spec.workers) if not s.failed]
        R = np.array([s.R_i for s in samples])
        rows.append(
            dict(
                lp=cfg.Lp, snr_db=snr, R_avg=float(R.mean()), R_min=float(R.min()),
                detect_rate=float(np.mean(R > thr)), threshold=thr, frames=len(R),
            )
        )
    if spec.out:
        cols = ["lp", "snr_db", "R_avg", "R_min", "detect_rate", "threshold", "frames"]
        _write_csv(spec.out, cols, [[r[c] for c in cols] for r in rows])
    return rows


def calibrate_threshold(cfg: ModemConfig, frames: int = 200, factor: float = 0.9, workers: int = 1) -> float:
    """factor * R_min over a calibration run (a threshold just below the smallest peak ratio)."""
    R = [s.R_i for s in collect_acquisition(cfg.replace(Ld=64), frames, workers) if not s.failed]
    return factor * min(R)


# --- codec only --------------------------------------------------------------------


def _codec_frame(cfg: ModemConfig, index: int, perm):
    bits = substream(cfg.seed, index, "data").integers(0, 2, cfg.info_bits).astype(np.int8)
    i_bits, q_bits = puncture(turbo_encode(bits, perm, cfg.info_bits))
    rng = substream(cfg.seed, index, "noise")
    sigma = math.sqrt(cfg.N0)
    soft_i = 1 - 2.0 * i_bits + sigma * rng.standard_normal(len(i_bits))
    soft_q = 1 - 2.0 * q_bits + sigma * rng.standard_normal(len(q_bits))
    frame = SoftFrame.from_symbols(soft_i, soft_q, max(cfg.N0, cfg.sigma2_floor), perm, cfg.sigma2_floor)
    res = turbo_decode(frame, cfg.turbo_iterations)
    return [int(np.count_nonzero(h != bits)) for h in res.history]


def codec_test(spec: ExperimentSpec, base: ModemConfig | None = None) -> list[dict]:
    """Turbo codec over an ideal channel; BER after every iteration."""
    cfg0 = _config_for(spec, base)
    perm = interleaver_for(cfg0)
    rows = []
    for snr in spec.snr_db:
        cfg = cfg0.with_ebno(snr)
        res = np.array(_pmap(_codec_frame, [(cfg, i, perm) for i in range(spec.frames)], spec.workers))
        for it in range(res.shape[1]):
            rows.append(
                dict(ebno_db=snr, iteration=it + 1, ber=float(res[:, it].sum() / (spec.frames * cfg.info_bits)),
                     frames=spec.frames)
            )
    if spec.out:
        cols = ["ebno_db", "iteration", "ber", "frames"]
        _write_csv(spec.out, cols, [[r[c] for c in cols] for r in rows])
    return rows


def run_experiment(spec: ExperimentSpec, base: ModemConfig | None = None):
    return {
        "ber_sweep": ber_sweep,
        "estimator_stats": estimator_stats,
        "frame_detect": frame_detect_stats,
        "codec_test": codec_test,
    }[spec.kind](spec, base)
