"""Command line: ``python -m oqpsk_burst <command> [options] [--<config key> value ...]``."""
from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

from .config import ModemConfig, load_config, make_config
from .errors import ConfigError, NumericError
from .harness import (
    ExperimentSpec,
    ber_sweep,
    codec_test,
    estimator_stats,
    frame_detect_stats,
    phase_reference,
    run_frame,
)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

KINDS = {
    "ber-sweep": "ber_sweep",
    "estimator-stats": "estimator_stats",
    "frame-detect": "frame_detect",
    "codec-test": "codec_test",
}

COMMANDS = {
    "simulate": "run one frame through the full chain and print a trace",
    "ber-sweep": "BER/FER per Eb/N0, with the genie-synchronized baseline",
    "estimator-stats": "acquisition estimator statistics (delta = 0, alpha = 0)",
    "frame-detect": "peak-to-average ratio R and detection rate",
    "codec-test": "turbo codec alone, BER per iteration",
}


def _snr_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad SNR list {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="oqpsk_burst",
        description="Burst-mode turbo-coded OQPSK modem simulator.",
        epilog="Any ModemConfig field can be overridden with --<field> <value>, e.g. --Lp 250.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in COMMANDS.items():
        p = sub.add_parser(name, help=text, description=text)
        p.add_argument("--config", type=Path, help="key = value config file")
        p.add_argument("--frames", type=int, default=None, help="Monte Carlo frames per SNR")
        p.add_argument("--snr", type=_snr_list, default=None, help="comma-separated Eb/N0 values in dB")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", type=Path, default=None, help="CSV output path")
        p.add_argument("--dump-iq", type=Path, default=None, help="write raw passband frames here")
        p.add_argument("--workers", type=int, default=1)
        if name == "simulate":
            p.add_argument("--frame", type=int, default=0, help="frame index")
        if name == "ber-sweep":
            p.add_argument("--no-genie", action="store_true", help="skip the genie-synchronized baseline")
        if name == "frame-detect":
            p.add_argument("--threshold", type=float, default=None)
    return parser


def parse_overrides(extra: list[str]) -> dict[str, str]:
    """Turn leftover ``--key value`` / ``--key=value`` tokens into config overrides."""
    out, i = {}, 0
    while i < len(extra):
        tok = extra[i]
        if not tok.startswith("--"):
            raise ConfigError(f"unexpected argument {tok!r}")
        key = tok[2:]
        if "=" in key:
            key, value = key.split("=", 1)
            i += 1
        else:
            if i + 1 >= len(extra):
                raise ConfigError(f"missing value for {tok}")
            value = extra[i + 1]
            i += 2
        out[key.replace("-", "_")] = value
    return out


def resolve_config(args, overrides: dict[str, str]) -> ModemConfig:
    if args.seed is not None:
        overrides = {**overrides, "seed": str(args.seed)}
    if args.config is not None:
        if not args.config.exists():
            raise ConfigError(f"config file {args.config} not found")
        return load_config(args.config, **overrides)
    return make_config(**overrides)


def _fmt(v) -> str:
    return f"{v:.6g}" if isinstance(v, float) else str(v)


def cmd_simulate(args, cfg: ModemConfig) -> int:
    if args.snr:
        cfg = cfg.with_ebno(args.snr[0])
    o = run_frame(cfg, args.frame, genie=True, dump_dir=args.dump_iq)
    t = o.truth
    lines = [
        ("frame", args.frame),
        ("N0", cfg.N0),
        ("true_t0", t.t0),
        ("true_omega3", t.omega3),
        ("true_theta0", t.theta0),
        ("alpha", t.alpha),
        ("tx_drift_events", t.drift_events),
    ]
    if o.report is not None:
        r = o.report
        lines += [
            ("n1", r.n1), ("n2", r.n2), ("n3", r.n3),
            ("omega3_hat", r.omega3_hat), ("omegaf_hat", r.omegaf_hat),
            ("freq_error", t.omega3 - r.omega_total),
            ("theta0_hat", r.theta0_hat),
            ("theta0_error", math.remainder(r.theta0_hat - phase_reference(t, cfg, r.omega_total), 2 * math.pi)),
            ("A_hat", r.A_hat), ("sigma2_hat", r.sigma2_hat), ("R_i", r.R_i),
        ]
    if o.detected is not None:
        lines += [("net_timing_shift", o.detected.net_shift)]
        if args.out:
            o.detected.write_trace(args.out)
    lines += [
        ("bit_errors", o.bit_errors),
        ("genie_bit_errors", o.genie_bit_errors),
        ("failure", o.failure or "none"),
    ]
    for k, v in lines:
        print(f"{k} = {_fmt(v)}")
    return EXIT_OK


def _print_rows(rows, cols):
    print(",".join(cols))
    for r in rows:
        print(",".join(_fmt(r.get(c, "")) for c in cols))


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)
    try:
        cfg = resolve_config(args, parse_overrides(extra))
        if args.workers < 1:
            raise ConfigError("--workers must be >= 1")
        if args.command == "simulate":
            return cmd_simulate(args, cfg)
        frames = 100 if args.frames is None else args.frames
        snr = args.snr or [1.0]
        spec = ExperimentSpec(KINDS[args.command], snr, frames, out=args.out, workers=args.workers)
        if args.dump_iq is not None and args.command != "ber-sweep":
            print("note: --dump-iq is only used by simulate and ber-sweep", file=sys.stderr)
        if args.command == "ber-sweep":
            rows = ber_sweep(spec, cfg, genie=not args.no_genie, dump_dir=args.dump_iq)
            _print_rows([vars(r) for r in rows], ["lp", "snr_db", "ber", "fer", "bit_errors", "bits",
                                                  "failures", "genie_ber", "frames", "runtime"])
        elif args.command == "estimator-stats":
            rows = estimator_stats(spec, cfg)
            _print_rows(rows, ["lp", "snr_db", "pass", "timing_var_norm", "timing_max_samples",
                               "freq_rms_rad", "freq_max_rad", "amp_rms", "noisevar_rms_norm", "frames"])
        elif args.command == "frame-detect":
            rows = frame_detect_stats(spec, cfg, args.threshold)
            _print_rows(rows, ["lp", "snr_db", "R_avg", "R_min", "detect_rate", "threshold", "frames"])
        elif args.command == "codec-test":
            rows = codec_test(spec, cfg)
            _print_rows(rows, ["ebno_db", "iteration", "ber", "frames"])
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericError, FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
