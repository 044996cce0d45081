"""Turbo codec alone over an ideal channel: BER after each decoder iteration.

    python3 scripts/codec_iterations.py --frames 50 --snr 0.5,1.0,1.5
"""
import argparse
from pathlib import Path

from oqpsk_burst.config import ModemConfig
from oqpsk_burst.harness import ExperimentSpec, codec_test


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--frames", type=int, default=50)
    ap.add_argument("--snr", default="0.5,1.0,1.5")
    ap.add_argument("--iterations", type=int, default=8)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", type=Path, default=Path("results/codec.csv"))
    args = ap.parse_args()
    snr = [float(v) for v in args.snr.split(",")]
    spec = ExperimentSpec("codec_test", snr, args.frames, out=args.out, workers=args.workers)
    for r in codec_test(spec, ModemConfig(turbo_iterations=args.iterations)):
        print(f"Eb/N0={r['ebno_db']:4.1f} dB  iteration {r['iteration']}  BER={r['ber']:.3e}")
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
