"""BER/FER waterfall for both preamble lengths, with the genie-synchronized baseline.

    python3 scripts/ber_sweep.py --frames 200 --snr 1.0,1.5,2.0,2.5,3.0 --workers 1
"""
import argparse
from pathlib import Path

from oqpsk_burst.config import paper_config
from oqpsk_burst.harness import ExperimentSpec, ber_sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--frames", type=int, default=200)
    ap.add_argument("--snr", default="1.0,1.5,2.0,2.5,3.0")
    ap.add_argument("--lp", default="250,500")
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--outdir", type=Path, default=Path("results"))
    args = ap.parse_args()
    snr = [float(v) for v in args.snr.split(",")]
    for lp in (int(v) for v in args.lp.split(",")):
        out = args.outdir / f"ber_lp{lp}.csv"
        spec = ExperimentSpec("ber_sweep", snr, args.frames, out=out, workers=args.workers)
        for row in ber_sweep(spec, paper_config(lp)):
            print(f"Lp={lp} Eb/N0={row.snr_db:4.1f} dB  BER={row.ber:.3e}  FER={row.fer:.3f}  "
                  f"genie BER={row.genie_ber:.3e}  failures={row.failures}  ({row.runtime:.0f} s)")
        print(f"wrote {out}")


if __name__ == "__main__":
    main()
