"""Acquisition error tables: timing and frequency per pass, amplitude and noise-variance RMS.

Timing rows are run with delta = 0 and alpha = 0 so the true start lies on the output grid.

    python3 scripts/estimator_tables.py --frames 10000 --snr 1.0
"""
import argparse
from pathlib import Path

from oqpsk_burst.config import paper_config
from oqpsk_burst.harness import ESTIMATOR_COLUMNS, ExperimentSpec, estimator_stats


def fmt(v):
    return f"{v:.4g}" if isinstance(v, float) else str(v)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--frames", type=int, default=1000)
    ap.add_argument("--snr", default="1.0")
    ap.add_argument("--lp", default="250,500")
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--outdir", type=Path, default=Path("results"))
    args = ap.parse_args()
    snr = [float(v) for v in args.snr.split(",")]
    for lp in (int(v) for v in args.lp.split(",")):
        out = args.outdir / f"estimators_lp{lp}.csv"
        rows = estimator_stats(ExperimentSpec("estimator_stats", snr, args.frames, out=out, workers=args.workers),
                               paper_config(lp))
        print("  ".join(f"{c:>14}" for c in ESTIMATOR_COLUMNS))
        for r in rows:
            print("  ".join(f"{fmt(r.get(c, '')):>14}" for c in ESTIMATOR_COLUMNS))
        print(f"wrote {out}")


if __name__ == "__main__":
    main()
