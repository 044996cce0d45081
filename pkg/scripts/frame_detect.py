"""Peak-to-average ratio of the differential correlator, and a calibrated detection threshold.

    python3 scripts/frame_detect.py --frames 1000 --snr 1.0
"""
import argparse
from pathlib import Path

from oqpsk_burst.config import paper_config
from oqpsk_burst.harness import ExperimentSpec, calibrate_threshold, frame_detect_stats


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--frames", type=int, default=1000)
    ap.add_argument("--snr", default="1.0")
    ap.add_argument("--calibration-frames", type=int, default=200)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--outdir", type=Path, default=Path("results"))
    args = ap.parse_args()
    snr = [float(v) for v in args.snr.split(",")]
    for lp in (250, 500):
        cfg = paper_config(lp)
        thr = calibrate_threshold(cfg.with_ebno(min(snr)), args.calibration_frames, workers=args.workers)
        out = args.outdir / f"detect_lp{lp}.csv"
        spec = ExperimentSpec("frame_detect", snr, args.frames, out=out, workers=args.workers)
        for r in frame_detect_stats(spec, cfg, thr):
            print(f"Lp={lp} Eb/N0={r['snr_db']} dB  R_avg={r['R_avg']:.1f}  R_min={r['R_min']:.1f}  "
                  f"threshold={thr:.1f}  detected={r['detect_rate']:.4f}")
        print(f"wrote {out}")


if __name__ == "__main__":
    main()
