#!/usr/bin/env python3
"""Equalizer-aging study: BER versus the lag between channel state used for
equalization and the state the frame actually propagated through.

Lags cover the ideal case (0), each tap's minimum quasi-invariant interval,
and the model's quasi-stationary interval, so the output shows how quickly
coefficient aging dominates once the lag leaves the millisecond range.
"""

import argparse
from pathlib import Path

from ddlab.channel_model import GridSpec, load_tddl_preset
from ddlab.io_formats import write_ber_csv
from ddlab.otfs_link import binomial_confidence, run_mismatch_experiment


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--model", default="TDDL-A")
    ap.add_argument("--snr-db", type=float, nargs="+", default=[10.0, 14.0])
    ap.add_argument("--frames", type=int, default=200)
    ap.add_argument("--grid", default="32x16")
    ap.add_argument("--delta-f-hz", type=float, default=15e3)
    ap.add_argument("--seed", type=int, default=20240)
    ap.add_argument("--out", default="invariance_ber.csv")
    args = ap.parse_args()

    model = load_tddl_preset(args.model)
    m, n = (int(v) for v in args.grid.lower().split("x"))
    grid = GridSpec(m, n, args.delta_f_hz)

    lags = sorted({0.0, model.t_qs_ms, *(t.t_qi_min_ms for t in model.taps)})
    print(f"{model.name}: lags {lags} ms, SNR {args.snr_db} dB, {args.frames} frames/point")
    results = run_mismatch_experiment(model, lags, args.snr_db, args.frames, grid, args.seed)

    rows = []
    for lag, points in results:
        for pt in points:
            lo, hi = binomial_confidence(pt.bit_errors, pt.bits)
            print(f"  lag {lag:8.2f} ms  snr {pt.snr_db:5.1f} dB  "
                  f"ber {pt.ber:.3e}  [{lo:.3e}, {hi:.3e}]")
            rows.append((model.name, lag, pt))
    write_ber_csv(Path(args.out), rows)
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
