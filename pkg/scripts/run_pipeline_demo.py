#!/usr/bin/env python3
"""Small end-to-end demo: generate -> estimate -> analyze -> report.

Synthesizes a short TDDL-C segment, recovers the multipath parameters from
the pilot grids, and writes stationarity/invariance/fit reports under the
chosen directory.  Mirrors what the CLI does, at a size that runs in
seconds.
"""

import argparse
import sys

from ddlab.cli import main as ddlab_main


def run(argv: list[str]) -> None:
    code = ddlab_main(argv)
    if code != 0:
        sys.exit(code)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="demo_out")
    ap.add_argument("--model", default="TDDL-C")
    ap.add_argument("--duration-ms", type=float, default=20.0)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()

    base = args.out.rstrip("/")
    run(["generate", "--model", args.model, "--duration-ms", str(args.duration_ms),
         "--grid", "64x32", "--delta-f-hz", "60000", "--df", "2", "--dt", "2",
         "--seed", str(args.seed), "--out", f"{base}/gen", "--force"])
    run(["estimate", "--in", f"{base}/gen", "--out", f"{base}/est", "--force"])
    run(["analyze", "--in", f"{base}/est", "--out", f"{base}/ana", "--force"])
    run(["report", "--in", f"{base}/ana", "--model", args.model,
         "--out", f"{base}/report.md", "--force"])
    print(f"demo complete; see {base}/report.md")


if __name__ == "__main__":
    main()
