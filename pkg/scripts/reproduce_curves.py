#!/usr/bin/env python3
"""Regenerate every rate and Mermin curve from the bundled configs.

Writes CSVs (plus JSON manifests) under out/ and prints the cutoff distances.
Use --quick for a coarse pass (~5 km steps), --workers N to parallelize sweep
points.
"""

import argparse
import sys
import time
from pathlib import Path

from mdighz.cli import main as mdighz_main

RUNS = [
    ("qcc", "qcc_eta40"),
    ("qcc", "qcc_eta93"),
    ("qss", "qss_pps_eta40"),
    ("qss", "qss_pps_eta93"),
    ("qss", "qss_heralded_eta40"),
    ("qss", "qss_heralded_eta93"),
    ("qss", "qss_qnd_eta40"),
    ("qss", "qss_qnd_eta93"),
    ("mermin", "mermin_eta40"),
    ("mermin", "mermin_eta93"),
]


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--outdir", default="out")
    parser.add_argument("--quick", action="store_true")
    parser.add_argument("--workers", type=int, default=1)
    args = parser.parse_args()

    root = Path(__file__).resolve().parent.parent
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    for command, name in RUNS:
        cfg = root / "configs" / f"{name}.cfg"
        out = outdir / f"{name}.csv"
        argv = [command, "--config", str(cfg), "--out", str(out),
                "--workers", str(args.workers)]
        if args.quick:
            argv.append("--quick")
        start = time.monotonic()
        code = mdighz_main(argv)
        if code != 0:
            print(f"{name}: FAILED with exit code {code}", file=sys.stderr)
            return code
        print(f"  ... {time.monotonic() - start:.1f} s")
    return 0


if __name__ == "__main__":
    sys.exit(main())
