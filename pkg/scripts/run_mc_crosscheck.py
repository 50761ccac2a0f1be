#!/usr/bin/env python3
"""Monte Carlo cross-validation of the spectral conditional density.

Runs the rejection estimator at the reference configuration (2e5 paths,
drifted 1/2-stable subordinator, interior point start) and prints the TV
distance to the spectral density plus survival statistics.  About one to
two minutes single-threaded; pass --threads to parallelize blocks.
"""

import argparse
import os
import sys

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
sys.path.insert(0, os.path.join(ROOT, "src"))

from qsdlab.cli import main  # noqa: E402

if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--seed", type=int, default=None)
    args = ap.parse_args()
    argv = ["simulate", "--config",
            os.path.join(ROOT, "configs", "mc_crosscheck.toml"),
            "--threads", str(args.threads)]
    if args.seed is not None:
        argv += ["--seed", str(args.seed)]
    sys.exit(main(argv))
