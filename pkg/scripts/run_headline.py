#!/usr/bin/env python3
"""Run the three headline convergence studies and print their summaries.

Equivalent to `qsdlab w2-curve --config configs/<name>.toml` for the
ground-state, Dirac, and unsubordinated configurations; results land under
out/.
"""

import os
import sys

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
sys.path.insert(0, os.path.join(ROOT, "src"))

from qsdlab.cli import main  # noqa: E402

CONFIGS = ["headline.toml", "headline_dirac.toml", "headline_linear.toml"]

if __name__ == "__main__":
    rc = 0
    for name in CONFIGS:
        print(f"=== {name} ===")
        rc |= main(["w2-curve", "--config",
                    os.path.join(ROOT, "configs", name)])
    sys.exit(rc)
