#!/usr/bin/env python3
"""Print a small table of convergence ratios across Bernstein kinds.

For each Laplace exponent the table shows t^2 W2(mu_t, mu_0)^2 / limit at
the probe times, the fitted residual slope, and the certified series tail.
"""

import math
import os
import sys

import numpy as np

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
sys.path.insert(0, os.path.join(ROOT, "src"))

from qsdlab import bernstein, spectral  # noqa: E402
from qsdlab.conditional import (conditional_coeffs, density_on_grid,  # noqa: E402
                                mu0_measure)
from qsdlab.limits import limit_precise, rate_fit  # noqa: E402
from qsdlab.semigroup import ground_state_initial  # noqa: E402
from qsdlab.transport import w2_quantile_1d  # noqa: E402

TS = np.array([5.0, 10.0, 20.0, 40.0])

BERNSTEINS = [
    ("linear", bernstein.linear(1.0)),
    ("stable a=1/2", bernstein.stable_drift(0.0, 1.0, 0.5)),
    ("stable a=0.3 + drift", bernstein.stable_drift(1.0, 1.0, 0.3)),
    ("compound poisson", bernstein.compound_poisson_drift(1.0, 2.0, 1.5)),
]

if __name__ == "__main__":
    dom = spectral.interval(math.pi)
    basis = spectral.eigensystem_closed_form(
        math.pi, 256, spectral.build_grid(dom, 2001))
    nu = ground_state_initial(basis)
    mu0 = mu0_measure(basis)
    print(f"{'exponent':22s} " + " ".join(f"t={t:<6g}" for t in TS)
          + "  slope   limit        tail")
    for label, bern in BERNSTEINS:
        limit = limit_precise(basis, bern, nu)
        vals = []
        for t in TS:
            cc = conditional_coeffs(basis, bern, nu, t, 128)
            w2 = w2_quantile_1d(density_on_grid(cc), mu0)
            vals.append(t * t * w2 * w2)
        fit = rate_fit(TS, np.array(vals))
        ratios = " ".join(f"{v / limit.value:.4f}  " for v in vals)
        print(f"{label:22s} {ratios} {fit.residual_slope:+.2f}  "
              f"{limit.value:.6e} {limit.tail:.1e}")
