"""Bernstein functions (subordinator Laplace exponents) and their spectral
exponents B(lambda_m) - B(lambda_0).

Three parametric kinds are supported: a linear exponent (which recovers the
unsubordinated process), a drifted stable exponent b*l + c*l^alpha, and a
drifted compound-Poisson exponent b*l + r*l/(l + theta) with Exp(theta)
jumps.  Class membership in the liminf sense is checked on a finite probe
grid only; the report records the grid that was used.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConfigurationError
from .spectral import SpectralBasis


@dataclass(frozen=True)
class BernsteinFunction:
    kind: str                    # "linear" | "stable-drift" | "compound-poisson-drift"
    params: tuple[float, ...]
    alpha_class: float           # declared alpha in (0, 1]

    def __call__(self, lam):
        lam = np.asarray(lam, dtype=float)
        if np.any(lam < 0):
            raise ValueError("Laplace exponent only defined for lambda >= 0")
        if self.kind == "linear":
            (c,) = self.params
            out = c * lam
        elif self.kind == "stable-drift":
            b, c, alpha = self.params
            out = b * lam + c * np.power(lam, alpha)
        elif self.kind == "compound-poisson-drift":
            b, rate, theta = self.params
            out = b * lam + rate * lam / (lam + theta)
        else:
            raise ConfigurationError(f"unknown Bernstein kind {self.kind!r}")
        return float(out) if np.isscalar(lam) or lam.ndim == 0 else out

    def describe(self) -> str:
        ps = " ".join(f"{p:g}" for p in self.params)
        return f"{self.kind}({ps})"


def linear(c: float = 1.0) -> BernsteinFunction:
    if not c > 0:
        raise ConfigurationError("linear exponent needs slope c > 0")
    return BernsteinFunction("linear", (float(c),), 1.0)


def stable_drift(b: float, c: float, alpha: float) -> BernsteinFunction:
    """b*l + c*l^alpha.  b = 0 with alpha < 1 is the pure stable exponent,
    admissible here even though B'(0+) = infinity."""
    if not (0.0 < alpha <= 1.0):
        raise ConfigurationError("stable exponent needs alpha in (0, 1]")
    if b < 0 or not c > 0:
        raise ConfigurationError("need drift b >= 0 and coefficient c > 0")
    alpha_class = 1.0 if b > 0 or alpha == 1.0 else float(alpha)
    return BernsteinFunction("stable-drift", (float(b), float(c), float(alpha)),
                             alpha_class)


def compound_poisson_drift(b: float, rate: float, theta: float) -> BernsteinFunction:
    if not b > 0:
        raise ConfigurationError("compound-Poisson kind needs drift b > 0")
    if not (rate > 0 and theta > 0):
        raise ConfigurationError("need jump rate > 0 and theta > 0")
    return BernsteinFunction(
        "compound-poisson-drift", (float(b), float(rate), float(theta)), 1.0)


@dataclass(frozen=True)
class SpectralExponents:
    """Nonnegative differences D_m = B(lambda_m) - B(lambda_0), plus the
    removed B(lambda_0) for reconstructing raw survival in log space."""

    d: np.ndarray
    b_lambda0: float


def exponents(bern: BernsteinFunction, basis: SpectralBasis) -> SpectralExponents:
    vals = bern(basis.lambdas)
    return SpectralExponents(vals - vals[0], float(vals[0]))


def default_probe_grid(lo: float = 1e2, hi: float = 1e8, n: int = 200) -> np.ndarray:
    return np.geomspace(lo, hi, n)


@dataclass(frozen=True)
class ClassAlphaReport:
    passed: bool
    inf_value: float           # min of lam^-alpha B(lam) on the probe grid
    tail_slope: float          # log-log slope of lam^-alpha B(lam) at the tail
    envelope_a: float          # B(r) >= a r^alpha - b on the grid
    envelope_b: float
    grid: np.ndarray


def check_class_alpha(bern: BernsteinFunction, alpha: float,
                      grid: Optional[np.ndarray] = None) -> ClassAlphaReport:
    """Finite-grid surrogate for liminf lam^-alpha B(lam) > 0.

    A positive grid infimum alone cannot distinguish a positive liminf from
    slow decay to zero, so the check also requires the tail of
    lam^-alpha B(lam) to have stopped decreasing (log-log slope above
    -0.02).  The envelope (a, b) is fit by halving the tail infimum and
    absorbing any early-grid violation into b.
    """
    if grid is None:
        grid = default_probe_grid()
    grid = np.asarray(grid, dtype=float)
    if grid.size < 50:
        raise ConfigurationError("class check needs >= 50 probe points")
    vals = bern(grid)
    scaled = vals / np.power(grid, alpha)
    inf_value = float(scaled.min())
    cut = (3 * grid.size) // 4
    slope = float(np.polyfit(np.log(grid[cut:]), np.log(scaled[cut:]), 1)[0])
    tail = scaled[grid.size // 2:]
    a = 0.5 * float(tail.min())
    b = max(0.0, float(np.max(a * np.power(grid, alpha) - vals)))
    passed = inf_value > 1e-12 and slope >= -0.02
    return ClassAlphaReport(passed, inf_value, slope, a, b, grid)


def largest_class_alpha(bern: BernsteinFunction,
                        candidates: Optional[np.ndarray] = None) -> float:
    """Largest alpha from a fixed candidate list whose class check passes."""
    if candidates is None:
        candidates = np.round(np.arange(0.1, 1.01, 0.1), 10)
    best = 0.0
    for a in candidates:
        if check_class_alpha(bern, float(a)).passed:
            best = float(a)
    return best


@dataclass(frozen=True)
class RatioLimitReport:
    deviations: np.ndarray     # |B(r - l0) / (B(r) - B(l0)) - 1| along the grid
    final_deviation: float


def ratio_limit_check(bern: BernsteinFunction, lambda0: float,
                      grid: Optional[np.ndarray] = None) -> RatioLimitReport:
    """How fast B(r - lambda_0) / (B(r) - B(lambda_0)) settles to 1."""
    if grid is None:
        grid = np.geomspace(max(10.0 * lambda0, 1.0), 1e8, 60)
    grid = np.asarray(grid, dtype=float)
    if grid.min() <= 10.0 * lambda0 * (1 - 1e-12):
        raise ConfigurationError("probe tail must start above 10 * lambda0")
    b0 = bern(lambda0)
    dev = np.abs(bern(grid - lambda0) / (bern(grid) - b0) - 1.0)
    return RatioLimitReport(dev, float(dev[-1]))
