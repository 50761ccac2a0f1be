"""Dirichlet, subordinated, and ground-state semigroups as truncated
spectral series.

All series are assembled with the exp(-B(lambda_0) t) factor removed
analytically: only the nonnegative differences D_m = B(lambda_m) -
B(lambda_0) (resp. lambda_m - lambda_0) appear in exponents, so nothing
underflows at large t.  Raw survival probabilities are reconstructed in log
space on demand.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .bernstein import BernsteinFunction, exponents
from .errors import ConfigurationError, SurvivalError
from .spectral import SpectralBasis, project_density, project_dirac


# ---------------------------------------------------------------------------
# initial distributions and the ground-state measure


@dataclass(frozen=True)
class InitialDistribution:
    """Initial law nu: either a density h w.r.t. mu or an interior Dirac.

    ``coeffs`` caches nu(phi_m) for every retained mode; constructors reject
    laws with nu(phi_0) <= 0 (no interior mass).
    """

    kind: str                       # "density" | "dirac"
    coeffs: np.ndarray              # (K,)
    h: Optional[np.ndarray] = None  # density values on the grid
    x0: Optional[float] = None

    def __post_init__(self):
        if not self.coeffs[0] > 0.0:
            raise ConfigurationError("initial law must satisfy nu(phi_0) > 0")


def density_initial(basis: SpectralBasis, h: np.ndarray) -> InitialDistribution:
    h = np.asarray(h, dtype=float)
    return InitialDistribution("density", project_density(basis, h), h=h)


def dirac_initial(basis: SpectralBasis, x0: float) -> InitialDistribution:
    return InitialDistribution("dirac", project_dirac(basis, x0), x0=float(x0))


def mu_initial(basis: SpectralBasis) -> InitialDistribution:
    """nu = mu itself (h identically 1)."""
    return density_initial(basis, np.ones(basis.grid.n))


def ground_state_initial(basis: SpectralBasis) -> InitialDistribution:
    """nu = mu_0 = phi_0^2 mu."""
    return density_initial(basis, basis.phi[0] ** 2)


def project_measure(basis: SpectralBasis, nu: InitialDistribution) -> np.ndarray:
    """Recompute nu(phi_m) from the stored representation."""
    if nu.kind == "density":
        return project_density(basis, nu.h)
    return project_dirac(basis, nu.x0)


@dataclass(frozen=True)
class GroundStateMeasure:
    """mu_0 = phi_0^2 mu: Lebesgue density on the grid plus its quadrature."""

    density_lebesgue: np.ndarray
    weights: np.ndarray             # rule for integrals against mu_0

    def mass(self) -> float:
        return float(self.weights.sum())


def ground_state_measure(basis: SpectralBasis) -> GroundStateMeasure:
    dens = basis.phi[0] ** 2 * np.exp(basis.potential.u(basis.grid.nodes))
    return GroundStateMeasure(dens, basis.mu0_weights)


# ---------------------------------------------------------------------------
# semigroup actions


def _require_positive_time(t: float) -> float:
    t = float(t)
    if t <= 0.0:
        raise ConfigurationError("semigroup time must be positive")
    return t


def apply_pd(basis: SpectralBasis, t: float, f: np.ndarray) -> np.ndarray:
    """Dirichlet semigroup: sum_m e^{-lambda_m t} mu(phi_m f) phi_m."""
    t = _require_positive_time(t)
    coef = basis.phi @ (np.asarray(f, dtype=float) * basis.mu_weights)
    return (coef * np.exp(-basis.lambdas * t)) @ basis.phi


def apply_pdb(basis: SpectralBasis, bern: BernsteinFunction, t: float,
              f: np.ndarray) -> np.ndarray:
    """Subordinated semigroup: exponents B(lambda_m) t."""
    t = _require_positive_time(t)
    coef = basis.phi @ (np.asarray(f, dtype=float) * basis.mu_weights)
    return (coef * np.exp(-bern(basis.lambdas) * t)) @ basis.phi


def apply_p0(basis: SpectralBasis, t: float, f: np.ndarray) -> np.ndarray:
    """Ground-state semigroup in the mu_0-orthonormal basis phi_m phi_0^{-1}.

    Conservative by construction; boundary values come from the continuous
    extension baked into ``basis.ratio``.
    """
    t = _require_positive_time(t)
    coef = basis.ratio @ (np.asarray(f, dtype=float) * basis.mu0_weights)
    gaps = basis.lambdas - basis.lambdas[0]
    return (coef * np.exp(-gaps * t)) @ basis.ratio


# ---------------------------------------------------------------------------
# survival and the spectral kernel eta


def survival_scaled(basis: SpectralBasis, bern: BernsteinFunction,
                    nu: InitialDistribution, t) -> np.ndarray | float:
    """Q(t) = e^{B(lambda_0) t} P^nu(t < sigma) as a truncated series.

    Vectorized over t.  Raises if the truncated series goes nonpositive,
    which can happen at small t with wildly signed coefficients; the caller
    must then increase t.
    """
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(t_arr < 0.0):
        raise ConfigurationError("survival needs t >= 0")
    d = exponents(bern, basis).d
    mu_c = basis.mu_coeffs()
    terms = mu_c * nu.coeffs
    q = terms[0] + np.exp(-np.outer(t_arr, d[1:])) @ terms[1:]
    if np.any(q <= 0.0):
        bad = float(t_arr[np.argmax(q <= 0.0)])
        raise SurvivalError(
            f"truncated scaled survival is nonpositive at t={bad}; "
            "increase t or the truncation")
    return float(q[0]) if np.isscalar(t) or np.asarray(t).ndim == 0 else q


def survival_raw_log(basis: SpectralBasis, bern: BernsteinFunction,
                     nu: InitialDistribution, t: float) -> float:
    """log P^nu(t < sigma), reconstructed without underflow."""
    q = survival_scaled(basis, bern, nu, t)
    return float(np.log(q) - bern(basis.lambdas[0]) * t)


def survival_excess(basis: SpectralBasis, bern: BernsteinFunction,
                    nu: InitialDistribution, t) -> np.ndarray | float:
    """Q(t) - mu(phi_0) nu(phi_0) summed directly over m >= 1.

    Avoids the catastrophic cancellation of subtracting the limit from
    Q(t): at large t the excess sits far below one ulp of Q.
    """
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    d = exponents(bern, basis).d
    terms = basis.mu_coeffs()[1:] * nu.coeffs[1:]
    out = np.exp(-np.outer(t_arr, d[1:])) @ terms
    return float(out[0]) if np.asarray(t).ndim == 0 else out


def survival_time_floor(basis: SpectralBasis, bern: BernsteinFunction,
                        nu: InitialDistribution,
                        probe: Optional[np.ndarray] = None) -> float:
    """Smallest probe t with Q(t) >= half its limit mu(phi_0) nu(phi_0)."""
    if probe is None:
        probe = np.geomspace(1e-3, 64.0, 200)
    limit = basis.mu_coeffs()[0] * nu.coeffs[0]
    d = exponents(bern, basis).d
    terms = basis.mu_coeffs() * nu.coeffs
    q = terms[0] + np.exp(-np.outer(probe, d[1:])) @ terms[1:]
    ok = q >= 0.5 * limit
    if not ok.any():
        raise SurvivalError("no probe time reaches half the survival limit")
    return float(probe[int(np.argmax(ok))])


def eta(basis: SpectralBasis, nu: InitialDistribution, t: float) -> np.ndarray:
    """nu(phi_0) + sum_{m>=1} nu(phi_m) e^{-(lambda_m - lambda_0) t}
    phi_m phi_0^{-1}, nonnegative up to truncation."""
    t = _require_positive_time(t)
    gaps = basis.lambdas - basis.lambdas[0]
    return (nu.coeffs * np.exp(-gaps * t)) @ basis.ratio


def ground_kernel(basis: SpectralBasis, t: float, x0: float) -> np.ndarray:
    """Heat kernel of the ground-state semigroup, p_t^0(x0, .) w.r.t. mu_0."""
    t = _require_positive_time(t)
    vals = project_dirac(basis, x0) / _phi0_at(basis, x0)
    gaps = basis.lambdas - basis.lambdas[0]
    return (vals * np.exp(-gaps * t)) @ basis.ratio


def _phi0_at(basis: SpectralBasis, x0: float) -> float:
    return float(project_dirac(basis, x0)[0])


def phi0_inverse_lp_report(basis: SpectralBasis,
                           ps=(1.0, 2.0, 2.9)) -> dict[float, float]:
    """Quadrature values of ||phi_0^{-1}||_{L^p(mu_0)} for small p.

    Report only: the integrand is phi_0^{2-p} against mu, finite for p < 3
    on these model domains.  No integrability claim is asserted.
    """
    out = {}
    interior = basis.phi[0] > 0.0
    for p in ps:
        vals = basis.phi[0][interior] ** (2.0 - p) \
            * basis.mu_weights[interior]
        out[float(p)] = float(vals.sum() ** (1.0 / p))
    return out


def smoothed_initial(basis: SpectralBasis, bern: BernsteinFunction,
                     nu: InitialDistribution, eps: float) -> InitialDistribution:
    """Short-run smoothing of nu by the subordinated semigroup.

    The smoothed law has coefficients e^{-B(lambda_m) eps} nu(phi_m)
    normalized by nu(P_eps 1); it is absolutely continuous w.r.t. mu even
    when nu is a Dirac, with density h_eps recovered from its modes.
    """
    eps = float(eps)
    if eps <= 0.0:
        raise ConfigurationError("smoothing needs eps > 0")
    d = exponents(bern, basis).d
    mu_c = basis.mu_coeffs()
    damped = np.exp(-d * eps) * nu.coeffs
    norm = float(np.dot(damped, mu_c))     # e^{B(lambda_0) eps} nu(P_eps 1)
    if norm <= 0.0:
        raise SurvivalError("smoothed normalizer is nonpositive; increase eps")
    coeffs = damped / norm
    h = coeffs @ basis.phi
    return InitialDistribution("density", coeffs, h=h)
