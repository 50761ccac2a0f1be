"""Exact spectral density of the conditional empirical measure and its
regularized variants.

The density w.r.t. mu_0 is 1 + rho(t), with rho assembled from three
exponentially rescaled pieces: a leading series (coefficients ``tilde``), a
transient correction (``a``), and a grid function from the double series of
the time-integrated cross term (``xi_grid``).  The s-integral of the cross
term is always done in closed form through ``expdiff``; quadrature in s
exists only as a test oracle.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .bernstein import BernsteinFunction, exponents
from .errors import (ConfigurationError, SurvivalError, TruncationError)
from .semigroup import InitialDistribution, survival_scaled
from .spectral import SpectralBasis


def expdiff(a, b):
    """(e^{-a} - e^{-b}) / (b - a) with the limit e^{-a} at a = b.

    Stable for all nonnegative a, b: evaluated as e^{-min} expm1 form, so
    the relative error stays at machine level even for |a - b| -> 0.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if np.any(a < 0) or np.any(b < 0):
        raise ValueError("expdiff expects nonnegative arguments")
    lo = np.minimum(a, b)
    gap = np.abs(a - b)
    safe = np.where(gap == 0.0, 1.0, gap)
    out = np.exp(-lo) * np.where(gap == 0.0, 1.0, -np.expm1(-safe) / safe)
    if a.ndim == 0 and b.ndim == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class ConditionalCoeffs:
    """Rescaled spectral decomposition of the conditional density.

    d mu_t / d mu_0 = 1 + rho with
    rho = sum_m (tilde_m - a_m) phi_m phi_0^{-1} + xi_grid.
    All coefficients carry the e^{B(lambda_0) t} rescaling already.
    """

    basis: SpectralBasis
    bern: BernsteinFunction
    t: float
    q: float                    # scaled survival Q(t)
    tilde: np.ndarray           # (K,), index 0 is zero
    a: np.ndarray               # (K,)
    xi_grid: np.ndarray         # (N,)
    kcross: int
    beta: Optional[float] = None   # set on regularized variants


def conditional_coeffs(basis: SpectralBasis, bern: BernsteinFunction,
                       nu: InitialDistribution, t: float,
                       kcross: int) -> ConditionalCoeffs:
    """Assemble the conditional-density decomposition at time t.

    ``kcross`` truncates the double series of the cross term (modes
    1 .. kcross-1); the single series run over the full basis truncation.
    """
    t = float(t)
    if kcross < 8:
        raise ConfigurationError("cross-series truncation kcross must be >= 8")
    if kcross > basis.K:
        raise ConfigurationError("kcross cannot exceed the basis truncation")
    q = survival_scaled(basis, bern, nu, t)
    if q <= 0.0:
        raise SurvivalError(f"scaled survival nonpositive at t={t}")
    d = exponents(bern, basis).d
    mu_c = basis.mu_coeffs()
    nu_c = nu.coeffs

    numer = mu_c[0] * nu_c + nu_c[0] * mu_c
    tilde = np.zeros(basis.K)
    tilde[1:] = numer[1:] / (t * q * d[1:])
    a = tilde * np.exp(-d * t)

    m = np.arange(1, kcross)
    # T[i, j] = integral_0^t e^{-D_i s - D_j (t-s)} ds = expdiff(D_j t, D_i t) t
    T = expdiff(d[m][None, :] * t, d[m][:, None] * t) * t
    w = np.outer(nu_c[m], mu_c[m]) * T / (t * q)
    r = basis.ratio[m]
    xi = np.einsum("in,ij,jn->n", r, w, r)
    xi -= np.sum(np.exp(-d[m] * t) * mu_c[m] * nu_c[m]) / q
    return ConditionalCoeffs(basis, bern, t, float(q), tilde, a, xi, kcross)


def rho_on_grid(cc: ConditionalCoeffs) -> np.ndarray:
    return (cc.tilde - cc.a) @ cc.basis.ratio + cc.xi_grid


def rho_tilde_on_grid(cc: ConditionalCoeffs) -> np.ndarray:
    return cc.tilde @ cc.basis.ratio


def zero_mean_residuals(cc: ConditionalCoeffs) -> tuple[float, float]:
    """mu_0-means of the full rho and of the xi part alone."""
    w0 = cc.basis.mu0_weights
    return (float(np.dot(rho_on_grid(cc), w0)),
            float(np.dot(cc.xi_grid, w0)))


# ---------------------------------------------------------------------------
# grid measures


@dataclass(frozen=True)
class GridMeasure:
    """Density values w.r.t. a declared reference measure on a shared grid.

    ``ref_lebesgue`` converts to a Lebesgue density (d ref / dx values) and
    ``ref_weights`` is the quadrature rule for integrals against the
    reference.  ``clamped_mass`` records how much negative mass was removed
    before renormalizing.
    """

    nodes: np.ndarray
    dens: np.ndarray
    ref: str                    # "lebesgue" | "mu" | "mu0"
    ref_lebesgue: np.ndarray
    ref_weights: np.ndarray
    clamped_mass: float = 0.0

    def mass(self) -> float:
        return float(np.dot(self.dens, self.ref_weights))

    def lebesgue_density(self) -> np.ndarray:
        return self.dens * self.ref_lebesgue

    def same_frame(self, other: "GridMeasure") -> bool:
        return (self.ref == other.ref
                and self.nodes.shape == other.nodes.shape
                and np.array_equal(self.nodes, other.nodes))


def lebesgue_measure(nodes: np.ndarray, dens: np.ndarray,
                     weights: np.ndarray) -> GridMeasure:
    return GridMeasure(nodes, np.asarray(dens, float), "lebesgue",
                       np.ones_like(weights), weights)


def mu0_measure(basis: SpectralBasis) -> GridMeasure:
    """The ground-state measure as a Lebesgue-reference GridMeasure."""
    eU = np.exp(basis.potential.u(basis.grid.nodes))
    return lebesgue_measure(basis.grid.nodes, basis.phi[0] ** 2 * eU,
                            basis.grid.weights)


CLAMP_WARN = 1e-4
CLAMP_FAIL = 1e-2


def _clamped_measure(basis: SpectralBasis, rho: np.ndarray) -> GridMeasure:
    eU = np.exp(basis.potential.u(basis.grid.nodes))
    dens = (1.0 + rho) * basis.phi[0] ** 2 * eU
    w = basis.grid.weights
    neg = np.minimum(dens, 0.0)
    clamped = -float(np.dot(neg, w))
    if clamped > CLAMP_FAIL:
        raise TruncationError(
            f"clamped mass {clamped:.3g} exceeds {CLAMP_FAIL}; "
            "truncation insufficient for this density")
    if clamped > CLAMP_WARN:
        warnings.warn(f"density clamping removed mass {clamped:.3g}",
                      RuntimeWarning, stacklevel=3)
    dens = np.maximum(dens, 0.0)
    dens /= np.dot(dens, w)
    return GridMeasure(basis.grid.nodes, dens, "lebesgue",
                       np.ones_like(w), w, clamped)


def density_on_grid(cc: ConditionalCoeffs) -> GridMeasure:
    """Lebesgue density (1 + rho_t) phi_0^2 e^U, clamped and renormalized."""
    return _clamped_measure(cc.basis, rho_on_grid(cc))


def density_tilde_on_grid(cc: ConditionalCoeffs) -> GridMeasure:
    """Density of the leading-part measure (1 + rho_tilde) mu_0."""
    return _clamped_measure(cc.basis, rho_tilde_on_grid(cc))


# ---------------------------------------------------------------------------
# regularization


def beta_upper_bound(dim: int, alpha: float) -> float:
    return 2.0 / (2.0 * dim - 2.0 * alpha + 1.0)


def regularize(cc: ConditionalCoeffs, beta: float) -> ConditionalCoeffs:
    """Apply the ground-state semigroup at time t^{-beta} to every piece.

    Mode coefficients pick up e^{-(lambda_m - lambda_0) t^{-beta}}; the grid
    function of the cross term is first projected onto the retained modes
    (the K^2 -> K projection), then damped and resummed.
    """
    beta = float(beta)
    hi = beta_upper_bound(cc.basis.dim, cc.bern.alpha_class)
    if not (0.0 < beta < hi):
        raise ConfigurationError(
            f"beta must lie in (0, {hi:.6g}) for d={cc.basis.dim}, "
            f"alpha={cc.bern.alpha_class}")
    gaps = cc.basis.lambdas - cc.basis.lambdas[0]
    damp = np.exp(-gaps * cc.t ** (-beta))
    xi_modes = cc.basis.ratio @ (cc.xi_grid * cc.basis.mu0_weights)
    xi_reg = (xi_modes * damp) @ cc.basis.ratio
    return replace(cc, tilde=cc.tilde * damp, a=cc.a * damp,
                   xi_grid=xi_reg, beta=beta)


# ---------------------------------------------------------------------------
# total variation


def tv_distance(m1: GridMeasure, m2: GridMeasure) -> float:
    """L1 distance of densities w.r.t. the shared reference.

    This is the variation norm in the sup-over-|f|<=1 convention, i.e.
    disjointly supported unit masses are at distance 2.
    """
    if not m1.same_frame(m2):
        raise ConfigurationError("total variation needs a shared grid and "
                                 "reference measure")
    return float(np.dot(np.abs(m1.dens - m2.dens), m1.ref_weights))
