"""Limit constants of the convergence theorems, with certified truncation
tails, finiteness classification, and empirical rate fits.

The precise limit is the series

    1 / (mu(phi_0) nu(phi_0))^2 * sum_m
        [mu(phi_0) nu(phi_m) + nu(phi_0) mu(phi_m)]^2
        / ((lambda_m - lambda_0) (B(lambda_m) - B(lambda_0))^2),

and the a-priori upper constant is exactly four times it.  Tail bounds are
assembled from constants fitted on the computed basis (eigenvalue growth,
sup-norm growth) and the power-law envelope of B, never from the
existential constants of the theory.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .bernstein import BernsteinFunction, check_class_alpha, exponents
from .errors import ConfigurationError
from .semigroup import InitialDistribution
from .spectral import (SpectralBasis, supnorm_growth_fit, tensor_eigenvalues,
                       weyl_fit)

CONVERGENT = "convergent"
DIVERGENCE_INDICATED = "divergence-indicated"


@dataclass(frozen=True)
class LimitSeries:
    terms: np.ndarray           # nonnegative, per retained mode m >= 1
    prefactor: float            # 1 / (mu(phi_0) nu(phi_0))^2
    partial_sums: np.ndarray
    tail_bound: float
    verdict: str                # CONVERGENT | DIVERGENCE_INDICATED

    @property
    def value(self) -> float:
        return float(self.prefactor * self.partial_sums[-1])

    @property
    def tail(self) -> float:
        return float(self.prefactor * self.tail_bound)


def _dyadic_increments(partial: np.ndarray) -> np.ndarray:
    K = len(partial)
    blocks = []
    hi = K
    while hi >= 16:
        lo = hi // 2
        blocks.append(partial[hi - 1] - partial[lo - 1])
        hi = lo
    return np.asarray(blocks[::-1])


def _growth_verdict(partial: np.ndarray) -> str:
    inc = _dyadic_increments(partial)
    if len(inc) >= 3 and inc[-1] > 0:
        last = inc[-3:]
        # log-divergent series have near-constant dyadic increments;
        # convergent power tails decay geometrically
        if last[-1] >= 0.5 * last[-2] and last[-2] >= 0.5 * last[-3]:
            return DIVERGENCE_INDICATED
    return CONVERGENT


def _tail_bound(basis: SpectralBasis, bern: BernsteinFunction,
                alpha: float) -> float:
    """Bound sum_{m >= K} of the series terms from fitted envelopes.

    Uses |coefficients| <= c_phi sqrt(m) (sup-norm fit), lambda_m -
    lambda_0 >= a0^{-1} m^{2/d} (eigenvalue fit) and B(r) >= a r^alpha - b
    (envelope fit); the remainder beyond the directly summed range is an
    integral comparison.
    """
    K = basis.K
    d = basis.dim
    a0 = weyl_fit(basis)
    c_phi = supnorm_growth_fit(basis)
    env = check_class_alpha(bern, alpha)
    if not env.passed:
        return math.inf
    mu0 = basis.mu_coeffs()[0]
    lam0 = basis.lambdas[0]
    b_lam0 = bern(lam0)

    def term_bound(m):
        num = (2.0 * max(mu0, 1.0) * c_phi) ** 2 * m
        gap = m ** (2.0 / d) / a0
        bgap = np.maximum(env.envelope_a * (lam0 + gap) ** alpha
                          - env.envelope_b - b_lam0, 1e-300)
        return num / (gap * bgap ** 2)

    ms = np.arange(K, K * 1024, dtype=float)
    direct = float(term_bound(ms).sum())
    # integral comparison beyond m = 1024 K; exponent of the decay
    p = (2.0 + 4.0 * alpha) / d - 1.0
    top = float(ms[-1])
    if p <= 1.0:
        return math.inf
    remainder = term_bound(top) * top / (p - 1.0)
    return direct + float(remainder)


def limit_precise(basis: SpectralBasis, bern: BernsteinFunction,
                  nu: InitialDistribution,
                  alpha: Optional[float] = None) -> LimitSeries:
    """Evaluate the precise-limit series with a fitted tail bound."""
    if not nu.coeffs[0] > 0.0:
        raise ConfigurationError("limit series needs nu(phi_0) > 0")
    alpha = bern.alpha_class if alpha is None else float(alpha)
    mu_c = basis.mu_coeffs()
    nu_c = nu.coeffs
    gaps = basis.lambdas[1:] - basis.lambdas[0]
    dd = exponents(bern, basis).d[1:]
    numer = (mu_c[0] * nu_c[1:] + nu_c[0] * mu_c[1:]) ** 2
    terms = numer / (gaps * dd ** 2)
    partial = np.cumsum(terms)
    pref = 1.0 / (mu_c[0] * nu_c[0]) ** 2
    verdict = _growth_verdict(partial)
    tail = _tail_bound(basis, bern, alpha)
    if not math.isfinite(tail):
        verdict = DIVERGENCE_INDICATED
    return LimitSeries(terms, pref, partial, tail, verdict)


def limit_upper(basis: SpectralBasis, bern: BernsteinFunction,
                nu: InitialDistribution,
                alpha: Optional[float] = None) -> LimitSeries:
    """The a-priori constant: identical terms, prefactor scaled by 4."""
    ls = limit_precise(basis, bern, nu, alpha)
    return LimitSeries(ls.terms, 4.0 * ls.prefactor, ls.partial_sums,
                       ls.tail_bound, ls.verdict)


# ---------------------------------------------------------------------------
# finiteness classification


CASE1 = "case1"
CASE2A = "case2a"
CASE2B = "case2b"
UNKNOWN = "unknown"


@dataclass(frozen=True)
class FinitenessVerdict:
    case: str
    d: int
    alpha: float
    dim_threshold: float        # finite whenever d < 2 (1 + 2 alpha)
    p_threshold: float          # h in L^p(mu) needs p above this
    q_threshold: float          # h phi_0^{-1} in L^q(mu_0) needs q above this
    p0: float                   # integrability gate of the precise theorem


def p0_threshold(d: int, alpha: float) -> float:
    return max(6.0 * (d + 2.0) / (d + 2.0 + 12.0 * alpha), 1.5)


def finiteness_classify(d: int, alpha: float, p: Optional[float] = None,
                        q: Optional[float] = None) -> FinitenessVerdict:
    """Classify finiteness of the upper constant from (d, alpha) and
    declared integrability of the initial density."""
    if d < 1 or not (0.0 < alpha <= 1.0):
        raise ConfigurationError("need d >= 1 and alpha in (0, 1]")
    dim_thr = 2.0 * (1.0 + 2.0 * alpha)
    p_thr = 2.0 * d / (d + 2.0 + 4.0 * alpha)
    q_thr = 2.0 * (d + 2.0) / (d + 4.0 + 4.0 * alpha)
    if d < dim_thr:
        case = CASE1
    elif p is not None and p > p_thr:
        case = CASE2A
    elif q is not None and q > q_thr:
        case = CASE2B
    else:
        case = UNKNOWN
    return FinitenessVerdict(case, d, alpha, dim_thr, p_thr, q_thr,
                             p0_threshold(d, alpha))


# ---------------------------------------------------------------------------
# divergence probe


@dataclass(frozen=True)
class DivergenceReport:
    d: int
    alpha: float
    exponent: float                  # 2 (1 + 2 alpha) / d
    eig_increments: np.ndarray       # dyadic increments, eigenvalue series
    model_increments: np.ndarray     # dyadic increments, pure k^-exponent series
    verdict: str


def divergence_probe(d: int, alpha: float, K: int = 256,
                     length: float = math.pi) -> DivergenceReport:
    """Growth of the envelope series over actual box eigenvalues.

    The probe compares sum_k 1/((lambda_k - lambda_0) (B(lambda_k) -
    B(lambda_0))^2) for B(l) = l^alpha on a d-dimensional box against the
    model series sum_k k^{-2(1+2alpha)/d}: convergent when the exponent
    exceeds 1, with near-constant dyadic increments (each close to log 2)
    at the critical exponent.
    """
    if d < 1:
        raise ConfigurationError("need d >= 1")
    per_axis = max(8, int(math.ceil((4.0 * K) ** (1.0 / d))) + 2)
    axis = (np.arange(1, per_axis + 1) * math.pi / length) ** 2
    if d == 1:
        lams = axis[:K + 1]
    else:
        lams, _ = tensor_eigenvalues([axis] * d, K + 1)
    gaps = lams[1:] - lams[0]
    bd = lams[1:] ** alpha - lams[0] ** alpha
    eig_terms = 1.0 / (gaps * bd ** 2)
    eig_partial = np.cumsum(eig_terms)

    k = np.arange(1, K + 1, dtype=float)
    expo = 2.0 * (1.0 + 2.0 * alpha) / d
    model_partial = np.cumsum(k ** (-expo))

    verdict = _growth_verdict(eig_partial)
    return DivergenceReport(d, alpha, expo,
                            _dyadic_increments(eig_partial),
                            _dyadic_increments(model_partial), verdict)


# ---------------------------------------------------------------------------
# rate fitting


@dataclass(frozen=True)
class RateFit:
    limit_estimate: float
    richardson: float            # last-pair extrapolation
    residual_slope: float        # slope of log |value - limit| vs log t
    r_squared: float
    reliable: bool
    note: str = ""


def rate_fit(ts: np.ndarray, values: np.ndarray) -> RateFit:
    """Extrapolate t -> infinity from a geometric t-grid.

    Fits values = c + a / t by least squares, reports the last-pair
    Richardson value, and the decay slope of the residuals.  Degenerate or
    non-monotone tails are flagged unreliable rather than hidden.
    """
    ts = np.asarray(ts, dtype=float)
    values = np.asarray(values, dtype=float)
    if len(ts) < 4:
        raise ConfigurationError("rate fit needs at least 4 t-values")
    if np.any(ts[1:] <= ts[:-1]):
        raise ConfigurationError("t-grid must be increasing")
    A = np.stack([np.ones_like(ts), 1.0 / ts], axis=1)
    coef, *_ = np.linalg.lstsq(A, values, rcond=None)
    c_ls = float(coef[0])
    r = ts[-1] / ts[-2]
    rich = float((r * values[-1] - values[-2]) / (r - 1.0))
    resid = np.abs(values - c_ls)
    scale = max(abs(c_ls), np.abs(values).max(), 1e-300)
    if np.any(resid < 1e-13 * scale):
        return RateFit(c_ls, rich, 0.0, 1.0, False,
                       "degenerate fit: residuals at rounding level")
    tail = resid[-3:]
    if np.any(tail[1:] >= tail[:-1]):
        note = "non-monotone residual tail"
        reliable = False
    else:
        note = ""
        reliable = True
    lt, lr = np.log(ts), np.log(resid)
    B = np.stack([np.ones_like(lt), lt], axis=1)
    sc, res_ss, *_ = np.linalg.lstsq(B, lr, rcond=None)
    ss_tot = float(np.sum((lr - lr.mean()) ** 2))
    ss_res = float(res_ss[0]) if len(res_ss) else 0.0
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return RateFit(c_ls, rich, float(sc[1]), r2, reliable, note)
