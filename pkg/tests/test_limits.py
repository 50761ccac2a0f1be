import math

import numpy as np
import pytest

from qsdlab import bernstein, spectral
from qsdlab.errors import ConfigurationError
from qsdlab.limits import (CASE1, CASE2A, CONVERGENT, DIVERGENCE_INDICATED,
                           UNKNOWN, divergence_probe, finiteness_classify,
                           limit_precise, limit_upper, p0_threshold, rate_fit)
from qsdlab.semigroup import (dirac_initial, ground_state_initial, mu_initial)


def test_factor_four_identity(basis_pi, bern_sqrt, nu_mu0):
    lo = limit_precise(basis_pi, bern_sqrt, nu_mu0)
    hi = limit_upper(basis_pi, bern_sqrt, nu_mu0)
    assert hi.value == 4.0 * lo.value          # same terms, scaled prefactor
    assert np.array_equal(hi.terms, lo.terms)


def test_headline_limit_against_independent_summation(bern_sqrt):
    import mpmath as mp

    # pipeline value at K = 256 on a grid fine enough that quadrature error
    # in the coefficients sits below the 1e-6 agreement target
    dom = spectral.interval(math.pi)
    basis = spectral.eigensystem_closed_form(
        math.pi, 256, spectral.build_grid(dom, 8001))
    nu = ground_state_initial(basis)
    ls = limit_precise(basis, bern_sqrt, nu)
    assert ls.verdict == CONVERGENT

    # independent 1000-term high-precision summation with analytic
    # sine-integral coefficients (no grids involved):
    #   mu_m  = (sqrt2/pi) (1 - cos(pi k)) / k,          k = m + 1
    #   nu_m  = (2 sqrt2/pi) int sin^2(x) sin(kx) dx
    #         = (2 sqrt2/pi) [1/k - k/(k^2 - 4)]  for odd k >= 3
    with mp.workdps(60):
        s2, pi = mp.sqrt(2), mp.pi
        mu0c = 2 * s2 / pi
        nu0c = 8 * s2 / (3 * pi)
        total = mp.mpf(0)
        for m in range(1, 1001):
            k = m + 1
            if k % 2 == 0:
                continue
            mu_m = 2 * s2 / (pi * k)
            nu_m = (2 * s2 / pi) * (mp.mpf(1) / k - mp.mpf(k) / (k * k - 4))
            lam_m, lam0 = mp.mpf(k) ** 2, mp.mpf(1)
            total += (mu0c * nu_m + nu0c * mu_m) ** 2 \
                / ((lam_m - lam0) * (mp.sqrt(lam_m) - 1) ** 2)
        ref = float(total / (mu0c * nu0c) ** 2)
    assert abs(ls.value - ref) <= 1e-6 * ref


def test_symmetric_form_for_nu_equal_mu(basis_pi, bern_sqrt):
    nu = mu_initial(basis_pi)
    ls = limit_precise(basis_pi, bern_sqrt, nu)
    mu_c = basis_pi.mu_coeffs()
    lam = basis_pi.lambdas
    d = np.sqrt(lam) - np.sqrt(lam[0])
    # terms reduce to (mu(phi_0) + nu(phi_0))^2 mu(phi_m)^2 / (...)
    expect = (mu_c[0] + nu.coeffs[0]) ** 2 * mu_c[1:] ** 2 \
        / ((lam[1:] - lam[0]) * d[1:] ** 2)
    assert np.abs(ls.terms - expect).max() <= 1e-14


def test_terms_nonnegative_partial_sums_monotone(basis_pi, bern_sqrt,
                                                 nu_dirac):
    ls = limit_precise(basis_pi, bern_sqrt, nu_dirac)
    assert np.all(ls.terms >= 0.0)
    assert np.all(np.diff(ls.partial_sums) >= 0.0)


def test_tail_bound_dominates_observed_increment(basis_pi, bern_sqrt,
                                                 bern_linear):
    # 6-configuration probe: bound from the first-half truncation must
    # exceed the observed second-half increment
    dom = spectral.interval(math.pi)
    big = spectral.eigensystem_closed_form(
        math.pi, 512, spectral.build_grid(dom, 4001))
    small = spectral.eigensystem_closed_form(
        math.pi, 256, spectral.build_grid(dom, 4001))
    nus_small = (ground_state_initial(small), mu_initial(small),
                 dirac_initial(small, math.pi / 2))
    nus_big = (ground_state_initial(big), mu_initial(big),
               dirac_initial(big, math.pi / 2))
    for bern in (bern_sqrt, bern_linear):
        for nu_s, nu_b in zip(nus_small, nus_big):
            ls_small = limit_precise(small, bern, nu_s)
            ls_big = limit_precise(big, bern, nu_b)
            observed = (ls_big.partial_sums[-1]
                        - ls_big.partial_sums[255]) * ls_big.prefactor
            assert ls_small.tail >= observed


def test_classifier_thresholds():
    v = finiteness_classify(1, 0.5)
    assert v.case == CASE1
    assert v.dim_threshold == 4.0
    assert p0_threshold(1, 0.5) == 2.0
    v7 = finiteness_classify(7, 1.0, p=14.0 / 13.0 + 1e-9)
    assert v7.case == CASE2A
    assert abs(v7.p_threshold - 14.0 / 13.0) <= 1e-12
    assert finiteness_classify(7, 1.0, p=1.0).case == UNKNOWN
    assert finiteness_classify(7, 1.0).case == UNKNOWN
    assert finiteness_classify(6, 1.0, q=2.0).case == "case2b"


def test_classifier_consistency_with_series(basis_pi, bern_sqrt, bern_linear,
                                            nu_mu0, nu_dirac):
    # whenever the classifier proves finiteness, the computed series must
    # come out convergent on the matching concrete configuration
    probes = [(bern_sqrt, nu_mu0, 0.5), (bern_sqrt, nu_dirac, 0.5),
              (bern_linear, nu_mu0, 1.0), (bern_linear, nu_dirac, 1.0),
              (bernstein.stable_drift(1.0, 1.0, 0.3), nu_mu0, 1.0),
              (bernstein.compound_poisson_drift(1.0, 2.0, 1.0), nu_dirac, 1.0)]
    for bern, nu, alpha in probes:
        assert finiteness_classify(1, alpha).case == CASE1
        ls = limit_precise(basis_pi, bern, nu, alpha=alpha)
        assert ls.verdict == CONVERGENT
        assert math.isfinite(ls.tail)


def test_divergence_probe_convergent_case():
    rep = divergence_probe(1, 0.5, K=256)
    assert rep.exponent == 4.0
    assert rep.verdict == CONVERGENT
    # zeta(4) comparison: the model partial sum is Cauchy well below 1e-6
    k = np.arange(1, 257, dtype=float)
    partial = np.cumsum(k ** -4.0)
    assert abs(partial[-1] - math.pi ** 4 / 90.0) <= 1e-6
    assert rep.model_increments[-1] <= 1e-6


@pytest.mark.parametrize("d,alpha", [(4, 0.5), (6, 1.0)])
def test_divergence_probe_critical_cases(d, alpha):
    rep = divergence_probe(d, alpha, K=256)
    assert rep.exponent == 1.0
    assert rep.verdict == DIVERGENCE_INDICATED
    # harmonic-series oracle: each dyadic block adds about log 2
    assert abs(rep.model_increments[-1] - math.log(2.0)) <= 0.01
    assert abs(rep.model_increments[-2] - math.log(2.0)) <= 0.01
    # the eigenvalue-based series shows the same non-decaying signature
    assert rep.eig_increments[-1] >= 0.5 * rep.eig_increments[-2]


def test_rate_fit_exact_model():
    ts = np.array([5.0, 10.0, 20.0, 40.0])
    c, a = 3.7, -2.1
    fit = rate_fit(ts, c + a / ts)
    assert abs(fit.limit_estimate - c) <= 1e-3 * abs(c)
    assert abs(fit.richardson - c) <= 1e-9


def test_rate_fit_flags_constant():
    ts = np.array([5.0, 10.0, 20.0, 40.0])
    fit = rate_fit(ts, np.full(4, 2.0))
    assert not fit.reliable
    assert "degenerate" in fit.note


def test_rate_fit_validates():
    with pytest.raises(ConfigurationError):
        rate_fit(np.array([1.0, 2.0, 3.0]), np.array([1.0, 2.0, 3.0]))
