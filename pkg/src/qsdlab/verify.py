"""Runtime invariant suites: every module property at reference sizes,
reported as machine-readable entries.

Entries tagged ``mc=True`` depend on the Monte Carlo seed; everything else
is deterministic given the config.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import bernstein as bm
from . import spectral
from .conditional import (conditional_coeffs, density_on_grid,
                          mu0_measure, zero_mean_residuals,
                          lebesgue_measure)
from .config import ExperimentConfig
from .limits import limit_precise, CONVERGENT
from .montecarlo import (RngStream, mc_conditional_empirical,
                         sample_subordinator_increments, sgrid_bias_probe,
                         tv_histogram)
from .pipeline import build_experiment
from .semigroup import apply_p0, apply_pd, apply_pdb
from .transport import w2_discrete, w2_quantile_1d


@dataclass(frozen=True)
class VerifyEntry:
    name: str
    module: str
    passed: bool
    value: float
    tolerance: float
    mc: bool = False

    def line(self) -> str:
        tag = "MC " if self.mc else "   "
        status = "pass" if self.passed else "FAIL"
        return (f"{status} {tag}{self.module:12s} {self.name:38s} "
                f"value={self.value:.6g} tol={self.tolerance:.6g}")


def _entry(name, module, value, tol, mc=False, passed=None):
    ok = bool(value <= tol) if passed is None else bool(passed)
    return VerifyEntry(name, module, ok, float(value), float(tol), mc)


def run_verify(cfg: ExperimentConfig) -> list[VerifyEntry]:
    tol = cfg.tolerances
    exp = build_experiment(cfg)
    basis, bern, nu = exp.basis, exp.bern, exp.nu
    entries = []

    # ------------------------------------------------------------- spectral
    entries.append(_entry(
        "orthonormality", "spectral",
        spectral.orthonormality_residual(basis), tol.orthonormality))
    entries.append(_entry(
        "boundary-dirichlet", "spectral",
        float(np.abs(basis.phi[:, [0, -1]]).max()) if basis.dim == 1 else 0.0,
        0.0))
    entries.append(_entry(
        "bessel-defect", "spectral", spectral.bessel_defect(basis), 1.0))
    entries.append(_entry(
        "ground-mode-positive", "spectral",
        0.0, 0.0, passed=bool(basis.phi[0][_interior(basis)].min() > 0.0)))
    a0 = spectral.weyl_fit(basis)
    gaps = basis.lambdas[1:] - basis.lambdas[0]
    k = np.arange(1, basis.K)
    weyl_ok = bool(np.all(gaps <= a0 * k ** (2.0 / basis.dim) + 1e-12)
                   and np.all(gaps >= k ** (2.0 / basis.dim) / a0 - 1e-12))
    entries.append(_entry("weyl-sandwich-a0", "spectral", a0, math.inf,
                          passed=weyl_ok))
    if basis.dim == 1:
        errs = []
        for n in (500, 1000):
            g = spectral.build_grid(spectral.interval(math.pi), n)
            b = spectral.eigensystem_fd(
                spectral.constant_potential(g.domain), g, 1)
            errs.append(abs(b.lambdas[0] - 1.0))
        ratio = errs[0] / errs[1]
        entries.append(_entry("fd-second-order", "spectral", ratio, math.inf,
                              passed=bool(3.0 < ratio < 5.0)))

    # ------------------------------------------------------------ bernstein
    lam_probe = np.geomspace(1e-3, 1e6, 120)
    worst = 0.0
    for b in (bm.linear(1.0), bm.stable_drift(0.2, 1.3, 0.5),
              bm.compound_poisson_drift(0.7, 2.0, 1.5)):
        vals = b(lam_probe)
        worst = max(worst, float(-np.diff(vals).min()),
                    float(np.max(np.diff(vals)[1:] / np.diff(lam_probe)[1:]
                                 - np.diff(vals)[:-1] / np.diff(lam_probe)[:-1])),
                    abs(b(0.0)))
    entries.append(_entry("kind-monotone-concave", "bernstein", worst, 1e-12))
    ex = bm.exponents(bm.linear(1.0), basis)
    entries.append(_entry(
        "linear-exponent-identity", "bernstein",
        float(np.abs(ex.d - (basis.lambdas - basis.lambdas[0])).max()), 0.0))

    # MC Laplace law at the acceptance size
    rng = RngStream(cfg.montecarlo.seed, 1_000).generator()
    worst_sigma = 0.0
    for b in (bm.stable_drift(0.1, 1.0, 0.5),
              bm.compound_poisson_drift(1.0, 2.0, 1.5)):
        s_t = sample_subordinator_increments(b, np.array([1.0]), rng,
                                             n_paths=100_000)[:, 0]
        for lam in (1.0, 4.0, 9.0):
            vals = np.exp(-lam * s_t)
            mean = vals.mean()
            se = vals.std(ddof=1) / math.sqrt(len(vals))
            worst_sigma = max(worst_sigma,
                              abs(-math.log(mean) - b(lam)) / (se / mean))
    entries.append(_entry("subordinator-laplace-law", "bernstein",
                          worst_sigma, tol.mc_sigma, mc=True))

    # ------------------------------------------------------------ semigroup
    if basis.dim == 1:
        rng_f = np.random.default_rng(17)
        f = basis.phi[:10].T @ rng_f.normal(size=10)
        g = basis.phi[:10].T @ rng_f.normal(size=10)
        law = float(np.abs(apply_pd(basis, 0.4, apply_pd(basis, 0.6, f))
                           - apply_pd(basis, 1.0, f)).max())
        law = max(law, float(np.abs(
            apply_pdb(basis, bern, 0.4, apply_pdb(basis, bern, 0.6, f))
            - apply_pdb(basis, bern, 1.0, f)).max()))
        law = max(law, float(np.abs(
            apply_p0(basis, 0.4, apply_p0(basis, 0.6, f))
            - apply_p0(basis, 1.0, f))[1:-1].max()))
        entries.append(_entry("semigroup-law", "semigroup", law,
                              tol.semigroup_law))
        sym = abs(float(np.dot(apply_pd(basis, 0.7, f) * g, basis.mu_weights))
                  - float(np.dot(f * apply_pd(basis, 0.7, g),
                                 basis.mu_weights)))
        entries.append(_entry("pd-symmetry", "semigroup", sym,
                              tol.semigroup_law))

        # intrinsic-ultracontractivity surrogate: the constant is fitted on
        # a family that includes narrow near-boundary bumps (which drive
        # the small-time blowup), then checked with 1.5x headroom on a
        # milder second family
        gap1 = basis.lambdas[1] - basis.lambdas[0]
        d = basis.dim
        w0 = basis.mu0_weights
        L = basis.domain.length
        x = basis.grid.nodes

        def iu_ratio(centers, widths):
            worst = 0.0
            for c0 in centers:
                for wd in widths:
                    h = np.exp(-0.5 * ((x - c0) / wd) ** 2)
                    l1 = float(np.dot(np.abs(h), w0))
                    for t in (0.05, 0.2, 1.0):
                        dev = np.abs(apply_p0(basis, t, h)
                                     - float(np.dot(h, w0)))[1:-1].max()
                        bound = (math.exp(-gap1 * t)
                                 * min(1.0, t) ** (-(d + 2) / 2.0) * l1)
                        worst = max(worst, dev / bound)
            return worst

        alpha1 = iu_ratio((0.08 * L, 0.5 * L, 0.92 * L), (0.03, 0.1))
        check = iu_ratio((0.25 * L, 0.4 * L, 0.7 * L), (0.05, 0.15))
        entries.append(_entry("iu-surrogate", "semigroup", check,
                              1.5 * max(alpha1, 1e-300), passed=(
                                  check <= 1.5 * alpha1)))

        # subordination identity against a Monte Carlo mixture
        rngs = RngStream(cfg.montecarlo.seed, 2_000).generator()
        n_mix = 20_000
        t_mix = 0.7
        s_draws = sample_subordinator_increments(
            bern, np.array([t_mix]), rngs, n_paths=n_mix)[:, 0]
        coef = basis.phi @ (f * basis.mu_weights)
        lam = basis.lambdas
        damp = np.exp(-np.outer(s_draws, lam))
        mean = damp.mean(axis=0)
        se = damp.std(axis=0, ddof=1) / math.sqrt(n_mix)
        target = np.exp(-bern(lam) * t_mix)
        num = float(np.abs((mean - target) * coef).max())
        den = float(np.abs(se * coef).max()) + 1e-300
        entries.append(_entry("subordination-identity", "semigroup",
                              num / den, tol.mc_sigma, mc=True))

        from .semigroup import phi0_inverse_lp_report
        lp = phi0_inverse_lp_report(basis)
        entries.append(_entry("phi0-inverse-l29-report", "semigroup",
                              lp[2.9], math.inf, passed=True))

    # ---------------------------------------------------------- conditional
    t_ref = max(5.0, cfg.times.values[0])
    cc = conditional_coeffs(basis, bern, nu, t_ref, cfg.basis.kcross)
    zm, zx = zero_mean_residuals(cc)
    entries.append(_entry("rho-zero-mean", "conditional", abs(zm),
                          tol.zero_mean))
    entries.append(_entry("xi-zero-mean", "conditional", abs(zx),
                          tol.zero_mean))
    gm = density_on_grid(cc)
    entries.append(_entry("density-mass", "conditional",
                          abs(gm.mass() - 1.0), tol.mass))

    lin = bm.linear(1.0)
    cc_lin = conditional_coeffs(basis, lin, nu, t_ref, cfg.basis.kcross)
    gaps = basis.lambdas - basis.lambdas[0]
    mu_c = basis.mu_coeffs()
    numer = mu_c[0] * nu.coeffs + nu.coeffs[0] * mu_c
    ref_tilde = np.zeros(basis.K)
    ref_tilde[1:] = numer[1:] / (t_ref * cc_lin.q * gaps[1:])
    entries.append(_entry(
        "linear-b-reduction", "conditional",
        float(np.abs(cc_lin.tilde - ref_tilde).max()), tol.linear_reduction))

    # closed-form s-integral vs graded 64-point Gauss-Legendre
    entries.append(_entry("xi-closed-vs-quadrature", "conditional",
                          _xi_quadrature_residual(basis, bern, nu, 2.0,
                                                  min(cfg.basis.kcross, 48)),
                          tol.xi_quadrature))

    # ----------------------------------------------------------- transport
    if basis.dim == 1:
        rngt = np.random.default_rng(23)
        x = basis.grid.nodes
        w = basis.grid.weights
        ms = []
        for _ in range(3):
            dens = 1.0 + 0.7 * np.sin(
                np.outer(rngt.integers(1, 5, 2), x)
                + rngt.normal(size=(2, 1))).sum(0) / 2.0
            ms.append(lebesgue_measure(x, dens / np.dot(dens, w), w))
        sym = abs(w2_quantile_1d(ms[0], ms[1]) - w2_quantile_1d(ms[1], ms[0]))
        tri = (w2_quantile_1d(ms[0], ms[2])
               - w2_quantile_1d(ms[0], ms[1]) - w2_quantile_1d(ms[1], ms[2]))
        entries.append(_entry("w2-metric-axioms", "transport",
                              max(sym, tri), 1e-9))
        pts = np.linspace(x[1], x[-2], 160)
        spacing = float(pts[1] - pts[0])
        wa = np.interp(pts, x, ms[0].dens)
        wb = np.interp(pts, x, ms[1].dens)
        lp_val, plan = w2_discrete(pts, wa / wa.sum(), pts, wb / wb.sum())
        entries.append(_entry("quantile-vs-lp", "transport",
                              abs(lp_val - w2_quantile_1d(ms[0], ms[1])),
                              2.0 * spacing))
        entries.append(_entry("lp-dual-certificate", "transport",
                              plan.dual_gap, tol.dual_gap))
        entries.append(_entry("w2-upper-bound-4x", "transport",
                              _w2ub_margin(basis, factor=4.0), 1e-12))
        entries.append(_entry("w2-log-mean-bound", "transport",
                              _w2_logmean_margin(basis), 1e-12))

    # -------------------------------------------------------------- limits
    ls = limit_precise(basis, bern, nu)
    entries.append(_entry("terms-nonnegative", "limits",
                          float(max(0.0, -ls.terms.min())), 0.0))
    entries.append(_entry("limit-convergent", "limits", 0.0, 0.0,
                          passed=(ls.verdict == CONVERGENT)))

    # ---------------------------------------------------------- montecarlo
    if cfg.montecarlo.enabled and basis.dim == 1:
        m = cfg.montecarlo
        res = mc_conditional_empirical(basis, bern, nu, m.t, m.n_paths,
                                       m.bins, m.seed, m.step_size,
                                       n_obs=m.n_obs)
        cc_m = conditional_coeffs(basis, bern, nu, m.t, cfg.basis.kcross)
        entries.append(_entry("mc-tv-agreement", "montecarlo",
                              tv_histogram(res, density_on_grid(cc_m)),
                              tol.mc_tv, mc=True))
        from .semigroup import survival_scaled
        expected = survival_scaled(basis, bern, nu, m.t) \
            * math.exp(-bern(basis.lambdas[0]) * m.t)
        entries.append(_entry(
            "mc-survival-fraction", "montecarlo",
            abs(res.survival_fraction - expected) / res.survival_se,
            tol.mc_sigma, mc=True))
        rep1 = mc_conditional_empirical(basis, bern, nu, m.t, 10_000, m.bins,
                                        m.seed, m.step_size, n_obs=m.n_obs)
        rep2 = mc_conditional_empirical(basis, bern, nu, m.t, 10_000, m.bins,
                                        m.seed, m.step_size, n_obs=m.n_obs,
                                        threads=2)
        entries.append(_entry(
            "mc-bit-reproducible", "montecarlo",
            float(np.abs(rep1.bin_mass - rep2.bin_mass).max()), 0.0, mc=True))
        entries.append(_entry(
            "mc-sgrid-bias", "montecarlo",
            sgrid_bias_probe(basis, bern, nu, m.t,
                             max(20_000, m.n_paths // 4), m.bins, m.seed + 1,
                             m.step_size, n_obs=2 * m.n_obs),
            0.01, mc=True))
    return entries


def _interior(basis):
    if basis.dim == 1:
        mask = np.zeros(basis.grid.n, dtype=bool)
        mask[1:-1] = True
        return mask
    nodes = basis.grid.nodes
    mask = np.ones(nodes.shape[0], dtype=bool)
    for ax, L in enumerate(basis.domain.lengths):
        mask &= (nodes[:, ax] > 1e-12) & (nodes[:, ax] < L - 1e-12)
    return mask


def _xi_quadrature_residual(basis, bern, nu, t, kc):
    cc = conditional_coeffs(basis, bern, nu, t, kc)
    d = bm.exponents(bern, basis).d
    mu_c = basis.mu_coeffs()
    nu_c = nu.coeffs
    m = np.arange(1, kc)
    r = basis.ratio[m]
    glx, glw = np.polynomial.legendre.leggauss(64)
    cuts = [0.0]
    c = 1.0 / (8.0 * d[m].max())
    while c < t / 2.0:
        cuts.append(c)
        c *= 2.0
    pts = np.unique(np.concatenate([cuts, t - np.array(cuts), [t / 2.0, t]]))
    acc = np.zeros(basis.grid.n)
    for a_, b_ in zip(pts[:-1], pts[1:]):
        nodes = 0.5 * (b_ - a_) * glx + 0.5 * (a_ + b_)
        wts = 0.5 * (b_ - a_) * glw
        for si, wi in zip(nodes, wts):
            f1 = (nu_c[m][:, None] * np.exp(-d[m][:, None] * si) * r).sum(0)
            f2 = (mu_c[m][:, None] * np.exp(-d[m][:, None] * (t - si)) * r).sum(0)
            acc += wi * f1 * f2
    oracle = acc / (t * cc.q) \
        - np.sum(np.exp(-d[m] * t) * mu_c[m] * nu_c[m]) / cc.q
    return float(np.abs(cc.xi_grid - oracle).max())


def _w2ub_margin(basis, factor):
    # worst violation of W2(f mu0, mu0)^2 <= factor * dual energy
    from .transport import h1_dual_energy
    rng = np.random.default_rng(31)
    mu0 = mu0_measure(basis)
    w = basis.grid.weights
    worst = 0.0
    for _ in range(4):
        c = np.zeros(basis.K)
        c[1:11] = rng.normal(size=10)
        c *= 0.5 / np.abs(c @ basis.ratio).max()
        f = 1.0 + c @ basis.ratio
        dens = f * mu0.dens
        m = lebesgue_measure(basis.grid.nodes, dens / np.dot(dens, w), w)
        w2 = w2_quantile_1d(m, mu0)
        worst = max(worst, w2 ** 2 - factor * h1_dual_energy(basis, c))
    return max(worst, 0.0)


def _w2_logmean_margin(basis):
    from .transport import h1_dual_energy
    rng = np.random.default_rng(32)
    mu0 = mu0_measure(basis)
    w = basis.grid.weights
    worst = 0.0
    for _ in range(4):
        cs = []
        fs = []
        for _ in range(2):
            c = np.zeros(basis.K)
            c[1:11] = rng.normal(size=10)
            c *= 0.5 / np.abs(c @ basis.ratio).max()
            cs.append(c)
            fs.append(1.0 + c @ basis.ratio)
        dens = [f * mu0.dens for f in fs]
        ms = [lebesgue_measure(basis.grid.nodes, d_ / np.dot(d_, w), w)
              for d_ in dens]
        w2 = w2_quantile_1d(ms[0], ms[1])
        bound = h1_dual_energy(basis, cs[0] - cs[1]) \
            / min(fs[0].min(), fs[1].min())
        worst = max(worst, w2 ** 2 - bound)
    return max(worst, 0.0)
