"""Desk-scale spectral and Monte Carlo verification of conditional
empirical measures of subordinated killed diffusions."""

from .spectral import (Domain, Grid, Potential, SpectralBasis, box, build_grid,
                       constant_potential, affine_potential, cosine_potential,
                       eigensystem_closed_form, eigensystem_fd, interval,
                       load_basis, save_basis, tensor_basis)
from .bernstein import (BernsteinFunction, SpectralExponents,
                        compound_poisson_drift, exponents, linear,
                        stable_drift)
from .semigroup import (GroundStateMeasure, InitialDistribution,
                        density_initial, dirac_initial, ground_state_initial,
                        ground_state_measure, mu_initial, apply_p0, apply_pd,
                        apply_pdb, eta, smoothed_initial, survival_scaled)
from .conditional import (ConditionalCoeffs, GridMeasure, conditional_coeffs,
                          density_on_grid, expdiff, mu0_measure, regularize,
                          tv_distance)
from .transport import w2_discrete, w2_quantile_1d
from .limits import (FinitenessVerdict, LimitSeries, divergence_probe,
                     finiteness_classify, limit_precise, limit_upper,
                     rate_fit)
from .montecarlo import (MCResult, PathRecord, RngStream,
                         mc_conditional_empirical, sample_stable_increment,
                         sample_subordinator_path, simulate_killed_path)

__version__ = "0.1.0"
