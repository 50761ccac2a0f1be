import math

import numpy as np
import pytest

from qsdlab import spectral
from qsdlab.errors import (ConfigurationError, ResolutionError,
                           UnsupportedDomainError)
from qsdlab.spectral import (_tiny_grid, bessel_defect, build_grid,
                             eigensystem_closed_form, eigensystem_fd,
                             interval, box, orthonormality_residual,
                             project_density, project_dirac, tensor_basis,
                             tensor_eigenvalues, weyl_fit)


# ---------------------------------------------------------------------------
# grids


def test_grid_two_cell_trapezoid_weights():
    # weight structure on the minimal 2-cell layout {0, pi/2, pi}
    g = _tiny_grid(interval(math.pi), 3)
    assert np.allclose(g.nodes, [0.0, math.pi / 2, math.pi])
    assert np.allclose(g.weights, [math.pi / 4, math.pi / 2, math.pi / 4])
    assert abs(g.weights.sum() - math.pi) < 1e-15


def test_grid_weight_normalization():
    g = build_grid(interval(1.0), 101)
    assert abs(g.weights.sum() - 1.0) <= 1e-14


def test_grid_box_tensor_product():
    g = build_grid(box([math.pi, math.pi]), 64)
    assert g.nodes.shape == (64 * 64, 2)
    assert abs(g.weights.sum() - math.pi ** 2) <= 1e-12 * math.pi ** 2


def test_grid_too_small_rejected():
    with pytest.raises(ConfigurationError):
        build_grid(interval(1.0), 8)


# ---------------------------------------------------------------------------
# closed-form eigensystem


def test_closed_form_eigenvalues(basis_pi):
    # oracle: separation of variables, -phi'' = lambda phi, phi(0)=phi(pi)=0
    assert np.allclose(basis_pi.lambdas[:3], [1.0, 4.0, 9.0], atol=1e-12)


def test_closed_form_ground_mode_midpoint(basis_pi):
    mid = basis_pi.grid.n // 2
    assert abs(basis_pi.phi[0, mid] - math.sqrt(2.0)) < 1e-14


def test_closed_form_orthonormal(basis_pi):
    assert orthonormality_residual(basis_pi) <= 1e-8


def test_boundary_values_exactly_zero(basis_pi):
    assert np.all(basis_pi.phi[:, 0] == 0.0)
    assert np.all(basis_pi.phi[:, -1] == 0.0)


def test_ground_mode_positive_interior(basis_pi):
    assert np.all(basis_pi.phi[0, 1:-1] > 0.0)


def test_eigenvalues_increasing_and_weyl(basis_pi):
    lam = basis_pi.lambdas
    assert lam[0] > 0.0
    assert np.all(np.diff(lam) >= 0.0)
    a0 = weyl_fit(basis_pi)
    k = np.arange(1, basis_pi.K)
    gap = lam[1:] - lam[0]
    assert np.all(gap <= a0 * k ** 2 + 1e-12)
    assert np.all(gap >= k ** 2 / a0 - 1e-12)


def test_bessel_inequality(basis_pi):
    assert bessel_defect(basis_pi) <= 1.0


# ---------------------------------------------------------------------------
# finite-difference eigensystem


@pytest.fixture(scope="module")
def fd_basis_constant():
    dom = interval(math.pi)
    grid = build_grid(dom, 2000)
    return eigensystem_fd(spectral.constant_potential(dom), grid, 5)


def test_fd_ground_eigenvalue(fd_basis_constant):
    assert abs(fd_basis_constant.lambdas[0] - 1.0) <= 1e-5


def test_fd_matches_closed_form_mode2(fd_basis_constant):
    x = fd_basis_constant.grid.nodes
    exact = math.sqrt(2.0) * np.sin(3.0 * x)
    assert np.abs(fd_basis_constant.phi[2] - exact).max() <= 1e-4


def test_fd_orthonormal(fd_basis_constant):
    assert orthonormality_residual(fd_basis_constant) <= 1e-5


def test_fd_nonconstant_potential_spectrum():
    dom = interval(1.0)
    grid = build_grid(dom, 600)
    pot = spectral.affine_potential(dom, 1.0)
    b = eigensystem_fd(pot, grid, 8)
    assert b.lambdas[0] > 0.0
    assert np.all(np.diff(b.lambdas) > 0.0)
    assert np.all(b.phi[0, 1:-1] > 0.0)


def test_fd_second_order_convergence():
    dom = interval(math.pi)
    errs = []
    for n in (250, 500, 1000, 2000):
        grid = build_grid(dom, n)
        b = eigensystem_fd(spectral.constant_potential(dom), grid, 1)
        errs.append(abs(b.lambdas[0] - 1.0))
    errs = np.array(errs)
    assert np.all(np.diff(errs) < 0.0)
    slope = np.polyfit(np.log([250, 500, 1000, 2000]), np.log(errs), 1)[0]
    assert -2.6 < slope < -1.6


def test_fd_resolution_guard():
    dom = interval(1.0)
    grid = build_grid(dom, 64)
    with pytest.raises(ResolutionError):
        eigensystem_fd(spectral.constant_potential(dom), grid, 32)


def test_fd_requires_interval():
    dom = box([1.0, 1.0])
    grid = build_grid(dom, 20)
    with pytest.raises(UnsupportedDomainError):
        eigensystem_fd(spectral.constant_potential(dom), grid, 4)


# ---------------------------------------------------------------------------
# tensor bases


@pytest.fixture(scope="module")
def basis_2d():
    dom = interval(math.pi)
    grid = build_grid(dom, 64)
    f = eigensystem_closed_form(math.pi, 24, grid)
    return tensor_basis([f, f], 200)


def test_tensor_eigenvalues_small():
    # brute-force enumeration oracle over the product spectrum
    lams, idx = tensor_eigenvalues([np.array([1.0, 4.0, 9.0])] * 2, 4)
    brute = sorted((a + b, (i, j))
                   for i, a in enumerate([1.0, 4.0, 9.0])
                   for j, b in enumerate([1.0, 4.0, 9.0]))
    assert np.allclose(lams, [s for s, _ in brute[:4]])
    assert [tuple(r) for r in idx] == [ij for _, ij in brute[:4]]
    assert np.allclose(lams, [2.0, 5.0, 5.0, 8.0])


def test_tensor_ground_mode_positive(basis_2d):
    interior = np.all((basis_2d.grid.nodes > 1e-12)
                      & (basis_2d.grid.nodes < math.pi - 1e-12), axis=1)
    assert np.all(basis_2d.phi[0, interior] > 0.0)


def test_tensor_weyl_exponent(basis_2d):
    # least-squares slope of log(lambda_k - lambda_0) vs log k on partial data
    k = np.arange(20, basis_2d.K)
    gap = basis_2d.lambdas[20:] - basis_2d.lambdas[0]
    slope = np.polyfit(np.log(k), np.log(gap), 1)[0]
    assert 0.8 < slope < 1.2


def test_tensor_orthonormal(basis_2d):
    sub = basis_2d.phi[:60]
    g = np.einsum("jn,n,kn->jk", sub, basis_2d.mu_weights, sub)
    assert np.abs(g - np.eye(60)).max() <= 1e-8


def test_tensor_truncation_guard():
    lams = [np.array([1.0, 4.0])] * 2
    with pytest.raises(ConfigurationError):
        tensor_eigenvalues(lams, 5)


def test_degenerate_pair_rotation_invariance(basis_2d):
    # series summed over a degenerate level must not depend on the basis
    # chosen inside the level; rotate the lambda = 5 pair and compare
    pair = np.where(np.abs(basis_2d.lambdas - 5.0) < 1e-9)[0]
    assert len(pair) == 2
    a, b = basis_2d.phi[pair[0]], basis_2d.phi[pair[1]]
    th = 0.7345
    ra = math.cos(th) * a + math.sin(th) * b
    rb = -math.sin(th) * a + math.cos(th) * b
    pts = [17, 401, 2203]
    for x in pts:
        for y in pts:
            before = a[x] * a[y] + b[x] * b[y]
            after = ra[x] * ra[y] + rb[x] * rb[y]
            assert abs(before - after) < 1e-12
    # mode-summed coefficient products are also rotation invariant
    w = basis_2d.mu_weights
    h = basis_2d.phi[0] ** 2          # an arbitrary smooth density
    before = (a @ w) * ((a * h) @ w) + (b @ w) * ((b * h) @ w)
    after = (ra @ w) * ((ra * h) @ w) + (rb @ w) * ((rb * h) @ w)
    assert abs(before - after) < 1e-12


# ---------------------------------------------------------------------------
# measure projection


def test_dirac_projection_values(basis_pi):
    c = project_dirac(basis_pi, math.pi / 2.0)
    s2 = math.sqrt(2.0)
    assert abs(c[0] - s2) < 1e-12
    assert abs(c[1]) < 1e-12
    assert abs(c[2] + s2) < 1e-12


def test_dirac_off_node_interpolation(basis_pi):
    # local cubic keeps the grid's second-order accuracy off the nodes
    x0 = 1.2345678
    c = project_dirac(basis_pi, x0)
    exact = math.sqrt(2.0) * np.sin(np.arange(1, 7) * x0)
    assert np.abs(c[:6] - exact).max() < 1e-9


def test_dirac_boundary_rejected(basis_pi):
    with pytest.raises(ConfigurationError):
        project_dirac(basis_pi, 0.0)
    with pytest.raises(ConfigurationError):
        project_dirac(basis_pi, math.pi)


def test_density_projection_mu(basis_pi):
    # trapezoid rule is second order on single-mode integrals: ~2e-7 at n=2001
    c = project_density(basis_pi, np.ones(basis_pi.grid.n))
    assert abs(c[0] - 0.9003163161571060) < 5e-7    # 2 sqrt(2) / pi
    assert abs(c[1]) < 1e-12
    assert abs(c[2] - 0.3001054387190353) < 2e-6    # 2 sqrt(2) / (3 pi)


def test_density_projection_mu0_vs_reference(basis_pi):
    c = project_density(basis_pi, basis_pi.phi[0] ** 2)
    # high-resolution reference quadrature
    dom = interval(math.pi)
    fine = eigensystem_closed_form(math.pi, 8,
                                   build_grid(dom, 8001))
    ref = project_density(fine, fine.phi[0] ** 2)
    assert abs(c[0] - ref[0]) < 5e-7
    assert abs(c[0] - 1.2004217548761414) < 5e-7    # mu(phi_0^3)


def test_density_projection_validates(basis_pi):
    with pytest.raises(ConfigurationError):
        project_density(basis_pi, np.full(basis_pi.grid.n, 2.0))
    with pytest.raises(ConfigurationError):
        project_density(basis_pi, -np.ones(basis_pi.grid.n))


# ---------------------------------------------------------------------------
# export / import


def test_basis_roundtrip_bit_identical(tmp_path, basis_pi_small):
    p1 = tmp_path / "basis.txt"
    p2 = tmp_path / "basis2.txt"
    spectral.save_basis(basis_pi_small, str(p1))
    loaded = spectral.load_basis(str(p1))
    assert np.array_equal(loaded.lambdas, basis_pi_small.lambdas)
    assert np.array_equal(loaded.phi, basis_pi_small.phi)
    assert np.array_equal(loaded.mu_weights, basis_pi_small.mu_weights)
    spectral.save_basis(loaded, str(p2))
    assert p1.read_bytes() == p2.read_bytes()


def test_basis_load_corrupt_names_file(tmp_path):
    p = tmp_path / "junk.txt"
    p.write_text("#qsdlab-basis v1\n#domain interval 1.0\n#potential constant\n"
                 "#n 20\n#K 4\n#kind closed-form\n#modes k lambda\nbroken\n")
    with pytest.raises(ConfigurationError, match="junk.txt"):
        spectral.load_basis(str(p))


def test_mode_cap(basis_pi):
    g = build_grid(interval(math.pi), 20)
    with pytest.raises(ConfigurationError):
        eigensystem_closed_form(math.pi, 5000, g)
