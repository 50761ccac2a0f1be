"""Model domains, quadrature grids, and Dirichlet eigensystems.

The generator is the weighted Laplacian f -> f'' + U' f' on an interval
(tensorized for boxes), killed at the boundary.  Eigenfunctions are
normalized in the discrete L2(mu) induced by the grid quadrature, with
mu(dx) = exp(U(x)) dx a probability measure.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.integrate import quad

from .errors import ConfigurationError, ResolutionError, UnsupportedDomainError

MAX_MODES = 4096


# ---------------------------------------------------------------------------
# domains and potentials


@dataclass(frozen=True)
class Domain:
    """Flat interval or axis-aligned box; distance is Euclidean."""

    lengths: tuple[float, ...]

    def __post_init__(self):
        if len(self.lengths) < 1:
            raise ConfigurationError("domain needs at least one factor length")
        if any(not (L > 0.0) for L in self.lengths):
            raise ConfigurationError("domain lengths must be positive")

    @property
    def dim(self) -> int:
        return len(self.lengths)

    @property
    def length(self) -> float:
        if self.dim != 1:
            raise UnsupportedDomainError("scalar length only defined for intervals")
        return self.lengths[0]

    @property
    def volume(self) -> float:
        return float(np.prod(self.lengths))

    @property
    def diameter(self) -> float:
        return math.sqrt(sum(L * L for L in self.lengths))


def interval(length: float) -> Domain:
    return Domain((float(length),))


def box(lengths: Sequence[float]) -> Domain:
    return Domain(tuple(float(L) for L in lengths))


@dataclass(frozen=True)
class Potential:
    """Potential U on the domain, shifted so that integral of exp(U) dx is 1.

    ``u`` evaluates the shifted potential, ``grad`` its gradient.  The shift
    (log of the raw normalizer) is computed in closed form where possible,
    otherwise by adaptive quadrature.
    """

    domain: Domain
    kind: str  # "constant" | "affine" | "cosine"
    params: tuple[float, ...]
    log_norm: float

    def u(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return self._raw(x) - self.log_norm

    def grad(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.kind == "constant":
            return np.zeros_like(x)
        if self.kind == "affine":
            return np.full_like(x, self.params[0])
        if self.kind == "cosine":
            a = self.params[0]
            L = self.domain.length
            return -a * (np.pi / L) * np.sin(np.pi * x / L)
        raise ConfigurationError(f"unknown potential kind {self.kind!r}")

    def _raw(self, x: np.ndarray) -> np.ndarray:
        if self.kind == "constant":
            return np.zeros(x.shape[:-1] if x.ndim > 1 else x.shape)
        if self.kind == "affine":
            return self.params[0] * x
        if self.kind == "cosine":
            a = self.params[0]
            L = self.domain.length
            return a * np.cos(np.pi * x / L)
        raise ConfigurationError(f"unknown potential kind {self.kind!r}")

    def describe(self) -> str:
        ps = " ".join(f"{p:.17g}" for p in self.params)
        return f"{self.kind} {ps}".strip()


def constant_potential(domain: Domain) -> Potential:
    return Potential(domain, "constant", (), math.log(domain.volume))


def affine_potential(domain: Domain, slope: float) -> Potential:
    if domain.dim != 1:
        raise UnsupportedDomainError("affine potential only on intervals")
    L, s = domain.length, float(slope)
    if abs(s) < 1e-14:
        return constant_potential(domain)
    log_norm = math.log((math.exp(s * L) - 1.0) / s)
    return Potential(domain, "affine", (s,), log_norm)


def cosine_potential(domain: Domain, amplitude: float) -> Potential:
    if domain.dim != 1:
        raise UnsupportedDomainError("cosine potential only on intervals")
    L, a = domain.length, float(amplitude)
    val, _ = quad(lambda x: math.exp(a * math.cos(math.pi * x / L)), 0.0, L,
                  epsabs=1e-13, epsrel=1e-13)
    return Potential(domain, "cosine", (a,), math.log(val))


# ---------------------------------------------------------------------------
# grids


@dataclass(frozen=True)
class Grid:
    """Uniform tensor grid with trapezoid quadrature weights.

    ``nodes`` has shape (N,) on an interval and (N, d) on a box; ``weights``
    always has shape (N,) and sums to the domain volume.
    """

    domain: Domain
    nodes: np.ndarray
    weights: np.ndarray
    shape: tuple[int, ...]

    @property
    def n(self) -> int:
        return self.nodes.shape[0]

    def axis_nodes(self, axis: int) -> np.ndarray:
        L = self.domain.lengths[axis]
        return np.linspace(0.0, L, self.shape[axis])


def build_grid(domain: Domain, n: int) -> Grid:
    """Uniform grid with ``n`` nodes per axis (endpoints included)."""
    if n < 16:
        raise ConfigurationError(f"grid needs n >= 16 nodes per axis, got {n}")
    axes = []
    axis_w = []
    for L in domain.lengths:
        x = np.linspace(0.0, L, n)
        w = np.full(n, L / (n - 1))
        w[0] *= 0.5
        w[-1] *= 0.5
        axes.append(x)
        axis_w.append(w)
    if domain.dim == 1:
        return Grid(domain, axes[0], axis_w[0], (n,))
    mesh = np.meshgrid(*axes, indexing="ij")
    nodes = np.stack([m.ravel() for m in mesh], axis=-1)
    weights = axis_w[0]
    for w in axis_w[1:]:
        weights = np.outer(weights, w).ravel()
    return Grid(domain, nodes, weights, (n,) * domain.dim)


def _tiny_grid(domain: Domain, n: int) -> Grid:
    # test helper path for the 3-node example; bypasses the n >= 16 guard
    axes = np.linspace(0.0, domain.length, n)
    w = np.full(n, domain.length / (n - 1))
    w[0] *= 0.5
    w[-1] *= 0.5
    return Grid(domain, axes, w, (n,))


# ---------------------------------------------------------------------------
# spectral basis


@dataclass(frozen=True)
class SpectralBasis:
    """Truncated Dirichlet eigensystem of -(Delta + grad U . grad).

    ``phi`` holds eigenfunction values (mode-major), L2(mu)-normalized with
    ``phi[0] > 0`` on the interior.  ``ratio`` is phi_m / phi_0 with the
    boundary 0/0 filled by the continuous extension.  ``mu_weights`` is the
    quadrature rule for integrals against mu.
    """

    domain: Domain
    grid: Grid
    potential: Potential
    lambdas: np.ndarray          # (K,)
    phi: np.ndarray              # (K, N)
    mu_weights: np.ndarray       # (N,)
    ratio: np.ndarray            # (K, N)
    kind: str                    # "closed-form" | "fd" | "tensor"
    multi_index: Optional[np.ndarray] = None  # (K, d) for tensor bases

    @property
    def K(self) -> int:
        return int(self.lambdas.shape[0])

    @property
    def dim(self) -> int:
        return self.domain.dim

    @property
    def mu0_weights(self) -> np.ndarray:
        """Quadrature rule for integrals against mu0 = phi_0^2 mu."""
        return self.phi[0] ** 2 * self.mu_weights

    def mu_coeffs(self) -> np.ndarray:
        """mu(phi_m) for all modes."""
        return self.phi @ self.mu_weights


def _closed_form_ratio(K: int, phi: np.ndarray) -> np.ndarray:
    # interior nodes by direct division, boundary nodes by the ratio of
    # analytic slopes of sin((k+1) pi x / L) / sin(pi x / L)
    ks = np.arange(K)
    ratio = np.empty_like(phi)
    ratio[:, 1:-1] = phi[:, 1:-1] / phi[0, 1:-1]
    ratio[:, 0] = ks + 1.0
    ratio[:, -1] = (ks + 1.0) * (-1.0) ** ks
    return ratio


def _extrapolated_ratio(phi: np.ndarray) -> np.ndarray:
    # boundary values by one-sided 3-point (quadratic) extrapolation
    ratio = np.empty_like(phi)
    ratio[:, 1:-1] = phi[:, 1:-1] / phi[0, 1:-1]
    ratio[:, 0] = 3.0 * ratio[:, 1] - 3.0 * ratio[:, 2] + ratio[:, 3]
    ratio[:, -1] = 3.0 * ratio[:, -2] - 3.0 * ratio[:, -3] + ratio[:, -4]
    return ratio


def eigensystem_closed_form(length: float, K: int, grid: Grid) -> SpectralBasis:
    """Closed-form sine eigensystem for constant potential on an interval.

    lambda_k = ((k+1) pi / L)^2 and phi_k = sqrt(2) sin((k+1) pi x / L),
    which is already L2(mu)-normalized for mu = dx / L.
    """
    if grid.domain.dim != 1:
        raise UnsupportedDomainError("closed-form basis lives on an interval")
    if K < 1:
        raise ConfigurationError("need K >= 1 modes")
    if K > MAX_MODES:
        raise ConfigurationError(f"K capped at {MAX_MODES}")
    L = float(length)
    if abs(L - grid.domain.length) > 1e-12 * L:
        raise ConfigurationError("grid was built for a different length")
    x = grid.nodes
    ks = np.arange(K)
    lambdas = ((ks + 1) * np.pi / L) ** 2
    phi = math.sqrt(2.0) * np.sin(np.outer(ks + 1, x) * (np.pi / L))
    phi[:, 0] = 0.0
    phi[:, -1] = 0.0
    potential = constant_potential(grid.domain)
    mu_weights = np.exp(potential.u(x)) * grid.weights
    ratio = _closed_form_ratio(K, phi)
    return SpectralBasis(grid.domain, grid, potential, lambdas, phi,
                         mu_weights, ratio, "closed-form")


def eigensystem_fd(potential: Potential, grid: Grid, K: int) -> SpectralBasis:
    """Finite-difference Dirichlet eigensystem on an interval.

    Discretizes L f = e^{-U} (e^{U} f')' with second-order central
    differences (conductivities e^U at cell midpoints), symmetrizes with the
    diag(e^{U/2}) similarity transform, and solves the resulting symmetric
    tridiagonal problem.  Requires K <= n/4 so the top retained mode is
    still resolved.
    """
    if grid.domain.dim != 1:
        raise UnsupportedDomainError("finite-difference solver is 1-D only")
    if K < 1:
        raise ConfigurationError("need K >= 1 modes")
    n = grid.n
    if K > n // 4:
        raise ResolutionError(f"K={K} exceeds n/4={n // 4}; refine the grid")
    x = grid.nodes
    h = x[1] - x[0]
    U = potential.u(x)
    Umid = potential.u(0.5 * (x[:-1] + x[1:]))
    a = np.exp(Umid)                       # conductivity at midpoints
    # operator on interior nodes, Dirichlet rows dropped
    Ui = U[1:-1]
    diag = (a[:-1] + a[1:]) / h**2 * np.exp(-Ui)
    # similarity transform by diag(e^{U/2}) makes it symmetric tridiagonal
    off = -a[1:-1] / h**2 * np.exp(-0.5 * (Ui[:-1] + Ui[1:]))
    vals, vecs = eigh_tridiagonal(diag, off, select="i", select_range=(0, K - 1))
    phi = np.zeros((K, n))
    phi[:, 1:-1] = (vecs * np.exp(-Ui / 2.0)[:, None]).T
    mu_weights = np.exp(U) * grid.weights
    # discrete L2(mu) normalization and sign conventions
    norms = np.sqrt(np.einsum("kn,n,kn->k", phi, mu_weights, phi))
    phi /= norms[:, None]
    mid = n // 2
    if phi[0, mid] < 0:
        phi[0] *= -1.0
    for k in range(1, K):
        if phi[k, 1] < 0:   # sign of the first interior value ~ slope at 0
            phi[k] *= -1.0
    lambdas = np.asarray(vals, dtype=float)
    ratio = _extrapolated_ratio(phi)
    return SpectralBasis(grid.domain, grid, potential, lambdas, phi,
                         mu_weights, ratio, "fd")


def tensor_eigenvalues(factor_lambdas: Sequence[np.ndarray], K: int):
    """K smallest sums of per-axis eigenvalues with their multi-indices.

    Ties are broken lexicographically on the multi-index, so degenerate
    levels come out in a reproducible order.
    """
    sizes = [len(l) for l in factor_lambdas]
    total = int(np.prod(sizes))
    if K > total:
        raise ConfigurationError(
            f"K={K} exceeds the {total} available tensor modes")
    grids = np.meshgrid(*[np.arange(s) for s in sizes], indexing="ij")
    idx = np.stack([g.ravel() for g in grids], axis=-1)       # (total, d)
    sums = np.zeros(total)
    for ax, lams in enumerate(factor_lambdas):
        sums += np.asarray(lams)[idx[:, ax]]
    order = sorted(range(total), key=lambda i: (sums[i], tuple(idx[i])))
    order = np.asarray(order[:K])
    return sums[order], idx[order]


def tensor_basis(factors: Sequence[SpectralBasis], K: int) -> SpectralBasis:
    """Tensor-product basis on a box from interval factor bases."""
    if any(f.dim != 1 for f in factors):
        raise UnsupportedDomainError("tensor factors must be interval bases")
    if len(factors) < 2:
        raise ConfigurationError("tensor basis needs at least two factors")
    d = len(factors)
    lambdas, midx = tensor_eigenvalues([f.lambdas for f in factors], K)
    shape = tuple(f.grid.n for f in factors)
    N = int(np.prod(shape))
    if K * N > 80_000_000:
        raise ConfigurationError("tensor phi matrix would be too large")
    dom = box([f.domain.length for f in factors])
    mesh = np.meshgrid(*[f.grid.nodes for f in factors], indexing="ij")
    nodes = np.stack([m.ravel() for m in mesh], axis=-1)
    weights = factors[0].grid.weights
    for f in factors[1:]:
        weights = np.outer(weights, f.grid.weights).ravel()
    grid = Grid(dom, nodes, weights, shape)
    for f in factors:
        if f.potential.kind != "constant":
            raise UnsupportedDomainError("box bases support constant U only")
    potential = constant_potential(dom)
    mu_weights = np.exp(potential.u(nodes)) * weights

    phi = np.ones((K, N))
    ratio = np.ones((K, N))
    for ax in range(d):
        rows_phi = factors[ax].phi[midx[:, ax]]       # (K, n_ax)
        rows_rat = factors[ax].ratio[midx[:, ax]]
        expand = [1] * d
        expand[ax] = shape[ax]
        for k in range(K):
            phi[k] *= np.broadcast_to(
                rows_phi[k].reshape(expand), shape).ravel()
            ratio[k] *= np.broadcast_to(
                rows_rat[k].reshape(expand), shape).ravel()
    return SpectralBasis(dom, grid, potential, lambdas, phi, mu_weights,
                         ratio, "tensor", multi_index=midx)


# ---------------------------------------------------------------------------
# measure projections


def project_density(basis: SpectralBasis, h: np.ndarray) -> np.ndarray:
    """Coefficients integral(phi_m h) dmu of a density h w.r.t. mu."""
    h = np.asarray(h, dtype=float)
    if h.shape != (basis.grid.n,):
        raise ConfigurationError("density values must live on the basis grid")
    if np.any(h < -1e-12):
        raise ConfigurationError("density must be nonnegative")
    mass = float(np.dot(h, basis.mu_weights))
    if abs(mass - 1.0) > 1e-8:
        raise ConfigurationError(f"density integrates to {mass!r}, not 1")
    return basis.phi @ (h * basis.mu_weights)


def project_dirac(basis: SpectralBasis, x0: float) -> np.ndarray:
    """Coefficients phi_m(x0) by local cubic interpolation on the grid."""
    if basis.dim != 1:
        raise UnsupportedDomainError("Dirac projection implemented on intervals")
    x = basis.grid.nodes
    L = basis.domain.length
    if not (0.0 < x0 < L):
        raise ConfigurationError(
            "Dirac mass must sit strictly inside the domain")
    i = int(np.searchsorted(x, x0))
    lo = min(max(i - 2, 0), basis.grid.n - 4)
    xs = x[lo:lo + 4]
    vals = np.zeros(basis.K)
    for j in range(4):
        lj = 1.0
        for l in range(4):
            if l != j:
                lj *= (x0 - xs[l]) / (xs[j] - xs[l])
        vals += lj * basis.phi[:, lo + j]
    return vals


# ---------------------------------------------------------------------------
# diagnostics


def orthonormality_residual(basis: SpectralBasis) -> float:
    """max_{j,k} | integral(phi_j phi_k) dmu - delta_jk | on the grid rule."""
    G = np.einsum("jn,n,kn->jk", basis.phi, basis.mu_weights, basis.phi)
    return float(np.abs(G - np.eye(basis.K)).max())


def weyl_fit(basis: SpectralBasis) -> float:
    """Smallest a >= 1 with a^-1 k^{2/d} <= lambda_k - lambda_0 <= a k^{2/d}."""
    k = np.arange(1, basis.K)
    gap = basis.lambdas[1:] - basis.lambdas[0]
    r = gap / k ** (2.0 / basis.dim)
    return float(max(1.0, r.max(), (1.0 / r).max()))


def supnorm_growth_fit(basis: SpectralBasis) -> float:
    """Smallest c with ||phi_k||_inf <= c sqrt(k) for 1 <= k < K."""
    k = np.arange(1, basis.K)
    sup = np.abs(basis.phi[1:]).max(axis=1)
    return float((sup / np.sqrt(k)).max())


def ratio_supnorm_fit(basis: SpectralBasis) -> float:
    """Smallest c with ||phi_k phi_0^{-1}||_inf <= c k^{(d+2)/(2d)}."""
    k = np.arange(1, basis.K)
    sup = np.abs(basis.ratio[1:]).max(axis=1)
    return float((sup / k ** ((basis.dim + 2.0) / (2.0 * basis.dim))).max())


def bessel_defect(basis: SpectralBasis) -> float:
    """sum_{m>=1} mu(phi_m)^2, which Bessel bounds by 1."""
    c = basis.mu_coeffs()
    return float(np.sum(c[1:] ** 2))


# ---------------------------------------------------------------------------
# versioned text export / import


_FORMAT_TAG = "qsdlab-basis v1"


def _fmt(v: float) -> str:
    return f"{v:.17g}"


def save_basis(basis: SpectralBasis, path: str) -> None:
    """Write a basis as a versioned columnar text file (17 digit doubles)."""
    if basis.kind == "tensor":
        raise UnsupportedDomainError("tensor bases are rebuilt from factors, "
                                     "not exported")
    buf = io.StringIO()
    buf.write(f"#{_FORMAT_TAG}\n")
    buf.write(f"#domain interval {_fmt(basis.domain.length)}\n")
    buf.write(f"#potential {basis.potential.describe()}\n")
    buf.write(f"#n {basis.grid.n}\n")
    buf.write(f"#K {basis.K}\n")
    buf.write(f"#kind {basis.kind}\n")
    buf.write("#modes k lambda\n")
    for k in range(basis.K):
        buf.write(f"{k} {_fmt(basis.lambdas[k])}\n")
    buf.write("#muweights\n")
    for v in basis.mu_weights:
        buf.write(_fmt(v) + "\n")
    buf.write("#phi node-by-mode\n")
    for i in range(basis.grid.n):
        buf.write(" ".join(_fmt(v) for v in basis.phi[:, i]) + "\n")
    with open(path, "w") as fh:
        fh.write(buf.getvalue())


def load_basis(path: str) -> SpectralBasis:
    with open(path) as fh:
        lines = fh.read().splitlines()
    try:
        if lines[0] != f"#{_FORMAT_TAG}":
            raise ConfigurationError(
                f"{path}: not a {_FORMAT_TAG} file (got {lines[0]!r})")
        dom_parts = lines[1].split()
        if dom_parts[0] != "#domain" or dom_parts[1] != "interval":
            raise ConfigurationError(f"{path}: unsupported domain line")
        dom = interval(float(dom_parts[2]))
        pot_parts = lines[2].split()
        if pot_parts[0] != "#potential":
            raise ConfigurationError(f"{path}: missing potential line")
        potential = _potential_from_parts(dom, pot_parts[1:])
        n = int(lines[3].split()[1])
        K = int(lines[4].split()[1])
        kind = lines[5].split()[1]
        row = 7
        lambdas = np.empty(K)
        for k in range(K):
            parts = lines[row].split()
            lambdas[int(parts[0])] = float(parts[1])
            row += 1
        row += 1  # "#muweights"
        mu_weights = np.array([float(lines[row + i]) for i in range(n)])
        row += n + 1  # values and "#phi" marker
        phi = np.empty((K, n))
        for i in range(n):
            phi[:, i] = np.fromstring(lines[row + i], sep=" ")
    except (IndexError, ValueError) as exc:
        raise ConfigurationError(f"{path}: corrupted basis file ({exc})") from exc
    grid = build_grid(dom, n) if n >= 16 else _tiny_grid(dom, n)
    if kind == "closed-form":
        ratio = _closed_form_ratio(K, phi)
    else:
        ratio = _extrapolated_ratio(phi)
    return SpectralBasis(dom, grid, potential, lambdas, phi, mu_weights,
                         ratio, kind)


def _potential_from_parts(dom: Domain, parts: list[str]) -> Potential:
    kind = parts[0]
    if kind == "constant":
        return constant_potential(dom)
    if kind == "affine":
        return affine_potential(dom, float(parts[1]))
    if kind == "cosine":
        return cosine_potential(dom, float(parts[1]))
    raise ConfigurationError(f"unknown potential kind {kind!r} in basis file")
