import numpy as np
import pytest

from qsdlab.conditional import lebesgue_measure, mu0_measure
from qsdlab.errors import ConfigurationError
from qsdlab.transport import (h1_dual_energy, quantile_table, w1_quantile_1d,
                              w2_discrete, w2_quantile_1d)


def measure_on(nodes, dens, weights):
    dens = np.asarray(dens, dtype=float)
    mass = float(np.dot(dens, weights))
    return lebesgue_measure(nodes, dens / mass, weights)


def unit_grid(n=2001):
    x = np.linspace(0.0, 1.0, n)
    w = np.full(n, 1.0 / (n - 1))
    w[0] *= 0.5
    w[-1] *= 0.5
    return x, w


# ---------------------------------------------------------------------------
# quantile transport


def test_identical_measures_zero():
    x, w = unit_grid(501)
    m = measure_on(x, 1.0 + 0.5 * np.sin(2 * np.pi * x), w)
    assert w2_quantile_1d(m, m) == 0.0


def test_triangle_vs_uniform_exact():
    # f1 = 2x against f2 = 1 on [0,1]: W2^2 = int (sqrt(u) - u)^2 du = 1/30;
    # both densities are exactly piecewise linear, so the solver is exact
    x, w = unit_grid(401)
    m1 = measure_on(x, 2.0 * x, w)
    m2 = measure_on(x, np.ones_like(x), w)
    got = w2_quantile_1d(m1, m2)
    assert abs(got - 0.18257418583505536) <= 1e-12


def test_uniform_vs_half_uniform():
    x, w = unit_grid(2001)
    m1 = measure_on(x, np.ones_like(x), w)
    half = np.where(x < 0.5, 2.0, np.where(x > 0.5, 0.0, 1.0))
    m2 = measure_on(x, half, w)
    got = w2_quantile_1d(m1, m2)
    assert abs(got - 0.2886751345948129) <= 1e-3   # jump smeared over one cell


def test_near_dirac_bumps():
    x, w = unit_grid(4001)
    a, b = 0.3, 0.8
    for width in (0.02, 0.01, 0.005):
        f1 = np.maximum(0.0, 1.0 - np.abs(x - a) / width)
        f2 = np.maximum(0.0, 1.0 - np.abs(x - b) / width)
        got = w2_quantile_1d(measure_on(x, f1, w), measure_on(x, f2, w))
        assert abs(got - abs(a - b)) <= 1e-12      # translated shapes


def test_unnormalized_rejected():
    x, w = unit_grid(101)
    m = lebesgue_measure(x, np.full_like(x, 2.0), w)
    with pytest.raises(ConfigurationError):
        w2_quantile_1d(m, m)


def test_quantile_table_is_monotone_cdf(basis_pi):
    qt = quantile_table(mu0_measure(basis_pi))
    assert qt.cdf[0] == 0.0
    assert abs(qt.cdf[-1] - 1.0) <= 1e-12
    assert np.all(np.diff(qt.cdf) >= 0.0)
    u = np.linspace(0.0, 1.0, 1001)
    q = qt.quantile(u)
    assert np.all(np.diff(q) >= -1e-14)


# ---------------------------------------------------------------------------
# discrete LP oracle


def test_discrete_two_diracs():
    val, plan = w2_discrete(np.array([0.2]), np.array([1.0]),
                            np.array([0.9]), np.array([1.0]))
    assert abs(val - 0.7) <= 1e-12
    assert plan.mass.sum() == pytest.approx(1.0)
    assert plan.marginal_residual <= 1e-9
    assert plan.dual_gap <= 1e-9


def test_discrete_matches_quantile():
    x, w = unit_grid(2001)
    m1 = measure_on(x, np.ones_like(x), w)
    half = np.where(x < 0.5, 2.0, np.where(x > 0.5, 0.0, 1.0))
    m2 = measure_on(x, half, w)
    ref = w2_quantile_1d(m1, m2)
    pts = np.linspace(0.0025, 0.9975, 200)
    spacing = pts[1] - pts[0]
    w1 = np.interp(pts, x, m1.dens)
    w2_ = np.interp(pts, x, m2.dens)
    val, plan = w2_discrete(pts, w1 / w1.sum(), pts, w2_ / w2_.sum())
    assert abs(val - ref) <= 2.0 * spacing
    assert plan.dual_gap <= 1e-9


def test_discrete_symmetry_and_triangle():
    rng = np.random.default_rng(9)
    pts = [rng.uniform(0, 1, 40) for _ in range(3)]
    ws = []
    for _ in range(3):
        v = rng.uniform(0.1, 1.0, 40)
        ws.append(v / v.sum())
    d01, _ = w2_discrete(pts[0], ws[0], pts[1], ws[1])
    d10, _ = w2_discrete(pts[1], ws[1], pts[0], ws[0])
    d02, _ = w2_discrete(pts[0], ws[0], pts[2], ws[2])
    d12, _ = w2_discrete(pts[1], ws[1], pts[2], ws[2])
    assert abs(d01 - d10) <= 1e-12
    assert d02 <= d01 + d12 + 1e-9


def test_discrete_2d_points():
    a = np.array([[0.0, 0.0], [1.0, 0.0]])
    b = np.array([[0.0, 1.0], [1.0, 1.0]])
    val, plan = w2_discrete(a, np.array([0.5, 0.5]), b, np.array([0.5, 0.5]))
    assert abs(val - 1.0) <= 1e-12


def test_discrete_support_cap():
    pts = np.linspace(0, 1, 401)
    w = np.full(401, 1.0 / 401)
    with pytest.raises(ConfigurationError):
        w2_discrete(pts, w, pts, w)


# ---------------------------------------------------------------------------
# spectral upper bounds


def test_w2_upper_bound_spectral(basis_pi):
    # W2(f mu0, mu0)^2 <= 4 sum c_m^2/(lambda_m - lambda_0) for
    # f = 1 + sum c_m phi_m phi_0^{-1}
    rng = np.random.default_rng(21)
    mu0 = mu0_measure(basis_pi)
    for _ in range(5):
        c = np.zeros(basis_pi.K)
        c[1:11] = rng.normal(size=10)
        bump = c @ basis_pi.ratio
        c *= 0.5 / np.abs(bump).max()      # keep the density above 1/2
        f = 1.0 + c @ basis_pi.ratio
        assert f.min() > 0.0
        m = lebesgue_measure(basis_pi.grid.nodes,
                             f * mu0.dens / np.dot(f * mu0.dens,
                                                   basis_pi.grid.weights),
                             basis_pi.grid.weights)
        w2 = w2_quantile_1d(m, mu0)
        assert w2 ** 2 <= 4.0 * h1_dual_energy(basis_pi, c) + 1e-12


def test_w2_log_mean_bound_spectral(basis_pi):
    # W2(f0 mu0, f1 mu0)^2 <= energy(c0 - c1) / inf min(f0, f1) with the
    # logarithmic-mean weight replaced by its constant lower bound
    rng = np.random.default_rng(22)
    mu0 = mu0_measure(basis_pi)
    w = basis_pi.grid.weights
    for _ in range(5):
        c0 = np.zeros(basis_pi.K)
        c1 = np.zeros(basis_pi.K)
        c0[1:11] = rng.normal(size=10)
        c1[1:11] = rng.normal(size=10)
        c0 *= 0.5 / np.abs(c0 @ basis_pi.ratio).max()
        c1 *= 0.5 / np.abs(c1 @ basis_pi.ratio).max()
        f0 = 1.0 + c0 @ basis_pi.ratio
        f1 = 1.0 + c1 @ basis_pi.ratio
        assert f0.min() > 0.0 and f1.min() > 0.0
        m0 = lebesgue_measure(basis_pi.grid.nodes,
                              f0 * mu0.dens / np.dot(f0 * mu0.dens, w), w)
        m1 = lebesgue_measure(basis_pi.grid.nodes,
                              f1 * mu0.dens / np.dot(f1 * mu0.dens, w), w)
        w2 = w2_quantile_1d(m0, m1)
        bound = h1_dual_energy(basis_pi, c0 - c1) / min(f0.min(), f1.min())
        assert w2 ** 2 <= bound + 1e-12


def test_w1_sanity():
    x, w = unit_grid(1001)
    m1 = measure_on(x, np.ones_like(x), w)
    f2 = np.maximum(0.0, 1.0 - np.abs(x - 0.5) * 4)
    m2 = measure_on(x, f2, w)
    assert 0.0 < w1_quantile_1d(m1, m2) <= w2_quantile_1d(m1, m2) + 1e-12


def test_plan_dump(tmp_path):
    val, plan = w2_discrete(np.array([0.1, 0.9]), np.array([0.5, 0.5]),
                            np.array([0.2, 0.8]), np.array([0.5, 0.5]))
    from qsdlab.transport import dump_plan
    p = tmp_path / "plan.csv"
    dump_plan(plan, str(p))
    lines = p.read_text().splitlines()
    assert lines[0] == "#schema=qsdlab/1"
    assert lines[1] == "i,j,mass,cost"
    assert len(lines) == 2 + len(plan.mass)


from hypothesis import given, settings, strategies as st


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(0.05, 3.0), min_size=4, max_size=8),
       st.lists(st.floats(0.05, 3.0), min_size=4, max_size=8),
       st.lists(st.floats(0.05, 3.0), min_size=4, max_size=8))
def test_w2_metric_properties(raw1, raw2, raw3):
    x, w = unit_grid(257)
    ms = []
    for raw in (raw1, raw2, raw3):
        knots = np.linspace(0.0, 1.0, len(raw))
        dens = np.interp(x, knots, raw)
        ms.append(measure_on(x, dens, w))
    d12 = w2_quantile_1d(ms[0], ms[1])
    d21 = w2_quantile_1d(ms[1], ms[0])
    d13 = w2_quantile_1d(ms[0], ms[2])
    d23 = w2_quantile_1d(ms[1], ms[2])
    assert d12 == d21
    assert d12 >= 0.0
    assert d13 <= d12 + d23 + 1e-9
    assert w2_quantile_1d(ms[0], ms[0]) == 0.0
