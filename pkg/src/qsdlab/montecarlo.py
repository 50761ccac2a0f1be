"""Independent stochastic oracle: subordinator sampling, killed diffusion
paths, and conditional empirical histograms.

Randomness is counter-based (Philox) and keyed by (seed, stream), so any
stream replays identically no matter how work is scheduled.  The batched
estimator keys one stream per fixed-size path block and merges block
results in block order, which makes histograms bit-identical across thread
counts.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .bernstein import BernsteinFunction
from .conditional import GridMeasure
from .errors import ConfigurationError, SurvivalError, UnsupportedDomainError
from .semigroup import InitialDistribution, survival_scaled
from .spectral import Potential, SpectralBasis
from .transport import quantile_table

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class RngStream:
    """Reproducible counter-based stream: (seed, id) fully determine draws."""

    seed: int
    stream_id: int

    def generator(self) -> np.random.Generator:
        key = ((self.seed & _MASK64) << 64) | (self.stream_id & _MASK64)
        return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True)
class PathRecord:
    """One subordinated path: base positions sampled at the subordinator
    clock, the base hitting time, and the survival indicator."""

    obs_times: np.ndarray            # s_j in [0, t]
    sub_values: Optional[np.ndarray]  # S_{s_j}, None for base-only records
    positions: np.ndarray
    tau: float                       # +inf when the boundary was never hit
    survived: Optional[bool]


# ---------------------------------------------------------------------------
# subordinator sampling


def sample_stable_increment(alpha: float, dt: float,
                            rng: np.random.Generator,
                            size=None):
    """One-sided stable draw with E exp(-l S) = exp(-dt l^alpha).

    Kanter's representation: with V uniform on (0, pi) and W standard
    exponential,
        S = dt^{1/alpha} sin(a V) sin((1-a) V)^{(1-a)/a}
            / (sin(V)^{1/a} W^{(1-a)/a}).
    alpha = 1 degenerates to the deterministic drift dt.
    """
    if not (0.0 < alpha <= 1.0):
        raise ConfigurationError("stable increment needs alpha in (0, 1]")
    if np.any(np.asarray(dt) <= 0.0):
        raise ConfigurationError("stable increment needs dt > 0")
    if alpha == 1.0:
        out = np.broadcast_to(np.asarray(dt, dtype=float), size or ()).copy()
        return float(out) if size is None else out
    shape = () if size is None else size
    v = rng.uniform(0.0, np.pi, size=shape)
    w = rng.standard_exponential(size=shape)
    a = alpha
    s1 = (np.sin(a * v) / np.sin(v) ** (1.0 / a)
          * (np.sin((1.0 - a) * v) / w) ** ((1.0 - a) / a))
    out = np.asarray(dt, dtype=float) ** (1.0 / a) * s1
    return float(out) if size is None else out


def sample_subordinator_increments(bern: BernsteinFunction, gaps: np.ndarray,
                                   rng: np.random.Generator,
                                   n_paths: Optional[int] = None) -> np.ndarray:
    """Independent increments over consecutive gaps, shape (n_paths, len(gaps))."""
    gaps = np.asarray(gaps, dtype=float)
    if np.any(gaps < 0.0):
        raise ConfigurationError("time gaps must be nonnegative")
    shape = (len(gaps),) if n_paths is None else (n_paths, len(gaps))
    if bern.kind == "linear":
        (c,) = bern.params
        return np.broadcast_to(c * gaps, shape).copy()
    if bern.kind == "stable-drift":
        b, c, alpha = bern.params
        out = np.broadcast_to(b * gaps, shape).copy()
        pos = gaps > 0.0
        if alpha == 1.0:
            out[..., pos] += c * gaps[pos]
        else:
            scaled_dt = np.broadcast_to((c * gaps[pos]), out[..., pos].shape)
            out[..., pos] += sample_stable_increment(
                alpha, 1.0, rng, size=out[..., pos].shape) * scaled_dt ** (1.0 / alpha)
        return out
    if bern.kind == "compound-poisson-drift":
        b, rate, theta = bern.params
        out = np.broadcast_to(b * gaps, shape).copy()
        n_jumps = rng.poisson(rate * np.broadcast_to(gaps, shape))
        # Gamma(n, 1/theta) is the sum of n Exp(theta) jumps; gamma(0) = 0
        out = out + rng.gamma(n_jumps.astype(float)) / theta
        return out
    raise UnsupportedDomainError(
        f"cannot sample subordinator of kind {bern.kind!r}; "
        "use the spectral pipeline instead")


def sample_subordinator_path(bern: BernsteinFunction, times: np.ndarray,
                             rng: np.random.Generator) -> np.ndarray:
    """Subordinator values at sorted times (starting from S_0 = 0)."""
    times = np.asarray(times, dtype=float)
    if np.any(times < 0.0) or np.any(np.diff(times) < 0.0):
        raise ConfigurationError("times must be sorted and nonnegative")
    gaps = np.diff(np.concatenate([[0.0], times]))
    inc = sample_subordinator_increments(bern, gaps, rng)
    return np.cumsum(inc)


# ---------------------------------------------------------------------------
# killed diffusion (Euler-Maruyama with bridge crossing correction)


def _step_kill(pos, new, length, dt, rng, bridge):
    """Kill decisions for one Euler step; positions assumed inside before.

    With diffusion coefficient 2 the bridge-minimum law gives crossing
    probability exp(-a b / dt) for the lower boundary (and mirrored above);
    the step survives with the product of the two non-crossing factors.
    """
    dead = (new <= 0.0) | (new >= length)
    if bridge:
        inside = ~dead
        if inside.any():
            a, b = pos[inside], new[inside]
            p_surv = (-np.expm1(-a * b / dt)) \
                * (-np.expm1(-(length - a) * (length - b) / dt))
            u = rng.random(size=a.shape)
            tmp = dead[inside]
            tmp |= u > p_surv
            dead[inside] = tmp
    return dead


def simulate_killed_path(potential: Potential, x0: float, step_size: float,
                         horizon: float, rng: np.random.Generator,
                         record_every: int = 1,
                         bridge: bool = True) -> PathRecord:
    """One base diffusion path dX = grad U dt + sqrt(2) dW, killed at the
    interval boundary, with per-step Brownian-bridge crossing correction."""
    dom = potential.domain
    if dom.dim != 1:
        raise UnsupportedDomainError("path simulation is 1-D only")
    L = dom.length
    if not (0.0 < x0 < L):
        raise ConfigurationError("start point must be strictly interior")
    if step_size > 1e-3 * L * L:
        raise ConfigurationError("step size must be <= 1e-3 L^2")
    n_steps = int(math.ceil(horizon / step_size))
    pos = np.array([x0])
    times, xs = [0.0], [x0]
    tau = math.inf
    root2dt = math.sqrt(2.0 * step_size)
    for k in range(1, n_steps + 1):
        new = pos + potential.grad(pos) * step_size \
            + root2dt * rng.standard_normal(1)
        dead = _step_kill(pos, new, L, step_size, rng, bridge)
        if dead[0]:
            tau = k * step_size
            break
        pos = new
        if k % record_every == 0:
            times.append(k * step_size)
            xs.append(float(pos[0]))
    return PathRecord(np.asarray(times), None, np.asarray(xs), tau, None)


def survival_probability_mc(potential: Potential, x0: float, s: float,
                            n_paths: int, seed: int, step_size: float,
                            bridge: bool = True,
                            batch: int = 20000) -> tuple[float, float]:
    """P^{x0}(tau > s) by vectorized Euler paths; returns (estimate, se)."""
    L = potential.domain.length
    n_steps = int(math.ceil(s / step_size))
    root2dt = math.sqrt(2.0 * step_size)
    alive_total = 0
    done = 0
    block = 0
    while done < n_paths:
        nb = min(batch, n_paths - done)
        rng = RngStream(seed, block).generator()
        pos = np.full(nb, x0)
        alive = np.ones(nb, dtype=bool)
        for _ in range(n_steps):
            if not alive.any():
                break
            cur = pos[alive]
            new = cur + potential.grad(cur) * step_size \
                + root2dt * rng.standard_normal(cur.shape)
            dead = _step_kill(cur, new, L, step_size, rng, bridge)
            pos[alive] = np.where(dead, cur, new)
            idx = np.flatnonzero(alive)
            alive[idx[dead]] = False
        alive_total += int(alive.sum())
        done += nb
        block += 1
    p = alive_total / n_paths
    return p, math.sqrt(max(p * (1.0 - p), 1e-300) / n_paths)


# ---------------------------------------------------------------------------
# conditional empirical measure by rejection


@dataclass(frozen=True)
class MCResult:
    bin_edges: np.ndarray
    bin_mass: np.ndarray            # normalized over surviving time samples
    survival_fraction: float
    survival_se: float
    n_paths: int
    n_survivors: int
    effective_samples: int          # surviving paths x time samples
    seed: int

    def histogram_measure(self) -> GridMeasure:
        """Bin-center step density w.r.t. Lebesgue as a GridMeasure."""
        centers = 0.5 * (self.bin_edges[1:] + self.bin_edges[:-1])
        widths = np.diff(self.bin_edges)
        return GridMeasure(centers, self.bin_mass / widths, "lebesgue",
                           np.ones_like(centers), widths)


N_OBS_DEFAULT = 512
MIN_EXPECTED_SURVIVAL = 1e-3


def _initial_sampler(basis: SpectralBasis, nu: InitialDistribution):
    if nu.kind == "dirac":
        x0 = nu.x0
        return lambda rng, nb: np.full(nb, x0)
    eU = np.exp(basis.potential.u(basis.grid.nodes))
    qt = quantile_table(GridMeasure(basis.grid.nodes, nu.h * eU, "lebesgue",
                                    np.ones(basis.grid.n), basis.grid.weights))
    return lambda rng, nb: qt.quantile(rng.random(nb))


def _batch_conditional(basis, bern, nu_sampler, t, nb, block_id, seed,
                       step_size, bins, n_obs, bridge, thin_stride=0):
    rng = RngStream(seed, block_id).generator()
    L = basis.domain.length
    # subordinator at n_obs midpoints of [0, t] plus the endpoint t
    s_grid = (np.arange(n_obs) + 0.5) * (t / n_obs)
    gaps = np.diff(np.concatenate([[0.0], s_grid, [t]]))
    inc = sample_subordinator_increments(bern, gaps, rng, n_paths=nb)
    S = np.cumsum(inc, axis=1)
    S_obs, S_t = S[:, :-1], S[:, -1]

    pos = nu_sampler(rng, nb)
    alive = np.ones(nb, dtype=bool)
    survived = np.zeros(nb, dtype=bool)
    ptr = np.zeros(nb, dtype=np.int64)
    hist = np.zeros((nb, bins), dtype=np.int64)
    hist_thin = np.zeros((nb, bins), dtype=np.int64) if thin_stride else None
    tau = np.full(nb, np.inf)

    root2dt = math.sqrt(2.0 * step_size)
    scale = bins / L
    step_cap = int(400.0 * L * L / step_size)   # survival there is ~ e^-400
    k = 0
    while alive.any():
        k += 1
        if k > step_cap:
            raise RuntimeError("killed-path loop exceeded its safety cap")
        u_now = k * step_size
        idx = np.flatnonzero(alive)
        cur = pos[idx]
        new = cur + basis.potential.grad(cur) * step_size \
            + root2dt * rng.standard_normal(cur.shape)
        dead = _step_kill(cur, new, L, step_size, rng, bridge)
        new = np.where(dead, cur, new)
        pos[idx] = new
        tau[idx[dead]] = u_now
        alive[idx[dead]] = False

        # record observations whose subordinator clock fell in this step
        while True:
            live = np.flatnonzero(alive & (ptr < n_obs))
            if live.size == 0:
                break
            due = S_obs[live, ptr[live]] <= u_now
            if not due.any():
                break
            who = live[due]
            cells = np.clip((pos[who] * scale).astype(np.int64), 0, bins - 1)
            np.add.at(hist, (who, cells), 1)
            if thin_stride:
                sel = ptr[who] % thin_stride == 0
                if sel.any():
                    np.add.at(hist_thin, (who[sel], cells[sel]), 1)
            ptr[who] += 1

        finished = alive & (S_t <= u_now)
        if finished.any():
            survived |= finished
            alive &= ~finished
    thin = hist_thin[survived].sum(axis=0) if thin_stride else None
    return (hist[survived].sum(axis=0), int(survived.sum()), survived, tau,
            thin)


def mc_conditional_empirical(basis: SpectralBasis, bern: BernsteinFunction,
                             nu: InitialDistribution, t: float, n_paths: int,
                             bins: int, seed: int,
                             step_size: Optional[float] = None,
                             n_obs: int = N_OBS_DEFAULT,
                             threads: int = 1,
                             bridge: bool = True,
                             batch: int = 20000) -> MCResult:
    """Conditional occupation histogram by rejection on survival.

    Refuses configurations whose spectral survival probability is below
    1e-3; the spectral pipeline is the tool for rare-survival regimes.
    """
    if n_paths < 10_000:
        raise ConfigurationError("need at least 1e4 paths")
    if basis.domain.dim != 1:
        raise UnsupportedDomainError("MC estimator is 1-D only")
    L = basis.domain.length
    if step_size is None:
        step_size = 1e-3 * L * L
    if step_size > 1e-3 * L * L:
        raise ConfigurationError("step size must be <= 1e-3 L^2")
    q = survival_scaled(basis, bern, nu, t)
    expected = q * math.exp(-bern(basis.lambdas[0]) * t)
    if expected < MIN_EXPECTED_SURVIVAL:
        raise SurvivalError(
            f"expected survival {expected:.2e} below {MIN_EXPECTED_SURVIVAL}; "
            "use the spectral pipeline for this regime")
    nu_sampler = _initial_sampler(basis, nu)
    blocks = []
    off = 0
    bid = 0
    while off < n_paths:
        nb = min(batch, n_paths - off)
        blocks.append((nb, bid))
        off += nb
        bid += 1

    def run(args):
        nb, block_id = args
        return _batch_conditional(basis, bern, nu_sampler, t, nb, block_id,
                                  seed, step_size, bins, n_obs, bridge)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(run, blocks))
    else:
        results = [run(b) for b in blocks]

    hist = np.zeros(bins, dtype=np.int64)
    n_surv = 0
    for h, ns, _, _, _ in results:     # merged in block order
        hist += h
        n_surv += ns
    frac = n_surv / n_paths
    se = math.sqrt(max(frac * (1.0 - frac), 1e-300) / n_paths)
    total = int(hist.sum())
    mass = hist / total if total > 0 else hist.astype(float)
    edges = np.linspace(0.0, L, bins + 1)
    return MCResult(edges, mass, frac, se, n_paths, n_surv,
                    n_surv * n_obs, seed)


def sgrid_bias_probe(basis: SpectralBasis, bern: BernsteinFunction,
                     nu: InitialDistribution, t: float, n_paths: int,
                     bins: int, seed: int, step_size: float,
                     n_obs: int = 2 * N_OBS_DEFAULT,
                     batch: int = 20000) -> float:
    """TV moved by doubling the observation-grid resolution.

    One run at the doubled resolution is binned twice, from all
    observations and from every second one, so the comparison isolates the
    time-average quadrature effect from path-to-path noise.
    """
    nu_sampler = _initial_sampler(basis, nu)
    hist = np.zeros(bins, dtype=np.int64)
    thin = np.zeros(bins, dtype=np.int64)
    off = 0
    block = 0
    while off < n_paths:
        nb = min(batch, n_paths - off)
        h, _, _, _, th = _batch_conditional(
            basis, bern, nu_sampler, t, nb, block, seed, step_size, bins,
            n_obs, True, thin_stride=2)
        hist += h
        thin += th
        off += nb
        block += 1
    p = hist / hist.sum()
    q = thin / thin.sum()
    return float(np.abs(p - q).sum())


def bin_masses_from_measure(m: GridMeasure, edges: np.ndarray) -> np.ndarray:
    """Exact bin masses of a piecewise-linear 1-D Lebesgue density."""
    f = m.lebesgue_density()
    x = m.nodes
    cell = 0.5 * (f[1:] + f[:-1]) * np.diff(x)
    cdf_nodes = np.concatenate([[0.0], np.cumsum(cell)])
    total = cdf_nodes[-1]
    qt_cdf = np.interp(edges, x, cdf_nodes / total)
    qt_cdf[0], qt_cdf[-1] = 0.0, 1.0
    return np.diff(qt_cdf)


def tv_histogram(mc: MCResult, spectral: GridMeasure) -> float:
    """Total variation between an MC histogram and a spectral density,
    both reduced to the histogram bins (paper convention, max value 2)."""
    target = bin_masses_from_measure(spectral, mc.bin_edges)
    return float(np.abs(mc.bin_mass - target).sum())
