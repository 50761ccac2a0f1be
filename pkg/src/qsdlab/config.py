"""Experiment configuration: a strict TOML schema.

Unknown keys anywhere are errors (silent typos would invalidate runs), and
every tolerance used by the assertion layer lives here with its default, so
a run is auditable from its config alone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields

try:
    import tomllib
except ModuleNotFoundError:                      # Python 3.10
    import tomli as tomllib

from .errors import ConfigurationError


@dataclass(frozen=True)
class DomainConfig:
    kind: str = "interval"
    length: float = math.pi
    lengths: tuple[float, ...] = ()


@dataclass(frozen=True)
class PotentialConfig:
    kind: str = "constant"
    slope: float = 0.0
    amplitude: float = 0.0


@dataclass(frozen=True)
class GridConfig:
    n: int = 2001


@dataclass(frozen=True)
class BasisConfig:
    method: str = "closed-form"   # or "fd"
    k: int = 256
    kcross: int = 128


@dataclass(frozen=True)
class BernsteinConfig:
    kind: str = "stable-drift"
    b: float = 0.0
    c: float = 1.0
    alpha: float = 0.5
    rate: float = 1.0
    theta: float = 1.0


@dataclass(frozen=True)
class InitialConfig:
    kind: str = "mu0"             # "mu" | "dirac"
    x0: float = math.pi / 2.0


@dataclass(frozen=True)
class TimesConfig:
    values: tuple[float, ...] = (5.0, 10.0, 20.0, 40.0)


@dataclass(frozen=True)
class RegularizationConfig:
    beta: float = 0.8
    enabled: bool = False


@dataclass(frozen=True)
class TransportConfig:
    method: str = "quantile"      # or "discrete"


@dataclass(frozen=True)
class MonteCarloConfig:
    enabled: bool = False
    n_paths: int = 200_000
    seed: int = 20_240_601
    bins: int = 64
    step_size: float = 2e-3
    t: float = 2.0
    n_obs: int = 512


@dataclass(frozen=True)
class OutputConfig:
    dir: str = "out"


@dataclass(frozen=True)
class AssertionsConfig:
    limit_ratio_lo: float = 0.9
    limit_ratio_hi: float = 1.1
    monotone_ratio: bool = True
    tv_final_max: float = 0.01
    monotone_tv: bool = True
    check_theorem12: bool = True
    upper_bound_slack: float = 0.05
    upper_bound_from: float = 10.0


@dataclass(frozen=True)
class TolerancesConfig:
    orthonormality: float = 1e-8
    orthonormality_fd: float = 1e-5
    zero_mean: float = 1e-8
    mass: float = 1e-8
    semigroup_law: float = 1e-10
    linear_reduction: float = 1e-12
    decomposition: float = 1e-8
    markov_shift: float = 1e-10
    xi_quadrature: float = 1e-10
    mc_tv: float = 0.05
    mc_sigma: float = 3.0
    dual_gap: float = 1e-9
    survival_slope_slack: float = 0.15


@dataclass(frozen=True)
class ExperimentConfig:
    domain: DomainConfig = field(default_factory=DomainConfig)
    potential: PotentialConfig = field(default_factory=PotentialConfig)
    grid: GridConfig = field(default_factory=GridConfig)
    basis: BasisConfig = field(default_factory=BasisConfig)
    bernstein: BernsteinConfig = field(default_factory=BernsteinConfig)
    initial: InitialConfig = field(default_factory=InitialConfig)
    times: TimesConfig = field(default_factory=TimesConfig)
    regularization: RegularizationConfig = field(
        default_factory=RegularizationConfig)
    transport: TransportConfig = field(default_factory=TransportConfig)
    montecarlo: MonteCarloConfig = field(default_factory=MonteCarloConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    assertions: AssertionsConfig = field(default_factory=AssertionsConfig)
    tolerances: TolerancesConfig = field(default_factory=TolerancesConfig)


_SECTIONS = {f.name: f.type for f in fields(ExperimentConfig)}

_SECTION_TYPES = {
    "domain": DomainConfig,
    "potential": PotentialConfig,
    "grid": GridConfig,
    "basis": BasisConfig,
    "bernstein": BernsteinConfig,
    "initial": InitialConfig,
    "times": TimesConfig,
    "regularization": RegularizationConfig,
    "transport": TransportConfig,
    "montecarlo": MonteCarloConfig,
    "output": OutputConfig,
    "assertions": AssertionsConfig,
    "tolerances": TolerancesConfig,
}

# sections whose mere presence switches a feature on
_PRESENCE_ENABLES = {"regularization", "montecarlo"}


def _build_section(name: str, cls, raw: dict):
    known = {f.name for f in fields(cls)}
    unknown = set(raw) - known
    if unknown:
        raise ConfigurationError(
            f"unknown key(s) {sorted(unknown)} in section [{name}]")
    kwargs = {}
    for f in fields(cls):
        if f.name in raw:
            val = raw[f.name]
            if isinstance(val, list):
                val = tuple(val)
            kwargs[f.name] = val
    if name in _PRESENCE_ENABLES and "enabled" not in raw:
        kwargs["enabled"] = True
    return cls(**kwargs)


def config_from_dict(data: dict) -> ExperimentConfig:
    unknown = set(data) - set(_SECTION_TYPES)
    if unknown:
        raise ConfigurationError(f"unknown config section(s) {sorted(unknown)}")
    sections = {}
    for name, cls in _SECTION_TYPES.items():
        if name in data:
            if not isinstance(data[name], dict):
                raise ConfigurationError(f"section [{name}] must be a table")
            sections[name] = _build_section(name, cls, data[name])
    cfg = ExperimentConfig(**sections)
    _validate(cfg)
    return cfg


def load_config(path: str) -> ExperimentConfig:
    with open(path, "rb") as fh:
        try:
            data = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigurationError(f"{path}: {exc}") from exc
    try:
        return config_from_dict(data)
    except ConfigurationError as exc:
        raise ConfigurationError(f"{path}: {exc}") from exc


def _validate(cfg: ExperimentConfig) -> None:
    if cfg.domain.kind not in ("interval", "box"):
        raise ConfigurationError(f"unknown domain kind {cfg.domain.kind!r}")
    if cfg.domain.kind == "interval" and not cfg.domain.length > 0:
        raise ConfigurationError("interval length must be positive")
    if cfg.domain.kind == "box" and len(cfg.domain.lengths) < 2:
        raise ConfigurationError("box domain needs a lengths list")
    if cfg.potential.kind not in ("constant", "affine", "cosine"):
        raise ConfigurationError(
            f"unknown potential kind {cfg.potential.kind!r}")
    if cfg.basis.method not in ("closed-form", "fd"):
        raise ConfigurationError(f"unknown basis method {cfg.basis.method!r}")
    if cfg.basis.method == "closed-form" and cfg.potential.kind != "constant":
        raise ConfigurationError(
            "closed-form basis requires the constant potential")
    if cfg.basis.kcross > cfg.basis.k:
        raise ConfigurationError("kcross cannot exceed k")
    if cfg.bernstein.kind not in ("linear", "stable-drift",
                                  "compound-poisson-drift"):
        raise ConfigurationError(
            f"unknown Bernstein kind {cfg.bernstein.kind!r}")
    if cfg.initial.kind not in ("mu0", "mu", "dirac"):
        raise ConfigurationError(
            f"unknown initial law kind {cfg.initial.kind!r}")
    if len(cfg.times.values) < 1 or any(t <= 0 for t in cfg.times.values):
        raise ConfigurationError("times must be positive")
    if list(cfg.times.values) != sorted(cfg.times.values):
        raise ConfigurationError("times must be increasing")
    if cfg.transport.method not in ("quantile", "discrete"):
        raise ConfigurationError(
            f"unknown transport method {cfg.transport.method!r}")
