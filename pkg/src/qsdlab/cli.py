"""Command-line experiment runner.

Subcommands: eigensys, limit, density, w2-curve, simulate, verify.  Every
output is deterministic given the config (plus the seed for Monte Carlo
columns): CSV files carry a schema header and no timestamps, floats are
written with 17 significant digits.
"""

from __future__ import annotations

import argparse
import dataclasses
import math
import os
import sys

import numpy as np

from . import spectral
from .conditional import conditional_coeffs, density_on_grid, mu0_measure
from .config import ExperimentConfig, load_config
from .errors import QsdlabError
from .limits import limit_precise, limit_upper
from .montecarlo import mc_conditional_empirical, tv_histogram
from .pipeline import build_experiment, run_convergence
from .semigroup import survival_scaled
from .verify import run_verify

SCHEMA = "#schema=qsdlab/1"


def _fmt(v) -> str:
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        return f"{v:.17g}"
    return str(v)


def write_csv(path: str, header: list[str], rows) -> None:
    with open(path, "w") as fh:
        fh.write(SCHEMA + "\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def write_curve(path: str, pairs) -> None:
    """Plot-ready two-column text file (t, value)."""
    with open(path, "w") as fh:
        fh.write(SCHEMA + "\n")
        for t, v in pairs:
            fh.write(f"{_fmt(t)} {_fmt(v)}\n")


def _outdir(cfg: ExperimentConfig, args) -> str:
    out = args.out or cfg.output.dir
    os.makedirs(out, exist_ok=True)
    return out


def _load(args) -> ExperimentConfig:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = dataclasses.replace(
            cfg, montecarlo=dataclasses.replace(cfg.montecarlo,
                                                seed=args.seed))
    return cfg


# ---------------------------------------------------------------------------
# subcommands


def cmd_eigensys(args) -> int:
    cfg = _load(args)
    out = _outdir(cfg, args)
    exp = build_experiment(cfg)
    basis = exp.basis
    write_csv(os.path.join(out, "eigenvalues.csv"), ["k", "lambda"],
              [(k, basis.lambdas[k]) for k in range(basis.K)])
    if basis.kind != "tensor":
        spectral.save_basis(basis, os.path.join(out, "basis.txt"))
    print(f"built {basis.kind} basis: d={basis.dim} K={basis.K} "
          f"n={basis.grid.n} lambda0={basis.lambdas[0]:.12g} "
          f"orthonormality={spectral.orthonormality_residual(basis):.3g}")
    return 0


def cmd_limit(args) -> int:
    cfg = _load(args)
    out = _outdir(cfg, args)
    exp = build_experiment(cfg)
    ls = limit_precise(exp.basis, exp.bern, exp.nu)
    lu = limit_upper(exp.basis, exp.bern, exp.nu)
    write_csv(os.path.join(out, "limit_series.csv"),
              ["m", "term", "partial_sum"],
              [(m + 1, ls.terms[m], ls.partial_sums[m])
               for m in range(len(ls.terms))])
    note = ""
    if not exp.theorem12_applicable:
        note = " (outside the precise-limit hypothesis: Dirac start)"
    print(f"limit value = {ls.value:.12g} +- {ls.tail:.3g} "
          f"[{ls.verdict}]{note}")
    print(f"upper constant = {lu.value:.12g} (exactly 4x)")
    return 0


def _density_rows(gm):
    nodes = gm.nodes if gm.nodes.ndim > 1 else gm.nodes[:, None]
    for node, d in zip(nodes, gm.dens):
        yield tuple(node) + (d, "lebesgue")


def cmd_density(args) -> int:
    cfg = _load(args)
    out = _outdir(cfg, args)
    exp = build_experiment(cfg)
    mu0 = mu0_measure(exp.basis)
    axes = [f"x{i}" for i in range(exp.basis.dim)] if exp.basis.dim > 1 \
        else ["x"]
    header = axes + ["density", "reference"]
    for t in cfg.times.values:
        cc = conditional_coeffs(exp.basis, exp.bern, exp.nu, t,
                                cfg.basis.kcross)
        gm = density_on_grid(cc)
        path = os.path.join(out, f"density_t{t:g}.csv")
        write_csv(path, header, _density_rows(gm))
        print(f"t={t:g}: Q={cc.q:.9g} clamp={gm.clamped_mass:.3g} -> {path}")
    write_csv(os.path.join(out, "density_mu0.csv"), header,
              _density_rows(mu0))
    return 0


def cmd_w2_curve(args) -> int:
    cfg = _load(args)
    out = _outdir(cfg, args)
    summary = run_convergence(cfg)
    rows = summary.rows
    write_csv(os.path.join(out, "convergence.csv"),
              ["t", "Q", "t2W2sq", "t2W2sq_reg", "tv", "limit",
               "upper_I", "clamp_mass", "tilde_tail", "series_tail"],
              [(r.t, r.q, r.t2_w2sq, r.t2_w2sq_reg, r.tv, r.limit_value,
                r.limit_upper, r.clamp_mass, r.tilde_tail, r.series_tail)
               for r in rows])
    write_curve(os.path.join(out, "t2w2sq.txt"),
                [(r.t, r.t2_w2sq) for r in rows])
    write_curve(os.path.join(out, "tv.txt"), [(r.t, r.tv) for r in rows])
    lines = []
    if summary.fit is not None:
        f = summary.fit
        lines.append(f"rate fit: limit ~ {f.limit_estimate:.9g} "
                     f"(richardson {f.richardson:.9g}), residual slope "
                     f"{f.residual_slope:.3f}, R2 {f.r_squared:.4f}"
                     + ("" if f.reliable else f" [unreliable: {f.note}]"))
    lines.append(f"limit ratio at final t: {summary.ratio_final:.4f}")
    lines.append(f"survival floor t0 = {summary.t_floor:.6g} "
                 f"(first probe with Q above half its limit)")
    for name, (ok, detail) in summary.checks.items():
        lines.append(f"{'pass' if ok else 'FAIL'} {name}: {detail}")
    text = "\n".join(lines)
    with open(os.path.join(out, "summary.txt"), "w") as fh:
        fh.write(text + "\n")
    print(text)
    return 0 if summary.all_passed else 1


def cmd_simulate(args) -> int:
    cfg = _load(args)
    if not cfg.montecarlo.enabled:
        print("config has no [montecarlo] section", file=sys.stderr)
        return 2
    out = _outdir(cfg, args)
    exp = build_experiment(cfg)
    m = cfg.montecarlo
    res = mc_conditional_empirical(exp.basis, exp.bern, exp.nu, m.t,
                                   m.n_paths, m.bins, m.seed, m.step_size,
                                   n_obs=m.n_obs, threads=args.threads)
    centers = 0.5 * (res.bin_edges[1:] + res.bin_edges[:-1])
    write_csv(os.path.join(out, "mc_histogram.csv"), ["bin_center", "mass"],
              list(zip(centers, res.bin_mass)))
    cc = conditional_coeffs(exp.basis, exp.bern, exp.nu, m.t,
                            cfg.basis.kcross)
    tv = tv_histogram(res, density_on_grid(cc))
    expected = survival_scaled(exp.basis, exp.bern, exp.nu, m.t) \
        * math.exp(-exp.bern(exp.basis.lambdas[0]) * m.t)
    meta = [
        f"seed {m.seed}",
        f"n_paths {m.n_paths}",
        f"t {_fmt(m.t)}",
        f"survival_fraction {_fmt(res.survival_fraction)}",
        f"survival_se {_fmt(res.survival_se)}",
        f"survival_spectral {_fmt(expected)}",
        f"effective_samples {res.effective_samples}",
        f"tv_vs_spectral {_fmt(tv)}",
    ]
    with open(os.path.join(out, "mc_run.txt"), "w") as fh:
        fh.write("\n".join(meta) + "\n")
    print("\n".join(meta))
    return 0


def cmd_verify(args) -> int:
    cfg = _load(args)
    out = _outdir(cfg, args)
    entries = run_verify(cfg)
    write_csv(os.path.join(out, "verify_report.csv"),
              ["module", "name", "passed", "value", "tolerance", "mc"],
              [(e.module, e.name, int(e.passed), e.value, e.tolerance,
                int(e.mc)) for e in entries])
    for e in entries:
        print(e.line())
    failed = [e for e in entries if not e.passed]
    print(f"{len(entries) - len(failed)}/{len(entries)} invariant checks passed")
    return 0 if not failed else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="qsdlab",
        description="spectral and Monte Carlo verification runs for "
                    "conditional empirical measures of subordinated killed "
                    "diffusions")
    sub = parser.add_subparsers(dest="command", required=True)
    commands = {
        "eigensys": cmd_eigensys,
        "limit": cmd_limit,
        "density": cmd_density,
        "w2-curve": cmd_w2_curve,
        "simulate": cmd_simulate,
        "verify": cmd_verify,
    }
    for name in commands:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True)
        p.add_argument("--out", default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--threads", type=int, default=1)
    args = parser.parse_args(argv)
    try:
        return commands[args.command](args)
    except (QsdlabError, OSError) as exc:
        print(f"error in stage '{args.command}': {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
