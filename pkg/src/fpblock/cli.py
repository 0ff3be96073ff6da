"""Command-line pipeline: sample, solve, errors, analyze, convergence.

Every command reads an optional flat key=value config file, applies --set
overrides and its own flags, runs, writes its output atomically next to a
JSON metadata sidecar, and exits 0. Configuration problems exit 2,
numerical failures 3, and file-format or I/O problems 4.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from . import fileio
from .analysis import (
    boundary_weight_rho,
    convergence_study,
    discrete_h1_error,
    discrete_l2_error,
    laplacian_kernel_basis,
    principal_angles,
    qr_diagonals,
)
from .blocks import BlockSolveConfig, restrict, solve_blocks, worst_residual
from .config import RunConfig, apply_overrides, parse_config
from .errors import (
    ConfigurationError,
    DivergenceError,
    EmptyHistogramError,
    FormatError,
    FpblockError,
    NonConvergenceError,
    RankDeficiencyError,
    SizeError,
    UndefinedRatioError,
)
from .grids import BlockPartition, DensityField, Grid
from .leastnorm import SolveOptions
from .models import ModelSpec, model_by_name, ring_exact_density, zero_drift_model
from .operator import assemble
from .repair import solve_overlapping, solve_shifting
from .sampler import SamplerConfig, accumulate_histogram, histogram_to_density

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_IO = 4

_NUMERIC_ERRORS = (
    DivergenceError,
    NonConvergenceError,
    RankDeficiencyError,
    SizeError,
    EmptyHistogramError,
    UndefinedRatioError,
)


def _load_config(args) -> RunConfig:
    cfg = RunConfig()
    if getattr(args, "config", None):
        cfg = parse_config(Path(args.config).read_text())
    return apply_overrides(cfg, getattr(args, "set", None) or [])


def _core_grid(cfg: RunConfig) -> Grid:
    return Grid(cfg.grid_lo, cfg.grid_hi, cfg.grid_n)


def _model(cfg: RunConfig) -> ModelSpec:
    return model_by_name(cfg.model, cfg.epsilon)


def _solve_options(cfg: RunConfig) -> SolveOptions:
    max_iters = cfg.cg_max_iters if cfg.cg_max_iters > 0 else None
    return SolveOptions(cg_rel_tol=cfg.cg_rel_tol, cg_max_iters=max_iters)


def _parse_blocks(text: str) -> tuple[int, ...]:
    sep = "x" if "x" in text else ","
    try:
        return tuple(int(tok) for tok in text.split(sep))
    except ValueError as exc:
        raise ConfigurationError(f"bad block specification {text!r}") from exc


def _parse_fractions(text: str) -> tuple[float, ...]:
    out = []
    for tok in text.split(","):
        tok = tok.strip()
        if "/" in tok:
            num, _, den = tok.partition("/")
            out.append(float(num) / float(den))
        else:
            out.append(float(tok))
    return tuple(out)


def _infer_inflation(hist_grid: Grid, core: Grid) -> int:
    """How many cells per side the histogram grid extends past the core."""
    diffs = {hn - cn for hn, cn in zip(hist_grid.n, core.n)}
    if len(diffs) != 1:
        raise ConfigurationError(
            f"histogram grid {hist_grid.n} is not a uniform inflation of {core.n}"
        )
    diff = diffs.pop()
    if diff < 0 or diff % 2 != 0:
        raise ConfigurationError(
            f"histogram grid {hist_grid.n} cannot contain the core grid {core.n}"
        )
    iota = diff // 2
    if core.inflate(iota) != hist_grid:
        raise ConfigurationError(
            "histogram bounds do not line up with the configured grid"
        )
    return iota


def cmd_sample(args) -> int:
    cfg = _load_config(args)
    model = _model(cfg)
    inflate = args.inflate if args.inflate is not None else cfg.inflate
    if inflate < 0:
        raise ConfigurationError("inflation must be nonnegative")
    grid = _core_grid(cfg).inflate(inflate)
    scfg = SamplerConfig(
        n_samples=cfg.samples,
        dt=cfg.dt,
        burn_in=cfg.burn_in,
        n_chains=cfg.chains,
        seed=cfg.seed,
        initial=cfg.initial,
    )
    t0 = time.perf_counter()
    hist = accumulate_histogram(model, grid, scfg)
    wall = time.perf_counter() - t0
    fileio.write_histogram(hist, args.out)
    fileio.write_sidecar(
        args.out,
        {
            "command": "sample",
            "model": model.name,
            "epsilon": model.epsilon,
            "grid_n": list(grid.n),
            "grid_lo": list(grid.lo),
            "grid_hi": list(grid.hi),
            "inflate": inflate,
            "dt": cfg.dt,
            "burn_in": cfg.burn_in,
            "chains": cfg.chains,
            "seed": cfg.seed,
            "samples_retained": hist.total_retained,
            "samples_in_domain": hist.in_domain,
            "restarts": hist.restarts,
            "wall_time": wall,
        },
    )
    print(
        f"sampled {hist.total_retained} states ({hist.in_domain} in domain) "
        f"onto {grid.n} in {wall:.2f}s -> {args.out}"
    )
    return EXIT_OK


def cmd_solve(args) -> int:
    cfg = _load_config(args)
    if args.method:
        cfg = apply_overrides(cfg, [f"solver.method={args.method}"])
    if args.blocks:
        blocks = _parse_blocks(args.blocks)
        cfg = apply_overrides(
            cfg, ["solver.blocks=" + ",".join(str(b) for b in blocks)]
        )
    if args.iota is not None:
        cfg = apply_overrides(cfg, [f"solver.iota={args.iota}"])
    if args.schedule:
        sched = _parse_fractions(args.schedule)
        cfg = apply_overrides(
            cfg, ["solver.schedule=" + ",".join(repr(s) for s in sched)]
        )
    renormalize = cfg.renormalize or args.renormalize

    model = _model(cfg)
    hist = fileio.read_histogram(args.hist)
    core = _core_grid(cfg)
    iota_hist = _infer_inflation(hist.grid, core)
    density = histogram_to_density(hist)
    partition = BlockPartition(grid=core, blocks=cfg.blocks)
    solve_cfg = BlockSolveConfig(partition=partition, solve=_solve_options(cfg))

    t0 = time.perf_counter()
    if cfg.method == "overlap":
        if iota_hist < cfg.iota:
            raise ConfigurationError(
                f"overlap iota={cfg.iota} needs a histogram sampled with "
                f"--inflate {cfg.iota} or more, got {iota_hist}"
            )
        if iota_hist > cfg.iota:
            trim = iota_hist - cfg.iota
            ranges = tuple((trim, trim + m) for m in core.inflate(cfg.iota).n)
            density = restrict(density, ranges)
        fld, reports = solve_overlapping(model, density, solve_cfg, cfg.iota)
        all_reports = reports
    else:
        if iota_hist > 0:
            ranges = tuple((iota_hist, iota_hist + m) for m in core.n)
            density = restrict(density, ranges)
        if cfg.method == "plain":
            fld, reports = solve_blocks(model, density, solve_cfg)
            all_reports = reports
        else:
            fld, rounds = solve_shifting(model, density, solve_cfg, cfg.schedule)
            all_reports = [rep for reps in rounds for rep in reps]
    wall = time.perf_counter() - t0
    if renormalize:
        fld = fld.renormalized()

    fileio.write_field(fld, args.out)
    fileio.write_sidecar(
        args.out,
        {
            "command": "solve",
            "model": model.name,
            "epsilon": model.epsilon,
            "method": cfg.method,
            "blocks": list(cfg.blocks),
            "iota": cfg.iota if cfg.method == "overlap" else None,
            "schedule": list(cfg.schedule) if cfg.method == "shift" else None,
            "cg_rel_tol": cfg.cg_rel_tol,
            "renormalized": bool(renormalize),
            "num_block_solves": len(all_reports),
            "total_cg_iterations": int(sum(r.solve.iterations for r in all_reports)),
            "worst_constraint_residual": worst_residual(all_reports),
            "min_value": fld.min_value,
            "mass": fld.mass,
            "wall_time": wall,
        },
    )
    print(
        f"{cfg.method} solve on {core.n} with {cfg.blocks} blocks: "
        f"{len(all_reports)} block solves, worst residual "
        f"{worst_residual(all_reports):.3e}, mass {fld.mass:.4f}, "
        f"{wall:.2f}s -> {args.out}"
    )
    return EXIT_OK


def _error_row(fld: DensityField, ref: DensityField) -> dict:
    row: dict = {
        "l2": discrete_l2_error(fld, ref),
        "h1": discrete_h1_error(fld, ref),
    }
    diff = DensityField(fld.grid, fld.values - ref.values)
    for d in (1, 2, 3, 4):
        try:
            row[f"rho_{d}"] = boundary_weight_rho(diff, d)
        except UndefinedRatioError:
            row[f"rho_{d}"] = ""
    row["min_value"] = fld.min_value
    row["mass"] = fld.mass
    return row


def cmd_errors(args) -> int:
    cfg = _load_config(args)
    fld = fileio.read_field(args.solution)
    if args.reference == "exact":
        if cfg.model != "ring":
            raise ConfigurationError(
                "reference 'exact' is only available for the ring model"
            )
        model = _model(cfg)
        ref = DensityField.from_function(fld.grid, ring_exact_density(model.epsilon))
    else:
        ref = fileio.read_field(args.reference)
        if ref.grid != fld.grid:
            raise ConfigurationError("solution and reference grids differ")
    row = _error_row(fld, ref)
    names = list(row)
    if args.out:
        fileio.write_rows_csv([row], names, args.out)
        fileio.write_sidecar(
            args.out,
            {"command": "errors", "solution": str(args.solution),
             "reference": str(args.reference)},
        )
    print(",".join(names))
    print(",".join(str(row[k]) for k in names))
    return EXIT_OK


def cmd_analyze(args) -> int:
    if args.what == "kernel":
        basis = laplacian_kernel_basis(args.n)
        diags = qr_diagonals(basis)
        op = assemble(
            zero_drift_model(2, epsilon=np.sqrt(2.0)),
            Grid((0.0, 0.0), (1.0, 1.0), (args.n, args.n)),
        )
        max_residual = max(
            float(np.max(np.abs(op.apply(basis.vectors[:, j]))))
            for j in range(basis.vectors.shape[1])
        )
        rows = []
        for j, (label, diag) in enumerate(zip(basis.labels, diags)):
            family = label[0]
            k = label[1] if family == "trig" else ""
            p = label[-1]
            rows.append(
                {"position": j, "family": family, "k": k, "p": p,
                 "r_diagonal": float(diag)}
            )
        if args.out:
            fileio.write_rows_csv(
                rows, ["position", "family", "k", "p", "r_diagonal"], args.out
            )
        print(
            f"kernel basis n={args.n}: {basis.vectors.shape[1]} vectors "
            f"(4n-4={4 * args.n - 4}), max |A b| = {max_residual:.3e}, "
            f"min |R_jj| = {diags.min():.6f}, last |R_jj| = {diags[-1]:.6f}"
        )
        return EXIT_OK

    cfg = _load_config(args)
    if args.zero_drift:
        eps = cfg.epsilon if cfg.epsilon is not None else 1.0
        model = zero_drift_model(2, epsilon=eps)
    else:
        model = _model(cfg)
    if model.dim != 2:
        raise ConfigurationError("principal angles are a 2-d diagnostic")
    lo = cfg.grid_lo[:2]
    hi = cfg.grid_hi[:2]
    grid = Grid(lo, hi, (args.n, args.n))
    op = assemble(model, grid)
    thicknesses = tuple(int(t) for t in args.thickness.split(","))
    rows = []
    for d in thicknesses:
        report = principal_angles(op, d)
        if report.warning:
            print(f"warning: {report.warning}", file=sys.stderr)
        for j, angle in enumerate(report.angles):
            rows.append(
                {
                    "thickness": d,
                    "index": j,
                    "angle": float(angle),
                    "cosine": float(np.cos(angle)),
                    "mean_cosine": report.mean_cosine,
                }
            )
        print(
            f"thickness {d}: kernel dim {report.kernel_dim}, "
            f"mean cosine {report.mean_cosine:.4f}"
        )
    if args.out:
        fileio.write_rows_csv(
            rows, ["thickness", "index", "angle", "cosine", "mean_cosine"], args.out
        )
    return EXIT_OK


def cmd_convergence(args) -> int:
    cfg = _load_config(args)
    if cfg.model != "ring":
        raise ConfigurationError("the convergence study needs the exact ring density")
    model = _model(cfg)
    exact = ring_exact_density(model.epsilon)
    mesh_sizes = tuple(int(tok) for tok in args.mesh.split(","))
    methods = tuple(args.methods.split(","))
    rows = convergence_study(
        model,
        exact,
        cfg.grid_lo,
        cfg.grid_hi,
        mesh_sizes,
        methods=methods,
        samples_per_cell=args.samples_per_cell,
        block_cells=args.block_cells,
        iota=cfg.iota,
        schedule=cfg.schedule,
        dt=cfg.dt,
        burn_in=cfg.burn_in,
        n_chains=cfg.chains,
        seed=cfg.seed,
        solve_opts=_solve_options(cfg),
    )
    names = ["n", "method", "samples", "l2", "h1", "wall_time"]
    fileio.write_rows_csv(rows, names, args.out)
    fileio.write_sidecar(
        args.out,
        {
            "command": "convergence",
            "model": model.name,
            "mesh_sizes": list(mesh_sizes),
            "methods": list(methods),
            "samples_per_cell": args.samples_per_cell,
            "block_cells": args.block_cells,
            "seed": cfg.seed,
        },
    )
    for row in rows:
        print(
            f"n={row['n']:>4} {row['method']:>8}: l2={row['l2']:.5e} "
            f"h1={row['h1']:.5e} ({row['wall_time']:.2f}s)"
        )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fpblock",
        description="Stationary SDE densities via block least-norm projection",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="flat key=value config file")
        p.add_argument(
            "--set",
            action="append",
            metavar="KEY=VALUE",
            help="override one config key (repeatable)",
        )

    p = sub.add_parser("sample", help="run chains and write an fphist histogram")
    common(p)
    p.add_argument("--inflate", type=int, default=None, metavar="IOTA",
                   help="extra cells per side on the binning grid")
    p.add_argument("--out", required=True, help="output .fphist path")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("solve", help="project a histogram onto the kernel blockwise")
    common(p)
    p.add_argument("--hist", required=True, help="input .fphist path")
    p.add_argument("--method", choices=["plain", "overlap", "shift"], default=None)
    p.add_argument("--blocks", metavar="KxL[xM]", default=None)
    p.add_argument("--iota", type=int, default=None, help="overlap extension")
    p.add_argument("--schedule", default=None, metavar="S1,S2,...",
                   help="shift fractions, e.g. 1/3,2/3,0")
    p.add_argument("--renormalize", action="store_true",
                   help="scale the result to unit mass")
    p.add_argument("--out", required=True, help="output .fpgrid path")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("errors", help="error metrics of a solution field")
    common(p)
    p.add_argument("--solution", required=True, help="input .fpgrid path")
    p.add_argument("--reference", required=True,
                   help="reference .fpgrid path, or 'exact' for the ring density")
    p.add_argument("--out", default=None, help="optional CSV output path")
    p.set_defaults(func=cmd_errors)

    p = sub.add_parser("analyze", help="kernel diagnostics and principal angles")
    common(p)
    p.add_argument("what", choices=["kernel", "angles"])
    p.add_argument("--n", type=int, required=True, help="square lattice side")
    p.add_argument("--thickness", default="1,2,3",
                   help="boundary layer widths for angles")
    p.add_argument("--zero-drift", action="store_true",
                   help="use the pure-diffusion operator for angles")
    p.add_argument("--out", default=None, help="optional CSV output path")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("convergence", help="errors across mesh refinements")
    common(p)
    p.add_argument("--mesh", default="64,128,256", help="comma list of sizes")
    p.add_argument("--methods", default="mc,plain,overlap,shift")
    p.add_argument("--samples-per-cell", type=float, default=390.625)
    p.add_argument("--block-cells", type=int, default=32)
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=cmd_convergence)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _NUMERIC_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (FormatError, OSError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except FpblockError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
