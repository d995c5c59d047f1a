"""Command-line entry point: gen, mask, estimate, report, solve, sweep, fit.

Exit codes: 0 success, 2 configuration or input error, 3 numerical failure.
"""

from __future__ import annotations

import sys
import warnings
from dataclasses import replace
from pathlib import Path

import click
import numpy as np

from ..compression import ParameterError, build_mask, build_mask_new, region_table
from ..estimator import (
    SOLVER_GRADE,
    LearnedOperator,
    MaskInvariantError,
    ResolutionError,
    UnderdeterminedError,
    error_report,
    estimate,
    select_parameters,
)
from ..fields import Dataset, ResolutionError as GridResolutionError, apply_operator, generate_dataset
from ..solver import PRESETS, SingularSystemError, galerkin_solve, preset_solution, solve_error
from ..wavelets import WaveletBasis, WaveletParams
from . import config as C
from .fit import FitError, fit_slope
from .sweep import render_rows, run_sweep

EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

NUMERICAL = (np.linalg.LinAlgError, SingularSystemError, MaskInvariantError, FloatingPointError)
CONFIGURATION = (
    C.ConfigError,
    ParameterError,
    ResolutionError,
    GridResolutionError,
    UnderdeterminedError,
    FitError,
    ValueError,
    OSError,
)


def _pairs(items):
    out = {}
    for item in items:
        key, sep, value = item.partition("=")
        if not sep:
            raise C.ConfigError(f"--set expects key=value, got {item!r}")
        out[key.strip()] = value.strip()
    return out


def _config(path, sets, **extra):
    overrides = _pairs(sets)
    overrides.update({k: v for k, v in extra.items() if v is not None})
    if path is None:
        return C.parse_pairs(overrides)
    return C.load_config(path, overrides)


config_option = click.option("--config", "config_path", type=click.Path(dir_okay=False), help="key = value config file")
set_option = click.option("--set", "sets", multiple=True, metavar="KEY=VALUE", help="override one config key")


@click.group()
def cli():
    """Learn pseudo-differential operators in wavelet coordinates."""


@cli.command()
@config_option
@set_option
@click.option("--N", "N", type=int, help="sample count (default: last entry of N_grid)")
@click.option("--seed", type=int, help="seed (default: first entry of seeds)")
@click.option("--level", type=int, help="analysis level (default: the regression level for N)")
@click.option("--out", "out", required=True, type=click.Path(file_okay=False))
def gen(config_path, sets, N, seed, level, out):
    """Sample a dataset of coefficient pairs."""
    cfg = _config(config_path, sets)
    N = cfg.N_grid[-1] if N is None else N
    seed = cfg.seeds[0] if seed is None else seed
    if level is None:
        level = select_parameters(N, cfg.estimator()).J_reg
    grid = cfg.grid_level if cfg.grid_level is not None else level + 3
    basis = WaveletBasis(WaveletParams(d=cfg.d, dt=cfg.dt, Jmax=grid))
    data = generate_dataset(N, cfg.operator_spec(), cfg.input_spec(), cfg.noise_spec(), level, seed, basis, cfg.bandlimit)
    data.save(out)
    click.echo(f"wrote N={N} level={level} grid={basis.G} to {out}", err=True)


@cli.command()
@config_option
@set_option
@click.option("--J", "J", type=int, help="mask level (default: config J)")
@click.option("--save", type=click.Path(dir_okay=False), help="also write the mask file")
@click.option("--out", type=click.Path(dir_okay=False), help="CSV path (default: stdout)")
def mask(config_path, sets, J, save, out):
    """Build a support mask and print its sparsity by region."""
    cfg = _config(config_path, sets)
    J = cfg.J if J is None else J
    if J is None:
        raise C.ConfigError("mask needs a level: pass --J or set J")
    p = cfg.compression(J)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        m = build_mask_new(p, cfg.eps) if cfg.support == SOLVER_GRADE else build_mask(p)
    if save:
        m.save(save)
    rows = [["J", "region", "nnz", "maxRow", "maxCol"]]
    rows += [[J, *entry] for entry in region_table(m, p)]
    _emit(render_rows(rows), out)


@cli.command(name="estimate")
@config_option
@set_option
@click.option("--data", "data_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False))
def estimate_cmd(config_path, sets, data_dir, out):
    """Fit the sparse Galerkin matrix from a dataset."""
    cfg = _config(config_path, sets)
    data = Dataset.load(data_dir)
    learned = estimate(data, cfg.estimator())
    learned.save(out)
    d = learned.diagnostics
    click.echo(
        f"J={learned.J} J_reg={learned.levels.J_reg} nnz={learned.A.nnz} "
        f"jittered={d['jittered_columns']} maxCond={d['max_condition']:.3g}",
        err=True,
    )


@cli.command()
@config_option
@set_option
@click.option("--operator", "op_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--Jref", "Jref", type=int, help="reference level (default J+3)")
@click.option("--out", type=click.Path(dir_okay=False), help="CSV path (default: stdout)")
def report(config_path, sets, op_path, Jref, out):
    """Error components of a learned operator against the configured truth."""
    cfg = _config(config_path, sets)
    learned = LearnedOperator.load(op_path)
    Jref = learned.J + 3 if Jref is None else Jref
    grid = cfg.grid_level if cfg.grid_level is not None else Jref + 3
    basis = WaveletBasis(WaveletParams(d=cfg.d, dt=cfg.dt, Jmax=grid))
    rep = error_report(learned, cfg.operator_spec(), Jref, basis)
    _emit(render_rows([["component", "value"], *rep.as_rows()]), out)


@cli.command()
@config_option
@set_option
@click.option("--operator", "op_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--f", "f_src", required=True, help=f"right-hand side: float64 sample file or preset ({', '.join(PRESETS)})")
@click.option("--u-exact", "u_src", help="exact solution: sample file or preset (defaults to the preset behind --f)")
@click.option("--grid-level", type=int, help="grid level for presets (default J+3)")
@click.option("--out", required=True, type=click.Path(file_okay=False))
def solve(config_path, sets, op_path, f_src, u_src, grid_level, out):
    """Galerkin solve with a learned operator."""
    cfg = _config(config_path, sets)
    learned = LearnedOperator.load(op_path)
    J = learned.J
    r = learned.config.r
    if f_src in PRESETS:
        grid = grid_level if grid_level is not None else (cfg.grid_level or J + 3)
        G = 2 ** (grid + 1)
        u_exact = preset_solution(f_src, G, learned.config.t)
        f = apply_operator(cfg.operator_spec(), u_exact)
        if u_src is None:
            u_src = f_src
    else:
        f = _read_samples(f_src)
        G = f.size
        grid = int(np.log2(G)) - 1
        u_exact = None
    if u_src is not None and u_exact is None:
        u_exact = preset_solution(u_src, G, learned.config.t) if u_src in PRESETS else _read_samples(u_src)
    basis = WaveletBasis(WaveletParams(d=learned.config.d, dt=learned.config.dt, Jmax=grid))
    sol = galerkin_solve(learned, f, J, basis, r=r)
    target = Path(out)
    target.mkdir(parents=True, exist_ok=True)
    sol.samples.astype("<f8").tofile(target / "u.bin")
    if u_exact is not None:
        rows = [["s", "error"]]
        for s in sorted({r / 2, 0.0}):
            rows.append([s, solve_error(sol.coefs, u_exact, s, basis)])
        (target / "error.csv").write_bytes(render_rows(rows).encode("utf-8"))
    ell = sol.ellipticity
    click.echo(f"J={J} lambdaMin={ell.lambdaMin:.4g} lambdaMax={ell.lambdaMax:.4g} elliptic={ell.elliptic}", err=True)


@cli.command()
@config_option
@set_option
@click.option("--seed", type=int, help="run a single seed instead of the configured list")
@click.option("--out", type=click.Path(file_okay=False), help="output directory (default: config out)")
@click.option("--resume", is_flag=True, help="continue an interrupted sweep")
@click.option("--max-cells", type=int, hidden=True)
def sweep(config_path, sets, seed, out, resume, max_cells):
    """Run the configured sweep and write its CSV."""
    cfg = _config(config_path, sets)
    if seed is not None:
        cfg = replace(cfg, seeds=(seed,))
    path = run_sweep(cfg, out_dir=out, resume=resume, stop_after=max_cells)
    click.echo(str(path))


@cli.command()
@click.option("--csv", "csv_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--x", "x_col", required=True)
@click.option("--y", "y_col", required=True)
@click.option("--where", multiple=True, metavar="COLUMN=VALUE", help="keep only matching rows")
def fit(csv_path, x_col, y_col, where):
    """Log-log slope of per-x medians."""
    res = fit_slope(csv_path, x_col, y_col, _pairs(where) or None)
    click.echo(render_rows([["slope", "intercept", "r2", "points"], [res.slope, res.intercept, res.r2, res.points]]), nl=False)


def _read_samples(path):
    data = np.fromfile(path, dtype="<f8")
    if data.size < 2 or data.size & (data.size - 1):
        raise ValueError(f"{path}: sample count {data.size} is not a power of two")
    return data


def _emit(text, out):
    if out:
        Path(out).write_bytes(text.encode("utf-8"))
    else:
        click.echo(text, nl=False)


def main(argv=None):
    """Run the CLI and return its exit code."""
    try:
        cli.main(args=argv, prog_name="pdolearn", standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.ClickException as exc:
        exc.show()
        return exc.exit_code
    except click.Abort:
        click.echo("aborted", err=True)
        return 1
    except NUMERICAL as exc:
        click.echo(f"numerical failure: {exc}", err=True)
        return EXIT_NUMERICAL
    except CONFIGURATION as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_CONFIG
    return 0


def run():
    sys.exit(main())
