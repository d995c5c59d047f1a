"""Experiment sweeps writing one CSV per mode.

Cells run in a fixed order; each cell's rows are appended and flushed as
soon as the cell finishes (in order, even with several workers), so an
interrupted run leaves a valid prefix that ``resume`` continues from.
"""

from __future__ import annotations

import csv
import io
import os
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable

import numpy as np

from ..compression import REGIONS, build_mask, region_nnz, sparsity_stats
from ..estimator import FIXED_J, SOLVER_GRADE, error_report, estimate, select_parameters
from ..fields import apply_operator, generate_dataset
from ..galerkin import assemble_matrix
from ..solver import galerkin_solve, manufactured_solution, solve_error
from ..wavelets import WaveletBasis, WaveletParams
from . import config as C

WORKERS_ENV = "PDOLEARN_WORKERS"

COLUMNS = {
    C.RATE: ["N", "seed", "J", "total", "truncation", "compression", "estimation", "wallMillis"],
    C.SPARSITY: ["J", "nnz", "maxRow", "maxCol", *[f"nnz{r}" for r in REGIONS]],
    C.NOISELESS: ["J", "N", "total", "truncation", "compression", "estimation"],
    C.SOLVER: ["Jstar", "alpha", "source", "solutionError"],
    C.OVB: ["N", "seed", "J", "ovbEstimate"],
}


def worker_budget(default=1):
    raw = os.environ.get(WORKERS_ENV, "")
    try:
        return max(1, int(raw)) if raw else default
    except ValueError:
        raise C.ConfigError(f"{WORKERS_ENV} must be a positive integer, got {raw!r}") from None


def format_cell(value):
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (np.integer,)):
        return str(int(value))
    return str(value)


def render_rows(rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    for row in rows:
        writer.writerow([format_cell(v) for v in row])
    return buf.getvalue()


@dataclass
class Plan:
    columns: list[str]
    cells: list
    rows_per_cell: int
    run_cell: Callable


class _Context:
    """Shared, read-only state built once per sweep (basis, reference matrix)."""

    def __init__(self, cfg: C.ExperimentConfig, max_level: int, Jref: int):
        self.cfg = cfg
        self.Jref = Jref
        grid_level = cfg.grid_level if cfg.grid_level is not None else max(max_level, Jref) + 3
        if grid_level < max(max_level, Jref) + 3:
            raise C.ConfigError(f"grid_level {grid_level} too small; need at least {max(max_level, Jref) + 3}")
        self.basis = WaveletBasis(WaveletParams(d=cfg.d, dt=cfg.dt, Jmax=grid_level))
        self.op = cfg.operator_spec()
        self.A_ref = assemble_matrix(self.op, Jref, self.basis)


def _levels(cfg, N, J=None):
    est = cfg.estimator(mode=FIXED_J, J=J) if J is not None else cfg.estimator()
    return est, select_parameters(N, est)


def _plan_rate(cfg):
    choices = [_levels(cfg, N)[1] for N in cfg.N_grid]
    Jmax_used = max(c.J for c in choices)
    Jref = cfg.Jref if cfg.Jref is not None else Jmax_used + 3
    ctx = _Context(cfg, max(c.J_reg for c in choices), Jref)
    cells = [(N, seed) for N in cfg.N_grid for seed in cfg.seeds]

    def run(cell):
        N, seed = cell
        est, lev = _levels(cfg, N)
        start = time.perf_counter()
        data = generate_dataset(N, ctx.op, cfg.input_spec(), cfg.noise_spec(), lev.J_reg, seed, ctx.basis, cfg.bandlimit)
        learned = estimate(data, est)
        rep = error_report(learned, ctx.op, ctx.Jref, A_ref=ctx.A_ref)
        wall = int(round(1000 * (time.perf_counter() - start))) if cfg.timing else None
        return [(N, seed, lev.J, rep.total, rep.truncation, rep.compression, rep.estimation, wall)]

    return Plan(COLUMNS[C.RATE], cells, 1, run)


def _plan_ovb(cfg):
    choices = [_levels(cfg, N)[1] for N in cfg.N_grid]
    Jref = cfg.Jref if cfg.Jref is not None else max(c.J for c in choices) + 3
    ctx = _Context(cfg, max(c.J_reg for c in choices), Jref)
    cells = [(N, seed) for N in cfg.N_grid for seed in cfg.seeds]

    def run(cell):
        N, seed = cell
        est, lev = _levels(cfg, N)
        # noise off, same seed: identical inputs, so the estimation error is pure bias
        data = generate_dataset(N, ctx.op, cfg.input_spec(), None, lev.J_reg, seed, ctx.basis, cfg.bandlimit)
        rep = error_report(estimate(data, est), ctx.op, ctx.Jref, A_ref=ctx.A_ref)
        return [(N, seed, lev.J, rep.estimation)]

    return Plan(COLUMNS[C.OVB], cells, 1, run)


def _plan_noiseless(cfg):
    cells = [(J, N) for J in cfg.J_grid for N in cfg.N_grid]
    J_reg = max(_levels(cfg, N, J)[1].J_reg for J, N in cells)
    Jref = cfg.Jref if cfg.Jref is not None else max(cfg.J_grid) + 2
    ctx = _Context(cfg, J_reg, Jref)

    def run(cell):
        J, N = cell
        est, lev = _levels(cfg, N, J)
        data = generate_dataset(N, ctx.op, cfg.input_spec(), None, lev.J_reg, cfg.seeds[0], ctx.basis, cfg.bandlimit)
        rep = error_report(estimate(data, est), ctx.op, ctx.Jref, A_ref=ctx.A_ref)
        return [(J, N, rep.total, rep.truncation, rep.compression, rep.estimation)]

    return Plan(COLUMNS[C.NOISELESS], cells, 1, run)


def _plan_sparsity(cfg):
    cells = list(cfg.J_grid)

    def run(J):
        p = cfg.compression(J)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            mask = build_mask(p)
        stats = sparsity_stats(mask)
        regions = region_nnz(mask, p)
        return [(J, stats.globalNnz, stats.maxRowNnz, stats.maxColNnz, *[regions[r] for r in REGIONS])]

    return Plan(COLUMNS[C.SPARSITY], cells, 1, run)


def _plan_solver(cfg):
    N = cfg.N_grid[-1]
    cells = list(cfg.J_grid)
    J_reg = max(_levels(cfg, N, J)[1].J_reg for J in cells)
    Jtop = max(cells)
    ctx = _Context(cfg, max(J_reg, Jtop), Jtop)
    u = manufactured_solution(ctx.basis.G, cfg.t)
    f = apply_operator(ctx.op, u)

    def run(J):
        est, lev = _levels(cfg, N, J)
        est = replace(est, support=SOLVER_GRADE)
        exact = galerkin_solve(ctx.A_ref.truncated(J), f, J, ctx.basis)
        data = generate_dataset(N, ctx.op, cfg.input_spec(), None, lev.J_reg, cfg.seeds[0], ctx.basis, cfg.bandlimit)
        learned = galerkin_solve(estimate(data, est), f, J, ctx.basis)
        rows = []
        for alpha in cfg.alpha_grid:
            s = cfg.r / 2 - alpha
            rows.append((J, alpha, "exact", solve_error(exact.coefs, u, s, ctx.basis)))
            rows.append((J, alpha, "learned", solve_error(learned.coefs, u, s, ctx.basis)))
        return rows

    return Plan(COLUMNS[C.SOLVER], cells, 2 * len(cfg.alpha_grid), run)


PLANNERS = {
    C.RATE: _plan_rate,
    C.OVB: _plan_ovb,
    C.NOISELESS: _plan_noiseless,
    C.SPARSITY: _plan_sparsity,
    C.SOLVER: _plan_solver,
}


def output_path(cfg, out_dir=None):
    return Path(out_dir if out_dir is not None else cfg.out) / f"{cfg.mode}.csv"


def _completed_prefix(path: Path, header: str, rows_per_cell: int):
    """Whole cells already on disk; rewrites the file to exactly that prefix."""
    if not path.exists():
        return 0
    text = path.read_bytes().decode("utf-8")
    lines = text.split("\r\n")
    # the last element is "" after a complete line, or a torn fragment
    complete = lines[:-1]
    if not complete:
        path.write_bytes(header.encode("utf-8"))
        return 0
    if complete[0] + "\r\n" != header:
        raise C.ConfigError(f"{path} does not match this sweep's columns; refusing to resume")
    rows = complete[1:]
    cells_done = len(rows) // rows_per_cell
    kept = rows[: cells_done * rows_per_cell]
    path.write_bytes((header + "".join(r + "\r\n" for r in kept)).encode("utf-8"))
    return cells_done


def run_sweep(cfg: C.ExperimentConfig, out_dir=None, resume=False, workers=None, stop_after=None):
    """Run the sweep for ``cfg.mode``; returns the CSV path.

    ``stop_after`` ends the run after that many newly finished cells, which
    leaves the same on-disk state as an interruption.
    """
    plan = PLANNERS[cfg.mode](cfg)
    path = output_path(cfg, out_dir)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = render_rows([plan.columns])
    done = _completed_prefix(path, header, plan.rows_per_cell) if resume else 0
    if not resume or not path.exists():
        path.write_bytes(header.encode("utf-8"))
    todo = plan.cells[done:]
    if stop_after is not None:
        todo = todo[:stop_after]
    workers = worker_budget() if workers is None else max(1, int(workers))
    with open(path, "ab") as fh:
        if workers == 1:
            results = map(plan.run_cell, todo)
            _drain(results, fh)
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                _drain(pool.map(plan.run_cell, todo), fh)
    return path


def _drain(results, fh):
    for rows in results:
        fh.write(render_rows(rows).encode("utf-8"))
        fh.flush()
        os.fsync(fh.fileno())
