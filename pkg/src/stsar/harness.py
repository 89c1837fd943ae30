"""
Monte Carlo study runner.

For each ``(r, r_star, m)`` cell, ``reps`` panels are simulated from
independent streams (replicate ``k`` uses seed ``base_seed ^ k``), fitted by
profile ML, and summarised by the mean and SD of each estimate. Results are
gathered by replicate index, so output does not depend on the worker count.
"""

from __future__ import annotations

import csv
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import EstimationError, InfeasibleError
from .inference import FitOptions, fit_mle
from .lattice import lattice_weights
from .model import Params
from .simulate import PAPER_TRUTH, SimConfig, gen_dataset, replicate_seed

__all__ = [
    "McConfig",
    "McSummary",
    "ReplicateResult",
    "run_mc",
    "write_replicates_csv",
    "read_replicates_csv",
    "summarize_replicates",
    "write_summary_csv",
    "format_pretty",
]


@dataclass
class McConfig:
    grid: list
    reps: int = 100
    truth: Params = field(default_factory=lambda: PAPER_TRUTH)
    base_seed: int = 0
    thresholds: tuple = (0.0, 1.0)
    fit: FitOptions = field(default_factory=FitOptions)
    out: str | None = None

    def __post_init__(self):
        if self.reps < 1:
            raise ValueError("reps must be >= 1")
        if not self.grid:
            raise ValueError("grid must list at least one (r, r_star, m) cell")
        cells = []
        for cell in self.grid:
            r, rs, m = (int(v) for v in cell)
            if r < 1 or rs < 1 or m < 1:
                raise ValueError(f"invalid grid cell {cell}")
            cells.append((r, rs, m))
        self.grid = cells
        if not self.truth.in_box():
            raise ValueError("truth parameters are not feasible")


@dataclass
class ReplicateResult:
    r: int
    r_star: int
    m: int
    rep: int
    seed: int
    converged: bool
    estimates: np.ndarray     # full eta order; alpha is 0 when m == 1
    se: np.ndarray            # aligned with estimates; NaN where unavailable
    loglik: float
    iters: int


@dataclass
class McSummary:
    names: list
    truth: np.ndarray
    rows: list                 # dicts, one per (cell, parameter)
    replicates: list
    wall_time: dict            # cell -> seconds
    failed_cells: list

    def cell_rows(self, cell):
        return {row["parameter"]: row for row in self.rows
                if (row["r"], row["r_star"], row["m"]) == tuple(cell)}

    def sd(self, cell, name) -> float:
        return self.cell_rows(cell)[name]["sd"]

    def mean(self, cell, name) -> float:
        return self.cell_rows(cell)[name]["mean"]


def _one_replicate(cell, rep, cfg: McConfig, w):
    r, rs, m = cell
    seed = replicate_seed(cfg.base_seed, rep)
    k = cfg.truth.p + cfg.truth.q + 2
    nan = np.full(k, np.nan)
    data = gen_dataset(SimConfig(r, rs, m, cfg.truth, cfg.thresholds, seed), w)
    try:
        fit = fit_mle(data, w, cfg.fit)
    except (EstimationError, InfeasibleError, np.linalg.LinAlgError):
        return ReplicateResult(r, rs, m, rep, seed, False, nan, nan, math.nan, 0)
    se = nan.copy()
    if fit.alpha_fixed:
        ia = cfg.truth.p + cfg.truth.q
        se[np.arange(k) != ia] = fit.se
    else:
        se[:] = fit.se
    return ReplicateResult(r, rs, m, rep, seed, bool(fit.converged),
                           fit.eta_hat.as_vector(), se, fit.loglik, fit.iterations)


def run_mc(cfg: McConfig, threads: int = 1, replicates_path=None) -> McSummary:
    """Run every grid cell; a cell where all replicates fail is marked failed."""
    threads = max(1, int(threads))
    results = []
    wall = {}
    for cell in cfg.grid:
        t0 = time.perf_counter()
        w = lattice_weights(cell[0], cell[1], cfg.thresholds)
        if threads == 1:
            cell_res = [_one_replicate(cell, k, cfg, w) for k in range(cfg.reps)]
        else:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                cell_res = list(pool.map(lambda k: _one_replicate(cell, k, cfg, w),
                                         range(cfg.reps)))
        results.extend(cell_res)
        wall[cell] = time.perf_counter() - t0
    if replicates_path is not None:
        write_replicates_csv(results, cfg.truth.p, cfg.truth.q, replicates_path)
    summary = summarize_replicates(results, cfg.truth)
    summary.wall_time = wall
    return summary


def _param_names(p, q):
    return Params.names(p, q)


def summarize_replicates(results, truth: Params) -> McSummary:
    """Per (cell, parameter) moments over converged replicates.

    The SD uses ``ddof=1``; with a single converged replicate it is reported
    as 0 and flagged ``degenerate_sd``. ``coverage95`` is the share of
    converged replicates whose nominal 95% Wald interval covers the truth.
    """
    names = _param_names(truth.p, truth.q)
    tv = truth.as_vector()
    cells = []
    for res in results:
        c = (res.r, res.r_star, res.m)
        if c not in cells:
            cells.append(c)
    rows, failed = [], []
    for c in cells:
        cell_res = [x for x in results if (x.r, x.r_star, x.m) == c]
        ok = [x for x in cell_res if x.converged]
        if not ok:
            failed.append(c)
        est = np.array([x.estimates for x in ok]) if ok else np.empty((0, tv.size))
        se = np.array([x.se for x in ok]) if ok else np.empty((0, tv.size))
        for j, nm in enumerate(names):
            if c[2] == 1 and nm == "alpha":
                continue
            col = est[:, j]
            mean = float(col.mean()) if col.size else math.nan
            sd = float(col.std(ddof=1)) if col.size > 1 else (0.0 if col.size else math.nan)
            half = 1.959963984540054 * se[:, j]
            cover = np.abs(col - tv[j]) <= half
            rows.append({
                "r": c[0], "r_star": c[1], "m": c[2], "n": (c[0] * c[1]) ** 2,
                "parameter": nm, "truth": float(tv[j]), "mean": mean, "sd": sd,
                "n_converged": len(ok), "n_failed": len(cell_res) - len(ok),
                "mean_se": float(np.nanmean(se[:, j])) if col.size else math.nan,
                "coverage95": float(cover.mean()) if col.size else math.nan,
                "degenerate_sd": col.size == 1,
            })
    return McSummary(names=names, truth=tv, rows=rows, replicates=list(results),
                     wall_time={}, failed_cells=failed)


REPLICATE_FIXED = ["r", "r_star", "m", "rep", "seed", "converged"]


def write_replicates_csv(results, p: int, q: int, path) -> None:
    names = _param_names(p, q)
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(REPLICATE_FIXED + names + ["loglik", "iters"])
        for x in results:
            wr.writerow([x.r, x.r_star, x.m, x.rep, x.seed, int(x.converged)]
                        + [f"{v:.17g}" for v in x.estimates]
                        + [f"{x.loglik:.17g}", x.iters])


def read_replicates_csv(path, p: int = 2, q: int = 1):
    names = _param_names(p, q)
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            est = np.array([float(row[nm]) for nm in names])
            out.append(ReplicateResult(
                int(row["r"]), int(row["r_star"]), int(row["m"]), int(row["rep"]),
                int(row["seed"]), bool(int(row["converged"])), est,
                np.full(est.size, np.nan), float(row["loglik"]), int(row["iters"])))
    return out


SUMMARY_COLUMNS = ["r", "r_star", "m", "n", "parameter", "truth", "mean", "sd",
                   "n_converged", "n_failed", "mean_se", "coverage95"]


def write_summary_csv(summary: McSummary, path) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(SUMMARY_COLUMNS)
        for row in summary.rows:
            wr.writerow([f"{row[c]:.17g}" if isinstance(row[c], float) else row[c]
                         for c in SUMMARY_COLUMNS])


def format_pretty(summary: McSummary) -> str:
    """Wide table: one Mean and one (SD) line per parameter, cells as columns."""
    cells = []
    for row in summary.rows:
        c = (row["r"], row["r_star"], row["m"])
        if c not in cells:
            cells.append(c)
    heads = [f"r={r},r*={rs},m={m}" for r, rs, m in cells]
    width = max(12, max(len(h) for h in heads) + 2)
    out = ["Parameter   Truth  MLE  " + "".join(h.rjust(width) for h in heads)]
    for nm in summary.names:
        per = [summary.cell_rows(c).get(nm) for c in cells]
        truth = next((x["truth"] for x in per if x), math.nan)
        means = "".join((f"{x['mean']:.4f}" if x else "-").rjust(width) for x in per)
        sds = "".join((f"({x['sd']:.4f})" if x else "").rjust(width) for x in per)
        out.append(f"{nm:<10}{truth:>7.2f}  Mean{means}")
        out.append(f"{'':<10}{'':>7}  SD  {sds}")
    return "\n".join(out) + "\n"
