"""
TOML configuration files for the command-line tool.

Every section is optional unless the subcommand needs it; unknown sections
or keys are rejected so that typos fail loudly. Schema::

    [lattice]            # weights, simulate, mc (thresholds only)
    r = 4
    r_star = 1
    thresholds = [0.0, 1.0]

    [truth]              # simulate, mc
    beta = [2.0, 2.0]
    theta = [0.8]
    alpha = 0.2
    sigma2 = 1.0

    [simulate]
    m = 5
    seed = 1

    [study]              # mc
    grid = [[4, 1, 2], [4, 2, 2]]   # (r, r_star, m) cells
    reps = 100
    base_seed = 42

    [fit]                # fit, mc
    tol_grad = 1e-6
    tol_step = 1e-10
    max_iters = 200
    multistart = 1
    start_xi = [0.0, 0.0]
    covariance = "expected"        # or "fisher", "observed"
"""

from __future__ import annotations

import sys
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .inference import FitOptions
from .model import Params
from .simulate import PAPER_TRUTH

__all__ = ["ConfigError", "load_config", "lattice_section", "truth_section",
           "fit_section", "simulate_section", "study_section"]

SCHEMA = {
    "lattice": {"r": int, "r_star": int, "thresholds": list},
    "truth": {"beta": list, "theta": list, "alpha": (int, float), "sigma2": (int, float)},
    "simulate": {"m": int, "seed": int},
    "study": {"grid": list, "reps": int, "base_seed": int},
    "fit": {"tol_grad": (int, float), "tol_step": (int, float), "max_iters": int,
            "multistart": int, "start_xi": list, "covariance": str},
}


class ConfigError(ValueError):
    pass


def load_config(path) -> dict:
    path = Path(path)
    try:
        raw = tomllib.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    for sec, body in raw.items():
        if sec not in SCHEMA:
            raise ConfigError(f"{path}: unknown section [{sec}]")
        if not isinstance(body, dict):
            raise ConfigError(f"{path}: '{sec}' must be a table")
        for key, val in body.items():
            if key not in SCHEMA[sec]:
                raise ConfigError(f"{path}: [{sec}] unknown key '{key}'")
            typ = SCHEMA[sec][key]
            if isinstance(val, bool) or not isinstance(val, typ):
                raise ConfigError(f"{path}: [{sec}] {key} has the wrong type ({type(val).__name__})")
    raw["_path"] = str(path)
    return raw


def _need(cfg, sec, key):
    try:
        return cfg[sec][key]
    except KeyError:
        raise ConfigError(f"{cfg.get('_path', 'config')}: missing [{sec}] {key}") from None


def _floats(cfg, sec, key, val):
    try:
        return [float(v) for v in val]
    except (TypeError, ValueError):
        raise ConfigError(f"{cfg.get('_path', 'config')}: [{sec}] {key} must be numbers") from None


def lattice_section(cfg, need_size: bool = True):
    sec = cfg.get("lattice", {})
    thr = tuple(_floats(cfg, "lattice", "thresholds", sec.get("thresholds", [0.0, 1.0])))
    if not need_size:
        return None, None, thr
    return int(_need(cfg, "lattice", "r")), int(_need(cfg, "lattice", "r_star")), thr


def truth_section(cfg) -> Params:
    if "truth" not in cfg:
        return PAPER_TRUTH
    sec = cfg["truth"]
    try:
        return Params(
            beta=_floats(cfg, "truth", "beta", sec.get("beta", PAPER_TRUTH.beta.tolist())),
            theta=_floats(cfg, "truth", "theta", sec.get("theta", PAPER_TRUTH.theta.tolist())),
            alpha=sec.get("alpha", PAPER_TRUTH.alpha),
            sigma2=sec.get("sigma2", PAPER_TRUTH.sigma2),
        )
    except ValueError as exc:
        raise ConfigError(f"{cfg.get('_path', 'config')}: [truth] {exc}") from exc


def fit_section(cfg) -> FitOptions:
    sec = dict(cfg.get("fit", {}))
    if "start_xi" in sec:
        sec["start_xi"] = tuple(_floats(cfg, "fit", "start_xi", sec["start_xi"]))
    try:
        return FitOptions(**sec)
    except ValueError as exc:
        raise ConfigError(f"{cfg.get('_path', 'config')}: [fit] {exc}") from exc


def simulate_section(cfg):
    sec = cfg.get("simulate", {})
    return int(_need(cfg, "simulate", "m")), int(sec.get("seed", 0))


def study_section(cfg):
    grid = _need(cfg, "study", "grid")
    cells = []
    for i, cell in enumerate(grid):
        if not (isinstance(cell, list) and len(cell) == 3 and all(isinstance(v, int) for v in cell)):
            raise ConfigError(f"{cfg.get('_path', 'config')}: [study] grid[{i}] must be [r, r_star, m]")
        cells.append(tuple(cell))
    sec = cfg["study"]
    return cells, int(sec.get("reps", 100)), int(sec.get("base_seed", 0))
