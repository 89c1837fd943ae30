"""
Synthetic panels from the separable SAR error model.

Design: intercept plus ``sin(i)`` (1-based site index, radians), identical at
every time point; innovations ``nu_t ~ N(0, sigma2 I_n)``; errors built by
forward recursion from ``eps_0 = 0``.

Random numbers come from numpy's PCG64 ``Generator`` seeded with a 64-bit
integer; normals use numpy's ziggurat sampler. A study's replicate ``k``
uses seed ``base_seed ^ k``.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import InfeasibleError
from .lattice import WeightSet, lattice_weights
from .model import PanelData, Params, StOperator, solve_S_blockwise, write_panel_csv, xi_in_box

__all__ = [
    "SimConfig",
    "PAPER_TRUTH",
    "make_rng",
    "replicate_seed",
    "gen_covariates",
    "gen_errors",
    "gen_dataset",
    "write_dataset",
]

MASK64 = (1 << 64) - 1

PAPER_TRUTH = Params(beta=[2.0, 2.0], theta=[0.8], alpha=0.2, sigma2=1.0)


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(int(seed) & MASK64))


def replicate_seed(base_seed: int, rep: int) -> int:
    return (int(base_seed) ^ int(rep)) & MASK64


@dataclass
class SimConfig:
    r: int
    r_star: int
    m: int
    truth: Params = field(default_factory=lambda: PAPER_TRUTH)
    thresholds: tuple = (0.0, 1.0)
    seed: int = 0

    def __post_init__(self):
        if self.r < 1 or self.r_star < 1:
            raise ValueError("r and r_star must be >= 1")
        if self.m < 1:
            raise ValueError("m must be >= 1")
        # sigma2 = 0 is allowed here: it yields the noiseless panel X beta
        if not xi_in_box(self.truth.theta, self.truth.alpha) or self.truth.sigma2 < 0:
            raise ValueError("truth parameters are not feasible")
        if self.truth.p != 2:
            raise ValueError("the simulation design has p = 2 (intercept, sin(i))")

    @property
    def n(self) -> int:
        return (self.r * self.r_star) ** 2

    def weights(self) -> WeightSet:
        return lattice_weights(self.r, self.r_star, self.thresholds)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["truth"] = {
            "beta": self.truth.beta.tolist(),
            "theta": self.truth.theta.tolist(),
            "alpha": self.truth.alpha,
            "sigma2": self.truth.sigma2,
        }
        d["thresholds"] = list(self.thresholds)
        return d


def gen_covariates(n: int, m: int) -> np.ndarray:
    """``(n m, 2)`` design with rows ``(1, sin(i))`` repeated for each time."""
    x = np.column_stack([np.ones(n), np.sin(np.arange(1, n + 1))])
    return np.tile(x, (m, 1))


def gen_errors(w: WeightSet, truth: Params, m: int, rng: np.random.Generator,
               size: int | None = None) -> np.ndarray:
    """Draw an ``(n, m)`` error panel (or ``(n, m, size)`` independent panels).

    Innovations are drawn time-major then site-major so that one panel uses
    ``n*m`` consecutive normals in the order of ``vec(nu)``.
    """
    if truth.sigma2 < 0:
        raise ValueError("sigma2 must be non-negative")
    op = StOperator(w, truth.theta, truth.alpha)
    if op.det_sign <= 0:
        raise InfeasibleError("det S_n(theta) <= 0")
    n = w.n
    sd = np.sqrt(truth.sigma2)
    if size is None:
        nu = sd * rng.standard_normal((m, n)).T
    else:
        nu = sd * rng.standard_normal((size, m, n)).transpose(2, 1, 0)
    return solve_S_blockwise(op, nu)


def gen_dataset(cfg: SimConfig, w: WeightSet | None = None) -> PanelData:
    """``Y = X beta + eps``, deterministic in ``cfg.seed``."""
    w = cfg.weights() if w is None else w
    n, m = w.n, cfg.m
    X = gen_covariates(n, m)
    eps = gen_errors(w, cfg.truth, m, make_rng(cfg.seed))
    Y = (X @ cfg.truth.beta).reshape(m, n).T + eps
    return PanelData(Y=Y, X=X)


def write_dataset(cfg: SimConfig, data: PanelData, path) -> Path:
    """Panel CSV plus a ``<path>.config.json`` sidecar echoing the config."""
    path = Path(path)
    write_panel_csv(data, path)
    side = path.with_name(path.name + ".config.json")
    side.write_text(json.dumps(cfg.to_dict(), indent=2) + "\n")
    return side
