"""
Separable spatio-temporal SAR error model with one temporal lag.

The errors obey ``eps_t = (sum_k theta_k W_k) eps_t + alpha eps_{t-1} + nu_t``
with ``eps_0 = 0``, i.e. ``S_nm eps = nu`` where ``S_nm`` is block lower
bidiagonal with ``S_n(theta) = I - sum_k theta_k W_k`` on the diagonal and
``-alpha I`` just below it. Nothing here ever forms the nm x nm matrix:
panels are carried as ``(n, m)`` (or ``(n, m, k)``) arrays and ``S_nm`` acts
one time block at a time, reusing a single factorisation of ``S_n``.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import InfeasibleError
from .lattice import WeightSet

__all__ = [
    "EPS_FEAS",
    "DENSE_MAX_N",
    "Params",
    "PanelData",
    "StOperator",
    "ParamDiagnostics",
    "validate_params",
    "apply_S_blockwise",
    "solve_S_blockwise",
    "write_panel_csv",
    "read_panel_csv",
]

EPS_FEAS = 1e-6
DENSE_MAX_N = 64


@dataclass(frozen=True)
class Params:
    """Full parameter vector ``eta = (beta, theta, alpha, sigma2)``."""

    beta: np.ndarray
    theta: np.ndarray
    alpha: float
    sigma2: float

    def __post_init__(self):
        object.__setattr__(self, "beta", np.atleast_1d(np.asarray(self.beta, dtype=float)))
        object.__setattr__(self, "theta", np.atleast_1d(np.asarray(self.theta, dtype=float)))
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "sigma2", float(self.sigma2))

    @property
    def p(self) -> int:
        return self.beta.size

    @property
    def q(self) -> int:
        return self.theta.size

    @property
    def xi(self) -> np.ndarray:
        return np.append(self.theta, self.alpha)

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.beta, self.theta, [self.alpha, self.sigma2]])

    @classmethod
    def from_vector(cls, eta, p: int, q: int) -> "Params":
        eta = np.asarray(eta, dtype=float)
        return cls(eta[:p], eta[p:p + q], eta[p + q], eta[p + q + 1])

    @staticmethod
    def names(p: int, q: int) -> list[str]:
        return ([f"beta{j}" for j in range(p)] + [f"theta{k + 1}" for k in range(q)]
                + ["alpha", "sigma2"])

    def in_box(self, eps: float = EPS_FEAS) -> bool:
        return xi_in_box(self.theta, self.alpha, eps) and self.sigma2 > 0


def xi_in_box(theta, alpha, eps: float = EPS_FEAS) -> bool:
    """Sufficient feasibility margin: ``sum|theta| <= 1-eps`` and ``|alpha| <= 1-eps``."""
    return float(np.sum(np.abs(theta))) <= 1 - eps and abs(float(alpha)) <= 1 - eps


@dataclass(frozen=True)
class PanelData:
    """Response ``Y`` as ``(n, m)`` and design ``X`` as ``(n m, p)``, time-major.

    Row ``t*n + i`` of ``X`` belongs to site ``i`` at time ``t`` (0-based),
    matching the stacking of ``vec(Y) = (Y_1', ..., Y_m')'``.
    """

    Y: np.ndarray
    X: np.ndarray

    def __post_init__(self):
        Y = np.asarray(self.Y, dtype=float)
        X = np.asarray(self.X, dtype=float)
        if Y.ndim != 2:
            raise ValueError("Y must be an (n, m) array")
        if X.ndim == 1:
            X = X[:, None]
        if X.shape[0] != Y.size:
            raise ValueError(f"X has {X.shape[0]} rows, expected n*m = {Y.size}")
        if not (np.all(np.isfinite(Y)) and np.all(np.isfinite(X))):
            raise ValueError("missing or non-finite values in panel")
        object.__setattr__(self, "Y", Y)
        object.__setattr__(self, "X", X)

    @property
    def n(self) -> int:
        return self.Y.shape[0]

    @property
    def m(self) -> int:
        return self.Y.shape[1]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def X_blocks(self) -> np.ndarray:
        """Design as an ``(n, m, p)`` array."""
        return self.X.reshape(self.m, self.n, self.p).transpose(1, 0, 2)

    def y_vec(self) -> np.ndarray:
        return self.Y.T.ravel()


def _perm_sign(perm: np.ndarray) -> int:
    seen = np.zeros(perm.size, dtype=bool)
    sign = 1
    for start in range(perm.size):
        if seen[start]:
            continue
        length = 0
        j = start
        while not seen[j]:
            seen[j] = True
            j = perm[j]
            length += 1
        if length % 2 == 0:
            sign = -sign
    return sign


class StOperator:
    """``S_nm(theta, alpha)`` held as one factorisation of ``S_n(theta)``.

    Sparse LU (SuperLU) for ``n > 64``, dense LU otherwise. The instance is
    read-only after construction; the dense inverse is computed lazily and
    cached on first use.

    Raises
    ------
    InfeasibleError
        If ``S_n(theta)`` is singular.
    """

    def __init__(self, weights: WeightSet, theta, alpha: float = 0.0):
        self.weights = weights
        self.theta = np.atleast_1d(np.asarray(theta, dtype=float))
        self.alpha = float(alpha)
        n = weights.n
        self.n = n
        self.S = (sp.identity(n, format="csr") - weights.combine(self.theta)).tocsr()

        if n <= DENSE_MAX_N:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", sla.LinAlgWarning)
                lu, piv = sla.lu_factor(self.S.toarray(), check_finite=False)
            self._dense = (lu, piv)
            self._splu = None
            self.pivots = np.diag(lu).copy()
            swaps = int(np.sum(piv != np.arange(n)))
            perm_sign = -1 if swaps % 2 else 1
        else:
            self._dense = None
            try:
                self._splu = spla.splu(self.S.tocsc(), permc_spec="COLAMD")
            except RuntimeError as exc:
                raise InfeasibleError(f"S_n(theta) is singular at theta={self.theta}") from exc
            self.pivots = self._splu.U.diagonal().copy()
            perm_sign = _perm_sign(self._splu.perm_r) * _perm_sign(self._splu.perm_c)

        # pivots at rounding level relative to the matrix scale count as singular
        tiny = n * np.finfo(float).eps * max(float(abs(self.S).max()), 1.0)
        if not np.all(np.isfinite(self.pivots)) or np.any(np.abs(self.pivots) <= tiny):
            raise InfeasibleError(f"S_n(theta) is singular at theta={self.theta}")
        self.det_sign = perm_sign * int(np.prod(np.sign(self.pivots)))
        self.logabsdet_n = float(np.sum(np.log(np.abs(self.pivots))))

    def solve(self, b: np.ndarray) -> np.ndarray:
        """``S_n^{-1} b`` for a vector or an ``(n, k)`` block."""
        if self._dense is not None:
            return sla.lu_solve(self._dense, b, check_finite=False)
        return self._splu.solve(np.asarray(b, dtype=float))

    def solve_transpose(self, b: np.ndarray) -> np.ndarray:
        if self._dense is not None:
            return sla.lu_solve(self._dense, b, trans=1, check_finite=False)
        return self._splu.solve(np.asarray(b, dtype=float), trans="T")

    @cached_property
    def inverse(self) -> np.ndarray:
        """Dense ``S_n^{-1}`` by solving against the identity columns."""
        inv = self.solve(np.eye(self.n))
        inv.setflags(write=False)
        return inv


def _as_blocks(E: np.ndarray, n: int):
    E = np.asarray(E, dtype=float)
    if E.ndim < 2 or E.shape[0] != n:
        raise ValueError(f"expected an array with leading dimension n={n}, got {E.shape}")
    return E


def apply_S_blockwise(op: StOperator, E: np.ndarray) -> np.ndarray:
    """Whiten a panel: column ``t`` of the result is ``S_n E_t - alpha E_{t-1}``.

    ``E`` may be ``(n, m)`` or ``(n, m, k)``; ``E_0`` is taken as zero.
    """
    E = _as_blocks(E, op.n)
    out = (op.S @ E.reshape(op.n, -1)).reshape(E.shape)
    if op.alpha != 0.0:
        out[:, 1:] -= op.alpha * E[:, :-1]
    return out


def solve_S_blockwise(op: StOperator, V: np.ndarray) -> np.ndarray:
    """Forward block substitution ``E_t = S_n^{-1}(alpha E_{t-1} + V_t)``."""
    V = _as_blocks(V, op.n)
    E = np.empty_like(V)
    m = V.shape[1]
    tail = V.shape[2:]
    prev = np.zeros((op.n,) + tail)
    for t in range(m):
        rhs = V[:, t] + op.alpha * prev
        sol = op.solve(rhs.reshape(op.n, -1)).reshape((op.n,) + tail)
        E[:, t] = sol
        prev = sol
    return E


@dataclass
class ParamDiagnostics:
    sum_abs_theta: float
    theta_ok: bool
    alpha_ok: bool
    sigma2_ok: bool
    nonsingular: bool
    det_sign: int | None
    pivots: np.ndarray | None = field(repr=False, default=None)
    zero_rows: int = 0

    @property
    def feasible(self) -> bool:
        return (self.theta_ok and self.alpha_ok and self.sigma2_ok and self.nonsingular
                and self.det_sign == 1 and self.zero_rows == 0)


def validate_params(p: Params, w: WeightSet, eps: float = EPS_FEAS) -> ParamDiagnostics:
    """Check the compactness margins and factorise ``S_n(theta)``; never raises
    on infeasibility, only on shape mismatch."""
    if p.q != w.q:
        raise ValueError(f"theta has length {p.q} but there are {w.q} weight matrices")
    sat = float(np.sum(np.abs(p.theta)))
    zero_rows = sum(int(np.sum(np.diff(wk.indptr) == 0)) for wk in w.weights)
    try:
        op = StOperator(w, p.theta, p.alpha)
        nonsingular, sign, piv = True, op.det_sign, op.pivots
    except InfeasibleError:
        nonsingular, sign, piv = False, None, None
    return ParamDiagnostics(
        sum_abs_theta=sat,
        theta_ok=sat <= 1 - eps,
        alpha_ok=abs(p.alpha) <= 1 - eps,
        sigma2_ok=p.sigma2 > 0,
        nonsingular=nonsingular,
        det_sign=sign,
        pivots=piv,
        zero_rows=zero_rows,
    )


def write_panel_csv(data: PanelData, path) -> None:
    """``site,time,y,x1..xp`` with 1-based indices, time-major row order."""
    n, m, p = data.n, data.m, data.p
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["site", "time", "y"] + [f"x{j + 1}" for j in range(p)])
        for t in range(m):
            for i in range(n):
                row = data.X[t * n + i]
                wr.writerow([i + 1, t + 1, f"{data.Y[i, t]:.17g}"] + [f"{v:.17g}" for v in row])


def read_panel_csv(path) -> PanelData:
    with open(path, newline="") as fh:
        rd = csv.reader(fh)
        header = next(rd, None)
        if header is None or header[:3] != ["site", "time", "y"] or len(header) < 4:
            raise ValueError(f"{path}: header must be 'site,time,y,x1,...'")
        p = len(header) - 3
        recs = []
        for lineno, row in enumerate(rd, start=2):
            if not row:
                continue
            if len(row) != p + 3:
                raise ValueError(f"{path}: line {lineno}: expected {p + 3} fields")
            recs.append((int(row[0]), int(row[1]), [float(v) for v in row[2:]]))
    if not recs:
        raise ValueError(f"{path}: no data rows")
    n = max(r[0] for r in recs)
    m = max(r[1] for r in recs)
    if len(recs) != n * m:
        raise ValueError(f"{path}: expected {n * m} rows for n={n}, m={m}, got {len(recs)}")
    Y = np.full((n, m), np.nan)
    X = np.full((n * m, p), np.nan)
    for i, t, vals in recs:
        Y[i - 1, t - 1] = vals[0]
        X[(t - 1) * n + (i - 1)] = vals[1:]
    if np.isnan(Y).any():
        raise ValueError(f"{path}: duplicate or missing (site, time) rows")
    return PanelData(Y=Y, X=X)
