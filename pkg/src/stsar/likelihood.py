"""
Exact Gaussian log-likelihood and its profile over (beta, sigma2).

For fixed ``xi = (theta, alpha)`` the likelihood is maximised in closed form
by GLS on the whitened panel ``S_nm Y``, ``S_nm X``. Because ``S_nm`` is block
lower-triangular with identical diagonal blocks,
``log|S_nm| = m log|S_n(theta)|`` and a single factorisation of ``S_n`` serves
every term of one evaluation.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import EstimationError, InfeasibleError
from .lattice import WeightSet
from .model import (
    EPS_FEAS,
    PanelData,
    Params,
    StOperator,
    apply_S_blockwise,
    xi_in_box,
)

__all__ = [
    "ProfileEval",
    "DEGENERATE_LOGLIK",
    "log_det_Snm",
    "beta_hat",
    "sigma2_hat",
    "full_loglik",
    "profile_loglik",
    "profile_score",
]

log = logging.getLogger(__name__)

DEGENERATE_LOGLIK = 1e300
_DEGENERATE_RTOL = 1e-20
_MAX_COND = 1e13


@dataclass
class ProfileEval:
    theta: np.ndarray
    alpha: float
    loglik: float
    beta_hat: np.ndarray
    sigma2_hat: float
    logdet: float
    score: np.ndarray | None = None
    degenerate: bool = False

    @property
    def xi(self) -> np.ndarray:
        return np.append(self.theta, self.alpha)


def log_det_Snm(op: StOperator, m: int) -> float:
    """``log|S_nm| = m log|S_n(theta)|``; a non-positive determinant is infeasible."""
    if op.det_sign <= 0:
        raise InfeasibleError(f"det S_n(theta) <= 0 at theta={op.theta}")
    return m * op.logabsdet_n


def _whiten(data: PanelData, op: StOperator):
    SY = apply_S_blockwise(op, data.Y)
    SX = apply_S_blockwise(op, data.X_blocks())
    return SY.reshape(-1), SX.reshape(-1, data.p)


def _gls(sy: np.ndarray, sx: np.ndarray) -> np.ndarray:
    q_, r_ = np.linalg.qr(sx)
    cond = np.linalg.cond(r_) if r_.size else np.inf
    if not np.isfinite(cond) or cond > _MAX_COND:
        raise EstimationError(f"whitened design is rank deficient (condition number {cond:.3g})")
    return np.linalg.solve(r_, q_.T @ sy)


def beta_hat(data: PanelData, op: StOperator) -> np.ndarray:
    """GLS coefficients ``(X'S'SX)^{-1} X'S'SY`` via QR of the whitened design."""
    sy, sx = _whiten(data, op)
    return _gls(sy, sx)


def _residual(data: PanelData, beta: np.ndarray) -> np.ndarray:
    fitted = (data.X @ beta).reshape(data.m, data.n).T
    return data.Y - fitted


def sigma2_hat(data: PanelData, op: StOperator, beta: np.ndarray) -> float:
    nu = apply_S_blockwise(op, _residual(data, np.asarray(beta, dtype=float)))
    return float(np.sum(nu * nu)) / (data.n * data.m)


def full_loglik(data: PanelData, w: WeightSet, params: Params) -> float:
    """Log-likelihood up to the ``-(nm/2) log(2 pi)`` constant, at any feasible ``eta``."""
    op = StOperator(w, params.theta, params.alpha)
    nm = data.n * data.m
    nu = apply_S_blockwise(op, _residual(data, params.beta))
    return (-0.5 * nm * np.log(params.sigma2) + log_det_Snm(op, data.m)
            - float(np.sum(nu * nu)) / (2 * params.sigma2))


def _score_terms(op: StOperator, w: WeightSet, e: np.ndarray, nu: np.ndarray, s2: float):
    m = e.shape[1]
    inv = op.inverse
    grad = np.empty(w.q + 1)
    for k, wk in enumerate(w.weights):
        tr_g = float(wk.multiply(inv.T).sum())
        grad[k] = -m * tr_g + float(np.sum(nu * (wk @ e))) / s2
    grad[-1] = float(np.sum(nu[:, 1:] * e[:, :-1])) / s2
    return grad


def profile_loglik(data: PanelData, w: WeightSet, xi, *, score: bool = False,
                   strict: bool = True, eps: float = EPS_FEAS) -> ProfileEval:
    """Profile log-likelihood ``-(nm/2) log sigma2_hat + log|S_nm| - nm/2``.

    Parameters
    ----------
    xi : sequence
        ``(theta_1, ..., theta_q, alpha)``.
    score : bool
        Also compute the analytic gradient in ``xi``.
    strict : bool
        Reject ``xi`` outside the compact box ``sum|theta| <= 1 - eps``,
        ``|alpha| <= 1 - eps`` (raises :class:`InfeasibleError`).

    Notes
    -----
    A numerically zero ``sigma2_hat`` leaves the likelihood unbounded; the
    returned value is then ``DEGENERATE_LOGLIK`` with ``degenerate=True``.
    """
    xi = np.asarray(xi, dtype=float)
    theta, alpha = xi[:-1], float(xi[-1])
    if theta.size != w.q:
        raise ValueError(f"xi must have length q+1={w.q + 1}")
    if strict and not xi_in_box(theta, alpha, eps):
        raise InfeasibleError(f"xi={xi} outside the feasible box")
    op = StOperator(w, theta, alpha)
    nm = data.n * data.m
    logdet = log_det_Snm(op, data.m)

    sy, sx = _whiten(data, op)
    beta = _gls(sy, sx)
    e = _residual(data, beta)
    nu = apply_S_blockwise(op, e)
    s2 = float(np.sum(nu * nu)) / nm

    if s2 <= _DEGENERATE_RTOL * max(float(sy @ sy) / nm, 1e-300):
        log.debug("degenerate fit at xi=%s (sigma2_hat=%g)", xi, s2)
        return ProfileEval(theta, alpha, DEGENERATE_LOGLIK, beta, s2, logdet, None, True)

    ll = -0.5 * nm * np.log(s2) + logdet - 0.5 * nm
    grad = _score_terms(op, w, e, nu, s2) if score else None
    if log.isEnabledFor(logging.DEBUG):
        log.debug("xi=%s loglik=%.12g |score|=%s", np.array2string(xi, precision=8), ll,
                  "-" if grad is None else f"{np.linalg.norm(grad):.3e}")
    return ProfileEval(theta, alpha, float(ll), beta, s2, logdet, grad, False)


def profile_score(data: PanelData, w: WeightSet, xi, **kw) -> np.ndarray:
    """Gradient of the profile log-likelihood in ``(theta, alpha)``.

    With residual panel ``e`` and innovations ``nu = S_nm e`` at
    ``beta_hat(xi)``, the envelope theorem gives

    * ``d/dtheta_k = -m tr(W_k S_n^{-1}) + sum_t nu_t' W_k e_t / sigma2_hat``
    * ``d/dalpha = sum_{t>=2} nu_t' e_{t-1} / sigma2_hat``

    (``log|S_nm|`` does not depend on ``alpha``.)
    """
    ev = profile_loglik(data, w, xi, score=True, **kw)
    if ev.degenerate:
        raise EstimationError("profile likelihood is degenerate (sigma2_hat = 0)")
    return ev.score
