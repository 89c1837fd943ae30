"""
Profile maximum likelihood fitting and plug-in asymptotic covariance.

The covariance of ``eta_hat = (beta, theta, alpha, sigma2)`` is the inverse
of the expected information ``I(eta) = -E[d^2 l / d eta d eta']`` evaluated
at the estimate. With ``G_k = (I_m x W_k) S_nm^{-1}`` and
``H = F S_nm^{-1}`` (``F`` shifts one time block down):

====================  =======================================
block                 value
====================  =======================================
beta, beta            ``X'S'SX / sigma2``
theta_k, theta_l      ``tr(G_k G_l) + tr(G_l' G_k)``
theta_k, sigma2       ``tr(G_k) / sigma2``
alpha, alpha          ``tr(H^2) + tr(H'H)``
alpha, sigma2         ``tr(H) / sigma2``  (identically 0)
sigma2, sigma2        ``nm / (2 sigma2^2)``
beta, (xi, sigma2)    0
theta, alpha          0 by default; see below
====================  =======================================

``S_nm^{-1}`` is block lower-triangular with block ``(t, s)`` equal to
``alpha^(t-s) S_n^{-(t-s+1)}``, so each trace collapses to a short sum of
n x n products over the lag ``d = t - s``.

The ``(theta, alpha)`` block is set to zero by default. The exact Gaussian
information has ``tr(G_k H) + tr(G_k' H)`` there; the first trace vanishes
but ``tr(G_k' H)`` does not when ``alpha != 0``. Pass ``cross=True`` (or fit
with ``covariance="fisher"``) to include it.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .errors import DegenerateLikelihoodError, EstimationError, InfeasibleError
from .lattice import WeightSet
from .likelihood import full_loglik, profile_loglik
from .model import (
    EPS_FEAS,
    PanelData,
    Params,
    StOperator,
    apply_S_blockwise,
    xi_in_box,
)

__all__ = [
    "FitOptions",
    "FitResult",
    "InfoBlocks",
    "OptimResult",
    "info_blocks",
    "expected_information",
    "observed_information",
    "maximize_profile",
    "fit_mle",
    "standard_errors",
]

log = logging.getLogger(__name__)


@dataclass
class FitOptions:
    tol_grad: float = 1e-6
    tol_step: float = 1e-10
    max_iters: int = 200
    start_xi: tuple | None = None
    multistart: int = 1
    covariance: str = "expected"  # "fisher" adds the theta-alpha block; "observed" is FD

    def __post_init__(self):
        if self.tol_grad <= 0 or self.tol_step <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_iters < 1 or self.multistart < 1:
            raise ValueError("max_iters and multistart must be >= 1")
        if self.covariance not in ("expected", "fisher", "observed"):
            raise ValueError("covariance must be 'expected', 'fisher' or 'observed'")


@dataclass
class InfoBlocks:
    tr_G: np.ndarray        # (q,)   tr(G_k)
    tr_GG: np.ndarray       # (q, q) tr(G_k G_l)
    tr_GtG: np.ndarray      # (q, q) tr(G_l' G_k)
    tr_H: float = 0.0
    tr_H2: float = 0.0
    tr_HtH: float = 0.0
    tr_GtH: np.ndarray | None = None   # (q,) tr(G_k' H)


def info_blocks(op: StOperator, w: WeightSet, m: int) -> InfoBlocks:
    """Exact traces of the ``G_k`` and ``H`` products at ``(theta, alpha)``.

    ``tr(H)`` and ``tr(H^2)`` are structural zeros: ``H`` is strictly block
    lower-triangular, and so is its square.
    """
    q = w.q
    a2 = op.alpha * op.alpha
    power = op.inverse.copy()            # S_n^{-(d+1)}, d = 0
    WP = [wk @ power for wk in w.weights]
    tr_G = m * np.array([np.trace(b) for b in WP])
    tr_GG = np.empty((q, q))
    for k in range(q):
        for l in range(q):
            tr_GG[k, l] = m * np.sum(WP[k] * WP[l].T)

    tr_GtG = np.zeros((q, q))
    tr_GtH = np.zeros(q)
    tr_HtH = 0.0
    coef = 1.0
    for d in range(m):
        if d > 0:
            coef *= a2
            if coef == 0.0:
                break
            prev = power
            power = op.solve(power)
            WP = [wk @ power for wk in w.weights]
            # <W_k P_d, P_{d-1}> enters with weight (m - d) alpha^(2d - 1)
            for k in range(q):
                tr_GtH[k] += (m - d) * (coef / op.alpha) * np.sum(WP[k] * prev)
        for k in range(q):
            for l in range(k, q):
                tr_GtG[k, l] += (m - d) * coef * np.sum(WP[k] * WP[l])
        if d <= m - 2:
            tr_HtH += (m - 1 - d) * coef * np.sum(power * power)
    tr_GtG = np.triu(tr_GtG) + np.triu(tr_GtG, 1).T
    return InfoBlocks(tr_G=tr_G, tr_GG=tr_GG, tr_GtG=tr_GtG, tr_HtH=float(tr_HtH),
                      tr_GtH=tr_GtH)


def expected_information(eta: Params, data: PanelData, w: WeightSet,
                         cross: bool = False) -> np.ndarray:
    """Unnormalised expected information in the order ``(beta, theta, alpha, sigma2)``.

    With ``cross=False`` the ``(theta, alpha)`` block is an exact zero;
    ``cross=True`` fills it with ``tr(G_k' H)``.

    Raises
    ------
    InfeasibleError
        If ``S_n(theta)`` is singular or ``sigma2 <= 0``.
    """
    if eta.sigma2 <= 0:
        raise InfeasibleError("sigma2 must be positive")
    p, q = data.p, w.q
    n, m = data.n, data.m
    op = StOperator(w, eta.theta, eta.alpha)
    s2 = eta.sigma2
    blocks = info_blocks(op, w, m)

    SX = apply_S_blockwise(op, data.X_blocks()).reshape(-1, p)
    info = np.zeros((p + q + 2, p + q + 2))
    ib, it, ia, isg = slice(0, p), slice(p, p + q), p + q, p + q + 1
    info[ib, ib] = SX.T @ SX / s2
    info[it, it] = blocks.tr_GG + blocks.tr_GtG
    info[it, isg] = info[isg, it] = blocks.tr_G / s2
    info[ia, ia] = blocks.tr_H2 + blocks.tr_HtH
    if cross:
        info[it, ia] = info[ia, it] = blocks.tr_GtH
    info[ia, isg] = info[isg, ia] = blocks.tr_H / s2
    info[isg, isg] = n * m / (2 * s2 * s2)
    return info


def observed_information(eta: Params, data: PanelData, w: WeightSet,
                         rel_step: float = 1e-4) -> np.ndarray:
    """``-d^2 l / d eta d eta'`` by central differences of the full log-likelihood."""
    x0 = eta.as_vector()
    p, q = eta.p, eta.q
    h = rel_step * np.maximum(1.0, np.abs(x0))
    k = x0.size

    def f(x):
        return full_loglik(data, w, Params.from_vector(x, p, q))

    f0 = f(x0)
    hess = np.empty((k, k))
    for i in range(k):
        ei = np.zeros(k)
        ei[i] = h[i]
        hess[i, i] = (f(x0 + ei) - 2 * f0 + f(x0 - ei)) / h[i] ** 2
        for j in range(i):
            ej = np.zeros(k)
            ej[j] = h[j]
            hess[i, j] = hess[j, i] = (f(x0 + ei + ej) - f(x0 + ei - ej)
                                       - f(x0 - ei + ej) + f(x0 - ei - ej)) / (4 * h[i] * h[j])
    return -hess


@dataclass
class OptimResult:
    x: np.ndarray
    value: float
    grad: np.ndarray
    iterations: int
    converged: bool
    message: str
    trace: list = field(default_factory=list, repr=False)


def _fd_hessian(fun, x, g, feasible, h=1e-5):
    k = x.size
    hess = np.empty((k, k))
    for j in range(k):
        step = np.zeros(k)
        step[j] = h
        sgn = 1.0
        if not feasible(x + step):
            sgn = -1.0
        try:
            _, gj = fun(x + sgn * step)
        except InfeasibleError:
            return None
        hess[:, j] = (gj - g) / (sgn * h)
    return 0.5 * (hess + hess.T)


def _ascent_metric(hess, g):
    """Positive-definite model of ``-hess``; scaled identity as fallback."""
    if hess is not None and np.all(np.isfinite(hess)):
        b = -hess
        vals, vecs = np.linalg.eigh(b)
        if vals.max() > 0:
            vals = np.maximum(vals, 1e-8 * vals.max())
            return (vecs * vals) @ vecs.T
    return np.eye(g.size) * max(1.0, float(np.linalg.norm(g)))


def maximize_profile(fun, start, feasible=None, *, tol_grad=1e-6, tol_step=1e-10,
                     max_iters=200, min_step=1e-14) -> OptimResult:
    """Quasi-Newton ascent with feasibility-aware backtracking.

    ``fun(x)`` returns ``(value, gradient)`` and may raise
    :class:`InfeasibleError`; ``feasible(x)`` is the box test. The initial
    curvature comes from finite differences of the gradient, after which
    BFGS updates are applied to ``-hessian``. Trial points that leave the
    feasible set, fail to evaluate, or fail the Armijo test halve the step.
    A step that can only shrink because of infeasibility ends the search as
    a converged boundary maximum.
    """
    if feasible is None:
        def feasible(_):
            return True
    x = np.asarray(start, dtype=float).copy()
    if not feasible(x):
        raise InfeasibleError(f"start {x} is not feasible")
    f, g = fun(x)
    trace = [(x.copy(), f, float(np.linalg.norm(g)))]
    B = _ascent_metric(_fd_hessian(fun, x, g, feasible), g)

    for it in range(1, max_iters + 1):
        if np.linalg.norm(g) <= tol_grad:
            return OptimResult(x, f, g, it - 1, True, "gradient tolerance", trace)
        d = np.linalg.solve(B, g)
        slope = float(g @ d)
        step = 1.0
        blocked = True                   # every rejection so far was infeasibility
        while True:
            if step < min_step:
                if blocked:
                    # pressed against the box: a constrained maximum
                    return OptimResult(x, f, g, it, True, "boundary maximum", trace)
                return OptimResult(x, f, g, it, False, "line search failed", trace)
            trial = x + step * d
            if not feasible(trial):
                step *= 0.5
                continue
            try:
                ft, gt = fun(trial)
            except InfeasibleError:
                step *= 0.5
                continue
            if ft >= f + 1e-4 * step * slope:
                break
            blocked = False
            step *= 0.5

        s = trial - x
        y = g - gt                       # gradient change of -f
        x, f, g_old, g = trial, ft, g, gt
        trace.append((x.copy(), f, float(np.linalg.norm(g))))
        sy = float(s @ y)
        if sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
            Bs = B @ s
            B = B + np.outer(y, y) / sy - np.outer(Bs, Bs) / float(s @ Bs)
        if np.linalg.norm(s) <= tol_step * (1.0 + np.linalg.norm(x)):
            if np.linalg.norm(g) <= tol_grad:
                return OptimResult(x, f, g, it, True, "gradient tolerance", trace)
            # stalled against the box: accept as a boundary maximum
            return OptimResult(x, f, g, it, True, "step tolerance", trace)
    return OptimResult(x, f, g, max_iters, np.linalg.norm(g) <= tol_grad,
                       "iteration limit", trace)


@dataclass
class FitResult:
    eta_hat: Params
    loglik: float
    info: np.ndarray
    cov: np.ndarray
    se: np.ndarray
    names: list
    iterations: int
    converged: bool
    h_n: float
    n: int
    m: int
    alpha_fixed: bool = False
    message: str = ""
    cov_type: str = "expected"
    score: np.ndarray | None = None

    @property
    def estimates(self) -> np.ndarray:
        v = self.eta_hat.as_vector()
        if self.alpha_fixed:
            v = np.delete(v, self.eta_hat.p + self.eta_hat.q)
        return v

    def report(self, level: float = 0.95) -> str:
        lines = [
            f"n = {self.n}",
            f"m = {self.m}",
            f"h_n = {self.h_n:.17g}",
            f"loglik = {self.loglik:.17g}",
            f"iterations = {self.iterations}",
            f"converged = {str(self.converged).lower()}",
            f"covariance = {self.cov_type}",
            f"message = {self.message}",
        ]
        if self.alpha_fixed:
            lines.append("alpha = fixed at 0 (m = 1, not identified)")
        lines.append("parameter estimate se ci_low ci_high")
        for row in standard_errors(self, level, strict=False):
            lines.append(" ".join([row[0]] + [f"{v:.17g}" for v in row[1:]]))
        return "\n".join(lines) + "\n"

    def csv_header(self) -> list[str]:
        cols = ["n", "m", "converged", "iterations", "loglik"]
        for nm in self.names:
            cols += [nm, f"se_{nm}"]
        return cols

    def csv_row(self) -> list[str]:
        row = [str(self.n), str(self.m), str(int(self.converged)), str(self.iterations),
               f"{self.loglik:.17g}"]
        for est, se in zip(self.estimates, self.se):
            row += [f"{est:.17g}", f"{se:.17g}"]
        return row


def _start_points(q: int, fit_alpha: bool, opts: FitOptions):
    first = np.zeros(q + 1) if opts.start_xi is None else np.asarray(opts.start_xi, dtype=float)
    if first.size != q + 1:
        raise ValueError(f"start_xi must have length q+1 = {q + 1}")
    pts = [first]
    grid = [0.5, -0.5, 0.25, -0.25, 0.75]
    i = 0
    while len(pts) < opts.multistart:
        g = grid[i % len(grid)]
        th = np.full(q, g / q)
        al = grid[(i + 1) % len(grid)] if fit_alpha else 0.0
        pts.append(np.append(th, al))
        i += 1
    return pts


def fit_mle(data: PanelData, w: WeightSet, opts: FitOptions | None = None) -> FitResult:
    """Maximise the profile likelihood over ``xi`` and assemble ``eta_hat``.

    For a single time point (``m = 1``) ``alpha`` is not identified; it is
    held at zero and dropped from the information and covariance.

    Raises
    ------
    ValueError
        On dimension mismatch, too few observations, or isolated sites.
    DegenerateLikelihoodError
        If the data are fitted exactly (``sigma2_hat = 0``).
    EstimationError
        If every start point fails.
    """
    opts = opts or FitOptions()
    n, m, p, q = data.n, data.m, data.p, w.q
    if w.n != n:
        raise ValueError(f"weights are {w.n} x {w.n} but panel has n = {n} sites")
    if n * m <= p + q + 2:
        raise ValueError("need n*m > p + q + 2 observations")
    if any(np.any(np.diff(wk.indptr) == 0) for wk in w.weights):
        raise ValueError("some weight matrix has sites without neighbours")
    fit_alpha = m > 1

    def fun(xi):
        full = xi if fit_alpha else np.append(xi, 0.0)
        ev = profile_loglik(data, w, full, score=True)
        if ev.degenerate:
            raise DegenerateLikelihoodError("sigma2_hat = 0: data are fitted exactly")
        return ev.loglik, (ev.score if fit_alpha else ev.score[:-1])

    def feasible(xi):
        if fit_alpha:
            return xi_in_box(xi[:-1], xi[-1], EPS_FEAS)
        return xi_in_box(xi, 0.0, EPS_FEAS)

    best = None
    errors = []
    for start in _start_points(q, fit_alpha, opts):
        x0 = start if fit_alpha else start[:-1]
        try:
            res = maximize_profile(fun, x0, feasible, tol_grad=opts.tol_grad,
                                   tol_step=opts.tol_step, max_iters=opts.max_iters)
        except (InfeasibleError, EstimationError) as exc:
            if isinstance(exc, DegenerateLikelihoodError):
                raise
            errors.append(str(exc))
            continue
        log.debug("start %s -> xi %s, loglik %.12g (%s)", start, res.x, res.value, res.message)
        if best is None or (res.converged, res.value) > (best.converged, best.value):
            best = res
    if best is None:
        raise EstimationError("all start points failed: " + "; ".join(errors))

    xi_hat = best.x if fit_alpha else np.append(best.x, 0.0)
    ev = profile_loglik(data, w, xi_hat, score=True)
    eta = Params(ev.beta_hat, xi_hat[:-1], xi_hat[-1], ev.sigma2_hat)

    names = Params.names(p, q)
    if opts.covariance in ("expected", "fisher"):
        info = expected_information(eta, data, w, cross=opts.covariance == "fisher")
    else:
        info = observed_information(eta, data, w)
    if not fit_alpha:
        drop = p + q
        info = np.delete(np.delete(info, drop, axis=0), drop, axis=1)
        names = [nm for nm in names if nm != "alpha"]

    message = best.message
    try:
        cov = _invert_information(info, names)
        se = np.sqrt(np.diag(cov))
    except EstimationError as exc:
        cov = np.full_like(info, np.nan)
        se = np.full(info.shape[0], np.nan)
        message += f"; {exc}"

    return FitResult(
        eta_hat=eta,
        loglik=ev.loglik,
        info=info,
        cov=cov,
        se=se,
        names=names,
        iterations=best.iterations,
        converged=best.converged,
        h_n=w.h_n,
        n=n,
        m=m,
        alpha_fixed=not fit_alpha,
        message=message,
        cov_type=opts.covariance,
        score=ev.score,
    )


def _invert_information(info: np.ndarray, names) -> np.ndarray:
    sym = 0.5 * (info + info.T)
    vals, vecs = np.linalg.eigh(sym)
    if not np.all(np.isfinite(vals)) or vals.min() <= 1e-12 * max(abs(vals).max(), 1e-300):
        j = int(np.argmin(vals))
        lead = names[int(np.argmax(np.abs(vecs[:, j])))]
        raise EstimationError(
            f"information matrix is not positive definite: eigenvalue {vals[j]:.6g} "
            f"(direction dominated by {lead})")
    return (vecs / vals) @ vecs.T


def standard_errors(fit: FitResult, level: float = 0.95, strict: bool = True):
    """Rows ``(name, estimate, se, ci_low, ci_high)`` of normal Wald intervals.

    Raises
    ------
    EstimationError
        If the information is singular or indefinite (only when ``strict``).
    """
    if not 0 < level < 1:
        raise ValueError("level must be in (0, 1)")
    if strict:
        cov = _invert_information(fit.info, fit.names)
        se = np.sqrt(np.diag(cov))
    else:
        se = fit.se
    z = stats.norm.ppf(0.5 + level / 2)
    return [(nm, float(est), float(s), float(est - z * s), float(est + z * s))
            for nm, est, s in zip(fit.names, fit.estimates, se)]
