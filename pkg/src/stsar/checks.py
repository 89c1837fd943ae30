"""Self-checks on small instances, run by ``stsar check``.

Each check compares the blockwise code path against an explicit dense
nm x nm construction or an exact identity and returns ``(name, ok, detail)``.
"""

from __future__ import annotations

import numpy as np

from .inference import expected_information, info_blocks
from .lattice import build_lattice, build_neighbors, lattice_weights, row_standardize
from .likelihood import full_loglik, log_det_Snm, profile_loglik
from .model import PanelData, Params, StOperator, apply_S_blockwise, solve_S_blockwise
from .simulate import SimConfig, gen_dataset

__all__ = ["run_checks"]


def _dense_S(w, theta, alpha, m):
    n = w.n
    Sn = np.eye(n) - w.combine(theta).toarray()
    F = np.eye(m, k=-1)
    return np.kron(np.eye(m), Sn) - alpha * np.kron(F, np.eye(n))


def _instance(seed=0, r=3, m=3):
    rng = np.random.default_rng(seed)
    w = lattice_weights(r, 1, (0.0, 1.0, 1.5))
    theta = rng.uniform(-0.45, 0.45, size=2)
    alpha = rng.uniform(-0.9, 0.9)
    X = np.column_stack([np.ones(w.n * m), rng.standard_normal(w.n * m)])
    data = PanelData(Y=rng.standard_normal((w.n, m)), X=X)
    return w, theta, alpha, data


def _check_weights():
    w = lattice_weights(4, 2)
    a = build_neighbors(build_lattice(4, 2), (0.0, 1.0)).adjacency[0]
    W = w.weights[0].toarray()
    rows = W.sum(axis=1)
    ok = (np.allclose(rows, 1.0, atol=1e-14) and np.all(np.diag(W) == 0)
          and (a != a.T).nnz == 0 and abs(w.norms()[0][1] - 1.0) < 1e-14)
    return "weights: row sums, zero diagonal, symmetry of adjacency", ok, f"h_n={w.h_n:g}"


def _check_blockwise():
    w, theta, alpha, data = _instance(1)
    m = data.m
    op = StOperator(w, theta, alpha)
    S = _dense_S(w, theta, alpha, m)
    E = np.random.default_rng(2).standard_normal((w.n, m))
    err_apply = np.max(np.abs(apply_S_blockwise(op, E).T.ravel() - S @ E.T.ravel()))
    V = solve_S_blockwise(op, E)
    err_solve = np.max(np.abs(V.T.ravel() - np.linalg.solve(S, E.T.ravel())))
    ok = err_apply < 1e-12 and err_solve < 1e-10
    return "blockwise S_nm apply/solve vs dense", ok, f"{err_apply:.2e}, {err_solve:.2e}"


def _check_logdet():
    w, theta, alpha, data = _instance(3)
    op = StOperator(w, theta, alpha)
    sign, ld = np.linalg.slogdet(_dense_S(w, theta, alpha, data.m))
    err = abs(log_det_Snm(op, data.m) - ld)
    exact = log_det_Snm(op, data.m) == data.m * log_det_Snm(op, 1)
    return "log|S_nm| = m log|S_n| and dense agreement", bool(exact and sign > 0 and err < 1e-10), f"{err:.2e}"


def _check_profile():
    w, theta, alpha, data = _instance(4)
    ev = profile_loglik(data, w, np.append(theta, alpha))
    full = full_loglik(data, w, Params(ev.beta_hat, theta, alpha, ev.sigma2_hat))
    err = abs(full - ev.loglik)
    return "profile = full likelihood at (beta_hat, sigma2_hat)", err < 1e-9, f"{err:.2e}"


def _check_score():
    w, theta, alpha, data = _instance(5)
    xi = np.append(theta, alpha)
    g = profile_loglik(data, w, xi, score=True).score
    h = 1e-5
    fd = np.empty_like(xi)
    for j in range(xi.size):
        e = np.zeros_like(xi)
        e[j] = h
        fd[j] = (profile_loglik(data, w, xi + e).loglik - profile_loglik(data, w, xi - e).loglik) / (2 * h)
    rel = np.max(np.abs(g - fd) / np.maximum(1.0, np.abs(fd)))
    return "analytic profile score vs central differences", rel < 1e-6, f"{rel:.2e}"


def _check_information():
    w, theta, alpha, data = _instance(6)
    eta = Params([1.0, 0.5], theta, alpha, 1.3)
    info = expected_information(eta, data, w)
    p, q = 2, 2
    zeros = (np.all(info[:p, p:] == 0) and np.all(info[p:p + q, p + q] == 0)
             and info[p + q, p + q + 1] == 0)
    blocks = info_blocks(StOperator(w, theta, alpha), w, data.m)
    eta0 = Params([1.0, 0.5], [0.0, 0.0], 0.0, 1.0)
    i0 = expected_information(eta0, data, w)
    closed = abs(i0[p + q, p + q] - (data.m - 1) * data.n) < 1e-9
    ok = bool(zeros and blocks.tr_H == 0 and blocks.tr_H2 == 0 and closed)
    return "information structural zeros, tr(H)=tr(H^2)=0, I_aa=(m-1)n", ok, ""


def _check_covariance_pd():
    w, theta, alpha, data = _instance(7)
    S = _dense_S(w, theta, alpha, data.m)
    Sinv = np.linalg.inv(S)
    cov = 1.7 * Sinv @ Sinv.T
    try:
        np.linalg.cholesky(0.5 * (cov + cov.T))
        ok = True
    except np.linalg.LinAlgError:
        ok = False
    return "implied covariance positive definite", ok, ""


def _check_determinism():
    a = gen_dataset(SimConfig(2, 2, 3, seed=11))
    b = gen_dataset(SimConfig(2, 2, 3, seed=11))
    c = gen_dataset(SimConfig(2, 2, 3, seed=12))
    ok = (a.Y.tobytes() == b.Y.tobytes() and not np.array_equal(a.Y, c.Y)
          and np.array_equal(a.X, c.X))
    return "simulation determinism by seed", ok, ""


def _check_row_standardize_zero_rows():
    adj = build_neighbors(build_lattice(2, 1), (0.0, 1.0))
    w = row_standardize(adj)
    ok = set(np.unique(w.weights[0].toarray())) <= {0.0, 0.5} and w.h_n == 2
    return "2x2 rook lattice weights", ok, ""


CHECKS = [
    _check_weights,
    _check_row_standardize_zero_rows,
    _check_blockwise,
    _check_logdet,
    _check_profile,
    _check_score,
    _check_information,
    _check_covariance_pd,
    _check_determinism,
]


def run_checks():
    out = []
    for chk in CHECKS:
        try:
            out.append(chk())
        except Exception as exc:  # a crashing check is a failing check
            out.append((chk.__name__.lstrip("_"), False, f"{type(exc).__name__}: {exc}"))
    return out
