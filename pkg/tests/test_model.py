import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import dense_cov, dense_S, random_xi
from stsar import (
    InfeasibleError,
    PanelData,
    Params,
    StOperator,
    apply_S_blockwise,
    lattice_weights,
    read_panel_csv,
    solve_S_blockwise,
    validate_params,
    write_panel_csv,
)


def vec(E):
    return E.T.ravel()


def test_params_vector_round_trip():
    p = Params([1.0, 2.0], [0.3, -0.2], 0.4, 1.5)
    v = p.as_vector()
    np.testing.assert_array_equal(v, [1, 2, 0.3, -0.2, 0.4, 1.5])
    back = Params.from_vector(v, 2, 2)
    np.testing.assert_array_equal(back.as_vector(), v)
    assert Params.names(2, 1) == ["beta0", "beta1", "theta1", "alpha", "sigma2"]
    np.testing.assert_array_equal(p.xi, [0.3, -0.2, 0.4])


def test_validate_params_examples():
    w1 = lattice_weights(3, 1)
    assert validate_params(Params([0, 0], [0.8], 0.2, 1.0), w1).feasible
    d = validate_params(Params([0, 0], [1.0], 0.2, 1.0), w1)
    assert not d.feasible and not d.theta_ok
    w2 = lattice_weights(3, 1, (0.0, 1.0, 1.5))
    d = validate_params(Params([0, 0], [0.6, 0.5], 0.0, 1.0), w2)
    assert not d.feasible and d.sum_abs_theta == pytest.approx(1.1)
    d = validate_params(Params([0, 0], [0.1], 1.0, 1.0), w1)
    assert not d.alpha_ok
    d = validate_params(Params([0, 0], [0.1], 0.0, 1.0), w1)
    assert d.pivots is not None and d.det_sign == 1


def test_singular_operator_raises():
    # theta = 1 makes I - W singular (W 1 = 1)
    with pytest.raises(InfeasibleError):
        StOperator(lattice_weights(2, 1), [1.0], 0.0)
    with pytest.raises(InfeasibleError):
        StOperator(lattice_weights(9, 1), [1.0], 0.0)


def test_identity_cases():
    w = lattice_weights(2, 1)
    E = np.random.default_rng(0).standard_normal((4, 3))
    op = StOperator(w, [0.0], 0.0)
    np.testing.assert_array_equal(apply_S_blockwise(op, E), E)
    np.testing.assert_array_equal(solve_S_blockwise(op, E), E)


def test_single_time_point():
    w = lattice_weights(3, 1)
    op = StOperator(w, [0.4], 0.7)
    E = np.random.default_rng(1).standard_normal((9, 1))
    np.testing.assert_allclose(apply_S_blockwise(op, E), op.S @ E)


@pytest.mark.parametrize("side, m, q", [(2, 3, 1), (2, 4, 2), (3, 2, 1), (3, 4, 2), (2, 1, 1)])
def test_apply_and_solve_match_dense(side, m, q):
    rng = np.random.default_rng(side * 10 + m + q)
    w = lattice_weights(side, 1, (0.0, 1.0) if q == 1 else (0.0, 1.0, 1.5))
    theta, alpha = random_xi(rng, q, m)
    op = StOperator(w, theta, alpha)
    S = dense_S(w, theta, alpha, m)
    E = rng.standard_normal((w.n, m))
    np.testing.assert_allclose(vec(apply_S_blockwise(op, E)), S @ vec(E), atol=1e-12)
    np.testing.assert_allclose(vec(solve_S_blockwise(op, E)), np.linalg.solve(S, vec(E)), atol=1e-10)


def test_sparse_path_matches_dense_path():
    # n = 100 > 64 exercises the sparse factorisation
    w = lattice_weights(10, 1, (0.0, 1.0, 1.5))
    op = StOperator(w, [0.5, -0.3], 0.4)
    S = op.S.toarray()
    sign, ld = np.linalg.slogdet(S)
    assert op.det_sign == sign and op.logabsdet_n == pytest.approx(ld, abs=1e-10)
    b = np.random.default_rng(3).standard_normal((100, 2))
    np.testing.assert_allclose(op.solve(b), np.linalg.solve(S, b), atol=1e-12)
    np.testing.assert_allclose(op.solve_transpose(b), np.linalg.solve(S.T, b), atol=1e-12)
    np.testing.assert_allclose(op.inverse, np.linalg.inv(S), atol=1e-12)


def test_negative_determinant_sign_tracked():
    # theta outside the box can flip the sign of |S_n| without singularity
    w = lattice_weights(2, 1)
    op = StOperator(w, [1.5], 0.0)
    sign, _ = np.linalg.slogdet(op.S.toarray())
    assert op.det_sign == sign == -1


def test_batched_panels():
    w = lattice_weights(3, 1)
    op = StOperator(w, [0.3], -0.5)
    E = np.random.default_rng(4).standard_normal((9, 4, 5))
    out = apply_S_blockwise(op, E)
    for k in range(5):
        np.testing.assert_allclose(out[:, :, k], apply_S_blockwise(op, E[:, :, k]), atol=1e-14)
    np.testing.assert_allclose(solve_S_blockwise(op, out), E, atol=1e-12)


def test_dimension_mismatch():
    op = StOperator(lattice_weights(2, 1), [0.1], 0.1)
    with pytest.raises(ValueError):
        apply_S_blockwise(op, np.zeros((5, 2)))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 4), st.integers(1, 2), st.sampled_from([2, 3]))
def test_round_trip_and_linearity(seed, m, q, side):
    rng = np.random.default_rng(seed)
    w = lattice_weights(side, 1, (0.0, 1.0) if q == 1 else (0.0, 1.0, 1.5))
    theta, alpha = random_xi(rng, q, m, budget=0.95)
    op = StOperator(w, theta, alpha)
    V = rng.standard_normal((w.n, m))
    E = solve_S_blockwise(op, V)
    np.testing.assert_allclose(apply_S_blockwise(op, E), V, rtol=1e-10, atol=1e-10)
    A, B = rng.standard_normal((2, w.n, m))
    a, b = rng.standard_normal(2)
    np.testing.assert_allclose(apply_S_blockwise(op, a * A + b * B),
                               a * apply_S_blockwise(op, A) + b * apply_S_blockwise(op, B),
                               atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 4))
def test_implied_covariance_positive_definite(seed, m):
    rng = np.random.default_rng(seed)
    w = lattice_weights(2, 2)
    theta, alpha = random_xi(rng, 1, m, budget=1 - 1e-6)
    cov = dense_cov(w, theta, alpha, rng.uniform(0.1, 3.0), m)
    np.testing.assert_allclose(cov, cov.T, atol=1e-12 * np.abs(cov).max())
    np.linalg.cholesky(cov)


def test_panel_validation():
    with pytest.raises(ValueError):
        PanelData(Y=np.zeros((3, 2)), X=np.zeros((5, 1)))
    with pytest.raises(ValueError):
        PanelData(Y=np.array([[np.nan, 1.0]]), X=np.zeros((2, 1)))
    d = PanelData(Y=np.arange(6.0).reshape(3, 2), X=np.arange(6.0))
    assert (d.n, d.m, d.p) == (3, 2, 1)
    np.testing.assert_array_equal(d.y_vec(), [0, 2, 4, 1, 3, 5])
    np.testing.assert_array_equal(d.X_blocks()[:, 1, 0], [3, 4, 5])


def test_panel_csv_round_trip(tmp_path):
    rng = np.random.default_rng(5)
    d = PanelData(Y=rng.standard_normal((4, 3)), X=rng.standard_normal((12, 2)))
    path = tmp_path / "panel.csv"
    write_panel_csv(d, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "site,time,y,x1,x2"
    assert lines[1].startswith("1,1,") and lines[5].startswith("1,2,")
    back = read_panel_csv(path)
    np.testing.assert_array_equal(back.Y, d.Y)
    np.testing.assert_array_equal(back.X, d.X)


def test_panel_csv_errors(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("a,b,c\n")
    with pytest.raises(ValueError):
        read_panel_csv(path)
    path.write_text("site,time,y,x1\n1,1,0.5,1\n2,1,0.5\n")
    with pytest.raises(ValueError):
        read_panel_csv(path)
    path.write_text("site,time,y,x1\n1,1,0.5,1\n2,2,0.5,1\n")
    with pytest.raises(ValueError):
        read_panel_csv(path)
