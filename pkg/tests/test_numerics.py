import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bellrand import numerics


dims = st.integers(min_value=1, max_value=8)
seeds = st.integers(min_value=0, max_value=2**32 - 1)


def random_spd(n, seed):
    # A A^T + n I is symmetric positive definite with eigenvalues >= n
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((n, n))
    return a @ a.T + n * np.eye(n)


def test_tolerance_defaults():
    tols = numerics.Tolerances()
    assert tols.symmetry == 1e-12
    assert tols.eig_reconstruction == 1e-10
    assert tols.solve_residual == 1e-9
    assert tols.condition_limit == 1e13


def test_check_symmetric_accepts_symmetric():
    m = np.array([[2.0, 1.0], [1.0, 3.0]])
    out = numerics.check_symmetric(m)
    assert np.array_equal(out, m)


def test_check_symmetric_rejects_asymmetry():
    m = np.array([[2.0, 1.0], [1.0 + 1e-6, 3.0]])
    with pytest.raises(ValueError, match="symmetric"):
        numerics.check_symmetric(m)


def test_check_symmetric_rejects_nonsquare():
    with pytest.raises(ValueError, match="square"):
        numerics.check_symmetric(np.zeros((2, 3)))


def test_cholesky_reconstructs():
    m = random_spd(5, seed=0)
    low = numerics.cholesky(m)
    assert np.allclose(low @ low.T, m, atol=1e-10)
    assert np.allclose(low, np.tril(low))


def test_cholesky_rejects_indefinite():
    m = np.diag([1.0, -1.0])
    with pytest.raises(numerics.NotPositiveDefiniteError):
        numerics.cholesky(m)


def test_sym_eig_reconstructs_ascending():
    m = random_spd(6, seed=1)
    w, vecs = numerics.sym_eig(m)
    assert np.all(np.diff(w) >= 0)
    assert np.allclose(vecs @ np.diag(w) @ vecs.T, m, atol=1e-10)
    assert np.allclose(vecs.T @ vecs, np.eye(6), atol=1e-12)


def test_solve_linear_residual():
    a = random_spd(5, seed=2)
    b = np.arange(5.0)
    x = numerics.solve_linear(a, b)
    assert np.linalg.norm(a @ x - b) < 1e-9


@pytest.mark.filterwarnings("ignore::scipy.linalg.LinAlgWarning")
def test_solve_linear_rejects_singular():
    a = np.array([[1.0, 2.0], [2.0, 4.0]])
    with pytest.raises(numerics.IllConditionedError):
        numerics.solve_linear(a, np.ones(2))


def test_solve_linear_rejects_ill_conditioned():
    a = np.diag([1.0, 1e-15])
    with pytest.raises(numerics.IllConditionedError) as info:
        numerics.solve_linear(a, np.ones(2))
    assert info.value.estimate > 1e13


def test_solve_linear_shape_checks():
    with pytest.raises(ValueError, match="square"):
        numerics.solve_linear(np.zeros((2, 3)), np.ones(2))
    with pytest.raises(ValueError, match="right-hand"):
        numerics.solve_linear(np.eye(2), np.ones(3))


@settings(max_examples=30, deadline=None)
@given(n=dims, seed=seeds)
def test_spd_solve_round_trip(n, seed):
    a = random_spd(n, seed)
    rng = np.random.default_rng(seed + 1)
    x_true = rng.standard_normal(n)
    x = numerics.solve_linear(a, a @ x_true)
    assert np.allclose(x, x_true, atol=1e-8)


@settings(max_examples=30, deadline=None)
@given(n=dims, seed=seeds)
def test_cholesky_round_trip(n, seed):
    m = random_spd(n, seed)
    low = numerics.cholesky(m)
    assert np.allclose(low @ low.T, m, atol=1e-9 * n)
