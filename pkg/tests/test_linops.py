"""
Tests for ppg.linops

Tests verify:
- apply/adjoint agree through the inner product for every operator kind
- block Hankel layout and anti-diagonal adjoint
- certified ||M*M|| bounds against dense eigendecompositions
- power iteration accuracy and failure reporting
"""

import numpy as np
import pytest
import scipy.linalg

from ppg.checks import adjoint_error, exact_gram_norm, sample_operators
from ppg.errors import DimensionError, DomainError, NumericalError
from ppg.linops import (
    AdjointView,
    DenseMap,
    FusedDiffStack,
    HankelMap,
    HankelShape,
    IdentityMap,
    Replication,
    adjoint,
    apply,
    gram_norm_bound,
    max_eigenvalue,
)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# ==============================================================================
# ADJOINT CONSISTENCY
# ==============================================================================

def test_adjoint_consistency_for_every_kind(rng):
    """
    Test: <Mz, y> = <z, M*y> to 1e-10 relative on 100 random pairs per kind.
    """
    ops = sample_operators(rng)
    assert {op.kind for op in ops} == {"identity", "dense", "hankel", "fused_diff_stack", "replication"}
    for op in ops:
        assert adjoint_error(op, n_pairs=100, rng=rng) <= 1e-10, op.kind


def test_adjoint_view_swaps_apply_and_adjoint(rng):
    D = DenseMap(rng.standard_normal((4, 6)))
    view = D.T
    assert isinstance(view, AdjointView)
    assert view.in_dim == (4,) and view.out_dim == (6,)
    y = rng.standard_normal(4)
    np.testing.assert_allclose(view.apply(y), D.matrix.T @ y)
    assert view.T is D
    assert adjoint_error(view, n_pairs=20, rng=rng) <= 1e-10


def test_functional_interface_matches_methods(rng):
    H = HankelMap(HankelShape(2, 2, 3, 3))
    z = rng.standard_normal(H.in_dim)
    y = rng.standard_normal(H.out_dim)
    np.testing.assert_array_equal(apply(H, z), H.apply(z))
    np.testing.assert_array_equal(adjoint(H, y), H.adjoint(y))
    assert gram_norm_bound(H) == H.gram_norm_bound()


def test_wrong_shape_raises_dimension_error():
    H = HankelMap(HankelShape(2, 3, 2, 2))
    with pytest.raises(DimensionError):
        H.apply(np.zeros((2, 8)))
    with pytest.raises(DimensionError):
        FusedDiffStack(5).adjoint(np.zeros(5))


# ==============================================================================
# OPERATOR STRUCTURE
# ==============================================================================

def test_hankel_blocks_follow_anti_diagonals(rng):
    """
    Test: block (p, q) of H(z) is z_{p+q}.
    """
    s = HankelShape(m=2, n=3, j=3, k=4)
    H = HankelMap(s)
    z = rng.standard_normal(s.in_dim)
    Hz = H.apply(z)
    assert Hz.shape == (s.m * s.j, s.n * s.k)
    for p in range(s.j):
        for q in range(s.k):
            block = Hz[p * s.m:(p + 1) * s.m, q * s.n:(q + 1) * s.n]
            i = p + q
            np.testing.assert_array_equal(block, z[:, i * s.n:(i + 1) * s.n])


@pytest.mark.parametrize("j,k", [(2, 5), (5, 2), (3, 3)])
def test_hankel_adjoint_is_dense_transpose(rng, j, k):
    H = HankelMap(HankelShape(2, 2, j, k))
    dense = H.to_dense()
    y = rng.standard_normal(H.out_dim)
    np.testing.assert_allclose(H.adjoint(y).ravel(), dense.T @ y.ravel(), atol=1e-12)


def test_fused_diff_stack_gram_structure():
    """
    Test: MᵀM is tridiagonal with diagonal (2, 3, ..., 3, 2, 0) and -1 off the diagonal.
    """
    for n in (3, 4, 10, 50):
        M = FusedDiffStack(n).to_dense()
        G = M.T @ M
        diag = np.full(n, 3.0)
        diag[0] = diag[n - 2] = 2.0
        diag[n - 1] = 0.0
        expected = np.diag(diag)
        idx = np.arange(n - 2)
        expected[idx, idx + 1] = expected[idx + 1, idx] = -1.0
        np.testing.assert_array_equal(G, expected)


def test_fused_diff_stack_leaves_intercept_unpenalized():
    M = FusedDiffStack(6)
    e = np.zeros(6)
    e[-1] = 1.0
    np.testing.assert_array_equal(M.apply(e), np.zeros(9))


def test_replication_adjoint_sums_copies(rng):
    R = Replication(3, (2, 2))
    y = rng.standard_normal((3, 2, 2))
    np.testing.assert_allclose(R.adjoint(y), y.sum(axis=0))
    z = rng.standard_normal((2, 2))
    for copy in R.apply(z):
        np.testing.assert_array_equal(copy, z)


def test_identity_apply_returns_a_copy():
    I = IdentityMap(3)
    z = np.ones(3)
    out = I.apply(z)
    out[0] = 5.0
    assert z[0] == 1.0


def test_dense_to_dense_is_the_matrix(rng):
    A = rng.standard_normal((3, 5))
    np.testing.assert_allclose(DenseMap(A).to_dense(), A)


# ==============================================================================
# NORM BOUNDS
# ==============================================================================

def test_gram_bounds_dominate_exact_norms(rng):
    for op in sample_operators(rng):
        exact = exact_gram_norm(op)
        assert op.gram_norm_bound() >= exact - 1e-8 * max(exact, 1.0), op.kind


def test_closed_form_bounds():
    assert IdentityMap(4).gram_norm_bound() == 1.0
    assert HankelMap(HankelShape(2, 2, 21, 100)).gram_norm_bound() == 21.0
    assert FusedDiffStack(10).gram_norm_bound() == 5.0
    assert Replication(4, 3).gram_norm_bound() == 4.0


def test_hankel_bound_is_attained():
    H = HankelMap(HankelShape(2, 2, 3, 5))
    assert exact_gram_norm(H) == pytest.approx(3.0, rel=1e-12)


def test_dense_bound_is_slightly_inflated(rng):
    A = rng.standard_normal((6, 9))
    exact = scipy.linalg.eigh(A @ A.T, eigvals_only=True)[-1]
    bound = DenseMap(A).gram_norm_bound()
    assert bound == pytest.approx(exact, rel=1e-6)


def first_differences(n):
    """(n-1) x n matrix with rows e_{i+1} - e_i; the ones vector spans its null space."""
    return np.diff(np.eye(n), axis=0)


@pytest.mark.parametrize(
    "matrix",
    [np.array([[1.0, -1.0, 0.0], [0.0, 1.0, -1.0]]), first_differences(40)],
    ids=["diff3", "diff40"],
)
def test_difference_operator_bounds_are_certified(matrix):
    exact = scipy.linalg.eigh(matrix @ matrix.T, eigvals_only=True)[-1]
    bound = DenseMap(matrix).gram_norm_bound()
    assert bound >= exact
    assert bound == pytest.approx(exact, rel=1e-9)


def test_power_iteration_is_not_trapped_by_ones_null_space():
    D = first_differences(40)
    S = D.T @ D
    exact = scipy.linalg.eigh(S, eigvals_only=True)[-1]
    estimate = max_eigenvalue(S, method="power")
    # residual correction keeps the power estimate above the true value
    assert estimate >= exact
    assert estimate <= exact * (1.0 + 1e-4)


def test_power_iteration_on_linear_map_matches_dense():
    H = HankelMap(HankelShape(2, 3, 4, 6))
    exact = exact_gram_norm(H)
    assert max_eigenvalue(H, method="dense") == pytest.approx(exact, rel=1e-12)
    assert max_eigenvalue(H, method="power") >= exact * (1.0 - 1e-12)


# ==============================================================================
# POWER ITERATION
# ==============================================================================

def test_max_eigenvalue_on_dense_matrix(rng):
    X = rng.standard_normal((8, 8))
    S = X @ X.T
    exact = scipy.linalg.eigh(S, eigvals_only=True)[-1]
    assert max_eigenvalue(S, tol=1e-12) == pytest.approx(exact, rel=1e-8)


def test_max_eigenvalue_on_linear_map_uses_gram():
    H = HankelMap(HankelShape(1, 1, 2, 4))
    assert max_eigenvalue(H) == pytest.approx(exact_gram_norm(H), rel=1e-8)


def test_max_eigenvalue_of_zero_operator_is_zero():
    assert max_eigenvalue(np.zeros((3, 3))) == 0.0


def test_max_eigenvalue_reports_non_convergence():
    S = np.diag([1.0, 0.999999])
    with pytest.raises(NumericalError) as info:
        max_eigenvalue(S, tol=1e-15, max_iter=3, method="power")
    assert info.value.last_estimate is not None
    assert 0.999 < info.value.last_estimate <= 1.0


def test_max_eigenvalue_rejects_bad_input():
    with pytest.raises(DomainError):
        max_eigenvalue(np.eye(2), tol=0.0)
    with pytest.raises(DimensionError):
        max_eigenvalue(np.ones((2, 3)))
