"""
Tests for ppg.proxlib

Tests verify:
- the Moreau identity, nonexpansiveness and prox optimality for every proximable kind
- nuclear prox against a subgradient-descent oracle
- conjugate proxes reduce to box clipping and spectral projection
- shape and domain errors
"""

import numpy as np
import pytest
import scipy.linalg

from ppg.checks import moreau_error, nonexpansive_ratio, sample_proximables
from ppg.errors import DimensionError, DomainError
from ppg.proxlib import (
    NuclearNorm,
    SeparableSum,
    WeightedL1,
    conjugate_prox,
    project_spectral_ball,
    prox_nuclear,
    prox_weighted_l1,
    value,
)


@pytest.fixture
def rng():
    return np.random.default_rng(42)


# ==============================================================================
# MOREAU IDENTITY
# ==============================================================================

@pytest.mark.parametrize("tau", [0.7, 1e-3, 25.0])
def test_moreau_identity_for_every_kind(rng, tau):
    """
    Test: prox_{τP}(z) + τ·prox_{τ⁻¹P*}(z/τ) = z on 1000 random points.
    """
    for P, shape in sample_proximables(rng):
        assert moreau_error(P, shape, tau=tau, n_points=1000, rng=rng) <= 1e-12, P.kind


@pytest.mark.parametrize("tau", [0.7, 1e-3, 25.0])
def test_prox_is_nonexpansive(rng, tau):
    for P, shape in sample_proximables(rng):
        assert nonexpansive_ratio(P, shape, tau=tau, n_pairs=200, rng=rng) <= 1.0 + 1e-9, P.kind


def test_prox_minimizes_its_objective(rng):
    """
    Test: p = prox_{τP}(u) satisfies P(p) + ||p - u||²/(2τ) ≤ P(v) + ||v - u||²/(2τ) + 1e-9
    for perturbations v of p at scales 1e-6 to 10.
    """
    tau = 0.7

    def objective(P, v, u):
        return P.value(v) + float(np.sum((v - u) ** 2)) / (2.0 * tau)

    for P, shape in sample_proximables(rng):
        for _ in range(20):
            u = 3.0 * rng.standard_normal(shape)
            p = P.prox(tau, u)
            best = objective(P, p, u)
            for scale in (1e-6, 1e-3, 1e-1, 1.0, 10.0):
                v = p + scale * rng.standard_normal(shape)
                assert best <= objective(P, v, u) + 1e-9, P.kind


# ==============================================================================
# WEIGHTED L1
# ==============================================================================

def test_weighted_l1_soft_thresholds():
    out = prox_weighted_l1(np.ones(3), 0.5, np.array([2.0, -0.3, -1.0]))
    np.testing.assert_allclose(out, [1.5, 0.0, -0.5])


def test_weighted_l1_zero_weight_is_identity(rng):
    u = rng.standard_normal(6)
    np.testing.assert_array_equal(WeightedL1(np.zeros(6)).prox(3.0, u), u)


def test_segmented_weights():
    P = WeightedL1.segmented(0.125, 3, 12.5, 2)
    np.testing.assert_array_equal(P.weights, [0.125, 0.125, 0.125, 12.5, 12.5])
    assert P.value(np.array([1.0, -1.0, 0.0, 0.0, -2.0])) == pytest.approx(0.25 + 25.0)


def test_weighted_l1_conjugate_prox_is_box_clip(rng):
    w = rng.uniform(0.0, 2.0, size=10)
    P = WeightedL1(w)
    for tau in (0.1, 1.0, 10.0):
        u = 3.0 * rng.standard_normal(10)
        np.testing.assert_allclose(conjugate_prox(P, tau, u), np.clip(u, -w, w), atol=1e-12)


# ==============================================================================
# NUCLEAR NORM
# ==============================================================================

def test_nuclear_prox_shrinks_singular_values(rng):
    U = rng.standard_normal((8, 6))
    out = prox_nuclear(0.8, 1.5, U)
    s_in = scipy.linalg.svdvals(U)
    s_out = scipy.linalg.svdvals(out)
    np.testing.assert_allclose(s_out, np.maximum(s_in - 1.2, 0.0), atol=1e-10)


def test_nuclear_prox_of_small_matrix_is_zero(rng):
    U = 0.01 * rng.standard_normal((4, 5))
    np.testing.assert_array_equal(prox_nuclear(1.0, 1.0, U), np.zeros((4, 5)))


def _prox_objective(lam, tau, U, V):
    return lam * scipy.linalg.svdvals(V).sum() + np.sum((V - U) ** 2) / (2.0 * tau)


def _subgradient_minimize(lam, tau, U, iters=5000):
    """Subgradient descent with 1/(μt) steps on the τ⁻¹-strongly convex prox objective."""
    V = U.copy()
    best, best_val = V.copy(), _prox_objective(lam, tau, U, V)
    for t in range(1, iters + 1):
        left, s, right = scipy.linalg.svd(V, full_matrices=False)
        g = lam * (left[:, s > 1e-12] @ right[s > 1e-12]) + (V - U) / tau
        V = V - (tau / t) * g
        val = _prox_objective(lam, tau, U, V)
        if val < best_val:
            best, best_val = V.copy(), val
    return best, best_val


def test_nuclear_prox_beats_subgradient_oracle(rng):
    """
    Test: on 20 random 8×6 matrices the closed-form prox attains an objective no
    worse than a long subgradient run, and the oracle lies within the distance
    strong convexity allows for its objective gap.
    """
    lam, tau = 0.8, 1.0
    P = NuclearNorm(lam, (8, 6))
    for _ in range(20):
        U = rng.standard_normal((8, 6))
        V = P.prox(tau, U)
        oracle, oracle_val = _subgradient_minimize(lam, tau, U)
        attained = _prox_objective(lam, tau, U, V)
        assert attained <= oracle_val + 1e-6
        assert np.sum((V - oracle) ** 2) <= 2.0 * tau * max(oracle_val - attained, 0.0) + 1e-6


def test_nuclear_conjugate_prox_is_spectral_projection(rng):
    P = NuclearNorm(0.8, (8, 6))
    for tau in (0.3, 2.0):
        Y = rng.standard_normal((8, 6))
        np.testing.assert_allclose(conjugate_prox(P, tau, Y), project_spectral_ball(Y, 0.8), atol=1e-10)


def test_spectral_projection_inside_ball_is_identity(rng):
    Y = rng.standard_normal((5, 4))
    Y /= 2.0 * scipy.linalg.svdvals(Y)[0]
    np.testing.assert_array_equal(project_spectral_ball(Y, 1.0), Y)


def test_spectral_projection_clips_top_singular_value(rng):
    Y = rng.standard_normal((6, 6))
    s = scipy.linalg.svdvals(project_spectral_ball(Y, 0.5))
    assert s[0] == pytest.approx(0.5, rel=1e-10)


def test_nuclear_value_is_weighted_singular_sum(rng):
    U = rng.standard_normal((3, 4))
    P = NuclearNorm(2.0, (3, 4))
    assert value(P, U) == pytest.approx(2.0 * scipy.linalg.svdvals(U).sum())


# ==============================================================================
# SEPARABLE SUM
# ==============================================================================

def test_separable_sum_applies_parts_blockwise(rng):
    parts = [WeightedL1(np.full(4, 0.3)), WeightedL1(np.full(4, 1.5))]
    P = SeparableSum(parts)
    U = rng.standard_normal((2, 4))
    out = P.prox(0.5, U)
    for i, part in enumerate(parts):
        np.testing.assert_array_equal(out[i], part.prox(0.5, U[i]))
    assert P.value(U) == pytest.approx(parts[0].value(U[0]) + parts[1].value(U[1]))


# ==============================================================================
# ERRORS
# ==============================================================================

def test_nonpositive_tau_is_a_domain_error():
    with pytest.raises(DomainError):
        WeightedL1(np.ones(2)).prox(0.0, np.zeros(2))
    with pytest.raises(DomainError):
        conjugate_prox(NuclearNorm(1.0, (2, 2)), -1.0, np.zeros((2, 2)))


def test_negative_weights_and_radius_are_domain_errors():
    with pytest.raises(DomainError):
        WeightedL1([1.0, -0.1])
    with pytest.raises(DomainError):
        NuclearNorm(0.0, (2, 2))
    with pytest.raises(DomainError):
        project_spectral_ball(np.eye(2), 0.0)


def test_shape_mismatch_is_a_dimension_error():
    with pytest.raises(DimensionError):
        WeightedL1(np.ones(3)).prox(1.0, np.zeros(4))
    with pytest.raises(DimensionError):
        NuclearNorm(1.0, (3, 3)).value(np.zeros((3, 2)))
    with pytest.raises(DimensionError):
        SeparableSum([WeightedL1(np.ones(2))]).prox(1.0, np.zeros((2, 2)))
    with pytest.raises(DimensionError):
        SeparableSum([])
