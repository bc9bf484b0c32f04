"""
Shared fixtures: small instances whose optimal points are computed once per
session by long, accurate runs.
"""

import numpy as np
import pytest
import scipy.linalg

from ppg.linops import FusedDiffStack
from ppg.problems import build_composite, gen_lasso
from ppg.proxlib import WeightedL1
from ppg.smooth import LeastSquares
from ppg.solvers import (
    CompositeProblem,
    PPGConfig,
    Reference,
    ppg_solve,
    proximal_gradient_solve,
)


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: full-scale experiment runs (deselect with -m 'not slow')")


# ==============================================================================
# LASSO (M = identity)
# ==============================================================================

@pytest.fixture(scope="session")
def lasso_problem():
    """½||Dz - c||² + 0.1||z||_1 with a 200 x 100 design of full column rank."""
    return build_composite(gen_lasso(200, 100, 0.1, seed=0))


@pytest.fixture(scope="session")
def lasso_reference(lasso_problem):
    trace = proximal_gradient_solve(lasso_problem, max_iter=20000, tol=1e-15)
    z = trace.z_final
    x = lasso_problem.h.gradient(z)
    return Reference(z=z, y=-x, x=x)


# ==============================================================================
# LEAST-SQUARES FUSED LASSO (n = 50)
# ==============================================================================

class LeastSquaresConjugate:
    """h*(x) for h(z) = ½||Dz - c||² with DᵀD invertible."""

    def __init__(self, D, c):
        self.D, self.c = D, c
        self.factor = scipy.linalg.cho_factor(D.T @ D)

    def __call__(self, x, y=None) -> float:
        z = scipy.linalg.cho_solve(self.factor, x + self.D.T @ self.c)
        r = self.D @ z - self.c
        return float(x @ z - 0.5 * r @ r)


@pytest.fixture(scope="session")
def fused_ls_problem():
    """Least-squares fit plus fused-lasso penalty on a 50-dimensional z."""
    rng = np.random.default_rng(7)
    m, n = 80, 50
    D = rng.standard_normal((m, n)) / np.sqrt(m)
    planted = np.zeros(n)
    planted[5:15] = 2.0
    planted[30:38] = -1.5
    c = D @ planted + 0.1 * rng.standard_normal(m)
    h = LeastSquares(D, c)
    return CompositeProblem(
        h=h,
        P=WeightedL1.segmented(0.05, n - 1, 0.5, n - 2),
        M=FusedDiffStack(n),
        b=np.zeros(2 * n - 3),
        L=h.lipschitz,
    )


@pytest.fixture(scope="session")
def fused_ls_conjugate(fused_ls_problem):
    return LeastSquaresConjugate(fused_ls_problem.h.D, fused_ls_problem.h.c)


@pytest.fixture(scope="session")
def fused_ls_reference(fused_ls_problem, fused_ls_conjugate):
    cfg = PPGConfig.for_problem(fused_ls_problem, max_iter=100000, tol=1e-15)
    trace = ppg_solve(fused_ls_problem, cfg)
    z = trace.z_final
    x = fused_ls_problem.h.gradient(z)
    return Reference(z=z, y=trace.y_final, x=x, dual_value=fused_ls_conjugate(x))
