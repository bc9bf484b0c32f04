"""
Smooth convex losses h with gradients and Lipschitz bounds L on ∇h, plus the
two dual objective forms used by the termination tests.
"""

import logging
from abc import ABC, abstractmethod
from typing import Optional, Tuple

import numpy as np
from scipy.special import expit, xlogy

from ppg.errors import DimensionError, DomainError
from ppg.linops import DenseMap

logger = logging.getLogger(__name__)

# Tolerance for ν components that leave [0, 1] through round-off only.
BOX_SLACK = 1e-12


def _same_shape(a: np.ndarray, b: np.ndarray, what: str) -> None:
    if a.shape != b.shape:
        raise DimensionError(f"{what}: shapes {a.shape} and {b.shape} differ")


class Smooth(ABC):
    """Differentiable convex function with L-Lipschitz gradient."""

    kind: str = ""
    lipschitz: float

    @abstractmethod
    def evaluate(self, z) -> Tuple[float, np.ndarray]:
        """(h(z), ∇h(z))."""

    def value(self, z) -> float:
        return self.evaluate(z)[0]

    def gradient(self, z) -> np.ndarray:
        return self.evaluate(z)[1]


class MaskedQuadratic(Smooth):
    """h(z) = ½||w∘(z - ẑ)||² with a 0/1 mask w."""

    kind = "masked_quadratic"
    lipschitz = 1.0

    def __init__(self, w, zhat):
        w = np.asarray(w, dtype=float)
        zhat = np.asarray(zhat, dtype=float)
        _same_shape(w, zhat, "masked_quadratic")
        if not np.all((w == 0.0) | (w == 1.0)):
            raise DomainError("masked_quadratic mask must be 0/1")
        self.w = w
        self.zhat = zhat

    def evaluate(self, z):
        return eval_masked_quadratic(self.w, self.zhat, z)

    def gradient(self, z):
        return self.w * (np.asarray(z, dtype=float) - self.zhat)


class LogisticAffine(Smooth):
    """h(z) = Σ_i log(1 + exp((Az)_i))."""

    kind = "logistic_affine"

    def __init__(self, A, lipschitz: Optional[float] = None):
        self.A = np.asarray(A, dtype=float)
        if self.A.ndim != 2 or self.A.shape[0] < 1:
            raise DimensionError(f"logistic_affine needs an m x n matrix with m >= 1, got {self.A.shape}")
        if lipschitz is None:
            # DenseMap's bound is λ_max(AᵀA) inflated by (1 + tol)
            lipschitz = 0.25 * DenseMap(self.A).gram_norm_bound()
        self.lipschitz = float(lipschitz)

    def evaluate(self, z):
        return eval_logistic(self.A, z)

    def gradient(self, z):
        return self.A.T @ expit(self.A @ np.asarray(z, dtype=float))


class HalfSqDist(Smooth):
    """h(z) = ½||z - z̄||²."""

    kind = "half_sq_dist"
    lipschitz = 1.0

    def __init__(self, anchor):
        self.anchor = np.asarray(anchor, dtype=float)

    def evaluate(self, z):
        return eval_half_sq_dist(self.anchor, z)

    def gradient(self, z):
        z = np.asarray(z, dtype=float)
        _same_shape(z, self.anchor, "half_sq_dist")
        return z - self.anchor


class LeastSquares(Smooth):
    """h(z) = ½||Dz - c||², L = λ_max(DᵀD)."""

    kind = "least_squares"

    def __init__(self, D, c):
        self.D = np.asarray(D, dtype=float)
        self.c = np.asarray(c, dtype=float)
        if self.D.ndim != 2 or self.c.shape != (self.D.shape[0],):
            raise DimensionError(f"least_squares: D {self.D.shape} and c {self.c.shape} do not match")
        self.lipschitz = DenseMap(self.D).gram_norm_bound()

    def evaluate(self, z):
        r = self.D @ np.asarray(z, dtype=float) - self.c
        return 0.5 * float(r @ r), self.D.T @ r


# ------------------------------------------------------------------------------
# functional interface
# ------------------------------------------------------------------------------

def eval_masked_quadratic(w, zhat, z) -> Tuple[float, np.ndarray]:
    w = np.asarray(w, dtype=float)
    zhat = np.asarray(zhat, dtype=float)
    z = np.asarray(z, dtype=float)
    _same_shape(w, zhat, "masked_quadratic")
    _same_shape(z, zhat, "masked_quadratic")
    grad = w * (z - zhat)
    return 0.5 * float(np.vdot(grad, grad)), grad


def eval_logistic(A, z) -> Tuple[float, np.ndarray]:
    A = np.asarray(A, dtype=float)
    v = A @ np.asarray(z, dtype=float)
    # logaddexp(0, v) = v + log1p(exp(-v)) for v > 0, log1p(exp(v)) otherwise
    val = float(np.sum(np.logaddexp(0.0, v)))
    return val, A.T @ expit(v)


def eval_half_sq_dist(anchor, z) -> Tuple[float, np.ndarray]:
    anchor = np.asarray(anchor, dtype=float)
    z = np.asarray(z, dtype=float)
    _same_shape(z, anchor, "half_sq_dist")
    d = z - anchor
    return 0.5 * float(np.vdot(d, d)), d


def logistic_dual_value(nu) -> float:
    """Σ ν log ν + (1 - ν) log(1 - ν) with 0·log 0 = 0."""
    nu = np.asarray(nu, dtype=float)
    if np.any(nu < -BOX_SLACK) or np.any(nu > 1.0 + BOX_SLACK):
        raise DomainError("logistic dual is only defined on [0, 1]^m")
    nu = np.clip(nu, 0.0, 1.0)
    return float(np.sum(xlogy(nu, nu) + xlogy(1.0 - nu, 1.0 - nu)))


def sysreal_dual_value(nu, w, zhat) -> float:
    """½||ν||² + <w∘ẑ, ν>."""
    nu = np.asarray(nu, dtype=float)
    w = np.asarray(w, dtype=float)
    zhat = np.asarray(zhat, dtype=float)
    _same_shape(nu, zhat, "sysreal dual")
    _same_shape(w, zhat, "sysreal dual")
    return 0.5 * float(np.vdot(nu, nu)) + float(np.vdot(w * zhat, nu))
