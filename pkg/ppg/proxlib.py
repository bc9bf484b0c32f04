"""
Proximable convex functions P and their proximal mappings.

prox(τ, u) returns argmin_v P(v) + ||v - u||² / (2τ). Conjugate proxes are
never formed from P* directly; they go through the Moreau identity

    prox_{τ⁻¹P*}(u) = u - τ⁻¹ prox_{τP}(τu).
"""

import logging
from abc import ABC, abstractmethod
from typing import Sequence, Tuple

import numpy as np
import scipy.linalg

from ppg.errors import DimensionError, DomainError, NumericalError

logger = logging.getLogger(__name__)


def _check_tau(tau: float) -> None:
    if not tau > 0:
        raise DomainError(f"prox parameter must be positive, got {tau}")


def _thin_svd(U: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    try:
        return scipy.linalg.svd(U, full_matrices=False, lapack_driver="gesdd")
    except (np.linalg.LinAlgError, ValueError):
        logger.warning(f"gesdd failed on a {U.shape} matrix, retrying with gesvd")
    try:
        return scipy.linalg.svd(U, full_matrices=False, lapack_driver="gesvd")
    except (np.linalg.LinAlgError, ValueError) as e:
        raise NumericalError(f"SVD failed on a {U.shape} matrix: {e}") from e


def _singular_values(U: np.ndarray) -> np.ndarray:
    try:
        return scipy.linalg.svdvals(U)
    except (np.linalg.LinAlgError, ValueError) as e:
        raise NumericalError(f"SVD failed on a {U.shape} matrix: {e}") from e


class Proximable(ABC):
    """A proper closed convex function with an inexpensive prox."""

    kind: str = ""

    @abstractmethod
    def value(self, u) -> float:
        ...

    @abstractmethod
    def prox(self, tau: float, u) -> np.ndarray:
        ...


class WeightedL1(Proximable):
    """P(u) = Σ w_i |u_i| with nonnegative weights."""

    kind = "weighted_l1"

    def __init__(self, weights):
        weights = np.asarray(weights, dtype=float)
        if np.any(weights < 0):
            raise DomainError("weighted_l1 weights must be nonnegative")
        self.weights = weights

    @classmethod
    def segmented(cls, lam1: float, n1: int, lam2: float, n2: int) -> "WeightedL1":
        """λ1 on the first ``n1`` coordinates, λ2 on the next ``n2``."""
        return cls(np.concatenate([np.full(n1, float(lam1)), np.full(n2, float(lam2))]))

    def _check(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if u.shape != self.weights.shape:
            raise DimensionError(
                f"weighted_l1: expected shape {self.weights.shape}, got {u.shape}"
            )
        return u

    def value(self, u) -> float:
        return float(np.sum(self.weights * np.abs(self._check(u))))

    def prox(self, tau: float, u) -> np.ndarray:
        return prox_weighted_l1(self.weights, tau, self._check(u))


class NuclearNorm(Proximable):
    """P(U) = λ ||U||_* on matrices of a fixed shape."""

    kind = "nuclear_norm"

    def __init__(self, lam: float, matrix_shape):
        if not lam > 0:
            raise DomainError(f"nuclear norm weight must be positive, got {lam}")
        self.lam = float(lam)
        self.matrix_shape = tuple(int(s) for s in matrix_shape)

    def _check(self, U) -> np.ndarray:
        U = np.asarray(U, dtype=float)
        if U.shape != self.matrix_shape:
            raise DimensionError(
                f"nuclear_norm: expected shape {self.matrix_shape}, got {U.shape}"
            )
        return U

    def value(self, U) -> float:
        return self.lam * float(np.sum(_singular_values(self._check(U))))

    def prox(self, tau: float, U) -> np.ndarray:
        return prox_nuclear(self.lam, tau, self._check(U))


class SeparableSum(Proximable):
    """P(u_1, ..., u_m) = Σ P_i(u_i), with the u_i stacked along axis 0."""

    kind = "separable_sum"

    def __init__(self, parts: Sequence[Proximable]):
        if not parts:
            raise DimensionError("separable_sum needs at least one part")
        self.parts = tuple(parts)

    def _check(self, U) -> np.ndarray:
        U = np.asarray(U, dtype=float)
        if U.shape[:1] != (len(self.parts),):
            raise DimensionError(
                f"separable_sum: expected {len(self.parts)} stacked blocks, got shape {U.shape}"
            )
        return U

    def value(self, U) -> float:
        U = self._check(U)
        return float(sum(part.value(U[i]) for i, part in enumerate(self.parts)))

    def prox(self, tau: float, U) -> np.ndarray:
        return prox_separable_sum(self.parts, tau, self._check(U))


# ------------------------------------------------------------------------------
# functional interface
# ------------------------------------------------------------------------------

def prox_weighted_l1(weights, tau: float, u) -> np.ndarray:
    """Coordinatewise soft-thresholding at τ·w_i."""
    _check_tau(tau)
    weights = np.asarray(weights, dtype=float)
    u = np.asarray(u, dtype=float)
    if np.any(weights < 0):
        raise DomainError("weighted_l1 weights must be nonnegative")
    if weights.shape != u.shape:
        raise DimensionError(f"weights {weights.shape} and point {u.shape} differ in shape")
    return np.sign(u) * np.maximum(np.abs(u) - tau * weights, 0.0)


def prox_nuclear(lam: float, tau: float, U) -> np.ndarray:
    """Singular value soft-thresholding at τλ."""
    _check_tau(tau)
    if not lam > 0:
        raise DomainError(f"nuclear norm weight must be positive, got {lam}")
    U = np.asarray(U, dtype=float)
    left, s, right = _thin_svd(U)
    shrunk = np.maximum(s - tau * lam, 0.0)
    keep = shrunk > 0
    if not np.any(keep):
        return np.zeros_like(U)
    return (left[:, keep] * shrunk[keep]) @ right[keep]


def prox_separable_sum(parts: Sequence[Proximable], tau: float, U) -> np.ndarray:
    _check_tau(tau)
    U = np.asarray(U, dtype=float)
    return np.stack([part.prox(tau, U[i]) for i, part in enumerate(parts)])


def conjugate_prox(P: Proximable, tau: float, u) -> np.ndarray:
    """prox_{τ⁻¹P*}(u) computed as u - τ⁻¹ prox_{τP}(τu)."""
    _check_tau(tau)
    u = np.asarray(u, dtype=float)
    return u - P.prox(tau, tau * u) / tau


def project_spectral_ball(Y, lam: float) -> np.ndarray:
    """Projection onto {Y : ||Y||_op <= λ} by clipping singular values."""
    if not lam > 0:
        raise DomainError(f"spectral ball radius must be positive, got {lam}")
    Y = np.asarray(Y, dtype=float)
    left, s, right = _thin_svd(Y)
    if s.size == 0 or s[0] <= lam:
        return Y.copy()
    return (left * np.minimum(s, lam)) @ right


def value(P: Proximable, u) -> float:
    return P.value(u)
