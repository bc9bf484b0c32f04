"""
Linear operators M: Z -> Y used by the solvers and the two problem drivers.

Every operator knows its domain and codomain shapes, applies itself and its
adjoint matrix-free, and reports a certified upper bound on ||M*M||.
"""

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Literal, Tuple, Union

import numpy as np
import scipy.linalg

from ppg.errors import DimensionError, DomainError, NumericalError

logger = logging.getLogger(__name__)

Shape = Tuple[int, ...]

# Eigenvalue bounds that feed stepsizes: LAPACK up to DENSE_EIG_LIMIT, power iteration above.
POWER_MAX_ITER = 10000
BOUND_TOL = 1e-10
DENSE_EIG_LIMIT = 4096


def _as_shape(shape) -> Shape:
    if isinstance(shape, (int, np.integer)):
        return (int(shape),)
    return tuple(int(s) for s in shape)


class LinearMap(ABC):
    """Abstract linear map between two finite dimensional spaces of arrays."""

    kind: str = ""

    def __init__(self, in_dim, out_dim):
        self.in_dim = _as_shape(in_dim)
        self.out_dim = _as_shape(out_dim)

    def _check(self, x, shape: Shape, op: str) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != shape:
            raise DimensionError(
                f"{self.kind}.{op}: expected shape {shape}, got {x.shape}"
            )
        return x

    def apply(self, z) -> np.ndarray:
        return self._apply(self._check(z, self.in_dim, "apply"))

    def adjoint(self, y) -> np.ndarray:
        return self._adjoint(self._check(y, self.out_dim, "adjoint"))

    __call__ = apply

    def gram(self, z) -> np.ndarray:
        """M*(Mz)."""
        return self.adjoint(self.apply(z))

    @abstractmethod
    def _apply(self, z: np.ndarray) -> np.ndarray:
        ...

    @abstractmethod
    def _adjoint(self, y: np.ndarray) -> np.ndarray:
        ...

    @abstractmethod
    def gram_norm_bound(self) -> float:
        ...

    @property
    def T(self) -> "LinearMap":
        return AdjointView(self)

    def to_dense(self) -> np.ndarray:
        """Matrix of the operator on flattened arrays. Only for small instances."""
        n_in = int(np.prod(self.in_dim))
        cols = []
        for i in range(n_in):
            e = np.zeros(n_in)
            e[i] = 1.0
            cols.append(self._apply(e.reshape(self.in_dim)).ravel())
        return np.column_stack(cols)

    def __repr__(self) -> str:
        return f"{type(self).__name__}(in_dim={self.in_dim}, out_dim={self.out_dim})"


class IdentityMap(LinearMap):
    kind = "identity"

    def __init__(self, shape):
        super().__init__(shape, shape)

    def _apply(self, z):
        return z.copy()

    def _adjoint(self, y):
        return y.copy()

    def gram_norm_bound(self) -> float:
        return 1.0


class DenseMap(LinearMap):
    """Explicit matrix D acting on vectors."""

    kind = "dense"

    def __init__(self, matrix):
        matrix = np.asarray(matrix, dtype=float)
        if matrix.ndim != 2:
            raise DimensionError(f"dense map needs a 2-D matrix, got ndim={matrix.ndim}")
        super().__init__(matrix.shape[1], matrix.shape[0])
        self.matrix = matrix

    def _apply(self, z):
        return self.matrix @ z

    def _adjoint(self, y):
        return self.matrix.T @ y

    @cached_property
    def _norm_bound(self) -> float:
        D = self.matrix
        # D*D and DD* share their nonzero spectrum; use the smaller one.
        small_gram = D @ D.T if D.shape[0] <= D.shape[1] else D.T @ D
        lam = max_eigenvalue(small_gram, tol=BOUND_TOL)
        return lam * (1.0 + BOUND_TOL)

    def gram_norm_bound(self) -> float:
        return self._norm_bound


@dataclass(frozen=True)
class HankelShape:
    """Block sizes of a block Hankel operator: j x k blocks, each m x n."""

    m: int
    n: int
    j: int
    k: int

    def __post_init__(self):
        for name in ("m", "n", "j", "k"):
            if getattr(self, name) < 1:
                raise DimensionError(f"HankelShape.{name} must be >= 1")

    @property
    def n_blocks(self) -> int:
        return self.j + self.k - 1

    @property
    def in_dim(self) -> Shape:
        return (self.m, self.n * self.n_blocks)

    @property
    def out_dim(self) -> Shape:
        return (self.m * self.j, self.n * self.k)


class HankelMap(LinearMap):
    """Block Hankel operator: block (p, q) of H(z) is z_{p+q}.

    z = (z_0 z_1 ... z_{j+k-2}) is stored as an m x n(j+k-1) matrix.
    """

    kind = "hankel"

    def __init__(self, shape: HankelShape):
        super().__init__(shape.in_dim, shape.out_dim)
        self.shape = shape
        p = np.arange(shape.j)[:, None]
        q = np.arange(shape.k)[None, :]
        self._block_index = p + q

    def _blocks(self, z):
        s = self.shape
        return z.reshape(s.m, s.n_blocks, s.n).transpose(1, 0, 2)

    def _apply(self, z):
        s = self.shape
        tiles = self._blocks(z)[self._block_index]          # (j, k, m, n)
        return tiles.transpose(0, 2, 1, 3).reshape(s.m * s.j, s.n * s.k)

    def _adjoint(self, y):
        s = self.shape
        tiles = y.reshape(s.j, s.m, s.k, s.n).transpose(0, 2, 1, 3)   # (j, k, m, n)
        out = np.zeros((s.n_blocks, s.m, s.n))
        # sum over anti-diagonals, looping over the shorter side
        if s.j <= s.k:
            for p in range(s.j):
                out[p:p + s.k] += tiles[p]
        else:
            for q in range(s.k):
                out[q:q + s.j] += tiles[:, q]
        return out.transpose(1, 0, 2).reshape(s.in_dim)

    def gram_norm_bound(self) -> float:
        # H*H is block diagonal; block i is repeated once per (p, q) with p + q = i
        return float(min(self.shape.j, self.shape.k))


class FusedDiffStack(LinearMap):
    """z in R^n -> (z_1..z_{n-1}, z_1 - z_2, ..., z_{n-2} - z_{n-1}) in R^{2n-3}.

    The last coordinate of z (the intercept) is not penalized.
    """

    kind = "fused_diff_stack"

    def __init__(self, n: int):
        if n < 3:
            raise DimensionError(f"fused_diff_stack needs n >= 3, got {n}")
        super().__init__(n, 2 * n - 3)
        self.n = int(n)

    def _apply(self, z):
        head = z[:-1]
        return np.concatenate([head, head[:-1] - head[1:]])

    def _adjoint(self, y):
        n = self.n
        coef, diff = y[:n - 1], y[n - 1:]
        out = np.zeros(n)
        out[:n - 1] += coef
        out[:n - 2] += diff
        out[1:n - 1] -= diff
        return out

    def gram_norm_bound(self) -> float:
        # M^T M is dominated by tridiag(-1, 3, -1), whose spectrum lies below 5
        return 5.0


class Replication(LinearMap):
    """z -> (z, z, ..., z), ``copies`` times, stacked along a new leading axis."""

    kind = "replication"

    def __init__(self, copies: int, base_shape):
        if copies < 1:
            raise DimensionError("replication needs at least one copy")
        base_shape = _as_shape(base_shape)
        super().__init__(base_shape, (int(copies),) + base_shape)
        self.copies = int(copies)

    def _apply(self, z):
        return np.broadcast_to(z, self.out_dim).copy()

    def _adjoint(self, y):
        return y.sum(axis=0)

    def gram_norm_bound(self) -> float:
        return float(self.copies)


class AdjointView(LinearMap):
    """M* viewed as a map Y -> Z."""

    kind = "adjoint"

    def __init__(self, parent: LinearMap):
        super().__init__(parent.out_dim, parent.in_dim)
        self.parent = parent

    def _apply(self, z):
        return self.parent._adjoint(z)

    def _adjoint(self, y):
        return self.parent._apply(y)

    def gram_norm_bound(self) -> float:
        return self.parent.gram_norm_bound()

    @property
    def T(self) -> LinearMap:
        return self.parent


# ------------------------------------------------------------------------------
# functional interface
# ------------------------------------------------------------------------------

def apply(linear_map: LinearMap, z) -> np.ndarray:
    return linear_map.apply(z)


def adjoint(linear_map: LinearMap, y) -> np.ndarray:
    return linear_map.adjoint(y)


def gram_norm_bound(linear_map: LinearMap) -> float:
    return linear_map.gram_norm_bound()


def max_eigenvalue(
    sym_op: Union[np.ndarray, LinearMap],
    tol: float = 1e-10,
    max_iter: int = POWER_MAX_ITER,
    method: Literal["auto", "dense", "power"] = "auto",
    seed: int = 0,
) -> float:
    """Largest eigenvalue of a symmetric PSD operator.

    ``sym_op`` is either a dense symmetric matrix or a LinearMap, in which case
    the Gram operator M*M is used. With ``method="auto"`` operators of
    dimension up to DENSE_EIG_LIMIT are densified and handed to LAPACK
    (``scipy.linalg.eigvalsh``); larger ones go through power iteration.

    Power iteration starts from a seeded Gaussian vector, so no fixed start can
    sit in an invariant subspace that misses the top eigenvector. Once the
    Rayleigh quotient ρ changes by less than ``tol`` relative to itself, the
    result is ρ + ||Sv - ρv||: an eigenvalue of S lies within the residual of ρ.

    Raises:
        NumericalError: power iteration did not converge within ``max_iter``
            iterations; the exception carries the last Rayleigh quotient.
    """
    if tol <= 0:
        raise DomainError(f"tol must be positive, got {tol}")

    matvec: Callable[[np.ndarray], np.ndarray]
    if isinstance(sym_op, LinearMap):
        dim = sym_op.in_dim
        size = int(np.prod(dim))
        if method == "dense" or (method == "auto" and size <= DENSE_EIG_LIMIT):
            D = sym_op.to_dense()
            return _dense_max_eigenvalue(D.T @ D)
        matvec = sym_op.gram
    else:
        S = np.asarray(sym_op, dtype=float)
        if S.ndim != 2 or S.shape[0] != S.shape[1]:
            raise DimensionError(f"max_eigenvalue needs a square matrix, got {S.shape}")
        if method == "dense" or (method == "auto" and S.shape[0] <= DENSE_EIG_LIMIT):
            return _dense_max_eigenvalue(S)
        matvec, dim = S.__matmul__, (S.shape[0],)

    v = np.random.default_rng(seed).standard_normal(dim)
    v /= np.linalg.norm(v)
    estimate = 0.0
    for it in range(1, max_iter + 1):
        w = matvec(v)
        rayleigh = float(np.vdot(v, w))
        w_norm = np.linalg.norm(w)
        if w_norm == 0.0:
            return 0.0
        if it > 1 and abs(rayleigh - estimate) <= tol * abs(rayleigh):
            residual = float(np.linalg.norm(w - rayleigh * v))
            logger.debug(f"power iteration converged after {it} steps: {rayleigh:.12g} (residual {residual:.3g})")
            return rayleigh + residual
        estimate = rayleigh
        v = w / w_norm

    raise NumericalError(
        f"power iteration did not converge in {max_iter} iterations "
        f"(last estimate {estimate:.6g})",
        last_estimate=estimate,
    )


def _dense_max_eigenvalue(S: np.ndarray) -> float:
    n = S.shape[0]
    if n == 0:
        return 0.0
    top = scipy.linalg.eigvalsh(S, subset_by_index=[n - 1, n - 1], check_finite=True)
    return max(float(top[0]), 0.0)
