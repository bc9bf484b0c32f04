"""
Problem drivers: nuclear-norm system realization, fused-lasso logistic
regression, and a plain lasso used to compare PPG with proximal gradient.

Each driver provides a seeded instance generator, the primal and dual
objectives, the dual candidate built from solver iterates, and the
duality-gap termination rule.
"""

import logging
from dataclasses import dataclass
from typing import Any, Dict, Optional, Sequence, Union

import joblib
import numpy as np
import scipy.linalg

from ppg.errors import (
    DimensionError,
    DomainError,
    PreconditionError,
    UnsupportedStructureError,
)
from ppg.linops import DenseMap, FusedDiffStack, HankelMap, HankelShape, IdentityMap, Replication
from ppg.proxlib import NuclearNorm, Proximable, SeparableSum, WeightedL1, project_spectral_ball
from ppg.smooth import (
    LeastSquares,
    LogisticAffine,
    MaskedQuadratic,
    Smooth,
    eval_logistic,
    logistic_dual_value,
    sysreal_dual_value,
)
from ppg.solvers import (
    CheckResult,
    CompositeProblem,
    PPGConfig,
    condat_defaults,
    mfbs_lipschitz,
)

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
PINV_RTOL = 1e-12
SYSREAL_CHECK_EVERY = 10
FLASSO_CHECK_EVERY = 500
DEFAULT_TOL = 1e-4

# index blocks (0-based, half-open) of the planted fused-lasso coefficients and their scales
FLASSO_PATTERN = ((0, 20, 20.0), (40, 41, 30.0), (70, 85, 10.0), (120, 125, 20.0))


# ------------------------------------------------------------------------------
# instances
# ------------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SysRealInstance:
    """½||w∘(z - ẑ)||² + λ||H(z)||_*, z = (z_0 ... z_{j+k-2})."""

    zhat: np.ndarray
    w: np.ndarray
    lam: float
    shape: HankelShape
    seed: Optional[int] = None

    kind = "sysreal"

    def __post_init__(self):
        if self.zhat.shape != self.shape.in_dim or self.w.shape != self.shape.in_dim:
            raise DimensionError(
                f"sysreal: ẑ {self.zhat.shape} and w {self.w.shape} must both be {self.shape.in_dim}"
            )
        if not self.lam > 0:
            raise DomainError(f"sysreal: λ must be positive, got {self.lam}")

    def header(self) -> Dict[str, Any]:
        s = self.shape
        return {"m": s.m, "n": s.n, "j": s.j, "k": s.k, "lam": self.lam, "seed": self.seed}

    def arrays(self) -> Dict[str, np.ndarray]:
        return {"zhat": self.zhat, "w": self.w}

    @classmethod
    def from_parts(cls, header, arrays) -> "SysRealInstance":
        shape = HankelShape(header["m"], header["n"], header["j"], header["k"])
        return cls(arrays["zhat"], arrays["w"], header["lam"], shape, header["seed"])


@dataclass(frozen=True, eq=False)
class FusedLassoInstance:
    """Σ log(1 + exp((Az)_i)) + λ1 Σ_{i<n}|z_i| + λ2 Σ|z_{i+1} - z_i|.

    Rows of A are (-b_i a_iᵀ, -b_i); ``pinv_At`` is (Aᵀ)†, an m x n matrix.
    """

    A: np.ndarray
    labels: np.ndarray
    lam1: float
    lam2: float
    pinv_At: np.ndarray
    lambda_max: float
    seed: Optional[int] = None

    kind = "flasso"

    def __post_init__(self):
        m, n = self.A.shape
        if self.labels.shape != (m,) or self.pinv_At.shape != (m, n):
            raise DimensionError(f"flasso: inconsistent shapes for an {m} x {n} design")
        if not (self.lam1 > 0 and self.lam2 > 0):
            raise DomainError("flasso: λ1 and λ2 must be positive")

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def n(self) -> int:
        return self.A.shape[1]

    def header(self) -> Dict[str, Any]:
        return {
            "m": self.m, "n": self.n, "lam1": self.lam1, "lam2": self.lam2,
            "lambda_max": self.lambda_max, "seed": self.seed,
        }

    def arrays(self) -> Dict[str, np.ndarray]:
        return {"A": self.A, "labels": self.labels, "pinv_At": self.pinv_At}

    @classmethod
    def from_parts(cls, header, arrays) -> "FusedLassoInstance":
        return cls(
            arrays["A"], arrays["labels"], header["lam1"], header["lam2"],
            arrays["pinv_At"], header["lambda_max"], header["seed"],
        )


@dataclass(frozen=True, eq=False)
class LassoInstance:
    """½||Dz - c||² + λ||z||_1."""

    D: np.ndarray
    c: np.ndarray
    lam: float
    seed: Optional[int] = None

    kind = "lasso"

    def header(self) -> Dict[str, Any]:
        return {"m": self.D.shape[0], "n": self.D.shape[1], "lam": self.lam, "seed": self.seed}

    def arrays(self) -> Dict[str, np.ndarray]:
        return {"D": self.D, "c": self.c}

    @classmethod
    def from_parts(cls, header, arrays) -> "LassoInstance":
        return cls(arrays["D"], arrays["c"], header["lam"], header["seed"])


Instance = Union[SysRealInstance, FusedLassoInstance, LassoInstance]

_KINDS = {cls.kind: cls for cls in (SysRealInstance, FusedLassoInstance, LassoInstance)}


# ------------------------------------------------------------------------------
# system realization
# ------------------------------------------------------------------------------

def _unit_operator_norm(X: np.ndarray) -> np.ndarray:
    return X / scipy.linalg.svdvals(X)[0]


def simulate_outputs(A, B, C, T: int, sigma: float, rng: np.random.Generator) -> np.ndarray:
    """Noisy outputs û_t, t < T, of v_{t+1} = Av_t + Be_t, ũ_t = Cv_t + e_t; shape (T, n)."""
    r, n = B.shape
    v = rng.standard_normal(r)
    e = rng.standard_normal((T, n))
    u = np.empty((T, n))
    for t in range(T):
        u[t] = C @ v + e[t]
        v = A @ v + B @ e[t]
    return u + sigma * rng.standard_normal((T, n))


def lag_covariances(u: np.ndarray, k: int, n_blocks: int) -> np.ndarray:
    """(ẑ_0 ... ẑ_{n_blocks-1}) side by side, ẑ_i = (1/T) Σ_t û_{t+i} û_tᵀ for i < k, 0 after."""
    T, n = u.shape
    if k > T or k > n_blocks:
        raise DomainError(f"need k <= T and k <= n_blocks, got k={k}, T={T}, n_blocks={n_blocks}")
    zhat = np.zeros((n, n * n_blocks))
    for i in range(k):
        zhat[:, i * n:(i + 1) * n] = u[i:].T @ u[:T - i] / T
    return zhat


def gen_sysreal(
    T: int,
    m: int,
    n: int,
    r: int,
    j: int,
    k: int,
    sigma: float,
    lam: float,
    seed: Optional[int] = None,
) -> SysRealInstance:
    if min(T, m, n, r, j, k) < 1:
        raise DimensionError("gen_sysreal: all dimensions must be >= 1")
    if m != n:
        raise DimensionError(f"gen_sysreal: the lag covariances are n x n, so m must equal n (m={m}, n={n})")
    if T <= j + k:
        raise DomainError(f"gen_sysreal: need T > j + k, got T={T}, j + k={j + k}")

    rng = np.random.default_rng(seed)
    A = _unit_operator_norm(rng.standard_normal((r, r)))
    B = _unit_operator_norm(rng.standard_normal((r, n)))
    C = _unit_operator_norm(rng.standard_normal((n, r)))
    u = simulate_outputs(A, B, C, T, sigma, rng)

    shape = HankelShape(m, n, j, k)
    zhat = lag_covariances(u, k, shape.n_blocks)
    w = np.zeros(shape.in_dim)
    w[:, :k * n] = 1.0
    logger.info(f"generated sysreal instance T={T} m=n={n} r={r} j={j} k={k} seed={seed}")
    return SysRealInstance(zhat, w, float(lam), shape, seed)


def sysreal_primal_value(inst: SysRealInstance, z, hankel: Optional[HankelMap] = None) -> float:
    H = hankel or HankelMap(inst.shape)
    d = inst.w * (np.asarray(z, dtype=float) - inst.zhat)
    return 0.5 * float(np.vdot(d, d)) + NuclearNorm(inst.lam, H.out_dim).value(H.apply(z))


def sysreal_dual_candidate(inst: SysRealInstance, y, hankel: Optional[HankelMap] = None):
    """(ν̃, H*(proj_Ω y)) with ν̃ = -w∘H*(proj_Ω y), Ω the λ-ball of the operator norm."""
    H = hankel or HankelMap(inst.shape)
    Hp = H.adjoint(project_spectral_ball(y, inst.lam))
    return -inst.w * Hp, Hp


def sysreal_termination(
    p_min: float,
    y,
    inst: SysRealInstance,
    tol: float = DEFAULT_TOL,
    hankel: Optional[HankelMap] = None,
) -> CheckResult:
    """Gap/infeasibility test for system realization given the best primal value so far."""
    nu, Hp = sysreal_dual_candidate(inst, y, hankel)
    d = sysreal_dual_value(nu, inst.w, inst.zhat)
    dfeas = float(np.linalg.norm(Hp - inst.w * Hp)) / max(float(np.linalg.norm(Hp)), 1.0)
    crit = max(abs(p_min + d) / max(p_min, 1.0), 5.0 * dfeas)
    return CheckResult(stop=crit < tol, pobj=p_min, dobj=d, dfeas=dfeas)


class SysRealTermination:
    """Stateful termination callback; keeps the minimum primal value over checkpoints."""

    check_every = SYSREAL_CHECK_EVERY

    def __init__(self, inst: SysRealInstance, tol: float = DEFAULT_TOL):
        self.inst = inst
        self.tol = tol
        self.hankel = HankelMap(inst.shape)
        self.p_min = np.inf

    def __call__(self, t, z, y, x) -> CheckResult:
        self.p_min = min(self.p_min, sysreal_primal_value(self.inst, z, self.hankel))
        return sysreal_termination(self.p_min, y, self.inst, self.tol, self.hankel)


# ------------------------------------------------------------------------------
# fused-lasso logistic regression
# ------------------------------------------------------------------------------

def _pinv_transpose(A: np.ndarray) -> np.ndarray:
    """(Aᵀ)† = U diag(1/s) Vᵀ from the thin SVD A = U diag(s) Vᵀ, small s dropped."""
    U, s, Vt = scipy.linalg.svd(A, full_matrices=False)
    keep = s > PINV_RTOL * s[0]
    if not np.all(keep):
        logger.warning(f"design matrix is rank deficient: {(~keep).sum()} of {s.size} singular values dropped")
    return (U[:, keep] / s[keep]) @ Vt[keep]


def assemble_fusedlasso(C, labels, lam1: float, lam2: float, seed: Optional[int] = None) -> FusedLassoInstance:
    """Build A = [C∘(-b), -b] and its derived quantities from samples and labels."""
    C = np.asarray(C, dtype=float)
    labels = np.asarray(labels, dtype=float)
    if C.ndim != 2 or labels.shape != (C.shape[0],):
        raise DimensionError(f"samples {C.shape} and labels {labels.shape} do not match")
    if not np.all(np.abs(labels) == 1.0):
        raise DomainError("labels must be ±1")
    if np.all(labels == labels[0]):
        raise DomainError("labels are all equal; the problem has no minimizer")
    A = np.column_stack([C * -labels[:, None], -labels])
    lam_max = DenseMap(A).gram_norm_bound()
    return FusedLassoInstance(A, labels, float(lam1), float(lam2), _pinv_transpose(A), lam_max, seed)


def gen_fusedlasso(m: int, n: int, alpha: float, seed: Optional[int] = None) -> FusedLassoInstance:
    if n <= FLASSO_PATTERN[-1][1]:
        raise DimensionError(f"gen_fusedlasso: n must exceed {FLASSO_PATTERN[-1][1]}, got {n}")
    if not 1 <= m < n:
        raise DimensionError(f"gen_fusedlasso: need 1 <= m < n, got m={m}, n={n}")
    if not alpha > 0:
        raise DomainError(f"gen_fusedlasso: α must be positive, got {alpha}")

    attempt = 0
    while True:
        # unseeded retries draw fresh entropy
        rng = np.random.default_rng(seed if attempt == 0 or seed is None else [seed, attempt])
        C = rng.standard_normal((m, n - 1))
        C /= np.linalg.norm(C, axis=0)
        xi = rng.standard_normal(len(FLASSO_PATTERN))
        xhat = np.zeros(n - 1)
        for (lo, hi, scale), g in zip(FLASSO_PATTERN, xi):
            xhat[lo:hi] = scale * g
        labels = np.sign(C @ xhat + rng.uniform(0.0, 1.0))
        labels[labels == 0] = 1.0
        if not np.all(labels == labels[0]):
            break
        attempt += 1
        logger.warning(f"all labels equal for seed {seed}, regenerating (attempt {attempt})")

    lam1 = alpha * m
    logger.info(f"generated flasso instance m={m} n={n} alpha={alpha:g} seed={seed}")
    return assemble_fusedlasso(C, labels, lam1, 100.0 * lam1, seed)


def flasso_primal_value(inst: FusedLassoInstance, z) -> float:
    z = np.asarray(z, dtype=float)
    head = z[:-1]
    return (
        eval_logistic(inst.A, z)[0]
        + inst.lam1 * float(np.sum(np.abs(head)))
        + inst.lam2 * float(np.sum(np.abs(np.diff(head))))
    )


def flasso_dual_candidate(y, x, inst: FusedLassoInstance, diff: Optional[FusedDiffStack] = None) -> np.ndarray:
    """-(Aᵀ)†Mᵀy if it lies in [0, 1]^m, (Aᵀ)†x otherwise."""
    M = diff or FusedDiffStack(inst.n)
    nu = -(inst.pinv_At @ M.adjoint(y))
    if np.all((nu >= 0.0) & (nu <= 1.0)):
        return nu
    return inst.pinv_At @ np.asarray(x, dtype=float)


def flasso_termination(
    p_min: float,
    y,
    nu,
    inst: FusedLassoInstance,
    tol: float = DEFAULT_TOL,
    diff: Optional[FusedDiffStack] = None,
) -> CheckResult:
    """Gap/infeasibility test for fused lasso; DomainError if ν̃ leaves [0, 1]^m."""
    M = diff or FusedDiffStack(inst.n)
    d = logistic_dual_value(nu)
    At_nu = inst.A.T @ nu
    Mt_y = M.adjoint(y)
    dfeas = float(np.linalg.norm(At_nu + Mt_y)) / max(
        float(np.linalg.norm(At_nu)), float(np.linalg.norm(Mt_y)), 1.0
    )
    crit = max(abs(p_min + d) / max(p_min, 1.0), 5.0 * dfeas)
    return CheckResult(stop=crit < tol, pobj=p_min, dobj=d, dfeas=dfeas)


class FusedLassoTermination:
    check_every = FLASSO_CHECK_EVERY

    def __init__(self, inst: FusedLassoInstance, tol: float = DEFAULT_TOL):
        self.inst = inst
        self.tol = tol
        self.diff = FusedDiffStack(inst.n)
        self.p_min = np.inf

    def __call__(self, t, z, y, x) -> CheckResult:
        self.p_min = min(self.p_min, flasso_primal_value(self.inst, z))
        nu = flasso_dual_candidate(y, x, self.inst, self.diff)
        return flasso_termination(self.p_min, y, nu, self.inst, self.tol, self.diff)


# ------------------------------------------------------------------------------
# lasso
# ------------------------------------------------------------------------------

def gen_lasso(m: int, n: int, lam: float, seed: Optional[int] = None, sparsity: int = 10) -> LassoInstance:
    """Gaussian design with columns of expected unit norm, ``sparsity`` planted coefficients."""
    if min(m, n) < 1:
        raise DimensionError("gen_lasso: dimensions must be >= 1")
    if not lam > 0:
        raise DomainError(f"gen_lasso: λ must be positive, got {lam}")
    rng = np.random.default_rng(seed)
    D = rng.standard_normal((m, n)) / np.sqrt(m)
    x_true = np.zeros(n)
    support = rng.choice(n, size=min(sparsity, n), replace=False)
    x_true[support] = rng.standard_normal(support.size)
    c = D @ x_true + 0.01 * rng.standard_normal(m)
    logger.info(f"generated lasso instance m={m} n={n} seed={seed}")
    return LassoInstance(D, c, float(lam), seed)


# ------------------------------------------------------------------------------
# problem assembly and default parameters
# ------------------------------------------------------------------------------

def build_composite(inst: Instance) -> CompositeProblem:
    if isinstance(inst, SysRealInstance):
        H = HankelMap(inst.shape)
        return CompositeProblem(
            h=MaskedQuadratic(inst.w, inst.zhat),
            P=NuclearNorm(inst.lam, H.out_dim),
            M=H,
            b=np.zeros(H.out_dim),
            L=1.0,
        )
    if isinstance(inst, FusedLassoInstance):
        n = inst.n
        L = 0.25 * inst.lambda_max
        return CompositeProblem(
            h=LogisticAffine(inst.A, lipschitz=L),
            P=WeightedL1.segmented(inst.lam1, n - 1, inst.lam2, n - 2),
            M=FusedDiffStack(n),
            b=np.zeros(2 * n - 3),
            L=L,
        )
    if isinstance(inst, LassoInstance):
        h = LeastSquares(inst.D, inst.c)
        n = inst.D.shape[1]
        return CompositeProblem(
            h=h, P=WeightedL1(np.full(n, inst.lam)), M=IdentityMap(n), b=np.zeros(n), L=h.lipschitz
        )
    raise UnsupportedStructureError(f"no composite form for {type(inst).__name__}")


def build_sum_problem(h: Smooth, parts: Sequence[Proximable], dim, L: Optional[float] = None) -> CompositeProblem:
    """h(z) + Σ_i P_i(z) written as h(z) + P(Mz) with M the replication map."""
    M = Replication(len(parts), dim)
    return CompositeProblem(
        h=h, P=SeparableSum(parts), M=M, b=np.zeros(M.out_dim), L=h.lipschitz if L is None else L
    )


def _default_beta(inst: Instance, prob: CompositeProblem) -> float:
    if isinstance(inst, SysRealInstance):
        return 1.0 / prob.L if np.isclose(inst.lam, 0.05) else 0.05 / prob.L
    if isinstance(inst, FusedLassoInstance):
        return 1.95 / prob.L
    return 1.0 / prob.L


def default_check_every(inst: Instance) -> int:
    if isinstance(inst, SysRealInstance):
        return SYSREAL_CHECK_EVERY
    if isinstance(inst, FusedLassoInstance):
        return FLASSO_CHECK_EVERY
    return 1


def default_ppg_config(
    inst: Instance,
    prob: Optional[CompositeProblem] = None,
    *,
    beta: Optional[float] = None,
    gamma: Optional[float] = None,
    tau: Optional[float] = None,
    max_iter: int = 20000,
    tol: Optional[float] = None,
) -> PPGConfig:
    """Experimental parameter choices; explicit arguments override them."""
    prob = prob or build_composite(inst)
    return PPGConfig.for_problem(
        prob,
        beta=_default_beta(inst, prob) if beta is None else beta,
        gamma=gamma,
        tau=tau,
        max_iter=max_iter,
        tol=tol,
        check_every=default_check_every(inst),
    )


def default_mfbs_params(inst: Instance, prob: Optional[CompositeProblem] = None) -> Dict[str, float]:
    prob = prob or build_composite(inst)
    return {"sigma": 0.95, "L_M": float(mfbs_lipschitz(prob.L, prob.gram_bound))}


def default_condat_params(inst: Instance, prob: Optional[CompositeProblem] = None) -> Dict[str, float]:
    prob = prob or build_composite(inst)
    return condat_defaults(prob.L, prob.gram_bound)


def make_termination(inst: Instance, tol: float = DEFAULT_TOL):
    if isinstance(inst, SysRealInstance):
        return SysRealTermination(inst, tol)
    if isinstance(inst, FusedLassoInstance):
        return FusedLassoTermination(inst, tol)
    raise UnsupportedStructureError(f"no duality-gap termination rule for {type(inst).__name__}")


# ------------------------------------------------------------------------------
# persistence
# ------------------------------------------------------------------------------

def save_instance(inst: Instance, path) -> None:
    """Write ``{format_version, kind, header, arrays}`` with joblib."""
    payload = {
        "format_version": FORMAT_VERSION,
        "kind": inst.kind,
        "header": inst.header(),
        "arrays": {name: np.ascontiguousarray(a) for name, a in inst.arrays().items()},
    }
    try:
        joblib.dump(payload, path)
    except OSError:
        logger.error(f"could not write instance to {path}", exc_info=True)
        raise
    logger.info(f"saved {inst.kind} instance to {path}")


def load_instance(path) -> Instance:
    try:
        payload = joblib.load(path)
    except OSError:
        logger.error(f"could not read instance from {path}", exc_info=True)
        raise
    version = payload.get("format_version") if isinstance(payload, dict) else None
    if version != FORMAT_VERSION:
        raise PreconditionError(f"{path}: unsupported instance format version {version!r}")
    cls = _KINDS.get(payload["kind"])
    if cls is None:
        raise PreconditionError(f"{path}: unknown instance kind {payload['kind']!r}")
    return cls.from_parts(payload["header"], payload["arrays"])
