"""
Randomized invariant checks run by ``bench check``.

Operators: adjoint consistency and validity of the ||M*M|| bounds.
Proximables: the Moreau identity and nonexpansiveness of the prox.
Smooth terms: gradients against central finite differences, midpoint
convexity and cocoercivity of the gradient with modulus 1/L.
"""

import logging
from dataclasses import dataclass
from typing import Callable, List, Optional

import numpy as np
import scipy.linalg

from ppg.linops import (
    DenseMap,
    FusedDiffStack,
    HankelMap,
    HankelShape,
    IdentityMap,
    LinearMap,
    Replication,
)
from ppg.proxlib import NuclearNorm, Proximable, SeparableSum, WeightedL1, conjugate_prox
from ppg.smooth import LogisticAffine, MaskedQuadratic, Smooth

logger = logging.getLogger(__name__)

ADJOINT_RTOL = 1e-10
MOREAU_RTOL = 1e-12
GRADIENT_RTOL = 1e-6
FD_STEP = 1e-5
BOUND_SLACK = 1e-8
NONEXPANSIVE_SLACK = 1e-9
CONVEXITY_TOL = 1e-10
COCOERCIVITY_TOL = 1e-8


@dataclass(frozen=True)
class CheckOutcome:
    name: str
    passed: bool
    detail: str


def adjoint_error(op: LinearMap, n_pairs: int = 100, rng: Optional[np.random.Generator] = None) -> float:
    """Worst relative |<Mz, y> - <z, M*y>| over random pairs."""
    rng = rng or np.random.default_rng()
    worst = 0.0
    for _ in range(n_pairs):
        z = rng.standard_normal(op.in_dim)
        y = rng.standard_normal(op.out_dim)
        Mz, Mty = op.apply(z), op.adjoint(y)
        scale = max(np.linalg.norm(Mz) * np.linalg.norm(y), np.linalg.norm(z) * np.linalg.norm(Mty), 1e-300)
        worst = max(worst, abs(np.vdot(Mz, y) - np.vdot(z, Mty)) / scale)
    return float(worst)


def moreau_error(
    P: Proximable,
    shape,
    tau: float = 0.7,
    n_points: int = 1000,
    rng: Optional[np.random.Generator] = None,
) -> float:
    """Worst relative ||prox_{τP}(z) + τ·prox_{τ⁻¹P*}(z/τ) - z||."""
    rng = rng or np.random.default_rng()
    worst = 0.0
    for _ in range(n_points):
        z = 3.0 * rng.standard_normal(shape)
        total = P.prox(tau, z) + tau * conjugate_prox(P, tau, z / tau)
        worst = max(worst, np.linalg.norm(total - z) / max(np.linalg.norm(z), 1e-300))
    return float(worst)


def gradient_error(
    h: Smooth,
    shape,
    n_points: int = 50,
    rng: Optional[np.random.Generator] = None,
    step: float = FD_STEP,
) -> float:
    """Worst relative gap between ∇h and its coordinatewise central difference."""
    rng = rng or np.random.default_rng()
    worst = 0.0
    for _ in range(n_points):
        z = rng.standard_normal(shape)
        grad = h.gradient(z)
        fd = np.zeros_like(z)
        for idx in np.ndindex(*z.shape):
            e = np.zeros_like(z)
            e[idx] = step
            fd[idx] = (h.value(z + e) - h.value(z - e)) / (2.0 * step)
        worst = max(worst, np.linalg.norm(fd - grad) / max(np.linalg.norm(grad), 1.0))
    return float(worst)


def nonexpansive_ratio(
    P: Proximable,
    shape,
    tau: float = 0.7,
    n_pairs: int = 200,
    rng: Optional[np.random.Generator] = None,
) -> float:
    """Largest ||prox_{τP}(u) - prox_{τP}(v)|| / ||u - v|| over random pairs; at most 1."""
    rng = rng or np.random.default_rng()
    worst = 0.0
    for _ in range(n_pairs):
        u = 3.0 * rng.standard_normal(shape)
        v = u + rng.choice([1e-3, 1.0, 10.0]) * rng.standard_normal(shape)
        gap = np.linalg.norm(u - v)
        worst = max(worst, np.linalg.norm(P.prox(tau, u) - P.prox(tau, v)) / gap)
    return float(worst)


def convexity_violation(h: Smooth, shape, n_pairs: int = 100, rng: Optional[np.random.Generator] = None) -> float:
    """Largest h(½z1 + ½z2) - ½h(z1) - ½h(z2) over random pairs; nonpositive for convex h."""
    rng = rng or np.random.default_rng()
    worst = -np.inf
    for _ in range(n_pairs):
        z1, z2 = 3.0 * rng.standard_normal(shape), 3.0 * rng.standard_normal(shape)
        worst = max(worst, h.value(0.5 * (z1 + z2)) - 0.5 * (h.value(z1) + h.value(z2)))
    return float(worst)


def cocoercivity_violation(h: Smooth, shape, n_pairs: int = 100, rng: Optional[np.random.Generator] = None) -> float:
    """Largest ||∇h(z1) - ∇h(z2)||²/L - <∇h(z1) - ∇h(z2), z1 - z2> over random pairs."""
    rng = rng or np.random.default_rng()
    worst = -np.inf
    for _ in range(n_pairs):
        z1 = 3.0 * rng.standard_normal(shape)
        z2 = z1 + rng.choice([1e-2, 1.0, 5.0]) * rng.standard_normal(shape)
        dg = h.gradient(z1) - h.gradient(z2)
        worst = max(worst, float(np.vdot(dg, dg)) / h.lipschitz - float(np.vdot(dg, z1 - z2)))
    return float(worst)


def exact_gram_norm(op: LinearMap) -> float:
    """λ_max(M*M) from a dense eigendecomposition; small operators only."""
    D = op.to_dense()
    return float(scipy.linalg.eigh(D.T @ D, eigvals_only=True)[-1])


def sample_operators(rng: np.random.Generator) -> List[LinearMap]:
    """One small operator of every kind."""
    return [
        IdentityMap((4, 3)),
        DenseMap(rng.standard_normal((7, 5))),
        HankelMap(HankelShape(m=3, n=2, j=4, k=5)),
        FusedDiffStack(9),
        Replication(3, (4,)),
    ]


def sample_proximables(rng: np.random.Generator):
    """(P, shape) pairs covering every proximable kind."""
    return [
        (WeightedL1(rng.uniform(0.0, 2.0, size=12)), (12,)),
        (NuclearNorm(0.8, (8, 6)), (8, 6)),
        (SeparableSum([WeightedL1(np.full(5, 0.3)), WeightedL1(np.full(5, 1.5))]), (2, 5)),
    ]


def sample_smooth(rng: np.random.Generator):
    w = np.zeros((3, 8))
    w[:, :4] = 1.0
    return [
        (LogisticAffine(rng.standard_normal((6, 9))), (9,)),
        (MaskedQuadratic(w, rng.standard_normal((3, 8))), (3, 8)),
    ]


def _outcome(name: str, value: float, limit: float, what: str) -> CheckOutcome:
    return CheckOutcome(name, value <= limit, f"{what} {value:.2e} (limit {limit:.0e})")


def run_checks(seed: int = 0, log: Callable[[CheckOutcome], None] = None) -> List[CheckOutcome]:
    rng = np.random.default_rng(seed)
    outcomes = []
    for op in sample_operators(rng):
        outcomes.append(_outcome(f"adjoint[{op.kind}]", adjoint_error(op, 100, rng), ADJOINT_RTOL, "max rel err"))
        bound, exact = op.gram_norm_bound(), exact_gram_norm(op)
        outcomes.append(CheckOutcome(
            f"gram_bound[{op.kind}]", bound >= exact - BOUND_SLACK * max(exact, 1.0), f"bound {bound:.6g} vs exact {exact:.6g}"
        ))
    for P, shape in sample_proximables(rng):
        outcomes.append(_outcome(f"moreau[{P.kind}]", moreau_error(P, shape, 0.7, 1000, rng), MOREAU_RTOL, "max rel err"))
        ratio = nonexpansive_ratio(P, shape, 0.7, 200, rng)
        outcomes.append(_outcome(f"nonexpansive[{P.kind}]", ratio - 1.0, NONEXPANSIVE_SLACK, "ratio - 1"))
    for h, shape in sample_smooth(rng):
        outcomes.append(_outcome(f"gradient[{h.kind}]", gradient_error(h, shape, 50, rng), GRADIENT_RTOL, "max rel err"))
        outcomes.append(_outcome(f"convex[{h.kind}]", convexity_violation(h, shape, 100, rng), CONVEXITY_TOL, "midpoint excess"))
        outcomes.append(_outcome(f"cocoercive[{h.kind}]", cocoercivity_violation(h, shape, 100, rng), COCOERCIVITY_TOL, "excess"))

    for outcome in outcomes:
        (log or _log_outcome)(outcome)
    return outcomes


def _log_outcome(outcome: CheckOutcome) -> None:
    level = logging.INFO if outcome.passed else logging.ERROR
    logger.log(level, f"{'PASS' if outcome.passed else 'FAIL'} {outcome.name}: {outcome.detail}")
