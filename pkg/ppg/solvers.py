"""
Iterative solvers for min_z h(z) + P(Mz - b).

PPG is the main algorithm; proximal AMA is its generic parent (applied to the
Fenchel dual it reproduces PPG), and proximal gradient, MFBS and the
Condat-type primal-dual iteration are the comparison baselines.

Every solver returns a SolveTrace. Hitting the iteration cap is reported
through ``SolveTrace.converged``, never raised.
"""

import logging
import time
from dataclasses import dataclass, field
from typing import Annotated, Callable, Dict, List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from ppg.errors import (
    ConfigurationError,
    DimensionError,
    DomainError,
    PreconditionError,
    UnsupportedStructureError,
)
from ppg.linops import IdentityMap, LinearMap
from ppg.proxlib import Proximable, conjugate_prox
from ppg.smooth import Smooth

logger = logging.getLogger(__name__)

# relative slack when comparing stepsizes against their admissible bounds
BOUND_SLACK = 1e-12


@dataclass(frozen=True, eq=False)
class CompositeProblem:
    """F(z) = h(z) + P(Mz - b), with L bounding the Lipschitz modulus of ∇h."""

    h: Smooth
    P: Proximable
    M: LinearMap
    b: np.ndarray
    L: float

    def __post_init__(self):
        b = np.asarray(self.b, dtype=float)
        if b.shape != self.M.out_dim:
            raise DimensionError(f"b has shape {b.shape}, M maps into {self.M.out_dim}")
        object.__setattr__(self, "b", b)
        if not self.L > 0:
            raise DomainError(f"L must be positive, got {self.L}")
        if self.L < self.h.lipschitz * (1.0 - BOUND_SLACK):
            raise DomainError(f"L = {self.L} is below the Lipschitz bound {self.h.lipschitz} of ∇h")

    @property
    def gram_bound(self) -> float:
        return self.M.gram_norm_bound()

    def objective(self, z) -> float:
        return self.h.value(z) + self.P.value(self.M.apply(z) - self.b)


def default_gamma(beta: float, L: float) -> float:
    """1 + 0.95 min{1/2, 1/(βL) - 1/2}."""
    return 1.0 + 0.95 * min(0.5, 1.0 / (beta * L) - 0.5)


class PPGConfig(BaseModel):
    """Stepsizes and stopping parameters for PPG.

    Admissibility (checked at construction, ConfigurationError otherwise):
    β ∈ (0, 2/L), γ ∈ (0, 1 + min{1/2, 1/(βL) - 1/2}), τ ≥ β||M*M||.
    """

    model_config = ConfigDict(frozen=True)

    lipschitz: Annotated[float, Field(gt=0)]
    gram_bound: Annotated[float, Field(ge=0)]
    beta: Annotated[float, Field(gt=0)]
    gamma: Annotated[float, Field(gt=0)]
    tau: Annotated[float, Field(gt=0)]
    max_iter: Annotated[int, Field(ge=1)] = 20000
    tol: Optional[Annotated[float, Field(gt=0)]] = None
    check_every: Annotated[int, Field(ge=1)] = 10

    def __init__(self, **data):
        super().__init__(**data)
        L, beta = self.lipschitz, self.beta
        if not beta < 2.0 / L:
            raise ConfigurationError(
                f"beta = {beta} is not below 2/L = {2.0 / L}", violated="beta < 2/L"
            )
        gamma_max = 1.0 + min(0.5, 1.0 / (beta * L) - 0.5)
        if not self.gamma < gamma_max:
            raise ConfigurationError(
                f"gamma = {self.gamma} is not below {gamma_max}",
                violated="gamma < 1 + min{1/2, 1/(beta L) - 1/2}",
            )
        if self.tau < beta * self.gram_bound * (1.0 - BOUND_SLACK):
            raise ConfigurationError(
                f"tau = {self.tau} is below beta ||M*M|| = {beta * self.gram_bound}",
                violated="tau >= beta ||M*M||",
            )

    @classmethod
    def for_problem(
        cls,
        prob: CompositeProblem,
        beta: Optional[float] = None,
        gamma: Optional[float] = None,
        tau: Optional[float] = None,
        **kwargs,
    ) -> "PPGConfig":
        """Fill in β = 1/L, γ = default_gamma(β, L), τ = β||M*M|| where not given."""
        beta = 1.0 / prob.L if beta is None else beta
        gram = prob.gram_bound
        return cls(
            lipschitz=prob.L,
            gram_bound=gram,
            beta=beta,
            gamma=default_gamma(beta, prob.L) if gamma is None else gamma,
            tau=beta * gram if tau is None else tau,
            **kwargs,
        )


@dataclass(frozen=True)
class CheckResult:
    """Outcome of one termination check."""

    stop: bool
    pobj: float
    dobj: float
    dfeas: float


# (t, z, y, x) -> CheckResult; x is the latest ∇h evaluation.
Termination = Callable[[int, np.ndarray, np.ndarray, np.ndarray], CheckResult]
# (t, pobj_min, dobj, dfeas) -> True to stop
Progress = Callable[[int, float, float, float], bool]


@dataclass(eq=False)
class Reference:
    """A primal-dual optimal triple (x̄, ȳ, z̄), usually from a long accurate run."""

    z: np.ndarray
    y: np.ndarray
    x: Optional[np.ndarray] = None
    dual_value: Optional[float] = None


@dataclass(eq=False)
class SolveTrace:
    solver: str
    iterations: int = 0
    wall_time: float = 0.0
    converged: bool = False
    z_final: Optional[np.ndarray] = None
    y_final: Optional[np.ndarray] = None
    x_final: Optional[np.ndarray] = None
    checkpoints: List[int] = field(default_factory=list)
    primal_values: List[float] = field(default_factory=list)
    dual_values: List[float] = field(default_factory=list)
    dfeas_values: List[float] = field(default_factory=list)
    objective_values: List[float] = field(default_factory=list)
    ergodic_x: Optional[np.ndarray] = None
    ergodic_y: Optional[np.ndarray] = None
    lyapunov: Optional[List[float]] = None
    ergodic_residuals: Optional[List[float]] = None
    ergodic_dual_values: Optional[List[float]] = None
    history: Optional[Dict[str, List[np.ndarray]]] = None

    @staticmethod
    def _last(values: List[float]) -> float:
        return values[-1] if values else float("nan")

    @property
    def pobj(self) -> float:
        return self._last(self.primal_values)

    @property
    def dobj(self) -> float:
        return self._last(self.dual_values)

    @property
    def dfeas(self) -> float:
        return self._last(self.dfeas_values)


class _Recorder:
    """Bookkeeping shared by the solver loops: checkpoints, ergodic means, history."""

    def __init__(
        self,
        solver: str,
        check_every: int,
        term: Optional[Termination],
        progress: Optional[Progress],
        record_history: bool,
    ):
        if check_every < 1:
            raise ConfigurationError(f"check_every must be >= 1, got {check_every}")
        self.trace = SolveTrace(solver=solver)
        self.check_every = check_every
        self.term = term
        self.progress = progress
        if record_history:
            self.trace.history = {"x": [], "y": [], "z": []}
        self._n = 0
        self._start = time.perf_counter()

    def remember(self, **iterates: np.ndarray) -> None:
        if self.trace.history is not None:
            for name, value in iterates.items():
                self.trace.history.setdefault(name, []).append(np.copy(value))

    def average(self, x: np.ndarray, y: np.ndarray) -> None:
        # running mean over t = 1..N
        self._n += 1
        tr = self.trace
        if tr.ergodic_x is None:
            tr.ergodic_x, tr.ergodic_y = np.copy(x), np.copy(y)
        else:
            tr.ergodic_x += (x - tr.ergodic_x) / self._n
            tr.ergodic_y += (y - tr.ergodic_y) / self._n

    def due(self, t: int) -> bool:
        return t % self.check_every == 0

    def checkpoint(self, t: int, z, y, x) -> bool:
        stop = False
        if self.term is not None:
            res = self.term(t, z, y, x)
            tr = self.trace
            tr.checkpoints.append(t)
            tr.primal_values.append(res.pobj)
            tr.dual_values.append(res.dobj)
            tr.dfeas_values.append(res.dfeas)
            logger.debug(f"{tr.solver} t={t} pobj={res.pobj:.6e} dobj={res.dobj:.6e} dfeas={res.dfeas:.3e}")
            stop = res.stop
            if self.progress is not None and self.progress(t, res.pobj, res.dobj, res.dfeas):
                stop = True
        return stop

    def finish(self, t: int, z, y, x, converged: bool) -> SolveTrace:
        tr = self.trace
        tr.wall_time = time.perf_counter() - self._start
        tr.iterations = t
        tr.converged = converged
        tr.z_final, tr.y_final, tr.x_final = z, y, x
        status = "converged" if converged else "stopped at the iteration cap"
        logger.info(f"{tr.solver} {status} after {t} iterations ({tr.wall_time:.2f} s)")
        return tr


def _start_point(z0, shape) -> np.ndarray:
    if z0 is None:
        return np.zeros(shape)
    z0 = np.array(z0, dtype=float)
    if z0.shape != shape:
        raise DimensionError(f"starting point has shape {z0.shape}, expected {shape}")
    return z0


def _relative_change(new: np.ndarray, old: np.ndarray) -> float:
    return float(np.linalg.norm(new - old)) / max(1.0, float(np.linalg.norm(old)))


def t_seminorm_sq(v: np.ndarray, M: LinearMap, tau: float, beta: float) -> float:
    """||v||²_T with T = τI - βMM*, without forming T."""
    Mtv = M.adjoint(v)
    return tau * float(np.vdot(v, v)) - beta * float(np.vdot(Mtv, Mtv))


def lyapunov_value(z, y, reference: Reference, gamma: float, beta: float, tau: float, M: LinearMap) -> float:
    """(1/(γβ))||z - z̄||² + ||y - ȳ||²_T."""
    dz = np.asarray(z) - reference.z
    return float(np.vdot(dz, dz)) / (gamma * beta) + t_seminorm_sq(np.asarray(y) - reference.y, M, tau, beta)


# ------------------------------------------------------------------------------
# PPG
# ------------------------------------------------------------------------------

def ppg_solve(
    prob: CompositeProblem,
    cfg: PPGConfig,
    term: Optional[Termination] = None,
    *,
    z0=None,
    y0=None,
    progress: Optional[Progress] = None,
    reference: Optional[Reference] = None,
    track_ergodic: bool = False,
    ergodic_objective: Optional[Callable[[np.ndarray, np.ndarray], float]] = None,
    record_history: bool = False,
) -> SolveTrace:
    """Proximal-proximal gradient iteration.

    Per iteration:
        x^{t+1} = ∇h(z^t)
        y^{t+1} = prox_{τ⁻¹P*}((Ty^t - b + Mz^t - βMx^{t+1}) / τ),  T = τI - βMM*
        z^{t+1} = z^t - γβ(x^{t+1} + M*y^{t+1})

    ``term`` is called every ``cfg.check_every`` iterations. Without it, a
    positive ``cfg.tol`` stops on the relative change of (z, y).
    ``reference`` enables the Lyapunov record; ``track_ergodic`` records
    ||x̄^N + M*ȳ^N|| for every N, and ``ergodic_objective(x̄, ȳ)`` records the
    dual objective along the ergodic sequence.
    """
    h, P, M, b = prob.h, prob.P, prob.M, prob.b
    beta, gamma, tau = cfg.beta, cfg.gamma, cfg.tau
    z = _start_point(z0, M.in_dim)
    y = _start_point(y0, M.out_dim)

    rec = _Recorder("ppg", cfg.check_every, term, progress, record_history)
    tr = rec.trace
    if reference is not None:
        tr.lyapunov = [lyapunov_value(z, y, reference, gamma, beta, tau, M)]
    if track_ergodic:
        tr.ergodic_residuals = []
    if ergodic_objective is not None:
        tr.ergodic_dual_values = []

    Mty = M.adjoint(y)
    x = None
    t = 0
    converged = False
    for t in range(1, cfg.max_iter + 1):
        x = h.gradient(z)
        # Ty - b + Mz - βMx = τy - b + M(z - β(M*y + x))
        w = tau * y - b + M.apply(z - beta * (Mty + x))
        y_new = conjugate_prox(P, tau, w / tau)
        Mty = M.adjoint(y_new)
        z_new = z - gamma * beta * (x + Mty)

        rec.remember(x=x, y=y_new, z=z_new)
        rec.average(x, y_new)
        if track_ergodic:
            tr.ergodic_residuals.append(float(np.linalg.norm(tr.ergodic_x + M.adjoint(tr.ergodic_y))))
        if ergodic_objective is not None:
            tr.ergodic_dual_values.append(float(ergodic_objective(tr.ergodic_x, tr.ergodic_y)))
        if reference is not None:
            tr.lyapunov.append(lyapunov_value(z_new, y_new, reference, gamma, beta, tau, M))

        fixed_point = (
            term is None
            and cfg.tol is not None
            and max(_relative_change(z_new, z), _relative_change(y_new, y)) <= cfg.tol
        )
        z, y = z_new, y_new
        if fixed_point or (rec.due(t) and rec.checkpoint(t, z, y, x)):
            converged = True
            break

    return rec.finish(t, z, y, x, converged)


# ------------------------------------------------------------------------------
# proximal gradient
# ------------------------------------------------------------------------------

def proximal_gradient_solve(
    prob: CompositeProblem,
    L: Optional[float] = None,
    max_iter: int = 1000,
    tol: Optional[float] = None,
    term: Optional[Termination] = None,
    *,
    check_every: int = 1,
    z0=None,
    record_history: bool = False,
) -> SolveTrace:
    """z^{t+1} = argmin <∇h(z^t), z> + P(z - b) + (L/2)||z - z^t||², for M = I.

    The recorded y is L(ẑ^t - z^{t+1}) with ẑ^t = z^t - ∇h(z^t)/L, an element of
    ∂P(z^{t+1} - b); it is the y PPG produces with τ = β = 1/L, γ = 1.
    """
    if not isinstance(prob.M, IdentityMap):
        raise UnsupportedStructureError(
            f"proximal gradient needs M = identity, got a {prob.M.kind} map"
        )
    L = prob.L if L is None else float(L)
    if L < prob.h.lipschitz * (1.0 - BOUND_SLACK):
        raise ConfigurationError(f"L = {L} is below the Lipschitz bound {prob.h.lipschitz}", violated="L >= Lip(∇h)")
    h, P, b = prob.h, prob.P, prob.b
    z = _start_point(z0, prob.M.in_dim)
    rec = _Recorder("proxgrad", check_every, term, None, record_history)

    x = y = None
    t = 0
    converged = False
    for t in range(1, max_iter + 1):
        x = h.gradient(z)
        z_hat = z - x / L
        z_new = b + P.prox(1.0 / L, z_hat - b)
        y = L * (z_hat - z_new)
        rec.remember(x=x, y=y, z=z_new)
        rec.average(x, y)
        rec.trace.objective_values.append(prob.objective(z_new))

        small_step = tol is not None and _relative_change(z_new, z) <= tol
        z = z_new
        if small_step or (rec.due(t) and rec.checkpoint(t, z, y, x)):
            converged = True
            break

    return rec.finish(t, z, y, x, converged)


def inexact_proximal_gradient_solve(
    prob: CompositeProblem,
    inner_iters: int = 1,
    max_iter: int = 1000,
    term: Optional[Termination] = None,
    *,
    tau: Optional[float] = None,
    check_every: int = 1,
    z0=None,
    y0=None,
    record_history: bool = False,
) -> SolveTrace:
    """Proximal gradient with the subproblem solved inexactly through its dual.

    Each outer step takes ``inner_iters`` proximal gradient steps on
    max_y -(1/2L)||M*y||² + <Mẑ - b, y> - P*(y), warm-started at the previous y,
    and sets z = ẑ - M*y / L. One inner step gives PPG with β = 1/L, γ = 1.
    """
    if inner_iters < 1:
        raise ConfigurationError("inner_iters must be >= 1", violated="inner_iters >= 1")
    h, P, M, b = prob.h, prob.P, prob.M, prob.b
    beta = 1.0 / prob.L
    tau = beta * prob.gram_bound if tau is None else float(tau)
    if tau < beta * prob.gram_bound * (1.0 - BOUND_SLACK):
        raise ConfigurationError(f"tau = {tau} is below ||M*M||/L", violated="tau >= ||M*M||/L")
    z = _start_point(z0, M.in_dim)
    y = _start_point(y0, M.out_dim)
    rec = _Recorder("inexact_proxgrad", check_every, term, None, record_history)

    x = None
    t = 0
    converged = False
    for t in range(1, max_iter + 1):
        x = h.gradient(z)
        z_hat = z - beta * x
        M_zhat = M.apply(z_hat)
        for _ in range(inner_iters):
            y = conjugate_prox(P, tau, y - (beta * M.apply(M.adjoint(y)) - M_zhat + b) / tau)
        z = z_hat - beta * M.adjoint(y)
        rec.remember(x=x, y=y, z=z)
        rec.average(x, y)
        if rec.due(t) and rec.checkpoint(t, z, y, x):
            converged = True
            break

    return rec.finish(t, z, y, x, converged)


# ------------------------------------------------------------------------------
# proximal AMA
# ------------------------------------------------------------------------------

@dataclass(eq=False)
class AMAProblem:
    """min f(x) + g(y) s.t. Ax + By = c, with f strongly convex.

    f enters only through ``f_argmin(a) = argmin_x f(x) - <a, x>``. The
    y-subproblem is either ``y_argmin(z, Ax, y_prev, beta)`` (any T) or, with
    T = τI - βB*B, a prox of g: ``g_prox(s, v) = prox_{s g}(v)``.
    """

    f_argmin: Callable[[np.ndarray], np.ndarray]
    A: LinearMap
    B: LinearMap
    c: np.ndarray
    sigma_f: float
    g_prox: Optional[Callable[[float, np.ndarray], np.ndarray]] = None
    tau: Optional[float] = None
    y_argmin: Optional[Callable[[np.ndarray, np.ndarray, np.ndarray, float], np.ndarray]] = None

    def __post_init__(self):
        if not self.sigma_f > 0:
            raise DomainError(f"f must be strongly convex, got modulus {self.sigma_f}")
        if self.A.out_dim != self.B.out_dim:
            raise DimensionError(f"A maps into {self.A.out_dim}, B into {self.B.out_dim}")
        self.c = np.asarray(self.c, dtype=float)
        if self.c.shape != self.A.out_dim:
            raise DimensionError(f"c has shape {self.c.shape}, expected {self.A.out_dim}")
        if self.y_argmin is None and (self.g_prox is None or self.tau is None):
            raise PreconditionError("AMAProblem needs y_argmin, or g_prox together with tau")


def dual_ama_problem(prob: CompositeProblem, tau: float) -> AMAProblem:
    """The Fenchel dual of h(z) + P(Mz - b) as an AMA instance.

    f = h*, g = P* + <b, ·>, A = I, B = M*, c = 0, T = τI - βMM*.
    """
    b, P = prob.b, prob.P

    def g_prox(s: float, v: np.ndarray) -> np.ndarray:
        return conjugate_prox(P, 1.0 / s, v - s * b)

    return AMAProblem(
        f_argmin=prob.h.gradient,
        A=IdentityMap(prob.M.in_dim),
        B=prob.M.T,
        c=np.zeros(prob.M.in_dim),
        sigma_f=1.0 / prob.L,
        g_prox=g_prox,
        tau=tau,
    )


def ama_parameters_admissible(sigma_f: float, a_gram: float, beta: float, gamma: float, mu: float) -> bool:
    """2Σf - (β + μ)A*A ≻ 0 and 0 < γ < 1 + min{β, μ}/(2β), for scalar Σf."""
    return (
        beta > 0
        and mu > 0
        and 2.0 * sigma_f - (beta + mu) * a_gram > 0
        and 0 < gamma < 1.0 + min(beta, mu) / (2.0 * beta)
    )


def proximal_ama_solve(
    prob: AMAProblem,
    beta: float,
    gamma: float,
    max_iter: int = 1000,
    term: Optional[Termination] = None,
    *,
    check_every: int = 1,
    y0=None,
    z0=None,
    record_history: bool = False,
) -> SolveTrace:
    """Proximal AMA:

        x^{t+1} = argmin_x f(x) - <z^t, Ax>
        y^{t+1} = argmin_y g(y) - <z^t, By> + (β/2)||Ax^{t+1} + By - c||² + ½||y - y^t||²_T
        z^{t+1} = z^t - γβ(Ax^{t+1} + By^{t+1} - c)
    """
    if not (beta > 0 and gamma > 0):
        raise ConfigurationError("beta and gamma must be positive", violated="beta, gamma > 0")
    A, B, c = prob.A, prob.B, prob.c
    tau = prob.tau
    if prob.y_argmin is None and tau < beta * B.gram_norm_bound() * (1.0 - BOUND_SLACK):
        raise ConfigurationError(
            f"tau = {tau} is below beta ||B*B|| = {beta * B.gram_norm_bound()}",
            violated="tau >= beta ||B*B||",
        )
    y = _start_point(y0, B.in_dim)
    z = _start_point(z0, A.out_dim)
    rec = _Recorder("proximal_ama", check_every, term, None, record_history)

    x = None
    t = 0
    converged = False
    for t in range(1, max_iter + 1):
        x = prob.f_argmin(A.adjoint(z))
        Ax = A.apply(x)
        if prob.y_argmin is not None:
            y = prob.y_argmin(z, Ax, y, beta)
        else:
            # T = τI - βB*B linearizes the quadratic: one prox of g/τ
            grad = beta * B.adjoint(Ax + B.apply(y) - c) - B.adjoint(z)
            y = prob.g_prox(1.0 / tau, y - grad / tau)
        z = z - gamma * beta * (Ax + B.apply(y) - c)
        rec.remember(x=x, y=y, z=z)
        rec.average(x, y)
        if rec.due(t) and rec.checkpoint(t, z, y, x):
            converged = True
            break

    return rec.finish(t, z, y, x, converged)


# ------------------------------------------------------------------------------
# baselines
# ------------------------------------------------------------------------------

def mfbs_lipschitz(L: float, gram_bound: float) -> float:
    """Lipschitz bound of G(z, y) = (∇h(z) + M*y, b - Mz): ½(L + sqrt(L² + 4||M*M||))."""
    return 0.5 * (L + np.sqrt(L * L + 4.0 * gram_bound))


def mfbs_solve(
    prob: CompositeProblem,
    sigma: float = 0.95,
    L_M: Optional[float] = None,
    max_iter: int = 20000,
    term: Optional[Termination] = None,
    *,
    check_every: int = 1,
    z0=None,
    y0=None,
    progress: Optional[Progress] = None,
    record_history: bool = False,
) -> SolveTrace:
    """Tseng's modified forward-backward splitting on the saddle-point form.

    Termination is evaluated at (u^t, v^t) with x = ∇h(u^t).
    """
    if not 0 < sigma < 1:
        raise ConfigurationError(f"sigma = {sigma} is not in (0, 1)", violated="0 < sigma < 1")
    certified = mfbs_lipschitz(prob.L, prob.gram_bound)
    L_M = certified if L_M is None else float(L_M)
    if not L_M > 0:
        raise ConfigurationError(f"L_M must be positive, got {L_M}", violated="L_M > 0")
    if L_M < certified * (1.0 - BOUND_SLACK):
        logger.warning(f"L_M = {L_M:.6g} is below the certified bound {certified:.6g}")

    h, P, M, b = prob.h, prob.P, prob.M, prob.b
    s = sigma / L_M
    z = _start_point(z0, M.in_dim)
    y = _start_point(y0, M.out_dim)
    rec = _Recorder("mfbs", check_every, term, progress, record_history)

    gu = None
    t = 0
    converged = False
    for t in range(1, max_iter + 1):
        gz = h.gradient(z)
        Mty = M.adjoint(y)
        Mz = M.apply(z)
        v = conjugate_prox(P, 1.0 / s, y + s * (Mz - b))
        u = z - s * (gz + Mty)
        gu = h.gradient(u)
        Mtv = M.adjoint(v)
        y = v - s * (Mz - M.apply(u))
        z = u - s * (gu + Mtv - gz - Mty)
        rec.remember(x=gu, y=v, z=u)
        rec.average(gu, v)
        if rec.due(t) and rec.checkpoint(t, u, v, gu):
            converged = True
            break

    return rec.finish(t, z, y, gu, converged)


def check_condat_parameters(L: float, gram_bound: float, beta: float, tau: float, gamma: float) -> None:
    """1/β - ||M*M||/τ ≥ L/2 and 0 < γ < 2 - (L/2)(1/β - ||M*M||/τ)⁻¹."""
    if not (beta > 0 and tau > 0):
        raise ConfigurationError("beta and tau must be positive", violated="beta, tau > 0")
    lhs = 1.0 / beta - gram_bound / tau
    if lhs < 0.5 * L * (1.0 - BOUND_SLACK):
        raise ConfigurationError(
            f"1/beta - ||M*M||/tau = {lhs} is below L/2 = {0.5 * L}",
            violated="1/beta - ||M*M||/tau >= L/2",
        )
    gamma_max = 2.0 - 0.5 * L / lhs
    if not 0 < gamma < gamma_max:
        raise ConfigurationError(
            f"gamma = {gamma} is not in (0, {gamma_max})",
            violated="0 < gamma < 2 - (L/2)(1/beta - ||M*M||/tau)^-1",
        )


def condat_defaults(L: float, gram_bound: float) -> Dict[str, float]:
    """β = 1/L, τ = 2β||M*M|| and γ at 95% of its admissible maximum."""
    beta = 1.0 / L
    tau = 2.0 * beta * gram_bound if gram_bound > 0 else beta
    gamma = 0.95 * (2.0 - 0.5 * L / (1.0 / beta - gram_bound / tau))
    return {"beta": beta, "tau": tau, "gamma": gamma}


def condat_solve(
    prob: CompositeProblem,
    beta: float,
    tau: float,
    gamma: float,
    max_iter: int = 20000,
    term: Optional[Termination] = None,
    *,
    check_every: int = 1,
    z0=None,
    y0=None,
    progress: Optional[Progress] = None,
    record_history: bool = False,
) -> SolveTrace:
    """Condat-type primal-dual iteration with relaxation of both variables:

        z' = z - β(∇h(z) + M*y)
        y' = prox_{τ⁻¹P*}(y - (2βMM*y - Mz + 2βM∇h(z) + b) / τ)
        (z, y) = γ(z', y') + (1 - γ)(z, y)
    """
    check_condat_parameters(prob.L, prob.gram_bound, beta, tau, gamma)
    h, P, M, b = prob.h, prob.P, prob.M, prob.b
    z = _start_point(z0, M.in_dim)
    y = _start_point(y0, M.out_dim)
    rec = _Recorder("condat", check_every, term, progress, record_history)

    gz = None
    t = 0
    converged = False
    for t in range(1, max_iter + 1):
        gz = h.gradient(z)
        step = gz + M.adjoint(y)
        z_half = z - beta * step
        y_half = conjugate_prox(P, tau, y + (M.apply(z - 2.0 * beta * step) - b) / tau)
        z = gamma * z_half + (1.0 - gamma) * z
        y = gamma * y_half + (1.0 - gamma) * y
        rec.remember(x=gz, y=y, z=z)
        rec.average(gz, y)
        if rec.due(t) and rec.checkpoint(t, z, y, gz):
            converged = True
            break

    return rec.finish(t, z, y, gz, converged)


# ------------------------------------------------------------------------------
# complexity bounds
# ------------------------------------------------------------------------------

@dataclass(frozen=True)
class BoundRow:
    N: int
    gap_lower: float
    gap_upper: float
    constraint_bound: float
    measured_constraint: float
    measured_gap: Optional[float] = None

    def holds(self, slack: float = 1e-10) -> bool:
        ok = self.measured_constraint <= self.constraint_bound + slack
        if self.measured_gap is not None:
            ok = ok and self.gap_lower - slack <= self.measured_gap <= self.gap_upper + slack
        return ok


def ergodic_bounds(
    trace: SolveTrace,
    reference: Optional[Reference],
    *,
    beta: float,
    gamma: float,
    tau: float,
    M: LinearMap,
    L: float,
    z0=None,
    y0=None,
    delta: Optional[float] = None,
    sigma: Optional[float] = None,
    a_norm: float = 1.0,
) -> List[BoundRow]:
    """Ergodic O(1/√N) and O(1/N) bounds for PPG, one row per recorded N.

    The defaults δ = 1/(2L), σ = 1/4 are the constants valid for β = 1/L,
    γ = 1; with them the constraint bound reads
    2√(L/N)·√(L||z^0 - z̄||² + ||y^0 - ȳ||²_T).
    """
    if reference is None:
        raise PreconditionError("ergodic bounds need a reference solution")
    if trace.ergodic_residuals is None:
        raise PreconditionError("trace was recorded without track_ergodic=True")
    delta = 1.0 / (2.0 * L) if delta is None else delta
    sigma = 0.25 if sigma is None else sigma
    z0 = np.zeros(M.in_dim) if z0 is None else np.asarray(z0, dtype=float)
    y0 = np.zeros(M.out_dim) if y0 is None else np.asarray(y0, dtype=float)

    y_term = t_seminorm_sq(y0 - reference.y, M, tau, beta)
    r0 = float(np.vdot(z0 - reference.z, z0 - reference.z)) / (gamma * beta) + y_term
    start = float(np.vdot(z0, z0)) / (gamma * beta) + y_term
    z_norm = float(np.linalg.norm(reference.z))
    slope = beta * a_norm ** 2 / (2.0 * delta) + max(gamma - 1.0, 0.0) / (2.0 * sigma)

    gaps = trace.ergodic_dual_values
    if gaps is not None and reference.dual_value is None:
        raise PreconditionError("measured gaps need reference.dual_value")

    rows = []
    for N, residual in enumerate(trace.ergodic_residuals, start=1):
        root = np.sqrt(r0 / (N * sigma * beta))
        rows.append(BoundRow(
            N=N,
            gap_lower=-z_norm * root,
            gap_upper=start / (2.0 * N) + slope * r0 / N,
            constraint_bound=root,
            measured_constraint=residual,
            measured_gap=None if gaps is None else gaps[N - 1] - reference.dual_value,
        ))
    return rows
