"""
Configuration-driven benchmark runner.

    python -m ppg.bench run experiments/sysreal_k100.conf
    python -m ppg.bench gen experiments/flasso_n10000.conf --out-dir instances
    python -m ppg.bench check
    python -m ppg.bench serve

Config files are plain ``key = value`` lines with ``#`` comments; see
ExperimentConfig for the keys.
"""

import argparse
import io
import logging
import math
import os
import sys
from pathlib import Path
from typing import Annotated, Any, Dict, List, Literal, Optional

import joblib
import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from ppg.errors import ConfigurationError, PPGError, PreconditionError
from ppg.problems import (
    Instance,
    build_composite,
    default_condat_params,
    default_mfbs_params,
    default_ppg_config,
    gen_fusedlasso,
    gen_sysreal,
    make_termination,
    save_instance,
)
from ppg.solvers import (
    CompositeProblem,
    check_condat_parameters,
    condat_solve,
    mfbs_solve,
    ppg_solve,
)

logger = logging.getLogger(__name__)

PROBLEMS = ("sysreal", "flasso")
SOLVERS = ("ppg", "mfbs", "condat", "proxgrad")
CSV_COLUMNS = ["problem", "solver", "param1", "param2", "iter", "cpu_s", "pobj", "dobj", "dfeas", "converged"]

PROBLEM_DEFAULTS: Dict[str, Dict[str, Any]] = {
    "sysreal": {"T": 1000, "m": 10, "n": 10, "r": 10, "j": 21, "k": 100, "sigma": 0.05, "lam": 0.5},
    "flasso": {"m": 250, "n": 10000, "alpha": 5e-4},
}
PROBLEM_KEYS = {
    "sysreal": {"T", "m", "n", "r", "j", "k", "sigma", "lam"},
    "flasso": {"m", "n", "alpha"},
}

PositiveFloat = Annotated[float, Field(gt=0)]


class ExperimentConfig(BaseModel):
    """One benchmark experiment: a problem family, its sizes, and the solvers to run."""

    model_config = ConfigDict(extra="forbid")

    problem: Literal["sysreal", "flasso"]
    solvers: Annotated[List[Literal["ppg", "mfbs", "condat", "proxgrad"]], Field(min_length=1)]

    # system realization
    T: Optional[Annotated[int, Field(ge=1)]] = None
    r: Optional[Annotated[int, Field(ge=1)]] = None
    j: Optional[Annotated[int, Field(ge=1)]] = None
    k: Optional[Annotated[int, Field(ge=1)]] = None
    sigma: Optional[Annotated[float, Field(ge=0)]] = None
    lam: Optional[PositiveFloat] = None
    # shared dimensions
    m: Optional[Annotated[int, Field(ge=1)]] = None
    n: Optional[Annotated[int, Field(ge=1)]] = None
    # fused lasso
    alpha: Optional[PositiveFloat] = None

    # per-solver overrides
    beta: Optional[PositiveFloat] = None
    gamma: Optional[PositiveFloat] = None
    tau: Optional[PositiveFloat] = None
    mfbs_sigma: Optional[Annotated[float, Field(gt=0, lt=1)]] = None
    L_M: Optional[PositiveFloat] = None
    condat_beta: Optional[PositiveFloat] = None
    condat_tau: Optional[PositiveFloat] = None
    condat_gamma: Optional[PositiveFloat] = None

    tol: PositiveFloat = 1e-4
    max_iter: Annotated[int, Field(ge=1)] = 20000
    instances: Annotated[int, Field(ge=1)] = 1
    base_seed: Annotated[int, Field(ge=0)] = 0
    output_path: Optional[str] = None

    @model_validator(mode="before")
    @classmethod
    def _fill_problem_defaults(cls, data):
        if isinstance(data, dict) and data.get("problem") in PROBLEM_DEFAULTS:
            data = {**PROBLEM_DEFAULTS[data["problem"]], **data}
        return data

    @model_validator(mode="after")
    def _check_consistency(self):
        foreign = [
            key for key in set().union(*PROBLEM_KEYS.values()) - PROBLEM_KEYS[self.problem]
            if getattr(self, key) is not None
        ]
        if foreign:
            raise ValueError(f"keys {sorted(foreign)} do not apply to problem {self.problem}")
        if "proxgrad" in self.solvers:
            raise ValueError(f"proxgrad needs M = identity; {self.problem} uses a non-identity M")
        if len(set(self.solvers)) != len(self.solvers):
            raise ValueError("solvers contains duplicates")
        return self

    @property
    def params(self) -> tuple:
        """(param1, param2) reported in the result table."""
        if self.problem == "sysreal":
            return float(self.k), float(self.lam)
        return float(self.n), float(self.alpha)


class ResultRow(BaseModel):
    """Means over instances for one (problem parameters, solver) cell."""

    problem: str
    solver: str
    param1: float
    param2: float
    iter: float
    cpu_s: float
    pobj: Optional[float] = None
    dobj: Optional[float] = None
    dfeas: Optional[float] = None
    converged: Annotated[int, Field(ge=0)]
    instances: Annotated[int, Field(ge=1)]

    @field_validator("pobj", "dobj", "dfeas", mode="before")
    @classmethod
    def _nan_to_none(cls, v):
        if v is not None and isinstance(v, float) and math.isnan(v):
            return None
        return v

    @model_validator(mode="after")
    def _check_counts(self):
        if self.converged > self.instances:
            raise ValueError("converged count exceeds the number of instances")
        return self


# ------------------------------------------------------------------------------
# config parsing
# ------------------------------------------------------------------------------

def _describe(error: ValidationError) -> str:
    parts = []
    for err in error.errors():
        key = ".".join(str(p) for p in err["loc"]) or "<config>"
        parts.append(f"{key}: {err['msg']}")
    return "; ".join(parts)


def parse_config_text(text: str, source: str = "<string>") -> ExperimentConfig:
    raw: Dict[str, Any] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"{source}:{lineno}: expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigurationError(f"{source}:{lineno}: empty key")
        if key in raw:
            raise ConfigurationError(f"{source}:{lineno}: duplicate key '{key}'", violated=key)
        raw[key] = [s.strip() for s in value.split(",") if s.strip()] if key == "solvers" else value
    try:
        return ExperimentConfig.model_validate(raw)
    except ValidationError as e:
        first = e.errors()[0]["loc"]
        raise ConfigurationError(
            f"{source}: {_describe(e)}", violated=str(first[0]) if first else None
        ) from e


def parse_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError:
        logger.error(f"could not read config {path}", exc_info=True)
        raise
    return parse_config_text(text, source=str(path))


# ------------------------------------------------------------------------------
# running
# ------------------------------------------------------------------------------

def generate_instance(cfg: ExperimentConfig, seed: int) -> Instance:
    if cfg.problem == "sysreal":
        return gen_sysreal(cfg.T, cfg.m, cfg.n, cfg.r, cfg.j, cfg.k, cfg.sigma, cfg.lam, seed)
    return gen_fusedlasso(cfg.m, cfg.n, cfg.alpha, seed)


def _solver_params(cfg: ExperimentConfig, inst: Instance, prob: CompositeProblem) -> Dict[str, Any]:
    """Validated parameters for every enabled solver on one instance."""
    params: Dict[str, Any] = {}
    if "ppg" in cfg.solvers:
        params["ppg"] = default_ppg_config(
            inst, prob, beta=cfg.beta, gamma=cfg.gamma, tau=cfg.tau, max_iter=cfg.max_iter
        )
    if "mfbs" in cfg.solvers:
        mfbs = default_mfbs_params(inst, prob)
        if cfg.mfbs_sigma is not None:
            mfbs["sigma"] = cfg.mfbs_sigma
        if cfg.L_M is not None:
            mfbs["L_M"] = cfg.L_M
        params["mfbs"] = mfbs
    if "condat" in cfg.solvers:
        condat = default_condat_params(inst, prob)
        for name in ("beta", "tau", "gamma"):
            override = getattr(cfg, f"condat_{name}")
            if override is not None:
                condat[name] = override
        check_condat_parameters(prob.L, prob.gram_bound, **condat)
        params["condat"] = condat
    return params


def _prepare(cfg: ExperimentConfig, seed: int):
    inst = generate_instance(cfg, seed)
    prob = build_composite(inst)
    return seed, inst, prob, _solver_params(cfg, inst, prob)


def _solve(cfg: ExperimentConfig, solver: str, seed: int, inst: Instance, prob: CompositeProblem, params) -> Dict[str, Any]:
    term = make_termination(inst, cfg.tol)
    if solver == "ppg":
        trace = ppg_solve(prob, params, term)
    elif solver == "mfbs":
        trace = mfbs_solve(
            prob, params["sigma"], params["L_M"], cfg.max_iter, term, check_every=term.check_every
        )
    else:
        trace = condat_solve(prob, max_iter=cfg.max_iter, term=term, check_every=term.check_every, **params)
    param1, param2 = cfg.params
    status = "converged" if trace.converged else "not converged"
    logger.info(
        f"{solver} seed={seed}: {status} in {trace.iterations} iterations, "
        f"pobj={trace.pobj:.4e} dobj={trace.dobj:.4e} dfeas={trace.dfeas:.2e}"
    )
    return {
        "problem": cfg.problem, "solver": solver, "param1": param1, "param2": param2,
        "seed": seed, "iter": trace.iterations, "cpu_s": trace.wall_time,
        "pobj": trace.pobj, "dobj": trace.dobj, "dfeas": trace.dfeas,
        "converged": bool(trace.converged),
    }


def _default_workers() -> int:
    return max(1, int(os.getenv("PPG_WORKERS", "1")))


def run_records(cfg: ExperimentConfig, workers: Optional[int] = None) -> pd.DataFrame:
    """One row per (instance, solver) run, before aggregation."""
    workers = workers or _default_workers()
    seeds = [cfg.base_seed + i for i in range(cfg.instances)]
    parallel = joblib.Parallel(n_jobs=workers, prefer="threads")

    # every instance is generated and every parameter set validated before any solve
    prepared = parallel(joblib.delayed(_prepare)(cfg, seed) for seed in seeds)
    records = parallel(
        joblib.delayed(_solve)(cfg, solver, seed, inst, prob, params[solver])
        for seed, inst, prob, params in prepared
        for solver in cfg.solvers
    )
    return pd.DataFrame.from_records(records)


def run_suite(cfg: ExperimentConfig, workers: Optional[int] = None) -> List[ResultRow]:
    df = run_records(cfg, workers)
    grouped = (
        df.groupby(["problem", "param1", "param2", "solver"], sort=True)
        .agg(
            iter=("iter", "mean"),
            cpu_s=("cpu_s", "mean"),
            pobj=("pobj", "mean"),
            dobj=("dobj", "mean"),
            dfeas=("dfeas", "mean"),
            converged=("converged", "sum"),
            instances=("seed", "size"),
        )
        .reset_index()
    )
    return [
        ResultRow(**{key: value.item() if isinstance(value, np.generic) else value for key, value in rec.items()})
        for rec in grouped.to_dict("records")
    ]


# ------------------------------------------------------------------------------
# reporting
# ------------------------------------------------------------------------------

def _scientific(x: Optional[float], decimals: int) -> str:
    if x is None or not np.isfinite(x):
        return "nan"
    mant, exp = f"{x:.{decimals}e}".split("e")
    return f"{mant}e{int(exp):+d}"


def format_objective(x: Optional[float]) -> str:
    """4 significant digits with an unpadded exponent: 6.0731 -> '6.073e+0'."""
    return _scientific(x, 3)


def format_dfeas(x: Optional[float]) -> str:
    """2 significant digits: 1.12e-5 -> '1.1e-5'."""
    return _scientific(x, 1)


def _format_param(x: float) -> str:
    return f"{x:g}"


def report_frame(rows: List[ResultRow]) -> pd.DataFrame:
    rows = sorted(rows, key=lambda r: (r.problem, r.param1, r.param2, r.solver))
    return pd.DataFrame(
        {
            "problem": [r.problem for r in rows],
            "solver": [r.solver for r in rows],
            "param1": [_format_param(r.param1) for r in rows],
            "param2": [_format_param(r.param2) for r in rows],
            "iter": [str(int(round(r.iter))) for r in rows],
            "cpu_s": [f"{r.cpu_s:.2f}" for r in rows],
            "pobj": [format_objective(r.pobj) for r in rows],
            "dobj": [format_objective(r.dobj) for r in rows],
            "dfeas": [format_dfeas(r.dfeas) for r in rows],
            "converged": [str(r.converged) for r in rows],
        },
        columns=CSV_COLUMNS,
    )


def emit_report(rows: List[ResultRow], format: Literal["csv", "pretty"] = "csv", path=None) -> str:
    """Render rows as CSV or an aligned table; also write to ``path`` when given."""
    if not rows:
        raise PreconditionError("no result rows to report")
    frame = report_frame(rows)
    if format == "csv":
        buf = io.StringIO()
        frame.to_csv(buf, index=False, lineterminator="\n")
        text = buf.getvalue()
    elif format == "pretty":
        text = frame.to_string(index=False) + "\n"
    else:
        raise ConfigurationError(f"unknown report format {format!r}", violated="format")
    if path is not None:
        try:
            Path(path).parent.mkdir(parents=True, exist_ok=True)
            Path(path).write_text(text)
        except OSError:
            logger.error(f"could not write report to {path}", exc_info=True)
            raise
        logger.info(f"wrote {len(rows)} rows to {path}")
    return text


# ------------------------------------------------------------------------------
# command line
# ------------------------------------------------------------------------------

def configure_logging() -> None:
    logging.basicConfig(
        level=os.getenv("PPG_LOG_LEVEL", "INFO").upper(),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    )


def _cmd_run(args) -> int:
    cfg = parse_config(args.config)
    rows = run_suite(cfg, workers=args.workers)
    output = args.output or cfg.output_path
    csv_text = emit_report(rows, "csv", output)
    if output is None:
        sys.stdout.write(csv_text)
    sys.stdout.write(emit_report(rows, "pretty"))
    return 0


def _cmd_gen(args) -> int:
    cfg = parse_config(args.config)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for i in range(cfg.instances):
        seed = cfg.base_seed + i
        save_instance(generate_instance(cfg, seed), out_dir / f"{cfg.problem}_{seed}.joblib")
    return 0


def _cmd_check(args) -> int:
    from ppg.checks import run_checks

    outcomes = run_checks(seed=args.seed)
    for outcome in outcomes:
        sys.stdout.write(f"{'PASS' if outcome.passed else 'FAIL'}  {outcome.name}: {outcome.detail}\n")
    return 0 if all(o.passed for o in outcomes) else 1


def _cmd_serve(args) -> int:
    import uvicorn

    uvicorn.run("ppg.api:app", host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bench", description="PPG benchmark runner")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run every configured solver and report the averages")
    run.add_argument("config")
    run.add_argument("--output", help="CSV path (overrides output_path in the config)")
    run.add_argument("--workers", type=int, default=None, help="worker threads (default: $PPG_WORKERS or 1)")
    run.set_defaults(func=_cmd_run)

    gen = sub.add_parser("gen", help="generate and serialize the configured instances")
    gen.add_argument("config")
    gen.add_argument("--out-dir", default="instances")
    gen.set_defaults(func=_cmd_gen)

    check = sub.add_parser("check", help="run the operator/prox/gradient invariant suite")
    check.add_argument("--seed", type=int, default=0)
    check.set_defaults(func=_cmd_check)

    serve = sub.add_parser("serve", help="serve the HTTP API")
    serve.add_argument("--host", default=os.getenv("PPG_HOST", "127.0.0.1"))
    serve.add_argument("--port", type=int, default=int(os.getenv("PPG_PORT", "8000")))
    serve.set_defaults(func=_cmd_serve)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    configure_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except PPGError as e:
        logger.error(f"{args.command} failed: {e}", exc_info=True)
        return 2
    except Exception as e:
        logger.error(f"{args.command} failed unexpectedly: {e}", exc_info=True)
        return 1


if __name__ == "__main__":
    sys.exit(main())
