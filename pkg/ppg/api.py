"""
HTTP front end for the benchmark runner.

Run with ``python -m ppg.bench serve`` or ``uvicorn ppg.api:app``.
"""

import logging
from contextlib import asynccontextmanager
from typing import List

from fastapi import FastAPI, HTTPException

from ppg import __version__
from ppg.bench import PROBLEMS, SOLVERS, ExperimentConfig, ResultRow, configure_logging, run_suite
from ppg.errors import ConfigurationError, PPGError

logger = logging.getLogger(__name__)


@asynccontextmanager
async def lifespan(app: FastAPI):
    configure_logging()
    logger.info(f"ppg {__version__} API starting")
    yield
    logger.info("API shutting down")


app = FastAPI(title="PPG Benchmark API", version=__version__, lifespan=lifespan)


@app.get("/health")
def health_check():
    return {"status": "healthy"}


@app.get("/metadata")
def metadata():
    return {
        "name": "ppg",
        "version": __version__,
        "problems": list(PROBLEMS),
        "solvers": list(SOLVERS),
    }


@app.post("/run", response_model=List[ResultRow])
def run(cfg: ExperimentConfig):
    """Run the experiment synchronously and return one row per solver."""
    try:
        return run_suite(cfg)
    except ConfigurationError as e:
        logger.warning(f"rejected experiment: {e}")
        raise HTTPException(status_code=422, detail=str(e))
    except PPGError as e:
        logger.error(f"experiment failed: {e}", exc_info=True)
        raise HTTPException(status_code=500, detail=str(e))
    except Exception as e:
        logger.error("experiment failed unexpectedly", exc_info=True)
        raise HTTPException(status_code=500, detail=f"Experiment failed: {e}")
