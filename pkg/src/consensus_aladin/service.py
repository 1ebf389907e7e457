"""HTTP service wrapping the experiment harness.

Endpoints
---------
* ``GET  /healthz``     -- liveness probe.
* ``GET  /algorithms``  -- algorithm names accepted by runs.
* ``GET  /problems``    -- problem families accepted by runs.
* ``POST /run``         -- execute one configured run; returns the CSV trace
  and a summary.
* ``POST /compare``     -- run several algorithms on one problem instance;
  returns a wide CSV of residuals plus per-algorithm summaries.

Request validation errors surface as 422 (pydantic) or 400 (domain checks);
subproblem solver failures surface as 500 with the failing agent and round.
The CSV payloads are returned verbatim so clients can persist byte-identical
traces.
"""

from __future__ import annotations

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from . import __version__
from .aladin import SubproblemFailure
from .runner import ALGORITHMS, PROBLEMS, CompareResult, ConfigError, RunConfig, RunResult
from .runner import compare as run_compare
from .runner import run as run_single

__all__ = ["app", "RunRequest", "CompareRequest", "RunResponse", "CompareResponse", "execute_run", "execute_compare"]


class RunRequest(BaseModel):
    """One run's configuration; defaults mirror the benchmark setup."""

    problem: str = "sensor-allocation"
    algo: str = "bfgs-aladin"
    N: int = Field(default=20, ge=1)
    n: int = Field(default=10, ge=1)
    rho: float = Field(default=100.0, gt=0)
    max_iter: int = Field(default=200, ge=1)
    seed: int = 42
    hessian_schedule: int | None = Field(default=None, ge=2)
    tol: float = Field(default=1e-10, gt=0)
    stop_tol: float = Field(default=0.0, ge=0)
    threads: int | None = Field(default=None, ge=1)

    def to_config(self) -> RunConfig:
        return RunConfig(**self.model_dump())


class CompareRequest(BaseModel):
    """Shared problem instance plus the list of algorithms to race on it."""

    problem: str = "sensor-allocation"
    algos: list[str] = Field(default=["bfgs-aladin", "reduced-aladin", "admm-aggregate-first"], min_length=1)
    N: int = Field(default=20, ge=1)
    n: int = Field(default=10, ge=1)
    rho: float = Field(default=100.0, gt=0)
    max_iter: int = Field(default=200, ge=1)
    seed: int = 42
    hessian_schedule: int | None = Field(default=None, ge=2)
    tol: float = Field(default=1e-10, gt=0)
    stop_tol: float = Field(default=0.0, ge=0)
    threads: int | None = Field(default=None, ge=1)

    def to_configs(self) -> list[RunConfig]:
        base = self.model_dump()
        algos = base.pop("algos")
        return [RunConfig(algo=a, **base) for a in algos]


class RunSummaryModel(BaseModel):
    final_residual: float
    rounds: int
    total_floats_up: int
    total_floats_down: int
    stopped_early: bool


class RunResponse(BaseModel):
    csv: str
    summary: RunSummaryModel


class CompareResponse(BaseModel):
    csv: str
    summaries: dict[str, RunSummaryModel]


def _summary_model(result: RunResult) -> RunSummaryModel:
    s = result.summary
    return RunSummaryModel(
        final_residual=s.final_residual,
        rounds=s.rounds,
        total_floats_up=s.total_floats_up,
        total_floats_down=s.total_floats_down,
        stopped_early=s.stopped_early,
    )


def execute_run(request: RunRequest) -> RunResponse:
    """Run one configuration; shared by the endpoint and the in-process CLI."""
    result = run_single(request.to_config())
    return RunResponse(csv=result.to_csv(), summary=_summary_model(result))


def execute_compare(request: CompareRequest) -> CompareResponse:
    result: CompareResult = run_compare(request.to_configs())
    return CompareResponse(
        csv=result.to_csv(),
        summaries={algo: _summary_model(res) for algo, res in result.results.items()},
    )


app = FastAPI(
    title="consensus-aladin",
    version=__version__,
    description="Distributed consensus optimization runs as a service.",
)


@app.get("/healthz")
def healthz() -> dict:
    return {"status": "ok", "version": __version__}


@app.get("/algorithms")
def algorithms() -> list[str]:
    return list(ALGORITHMS)


@app.get("/problems")
def problems() -> list[str]:
    return list(PROBLEMS)


@app.post("/run", response_model=RunResponse)
def run_endpoint(request: RunRequest) -> RunResponse:
    try:
        return execute_run(request)
    except ConfigError as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc
    except SubproblemFailure as exc:
        raise HTTPException(
            status_code=500,
            detail={"error": "subproblem failure", "agent": exc.agent, "round": exc.round_index},
        ) from exc


@app.post("/compare", response_model=CompareResponse)
def compare_endpoint(request: CompareRequest) -> CompareResponse:
    try:
        return execute_compare(request)
    except ConfigError as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc
    except SubproblemFailure as exc:
        raise HTTPException(
            status_code=500,
            detail={"error": "subproblem failure", "agent": exc.agent, "round": exc.round_index},
        ) from exc
