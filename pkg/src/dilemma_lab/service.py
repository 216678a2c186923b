"""FastAPI service wrapping the experiment harness.

The CLI talks to these endpoints (in-process by default); a long-running
deployment serves the same API to remote operators. Error responses carry
a machine-readable ``kind`` so clients can map them to exit codes.
"""

from __future__ import annotations

import random as _random
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from . import __version__
from .batch import BatchError, analyze_batch, export_from_analysis
from .config import (
    ConfigError,
    HarnessConfig,
    harness_config_from_json,
)
from .curriculum import CurriculumError
from .events import trial_files, validate_batch
from .gateway import AuthError
from .runner import (
    ExperimentConfig,
    PoolError,
    curriculum_plan,
    ensure_can_seat,
    pilot_plan,
    run_experiment,
)
from .schemas import (
    ALL_CONDITIONS,
    AnalyzeRequest,
    AnalyzeResponse,
    ExportRequest,
    ExportResponse,
    PilotRequest,
    RunRequest,
    RunResponse,
    ValidateRequest,
    ValidateResponse,
)

app = FastAPI(title="dilemma-lab", version=__version__)


def _error(status: int, kind: str, message: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"detail": {"kind": kind, "message": message}})


@app.exception_handler(ConfigError)
@app.exception_handler(CurriculumError)
@app.exception_handler(PoolError)
@app.exception_handler(BatchError)
async def _config_error(request: Request, exc: Exception) -> JSONResponse:
    return _error(400, "config", str(exc))


@app.exception_handler(AuthError)
async def _auth_error(request: Request, exc: AuthError) -> JSONResponse:
    return _error(401, "auth", str(exc))


@app.exception_handler(OSError)
async def _io_error(request: Request, exc: OSError) -> JSONResponse:
    return _error(500, "io", str(exc))


@app.get("/healthz")
def healthz() -> dict:
    return {"status": "ok", "version": __version__}


@app.get("/conditions")
def conditions() -> dict:
    return {"conditions": ALL_CONDITIONS}


def _resolve_harness(config: dict | None, mode: str) -> HarnessConfig:
    harness = harness_config_from_json(config, mode)
    if mode == "live":
        for agent in harness.pool.agents:
            if agent.endpoint is not None:
                agent.endpoint.api_key()  # raises AuthError before any game starts
        if harness.lesson_endpoint is not None:
            harness.lesson_endpoint.api_key()
    else:
        live_agents = [a.agent_id for a in harness.pool.agents if a.kind == "llm"]
        if live_agents:
            raise ConfigError(
                f"mock mode cannot seat live agents: {', '.join(live_agents)}"
            )
    return harness


def _pick_seed(seed: int | None) -> int:
    return seed if seed is not None else _random.SystemRandom().randrange(2**32)


@app.post("/run")
def run(req: RunRequest) -> RunResponse:
    unknown = [c for c in req.conditions if c not in ALL_CONDITIONS]
    if unknown:
        raise ConfigError(f"unknown conditions: {', '.join(unknown)}")
    if "scrambled" in req.conditions and req.seed is None:
        raise ConfigError("the scrambled condition requires an explicit seed (--seed)")
    harness = _resolve_harness(req.config, req.mode)
    ensure_can_seat(harness.pool, 4)
    plans = [curriculum_plan(c, req.precursor_rounds) for c in req.conditions]
    out_dir = Path(req.out_dir)
    summary = run_experiment(
        ExperimentConfig(
            plans=plans,
            pool=harness.pool,
            out_dir=out_dir,
            trials=req.trials,
            master_seed=_pick_seed(req.seed),
            lesson_generator=harness.lesson_endpoint,
            retry_limit=harness.retry_limit,
            max_workers=req.max_workers or harness.max_workers,
            mode=req.mode,
        )
    )
    return RunResponse(
        out_dir=str(out_dir),
        summary_path=str(out_dir / "summary.json"),
        summary=summary,
    )


@app.post("/pilot")
def pilot(req: PilotRequest) -> RunResponse:
    harness = _resolve_harness(req.config, req.mode)
    ensure_can_seat(harness.pool, 4, req.grouping)
    plan = pilot_plan(comm=req.comm, grouping=req.grouping, rounds=req.rounds)
    out_dir = Path(req.out_dir)
    summary = run_experiment(
        ExperimentConfig(
            plans=[plan],
            pool=harness.pool,
            out_dir=out_dir,
            trials=req.trials,
            master_seed=_pick_seed(req.seed),
            lesson_generator=None,  # single stage, no lessons
            retry_limit=harness.retry_limit,
            max_workers=req.max_workers or harness.max_workers,
            mode=req.mode,
        )
    )
    return RunResponse(
        out_dir=str(out_dir),
        summary_path=str(out_dir / "summary.json"),
        summary=summary,
    )


@app.post("/analyze")
def analyze(req: AnalyzeRequest) -> AnalyzeResponse:
    summary = analyze_batch(req.in_dir, req.out_dir)
    return AnalyzeResponse(
        out_dir=req.out_dir,
        csv_files=summary["csv_files"],
        conditions=summary["conditions"],
    )


@app.post("/validate")
def validate(req: ValidateRequest) -> ValidateResponse:
    batch_dir = Path(req.in_dir)
    violations = validate_batch(batch_dir)
    return ValidateResponse(
        ok=not violations,
        checked_files=len(trial_files(batch_dir)),
        total_violations=len(violations),
        violations=[str(v) for v in violations[: req.max_violations]],
    )


@app.post("/export")
def export(req: ExportRequest) -> ExportResponse:
    result = export_from_analysis(req.analysis_path, req.out_dir)
    return ExportResponse(out_dir=req.out_dir, csv_files=result["csv_files"])
