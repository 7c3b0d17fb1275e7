"""FastAPI app exposing run orchestration over HTTP.

The service operates on local filesystem paths: clients name an input file
and a run directory, the service executes pipeline stages synchronously and
returns the updated manifest.  It is meant to run next to the data it
manages (localhost or a trusted host), not as a public endpoint.

Every package error maps to one HTTP status family:
    configuration / unreadable input  -> 422
    run-state conflicts (locked, not a run, integrity)  -> 409
    model backend failures  -> 502
    anything else pipeline-fatal  -> 500
with a body of {"error": {"code", "message", "problems"}}.
"""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..errors import AudioDecodeError, BackendError, ConfigError, MusevidError, RunStateError
from ..run_manager import init_run, load_manifest, precompute_story, resume_run, run_pipeline
from . import schemas


def _status_for(exc: MusevidError) -> int:
    if isinstance(exc, (ConfigError, AudioDecodeError)):
        return 422
    if isinstance(exc, RunStateError):
        return 409
    if isinstance(exc, BackendError):
        return 502
    return 500


def _problems_for(exc: MusevidError) -> list[str] | None:
    problems = getattr(exc, "problems", None)
    if problems:
        return [str(p) for p in problems]
    failures = getattr(exc, "failures", None)
    if isinstance(failures, dict):
        return [f"scene {n}: {msg}" for n, msg in sorted(failures.items())]
    if isinstance(failures, list):
        return [str(f) for f in failures]
    return None


def create_app() -> FastAPI:
    app = FastAPI(title="musevid orchestration service", version=__version__)

    @app.exception_handler(MusevidError)
    def _musevid_error(request: Request, exc: MusevidError) -> JSONResponse:
        body = schemas.ErrorResponse(
            error=schemas.ErrorDetail(
                code=exc.code, message=str(exc), problems=_problems_for(exc)
            )
        )
        return JSONResponse(status_code=_status_for(exc), content=body.model_dump())

    @app.get("/health", response_model=schemas.HealthResponse)
    def health() -> schemas.HealthResponse:
        return schemas.HealthResponse(version=__version__)

    @app.post("/v1/runs/init", response_model=schemas.RunStateResponse)
    def runs_init(body: schemas.InitRunRequest) -> schemas.RunStateResponse:
        manifest = init_run(body.config, body.audio_path, body.run_dir)
        return schemas.RunStateResponse(manifest=manifest)

    @app.post("/v1/runs/execute", response_model=schemas.RunStateResponse)
    def runs_execute(body: schemas.ExecuteRequest) -> schemas.RunStateResponse:
        manifest = run_pipeline(body.run_dir, through_stage=body.through_stage)
        return schemas.RunStateResponse(manifest=manifest)

    @app.post("/v1/runs/resume", response_model=schemas.RunStateResponse)
    def runs_resume(body: schemas.ResumeRequest) -> schemas.RunStateResponse:
        manifest = resume_run(body.run_dir)
        return schemas.RunStateResponse(manifest=manifest)

    @app.post("/v1/runs/story", response_model=schemas.StoryResponse)
    def runs_story(body: schemas.StoryRequest) -> schemas.StoryResponse:
        story = precompute_story(body.run_dir)
        return schemas.StoryResponse(story=story)

    @app.get("/v1/runs/manifest", response_model=schemas.RunStateResponse)
    def runs_manifest(run_dir: str) -> schemas.RunStateResponse:
        return schemas.RunStateResponse(manifest=load_manifest(run_dir))

    return app
