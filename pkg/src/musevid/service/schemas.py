"""Request/response bodies for the orchestration service."""

from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, Field, field_validator

from ..config import PipelineConfig
from ..run_manager import STAGE_ORDER, RunManifest


class InitRunRequest(BaseModel):
    audio_path: str
    run_dir: str
    config: PipelineConfig = Field(default_factory=PipelineConfig)


class ExecuteRequest(BaseModel):
    run_dir: str
    through_stage: str | None = None

    @field_validator("through_stage")
    @classmethod
    def _known_stage(cls, value: str | None) -> str | None:
        if value is not None and value not in STAGE_ORDER:
            raise ValueError(f"unknown stage {value!r}; stages are {', '.join(STAGE_ORDER)}")
        return value


class ResumeRequest(BaseModel):
    run_dir: str


class StoryRequest(BaseModel):
    run_dir: str


class RunStateResponse(BaseModel):
    manifest: RunManifest


class StoryResponse(BaseModel):
    story: str


class HealthResponse(BaseModel):
    status: Literal["ok"] = "ok"
    version: str


class ErrorDetail(BaseModel):
    code: str
    message: str
    problems: list[str] | None = None


class ErrorResponse(BaseModel):
    error: ErrorDetail
