"""Pipeline configuration: one pydantic model, loadable from TOML or JSON.

The CLI and service construct this from a config file plus flag overrides
(flags win).  The full config is snapshotted into every run manifest, and
its canonical-JSON hash identifies the configuration a run was produced
with.  Validation that depends on runtime intent (mock vs real backends)
lives in validate_runtime() and reports every problem at once.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Literal

from pydantic import BaseModel, Field, ValidationError

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import ConfigError
from .generation import ConformPolicy, GenerationSettings
from .segmentation import SegmentationConfig

ANALYSIS_RATE_DEFAULT = 22050


class SegmentationSettings(BaseModel):
    min_random_s: float = Field(default=4.0, gt=0)
    max_random_s: float = Field(default=8.0, gt=0)
    max_rule_s: float = Field(default=7.0, gt=0)
    beats_per_cut: int = Field(default=8, ge=1)
    min_segment_s: float = Field(default=2.0, ge=0)
    novelty_threshold_k: float = Field(default=3.0, ge=0)
    stft_window: int = Field(default=2048, ge=16)
    stft_hop: int = Field(default=512, ge=1)
    novelty_window_s: float = Field(default=5.0, gt=0)
    novelty_floor: float = Field(default=0.1, ge=0)
    novelty_exclusion_s: float = Field(default=0.2, ge=0)
    tempo_min_bpm: float = Field(default=60.0, gt=0)
    tempo_max_bpm: float = Field(default=180.0, gt=0)

    def to_config(self, seed: int) -> SegmentationConfig:
        return SegmentationConfig(seed=seed, **self.model_dump())


class VideoSettings(BaseModel):
    width: int = Field(default=512, gt=0)
    height: int = Field(default=512, gt=0)
    fps: int = Field(default=12, gt=0)
    conform_policy: Literal["TrimEnd", "HoldLastFrame"] = "TrimEnd"

    def to_settings(self, max_workers: int) -> GenerationSettings:
        return GenerationSettings(
            width=self.width,
            height=self.height,
            fps=self.fps,
            policy=ConformPolicy(self.conform_policy),
            max_workers=max_workers,
        )


class BackendSettings(BaseModel):
    embed_url: str | None = None
    chat_url: str | None = None
    chat_audio_url: str | None = None
    video_url: str | None = None
    timeout_s: float = Field(default=60.0, gt=0)
    max_retries: int = Field(default=2, ge=0)


class PromptSettings(BaseModel):
    additional_prompt: str | None = None
    character_directive: str = "at least four people"
    character_consistency: str = "For consistency, repeat their descriptions in every scene."


class PipelineConfig(BaseModel):
    pipeline: Literal["clap", "lalm"] = "clap"
    segmenter: Literal["random", "rules"] = "random"
    seed: int = 0
    mock: bool = False
    analysis_rate: int = Field(default=ANALYSIS_RATE_DEFAULT, gt=0)
    # Script re-request attempts when a response fails to parse/validate.
    retries: int = Field(default=2, ge=0)
    taxonomy_path: str | None = None
    muxer: str | None = None
    container: Literal["auto", "Mp4ViaMuxer", "ManifestOnly"] = "auto"
    max_workers: int = Field(default=1, ge=1)
    segmentation: SegmentationSettings = Field(default_factory=SegmentationSettings)
    video: VideoSettings = Field(default_factory=VideoSettings)
    backends: BackendSettings = Field(default_factory=BackendSettings)
    prompt: PromptSettings = Field(default_factory=PromptSettings)


# Backend kinds each pipeline needs when running against real services.
REQUIRED_URLS = {
    "clap": ("embed_url", "chat_url", "video_url"),
    # The audio-chat pipeline still runs track-level visual analysis, so it
    # needs the embedder too.
    "lalm": ("embed_url", "chat_url", "chat_audio_url", "video_url"),
}


def validate_runtime(config: PipelineConfig) -> list[str]:
    """Mock/URL consistency problems, all of them at once."""
    problems: list[str] = []
    urls = {
        name: getattr(config.backends, name)
        for name in ("embed_url", "chat_url", "chat_audio_url", "video_url")
    }
    if config.mock:
        set_urls = sorted(name for name, value in urls.items() if value)
        if set_urls:
            problems.append(
                f"mock=true forbids backend URLs, but these are set: {', '.join(set_urls)}"
            )
    else:
        for name in REQUIRED_URLS[config.pipeline]:
            if not urls[name]:
                problems.append(
                    f"pipeline={config.pipeline} without mock requires backends.{name}"
                )
    if config.segmentation.min_random_s > config.segmentation.max_random_s:
        problems.append("segmentation.min_random_s must be <= max_random_s")
    if config.segmentation.min_segment_s >= config.segmentation.max_rule_s:
        problems.append("segmentation.min_segment_s must be < max_rule_s")
    if config.segmentation.stft_hop > config.segmentation.stft_window:
        problems.append("segmentation.stft_hop must be <= stft_window")
    if config.segmentation.tempo_min_bpm >= config.segmentation.tempo_max_bpm:
        problems.append("segmentation.tempo_min_bpm must be < tempo_max_bpm")
    if config.container == "Mp4ViaMuxer" and not config.muxer:
        problems.append("container=Mp4ViaMuxer requires a muxer command template")
    return problems


def require_valid_runtime(config: PipelineConfig) -> None:
    problems = validate_runtime(config)
    if problems:
        raise ConfigError(problems)


def _validation_problems(exc: ValidationError) -> list[str]:
    problems = []
    for err in exc.errors():
        location = ".".join(str(p) for p in err["loc"]) or "<root>"
        problems.append(f"{location}: {err['msg']}")
    return problems


def config_from_dict(data: dict) -> PipelineConfig:
    try:
        return PipelineConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_validation_problems(exc)) from exc


def _deep_merge(base: dict, override: dict) -> dict:
    merged = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def load_config(path: str | Path | None = None, overrides: dict | None = None) -> PipelineConfig:
    """Read a TOML/JSON config file and apply flag overrides on top."""
    data: dict = {}
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigError([f"config file not found: {path}"])
        text = path.read_text()
        if path.suffix.lower() == ".json":
            try:
                data = json.loads(text)
            except json.JSONDecodeError as exc:
                raise ConfigError([f"invalid JSON config {path}: {exc}"]) from exc
        else:
            try:
                data = tomllib.loads(text)
            except tomllib.TOMLDecodeError as exc:
                raise ConfigError([f"invalid TOML config {path}: {exc}"]) from exc
        if not isinstance(data, dict):
            raise ConfigError([f"config root must be a table/object: {path}"])
    if overrides:
        data = _deep_merge(data, overrides)
    return config_from_dict(data)


def config_hash(config: PipelineConfig) -> str:
    canonical = json.dumps(config.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()
