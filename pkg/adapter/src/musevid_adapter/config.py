"""Adapter configuration: which engine serves each route, and service limits."""

from __future__ import annotations

from pydantic import BaseModel, Field, ValidationError

EMBED_ENGINE_NAMES = ("spectral", "clap-hf")
CHAT_ENGINE_NAMES = ("outline", "causal-hf")
VIDEO_ENGINE_NAMES = ("gradient",)


class ConfigProblems(Exception):
    def __init__(self, problems: list[str]):
        super().__init__("; ".join(problems))
        self.problems = problems


class RouteSpec(BaseModel):
    engine: str
    # model identifier or local checkpoint path; required by *-hf engines
    model: str | None = None


class AdapterConfig(BaseModel):
    embed: RouteSpec | None = RouteSpec(engine="spectral")
    chat: RouteSpec | None = RouteSpec(engine="outline")
    video: RouteSpec | None = RouteSpec(engine="gradient")
    device: str = "cpu"
    seed: int = 0
    embed_dim: int = Field(default=512, gt=0)
    max_audio_s: float = Field(default=600.0, gt=0)
    max_video_s: float = Field(default=60.0, gt=0)
    max_body_bytes: int = Field(default=64 * 1024 * 1024, gt=0)
    chat_timeout_s: float | None = 120.0
    video_timeout_s: float | None = 600.0
    # when set, every /v1 route requires "Authorization: Bearer <token>"
    token: str | None = None
    host: str = "127.0.0.1"
    port: int = 8400

    def validate_service(self) -> list[str]:
        problems: list[str] = []
        if self.embed is None and self.chat is None and self.video is None:
            problems.append("at least one route must be enabled")
        if not 0 < self.port <= 65535:
            problems.append(f"port {self.port} is not a valid TCP port")
        for name, spec, known in (
            ("embed", self.embed, EMBED_ENGINE_NAMES),
            ("chat", self.chat, CHAT_ENGINE_NAMES),
            ("video", self.video, VIDEO_ENGINE_NAMES),
        ):
            if spec is None:
                continue
            if spec.engine not in known:
                problems.append(f"{name}: unknown engine {spec.engine!r} (known: {', '.join(known)})")
            elif spec.engine.endswith("-hf") and not spec.model:
                problems.append(f"{name}: engine {spec.engine!r} needs a model identifier")
        for label, value in (("chat_timeout_s", self.chat_timeout_s), ("video_timeout_s", self.video_timeout_s)):
            if value is not None and value <= 0:
                problems.append(f"{label} must be positive when set")
        return problems

    def require_valid(self) -> "AdapterConfig":
        problems = self.validate_service()
        if problems:
            raise ConfigProblems(problems)
        return self


def config_from_dict(data: dict) -> AdapterConfig:
    try:
        config = AdapterConfig.model_validate(data)
    except ValidationError as exc:
        problems = [
            f"{'.'.join(str(x) for x in err['loc'])}: {err['msg']}" for err in exc.errors()
        ]
        raise ConfigProblems(problems) from exc
    return config.require_valid()
