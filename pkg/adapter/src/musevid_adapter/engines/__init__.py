"""Engine registry: map (route, engine name) from config to an instance."""

from __future__ import annotations

from ..config import AdapterConfig, RouteSpec
from .base import ChatEngine, ChatTurn, EmbedEngine, VideoEngine
from .patterns import GradientVideoEngine
from .spectral import SpectralEmbedEngine
from .textgen import OutlineChatEngine

__all__ = [
    "ChatEngine",
    "ChatTurn",
    "EmbedEngine",
    "VideoEngine",
    "build_chat_engine",
    "build_embed_engine",
    "build_video_engine",
]


def build_embed_engine(spec: RouteSpec, config: AdapterConfig) -> EmbedEngine:
    if spec.engine == "spectral":
        return SpectralEmbedEngine(dim=config.embed_dim, seed=config.seed)
    if spec.engine == "clap-hf":
        from .hf import ClapEmbedEngine

        return ClapEmbedEngine(model=spec.model, device=config.device)
    raise ValueError(f"unknown embed engine {spec.engine!r}")


def build_chat_engine(spec: RouteSpec, config: AdapterConfig) -> ChatEngine:
    if spec.engine == "outline":
        return OutlineChatEngine(seed=config.seed)
    if spec.engine == "causal-hf":
        from .hf import CausalChatEngine

        return CausalChatEngine(model=spec.model, device=config.device)
    raise ValueError(f"unknown chat engine {spec.engine!r}")


def build_video_engine(spec: RouteSpec, config: AdapterConfig) -> VideoEngine:
    if spec.engine == "gradient":
        return GradientVideoEngine()
    raise ValueError(f"unknown video engine {spec.engine!r}")
