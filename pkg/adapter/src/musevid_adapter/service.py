"""FastAPI service mapping the wire protocol onto configured engines.

Per-route execution model: all work for one engine runs on that route's
single worker thread, so requests against the same model are serialized
(GPU/memory safety) while different routes proceed concurrently.  Engines
load lazily on first use; a process serving three routes only pays for the
models that actually receive traffic.

Status mapping: 422 request shape, 400 unusable payload, 401 bad token,
413 oversize input, 504 generation timeout, 500 engine failure.
"""

from __future__ import annotations

import base64
import binascii
from concurrent.futures import ThreadPoolExecutor
from concurrent.futures import TimeoutError as FutureTimeout
from contextlib import asynccontextmanager
from typing import Callable

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from . import __version__, wire
from .audio_codec import decode_wav, duration_s
from .config import AdapterConfig
from .engines import (
    ChatTurn,
    build_chat_engine,
    build_embed_engine,
    build_video_engine,
)
from .errors import AdapterError


class RouteRunner:
    """One engine, one worker thread, optional wall-clock timeout.

    A timed-out call keeps its thread; later requests queue behind it, which
    is the safe behavior when the engine owns scarce accelerator memory.
    """

    def __init__(self, name: str, factory: Callable[[], object], timeout_s: float | None):
        self.name = name
        self._executor = ThreadPoolExecutor(max_workers=1, thread_name_prefix=f"route-{name}")
        self._factory = factory
        self._engine: object | None = None
        self.timeout_s = timeout_s

    def _call(self, fn):
        if self._engine is None:
            engine = self._factory()
            engine.load()
            self._engine = engine
        return fn(self._engine)

    def run(self, fn):
        future = self._executor.submit(self._call, fn)
        try:
            return future.result(timeout=self.timeout_s)
        except FutureTimeout:
            future.cancel()
            raise AdapterError(
                504, f"{self.name} generation timed out after {self.timeout_s}s"
            ) from None

    def shutdown(self) -> None:
        self._executor.shutdown(wait=False, cancel_futures=True)


def _b64_payload(field: str, value: str, max_bytes: int) -> bytes:
    try:
        raw = base64.b64decode(value, validate=True)
    except (ValueError, binascii.Error) as exc:
        raise AdapterError(400, f"{field} is not valid base64", str(exc)) from exc
    if len(raw) > max_bytes:
        raise AdapterError(413, f"{field} exceeds {max_bytes} bytes")
    return raw


def _decode_audio_field(
    field: str, value: str, config: AdapterConfig
) -> tuple[np.ndarray, int]:
    raw = _b64_payload(field, value, config.max_body_bytes)
    samples, rate = decode_wav(raw)
    if duration_s(samples, rate) > config.max_audio_s:
        raise AdapterError(
            413, f"audio is longer than the configured limit of {config.max_audio_s}s"
        )
    return samples, rate


def create_app(
    config: AdapterConfig | None = None,
    *,
    embed_engine=None,
    chat_engine=None,
    video_engine=None,
    chat_recorder: Callable[[list[str | None]], None] | None = None,
) -> FastAPI:
    """Build the service.

    Keyword engines override the configured ones (tests inject fakes this
    way); chat_recorder receives the exact text fields handed to the chat
    engine, for transparency checks.
    """
    config = (config or AdapterConfig()).require_valid()

    runners: dict[str, RouteRunner] = {}
    if embed_engine is not None:
        runners["embed"] = RouteRunner("embed", lambda: embed_engine, timeout_s=None)
    elif config.embed is not None:
        runners["embed"] = RouteRunner(
            "embed", lambda: build_embed_engine(config.embed, config), timeout_s=None
        )
    if chat_engine is not None:
        runners["chat"] = RouteRunner("chat", lambda: chat_engine, config.chat_timeout_s)
    elif config.chat is not None:
        runners["chat"] = RouteRunner(
            "chat", lambda: build_chat_engine(config.chat, config), config.chat_timeout_s
        )
    if video_engine is not None:
        runners["video"] = RouteRunner("video", lambda: video_engine, config.video_timeout_s)
    elif config.video is not None:
        runners["video"] = RouteRunner(
            "video", lambda: build_video_engine(config.video, config), config.video_timeout_s
        )

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        yield
        for runner in runners.values():
            runner.shutdown()

    app = FastAPI(title="musevid model adapter", version=__version__, lifespan=lifespan)

    @app.exception_handler(AdapterError)
    def _adapter_error(request: Request, exc: AdapterError) -> JSONResponse:
        body = wire.ErrorBody(error=exc.message, detail=exc.detail)
        return JSONResponse(status_code=exc.status, content=body.model_dump())

    def _require_token(request: Request) -> None:
        if config.token is None:
            return
        header = request.headers.get("authorization", "")
        if header != f"Bearer {config.token}":
            raise AdapterError(401, "missing or invalid bearer token")

    def _run(route: str, fn, failure: str):
        try:
            return runners[route].run(fn)
        except AdapterError:
            raise
        except Exception as exc:
            raise AdapterError(500, failure, f"{type(exc).__name__}: {exc}") from exc

    if "embed" in runners:

        @app.post(wire.ROUTE_EMBED_AUDIO, response_model=wire.EmbedResponse)
        def embed_audio(body: wire.AudioEmbedRequest, request: Request):
            _require_token(request)
            samples, rate = _decode_audio_field("audio_b64", body.audio_b64, config)
            vec = _run(
                "embed",
                lambda engine: (engine.embed_audio(samples, rate), engine.identity),
                "audio embedding failed",
            )
            values, identity = vec
            return wire.EmbedResponse(
                embedding=[float(x) for x in values], dim=len(values), model=identity
            )

        @app.post(wire.ROUTE_EMBED_TEXT, response_model=wire.TextEmbedResponse)
        def embed_text(body: wire.TextEmbedRequest, request: Request):
            _require_token(request)
            result = _run(
                "embed",
                lambda engine: (engine.embed_texts(body.texts), engine.identity),
                "text embedding failed",
            )
            vecs, identity = result
            return wire.TextEmbedResponse(
                embeddings=[[float(x) for x in row] for row in vecs],
                dim=int(vecs.shape[1]),
                model=identity,
            )

    if "chat" in runners:

        @app.post(wire.ROUTE_CHAT, response_model=wire.ChatResponse)
        def chat(body: wire.ChatRequest, request: Request):
            _require_token(request)
            turns: list[ChatTurn] = []
            for message in body.messages:
                if message.role not in wire.CHAT_ROLES:
                    raise AdapterError(
                        400,
                        f"unknown chat role {message.role!r}",
                        f"expected one of {', '.join(wire.CHAT_ROLES)}",
                    )
                audio = None
                if message.audio_b64 is not None:
                    audio = _decode_audio_field("audio_b64", message.audio_b64, config)
                turns.append(ChatTurn(role=message.role, text=message.text, audio=audio))
            if chat_recorder is not None:
                chat_recorder([t.text for t in turns])
            result = _run(
                "chat",
                lambda engine: (engine.complete(turns), engine.identity),
                "chat generation failed",
            )
            text, identity = result
            return wire.ChatResponse(text=text, model=identity)

    if "video" in runners:

        @app.post(wire.ROUTE_VIDEO, response_model=wire.VideoResponse)
        def video(body: wire.VideoRequest, request: Request):
            _require_token(request)
            if body.duration_s > config.max_video_s:
                raise AdapterError(
                    413,
                    f"requested clip is longer than the configured limit of {config.max_video_s}s",
                )
            result = _run(
                "video",
                lambda engine: (
                    engine.render(
                        body.prompt, body.duration_s, body.width, body.height, body.fps, body.seed
                    ),
                    engine.identity,
                ),
                "video generation failed",
            )
            frames, identity = result
            return wire.VideoResponse(
                frames_b64=[base64.b64encode(f).decode("ascii") for f in frames],
                fps=body.fps,
                model=identity,
            )

    @app.get("/health")
    def health():
        return {
            "status": "ok",
            "version": __version__,
            "routes": sorted(runners),
        }

    return app
