"""FastAPI app serving the wire protocol over the deterministic mocks.

Used by contract tests (HTTP clients against a known-good server) and as a
reference implementation of the protocol: an external adapter that passes
the same schema suite is interchangeable with this server.
"""

from __future__ import annotations

import base64
import binascii

from fastapi import FastAPI
from fastapi.responses import JSONResponse

from ..audio import load_audio_bytes
from ..errors import MusevidError
from ..generation import ClipRequest
from .base import ChatMessage
from .mock import MockEmbeddingBackend, PatternVideoBackend, TemplateChatBackend
from . import schemas

MAX_AUDIO_BYTES = 64 * 1024 * 1024


def _error(status: int, message: str, detail: str | None = None) -> JSONResponse:
    body = schemas.ErrorBody(error=message, detail=detail)
    return JSONResponse(status_code=status, content=body.model_dump())


def create_mock_backend_app(seed: int = 0, analysis_rate: int = 22050) -> FastAPI:
    app = FastAPI(title="musevid mock backends", version="1")
    embedder = MockEmbeddingBackend(seed=seed)
    chat = TemplateChatBackend(seed=seed)
    video = PatternVideoBackend()

    @app.post(schemas.ROUTE_EMBED_AUDIO)
    def embed_audio(request: schemas.AudioEmbedRequest):
        try:
            raw = base64.b64decode(request.audio_b64, validate=True)
        except (ValueError, binascii.Error):
            return _error(400, "audio_b64 is not valid base64")
        if len(raw) > MAX_AUDIO_BYTES:
            return _error(413, f"audio exceeds {MAX_AUDIO_BYTES} bytes")
        try:
            buffer = load_audio_bytes(raw, analysis_rate=analysis_rate)
        except MusevidError as exc:
            return _error(400, "audio payload is not decodable WAV", str(exc))
        vec = embedder.embed_audio(buffer)
        return schemas.EmbedResponse(
            embedding=[float(x) for x in vec], dim=vec.size, model=embedder.identity
        )

    @app.post(schemas.ROUTE_EMBED_TEXT)
    def embed_text(request: schemas.TextEmbedRequest):
        vecs = embedder.embed_texts(request.texts)
        return schemas.TextEmbedResponse(
            embeddings=[[float(x) for x in row] for row in vecs],
            dim=vecs.shape[1],
            model=embedder.identity,
        )

    @app.post(schemas.ROUTE_CHAT)
    def chat_route(request: schemas.ChatRequest):
        messages = []
        for m in request.messages:
            # The template mock only needs to know whether audio is present.
            messages.append(
                ChatMessage(
                    role=m.role,
                    text=m.text,
                    audio_ref="<inline>" if m.audio_b64 else None,
                )
            )
        try:
            text = chat.chat(messages)
        except MusevidError as exc:
            return _error(500, "chat backend failed", str(exc))
        return schemas.ChatResponse(text=text, model=f"mock-chat:{seed}")

    @app.post(schemas.ROUTE_VIDEO)
    def video_route(request: schemas.VideoRequest):
        try:
            clip = ClipRequest(
                scene_number=1,
                prompt_text=request.prompt,
                duration_s=request.duration_s,
                width=request.width,
                height=request.height,
                fps=request.fps,
                seed=request.seed,
            )
            frames = video.generate(clip)
        except MusevidError as exc:
            return _error(500, "video backend failed", str(exc))
        return schemas.VideoResponse(
            frames_b64=[base64.b64encode(f).decode("ascii") for f in frames],
            fps=request.fps,
            model="mock-video",
        )

    return app
