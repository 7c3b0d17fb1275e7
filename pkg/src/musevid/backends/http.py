"""HTTP clients for the four-route inference protocol.

POSTs are idempotent by protocol design, so transport errors and 5xx
responses are retried with exponential backoff (0.25 s * 2^attempt) up to
max_retries; 4xx responses are not retried.  The sleep function is
injectable so tests cover the retry path without waiting.
"""

from __future__ import annotations

import base64
import time
from pathlib import Path
from typing import Callable, Sequence

import httpx
import numpy as np
from pydantic import BaseModel, ValidationError

from ..audio import AudioBuffer, encode_wav_bytes
from ..errors import BackendError
from ..generation import ClipRequest
from .base import BackendEndpointConfig, ChatMessage
from . import schemas

BACKOFF_BASE_S = 0.25


class HttpCore:
    """Shared POST-with-retries plumbing for all route clients."""

    def __init__(
        self,
        config: BackendEndpointConfig,
        transport: httpx.BaseTransport | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.config = config
        self._sleep = sleep
        headers = {}
        if config.auth_token:
            headers["Authorization"] = f"Bearer {config.auth_token}"
        self._client = httpx.Client(
            base_url=config.base_url,
            timeout=config.timeout_s,
            headers=headers,
            transport=transport,
        )

    def close(self) -> None:
        self._client.close()

    def post(self, path: str, payload: dict, response_model: type[BaseModel]) -> BaseModel:
        attempts = self.config.max_retries + 1
        last_error = ""
        for attempt in range(attempts):
            try:
                response = self._client.post(path, json=payload)
            except httpx.HTTPError as exc:
                last_error = f"transport error: {exc}"
            else:
                if response.status_code < 400:
                    try:
                        return response_model.model_validate(response.json())
                    except (ValueError, ValidationError) as exc:
                        raise BackendError(
                            f"malformed response from {self.config.base_url}{path}: {exc}"
                        ) from exc
                body = response.text[:500]
                if response.status_code < 500:
                    raise BackendError(
                        f"{self.config.base_url}{path} rejected the request "
                        f"({response.status_code}): {body}"
                    )
                last_error = f"server error {response.status_code}: {body}"
            if attempt < attempts - 1:
                self._sleep(BACKOFF_BASE_S * (2 ** attempt))
        raise BackendError(
            f"{self.config.base_url}{path} failed after {attempts} attempts; last: {last_error}"
        )


class HttpEmbeddingBackend:
    def __init__(
        self,
        config: BackendEndpointConfig,
        transport: httpx.BaseTransport | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self._core = HttpCore(config, transport=transport, sleep=sleep)

    @property
    def identity(self) -> str:
        return f"http:{self._core.config.base_url}"

    def embed_audio(self, audio: AudioBuffer) -> np.ndarray:
        payload = schemas.AudioEmbedRequest(
            audio_b64=base64.b64encode(encode_wav_bytes(audio)).decode("ascii")
        )
        result = self._core.post(
            schemas.ROUTE_EMBED_AUDIO, payload.model_dump(), schemas.EmbedResponse
        )
        return np.asarray(result.embedding, dtype=np.float64)

    def embed_texts(self, texts: Sequence[str]) -> np.ndarray:
        if not texts:
            return np.zeros((0, 0))
        payload = schemas.TextEmbedRequest(texts=list(texts))
        result = self._core.post(
            schemas.ROUTE_EMBED_TEXT, payload.model_dump(), schemas.TextEmbedResponse
        )
        return np.asarray(result.embeddings, dtype=np.float64)

    def close(self) -> None:
        self._core.close()


def _encode_message(message: ChatMessage) -> dict:
    audio_b64 = None
    if message.audio_ref is not None:
        path = Path(message.audio_ref)
        try:
            audio_b64 = base64.b64encode(path.read_bytes()).decode("ascii")
        except OSError as exc:
            raise BackendError(f"cannot read chat audio attachment {path}: {exc}") from exc
    return schemas.ChatMessageModel(
        role=message.role, text=message.text, audio_b64=audio_b64
    ).model_dump()


class HttpChatBackend:
    def __init__(
        self,
        config: BackendEndpointConfig,
        transport: httpx.BaseTransport | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self._core = HttpCore(config, transport=transport, sleep=sleep)

    def chat(self, messages: Sequence[ChatMessage]) -> str:
        payload = {"messages": [_encode_message(m) for m in messages]}
        result = self._core.post(schemas.ROUTE_CHAT, payload, schemas.ChatResponse)
        return result.text

    def close(self) -> None:
        self._core.close()


class HttpVideoBackend:
    def __init__(
        self,
        config: BackendEndpointConfig,
        transport: httpx.BaseTransport | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self._core = HttpCore(config, transport=transport, sleep=sleep)

    def generate(self, request: ClipRequest) -> list[bytes]:
        payload = schemas.VideoRequest(
            prompt=request.prompt_text,
            duration_s=request.duration_s,
            width=request.width,
            height=request.height,
            fps=request.fps,
            seed=request.seed,
        )
        result = self._core.post(schemas.ROUTE_VIDEO, payload.model_dump(), schemas.VideoResponse)
        try:
            return [base64.b64decode(f, validate=True) for f in result.frames_b64]
        except ValueError as exc:
            raise BackendError(f"video response contains invalid base64 frames: {exc}") from exc

    def close(self) -> None:
        self._core.close()
