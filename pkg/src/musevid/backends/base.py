"""Backend protocols and shared message types.

All model inference (embedding, chat, text-to-video) happens behind these
protocols.  Implementations: deterministic mocks (mock.py) and JSON-over-HTTP
clients (http.py) speaking the four-route wire protocol documented in
schemas.py.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import TYPE_CHECKING, Protocol, Sequence, runtime_checkable

import numpy as np

from ..audio import AudioBuffer
from ..errors import BackendError

if TYPE_CHECKING:
    from ..generation import ClipRequest

CHAT_ROLES = ("system", "user", "assistant")


class BackendKind(str, Enum):
    EMBED = "embed"
    CHAT = "chat"
    CHAT_AUDIO = "chat_audio"
    VIDEO = "video"


@dataclass(frozen=True)
class BackendEndpointConfig:
    base_url: str
    kind: BackendKind
    timeout_s: float = 60.0
    max_retries: int = 2
    auth_token: str | None = None

    def __post_init__(self):
        if not self.base_url:
            raise BackendError("backend base_url must be non-empty")
        if self.timeout_s <= 0:
            raise BackendError("backend timeout_s must be positive")
        if self.max_retries < 0:
            raise BackendError("backend max_retries must be >= 0")


@dataclass(frozen=True)
class ChatMessage:
    """One conversation turn; audio_ref points at a WAV file to attach."""

    role: str
    text: str | None = None
    audio_ref: str | None = None

    def __post_init__(self):
        if self.role not in CHAT_ROLES:
            raise BackendError(f"invalid chat role {self.role!r}; expected one of {CHAT_ROLES}")
        if self.text is None and self.audio_ref is None:
            raise BackendError("chat message needs text or an audio attachment")


@runtime_checkable
class EmbeddingBackend(Protocol):
    @property
    def identity(self) -> str:
        """Stable key for embedding caches; distinct per model/config."""
        ...

    def embed_audio(self, audio: AudioBuffer) -> np.ndarray: ...

    def embed_texts(self, texts: Sequence[str]) -> np.ndarray: ...


@runtime_checkable
class ChatBackend(Protocol):
    def chat(self, messages: Sequence[ChatMessage]) -> str: ...


@runtime_checkable
class VideoBackend(Protocol):
    def generate(self, request: "ClipRequest") -> list[bytes]:
        """Render a clip; returns encoded PNG frames in order."""
        ...
