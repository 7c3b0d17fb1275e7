"""Engine protocols: what a route needs from its model, nothing more.

Engines are plain objects; loading heavy weights belongs in load(), which
the service calls lazily on first use of the route.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, runtime_checkable

import numpy as np


@dataclass(frozen=True)
class ChatTurn:
    role: str
    text: str | None
    # decoded audio attachment, when the client sent one
    audio: tuple[np.ndarray, int] | None = None


@runtime_checkable
class EmbedEngine(Protocol):
    identity: str

    def load(self) -> None: ...

    def embed_audio(self, samples: np.ndarray, rate: int) -> np.ndarray: ...

    def embed_texts(self, texts: list[str]) -> np.ndarray: ...


@runtime_checkable
class ChatEngine(Protocol):
    identity: str

    def load(self) -> None: ...

    def complete(self, turns: list[ChatTurn]) -> str: ...


@runtime_checkable
class VideoEngine(Protocol):
    identity: str

    def load(self) -> None: ...

    def render(
        self, prompt: str, duration_s: float, width: int, height: int, fps: int, seed: int
    ) -> list[bytes]: ...
