"""Deterministic mock backends.

Every mock is a pure function of (payload, seed), so pipeline stages replay
byte-identically.  Embeddings come from hashing the payload onto the unit
sphere; chat either replays canned fixtures or fills a scene template; video
renders flat-color frames derived from the prompt hash.
"""

from __future__ import annotations

import hashlib
import io
import re
import struct
from typing import Sequence

import numpy as np
from PIL import Image

from ..audio import AudioBuffer
from ..errors import BackendError
from ..generation import ClipRequest
from .base import ChatMessage

MOCK_EMBED_DIM = 512

_SCENE_COUNT_RE = re.compile(r"There are (\d+) scenes in total\.")

_SUBJECTS = (
    "a lone dancer", "two travelers", "a street musician", "a painter",
    "an old sailor", "a young astronomer", "a gardener", "a mapmaker",
)
_PLACES = (
    "on a rain-soaked rooftop", "in a sunlit meadow", "inside a neon arcade",
    "along an empty shoreline", "under a highway overpass", "in a snow-covered plaza",
    "inside a greenhouse", "on a moving train",
)
_ACTIONS = (
    "moves slowly toward the camera", "spins with arms outstretched",
    "watches the horizon", "sketches shapes in the air", "walks against the wind",
    "reaches toward the light", "stands perfectly still", "breaks into a run",
)


def _digest_rng(*parts: bytes) -> np.random.Generator:
    h = hashlib.sha256()
    for p in parts:
        h.update(p)
        h.update(b"\x00")
    return np.random.default_rng(int.from_bytes(h.digest()[:8], "big"))


class MockEmbeddingBackend:
    """Hash payloads to unit vectors; same payload always maps to the same point."""

    def __init__(self, seed: int = 0, dim: int = MOCK_EMBED_DIM):
        if dim < 2:
            raise BackendError("mock embedding dim must be >= 2")
        self.seed = seed
        self.dim = dim

    @property
    def identity(self) -> str:
        return f"mock-embed:{self.seed}:{self.dim}"

    def _vector(self, payload: bytes) -> np.ndarray:
        rng = _digest_rng(str(self.seed).encode(), payload)
        v = rng.standard_normal(self.dim)
        return v / np.linalg.norm(v)

    def embed_audio(self, audio: AudioBuffer) -> np.ndarray:
        payload = (
            b"audio"
            + struct.pack("<i", audio.sample_rate)
            + audio.samples.astype(np.float32).tobytes()
        )
        return self._vector(payload)

    def embed_texts(self, texts: Sequence[str]) -> np.ndarray:
        if not texts:
            return np.zeros((0, self.dim))
        return np.stack([self._vector(b"text" + t.encode("utf-8")) for t in texts])


class PinnedAudioEmbeddingBackend:
    """Embeds any audio as the (normalized) sum of pinned label texts.

    With one pinned text, classification against its category scores 1.0 for
    that label; with one pin per category, every pinned label wins its
    category, which lets tests force a full known analysis.
    """

    def __init__(self, inner: MockEmbeddingBackend, pinned_texts: Sequence[str]):
        if not pinned_texts:
            raise BackendError("need at least one pinned text")
        self.inner = inner
        self.pinned_texts = tuple(pinned_texts)

    @property
    def identity(self) -> str:
        return self.inner.identity

    def embed_audio(self, audio: AudioBuffer) -> np.ndarray:
        vecs = self.inner.embed_texts(self.pinned_texts)
        summed = vecs.sum(axis=0)
        return summed / np.linalg.norm(summed)

    def embed_texts(self, texts: Sequence[str]) -> np.ndarray:
        return self.inner.embed_texts(texts)


def conversation_key(messages: Sequence[ChatMessage]) -> str:
    """Stable lookup key for replaying a conversation."""
    h = hashlib.sha256()
    for m in messages:
        h.update(m.role.encode())
        h.update(b"\x00")
        h.update((m.text or "").encode("utf-8"))
        h.update(b"\x00")
        h.update(b"<audio>" if m.audio_ref else b"")
        h.update(b"\x01")
    return h.hexdigest()


class ReplayChatBackend:
    """Returns canned responses keyed by conversation content."""

    def __init__(self):
        self._responses: dict[str, str] = {}

    def add(self, prompt: str | Sequence[ChatMessage], response: str) -> None:
        messages = [ChatMessage(role="user", text=prompt)] if isinstance(prompt, str) else list(prompt)
        self._responses[conversation_key(messages)] = response

    def chat(self, messages: Sequence[ChatMessage]) -> str:
        key = conversation_key(messages)
        if key not in self._responses:
            raise BackendError(f"replay chat backend has no entry for conversation {key[:12]}")
        return self._responses[key]


class TemplateChatBackend:
    """Produces deterministic synthetic responses.

    Prompts that state a scene count get a parseable script with that many
    scenes (plus a fake reasoning preamble, so parser tolerance stays
    exercised); conversations carrying audio get a short story.
    """

    def __init__(self, seed: int = 0):
        self.seed = seed

    def _phrase(self, rng: np.random.Generator) -> str:
        return (
            f"{_SUBJECTS[rng.integers(len(_SUBJECTS))]} "
            f"{_ACTIONS[rng.integers(len(_ACTIONS))]} "
            f"{_PLACES[rng.integers(len(_PLACES))]}"
        )

    def chat(self, messages: Sequence[ChatMessage]) -> str:
        text = "\n".join(m.text for m in messages if m.text)
        match = _SCENE_COUNT_RE.search(text)
        if match:
            return self._script(int(match.group(1)), text)
        return self._story(messages, text)

    def _script(self, n: int, prompt_text: str) -> str:
        rng = _digest_rng(str(self.seed).encode(), b"script", prompt_text.encode("utf-8"))
        lines = [
            "Thinking it through: the request asks for scenes introduced by "
            'SCENE markers after a "BEGIN SCRIPT" line, so that is what follows.',
            "",
            "BEGIN SCRIPT",
            "",
        ]
        for i in range(1, n + 1):
            sentence = self._phrase(rng)
            lines.append(f"SCENE {i}: {sentence[0].upper()}{sentence[1:]}.")
            lines.append("")
        lines.append("END SCRIPT")
        return "\n".join(lines)

    def _story(self, messages: Sequence[ChatMessage], text: str) -> str:
        audio_refs = [m.audio_ref for m in messages if m.audio_ref]
        rng = _digest_rng(
            str(self.seed).encode(),
            b"story",
            text.encode("utf-8"),
            ",".join(audio_refs).encode("utf-8"),
        )
        a, b = self._phrase(rng), self._phrase(rng)
        return (
            f"The video follows {a}. As the music swells, {b}, "
            "and the two threads meet in a final wide shot that mirrors the opening."
        )


class PatternVideoBackend:
    """Renders flat-color PNG frames derived from (prompt, seed).

    Frame count is round(duration_s * fps); one channel drifts per frame so
    consecutive frames differ but remain deterministic.
    """

    def generate(self, request: ClipRequest) -> list[bytes]:
        count = round(request.duration_s * request.fps)
        rng = _digest_rng(
            b"video",
            request.prompt_text.encode("utf-8"),
            struct.pack("<q", request.seed),
            struct.pack("<ii", request.width, request.height),
        )
        base = rng.integers(0, 256, size=3)
        frames = []
        for i in range(count):
            color = (int(base[0]), int(base[1]), int((base[2] + i) % 256))
            img = Image.new("RGB", (request.width, request.height), color)
            buf = io.BytesIO()
            img.save(buf, format="PNG")
            frames.append(buf.getvalue())
        return frames
