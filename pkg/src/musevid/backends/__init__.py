"""Model-inference boundary: protocols, wire schemas, mocks, HTTP clients."""

from .base import (  # noqa: F401
    BackendEndpointConfig,
    BackendKind,
    ChatBackend,
    ChatMessage,
    EmbeddingBackend,
    VideoBackend,
)
