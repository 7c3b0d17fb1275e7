"""Wire schemas for the four-route inference protocol.

Routes (JSON over HTTP, POST):
  /v1/embed/audio  AudioEmbedRequest  -> EmbedResponse
  /v1/embed/text   TextEmbedRequest   -> TextEmbedResponse
  /v1/chat         ChatRequest        -> ChatResponse
  /v1/video        VideoRequest       -> VideoResponse

Audio travels as base64-encoded WAV.  Any server implementing these routes
(the in-repo mock server or an external adapter over real models) is a valid
backend for the pipeline.  Field names here are the protocol; changing them
breaks every client and server at once.
"""

from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, Field, model_validator

ROUTE_EMBED_AUDIO = "/v1/embed/audio"
ROUTE_EMBED_TEXT = "/v1/embed/text"
ROUTE_CHAT = "/v1/chat"
ROUTE_VIDEO = "/v1/video"


class AudioEmbedRequest(BaseModel):
    audio_b64: str = Field(min_length=1)


class EmbedResponse(BaseModel):
    embedding: list[float]
    dim: int = Field(gt=0)
    model: str

    @model_validator(mode="after")
    def _dim_matches(self):
        if len(self.embedding) != self.dim:
            raise ValueError(f"embedding has {len(self.embedding)} values but dim={self.dim}")
        return self


class TextEmbedRequest(BaseModel):
    texts: list[str] = Field(min_length=1)


class TextEmbedResponse(BaseModel):
    embeddings: list[list[float]]
    dim: int = Field(gt=0)
    model: str

    @model_validator(mode="after")
    def _dims_match(self):
        for i, row in enumerate(self.embeddings):
            if len(row) != self.dim:
                raise ValueError(f"embedding {i} has {len(row)} values but dim={self.dim}")
        return self


class ChatMessageModel(BaseModel):
    role: Literal["system", "user", "assistant"]
    text: str | None = None
    audio_b64: str | None = None

    @model_validator(mode="after")
    def _content_present(self):
        if self.text is None and self.audio_b64 is None:
            raise ValueError("chat message needs text or audio_b64")
        return self


class ChatRequest(BaseModel):
    messages: list[ChatMessageModel] = Field(min_length=1)


class ChatResponse(BaseModel):
    text: str
    model: str


class VideoRequest(BaseModel):
    prompt: str = Field(min_length=1)
    duration_s: float = Field(gt=0)
    width: int = Field(gt=0)
    height: int = Field(gt=0)
    fps: int = Field(gt=0)
    seed: int = 0


class VideoResponse(BaseModel):
    frames_b64: list[str]
    fps: int = Field(gt=0)
    model: str


class ErrorBody(BaseModel):
    error: str
    detail: str | None = None
