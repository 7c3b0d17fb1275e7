"""Wire schemas for the four-route inference protocol.

Field names are fixed by the protocol and must stay identical to what the
pipeline's HTTP clients send and expect:

  POST /v1/embed/audio  {"audio_b64"}                 -> {"embedding","dim","model"}
  POST /v1/embed/text   {"texts"}                     -> {"embeddings","dim","model"}
  POST /v1/chat         {"messages":[{role,text,audio_b64}]} -> {"text","model"}
  POST /v1/video        {"prompt","duration_s","width","height","fps","seed"}
                                                      -> {"frames_b64","fps","model"}

Errors use {"error","detail"} bodies.  Request-shape violations return 422;
payloads that pass the schema but are semantically unusable (undecodable
audio, unknown role) return 400.
"""

from __future__ import annotations

from pydantic import BaseModel, Field, model_validator

ROUTE_EMBED_AUDIO = "/v1/embed/audio"
ROUTE_EMBED_TEXT = "/v1/embed/text"
ROUTE_CHAT = "/v1/chat"
ROUTE_VIDEO = "/v1/video"

CHAT_ROLES = ("system", "user", "assistant")


class AudioEmbedRequest(BaseModel):
    audio_b64: str = Field(min_length=1)


class EmbedResponse(BaseModel):
    embedding: list[float]
    dim: int = Field(gt=0)
    model: str


class TextEmbedRequest(BaseModel):
    texts: list[str] = Field(min_length=1)


class TextEmbedResponse(BaseModel):
    embeddings: list[list[float]]
    dim: int = Field(gt=0)
    model: str


class ChatMessageModel(BaseModel):
    # role membership is checked in the route so an unknown role maps to a
    # 400 payload error rather than a 422 shape error
    role: str
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
