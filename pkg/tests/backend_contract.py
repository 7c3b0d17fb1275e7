"""Reusable wire-protocol conformance checks.

Any server claiming to implement the four inference routes must pass these
against an httpx-compatible client (fastapi TestClient or a real
httpx.Client pointed at a live server).  The in-repo mock server is the
reference implementation; an external adapter passing this suite is
interchangeable with it.
"""

from __future__ import annotations

import base64
import io

import numpy as np
from PIL import Image

from musevid.audio import AudioBuffer, encode_wav_bytes
from musevid.backends import schemas


def sample_wav_b64(seed: int = 0, duration_s: float = 0.5, sr: int = 22050) -> str:
    rng = np.random.default_rng(seed)
    t = np.arange(round(duration_s * sr)) / sr
    samples = 0.4 * np.sin(2 * np.pi * (200 + 50 * seed) * t) + 0.05 * rng.standard_normal(t.size)
    wav = encode_wav_bytes(AudioBuffer(samples=samples, sample_rate=sr))
    return base64.b64encode(wav).decode("ascii")


def check_embed_audio(client) -> None:
    payload = {"audio_b64": sample_wav_b64(seed=1)}
    r1 = client.post(schemas.ROUTE_EMBED_AUDIO, json=payload)
    assert r1.status_code == 200, r1.text
    body = schemas.EmbedResponse.model_validate(r1.json())
    assert body.dim == len(body.embedding) > 0
    assert all(np.isfinite(body.embedding))
    assert any(abs(x) > 0 for x in body.embedding)

    # determinism: same payload, same embedding
    r2 = client.post(schemas.ROUTE_EMBED_AUDIO, json=payload)
    assert r2.json()["embedding"] == r1.json()["embedding"]

    # different audio, different embedding
    r3 = client.post(schemas.ROUTE_EMBED_AUDIO, json={"audio_b64": sample_wav_b64(seed=2)})
    assert r3.json()["embedding"] != r1.json()["embedding"]


def check_embed_audio_errors(client) -> None:
    r = client.post(schemas.ROUTE_EMBED_AUDIO, json={"audio_b64": "@@@not-base64@@@"})
    assert r.status_code == 400
    schemas.ErrorBody.model_validate(r.json())

    garbage = base64.b64encode(b"definitely not a wav").decode("ascii")
    r = client.post(schemas.ROUTE_EMBED_AUDIO, json={"audio_b64": garbage})
    assert r.status_code == 400
    schemas.ErrorBody.model_validate(r.json())

    r = client.post(schemas.ROUTE_EMBED_AUDIO, json={})
    assert r.status_code == 422


def check_embed_text(client) -> None:
    texts = ["calm piano", "loud guitars", "calm piano"]
    r1 = client.post(schemas.ROUTE_EMBED_TEXT, json={"texts": texts})
    assert r1.status_code == 200, r1.text
    body = schemas.TextEmbedResponse.model_validate(r1.json())
    assert len(body.embeddings) == 3
    assert all(len(row) == body.dim for row in body.embeddings)
    # same text, same embedding; different text, different embedding
    assert body.embeddings[0] == body.embeddings[2]
    assert body.embeddings[0] != body.embeddings[1]

    r2 = client.post(schemas.ROUTE_EMBED_TEXT, json={"texts": texts})
    assert r2.json()["embeddings"] == r1.json()["embeddings"]

    # audio and text routes must land in the same vector space
    ra = client.post(schemas.ROUTE_EMBED_AUDIO, json={"audio_b64": sample_wav_b64()})
    assert ra.json()["dim"] == body.dim

    r = client.post(schemas.ROUTE_EMBED_TEXT, json={"texts": []})
    assert r.status_code == 422


def check_chat(client) -> None:
    messages = [{"role": "user", "text": "Say something about a music video."}]
    r1 = client.post(schemas.ROUTE_CHAT, json={"messages": messages})
    assert r1.status_code == 200, r1.text
    body = schemas.ChatResponse.model_validate(r1.json())
    assert body.text.strip()

    # conversation with an audio attachment must be accepted
    r2 = client.post(
        schemas.ROUTE_CHAT,
        json={
            "messages": [
                {"role": "system", "text": "You are a helpful assistant."},
                {"role": "user", "text": "Think of a story.", "audio_b64": sample_wav_b64()},
            ]
        },
    )
    assert r2.status_code == 200, r2.text
    assert schemas.ChatResponse.model_validate(r2.json()).text.strip()

    r = client.post(schemas.ROUTE_CHAT, json={"messages": []})
    assert r.status_code == 422
    r = client.post(schemas.ROUTE_CHAT, json={"messages": [{"role": "user"}]})
    assert r.status_code == 422


def check_video(client) -> None:
    request = {
        "prompt": "a red square",
        "duration_s": 1.25,
        "width": 48,
        "height": 32,
        "fps": 8,
        "seed": 5,
    }
    r1 = client.post(schemas.ROUTE_VIDEO, json=request)
    assert r1.status_code == 200, r1.text
    body = schemas.VideoResponse.model_validate(r1.json())
    assert len(body.frames_b64) == round(1.25 * 8)
    assert body.fps == 8
    for frame_b64 in body.frames_b64:
        data = base64.b64decode(frame_b64, validate=True)
        with Image.open(io.BytesIO(data)) as img:
            assert img.size == (48, 32)

    r2 = client.post(schemas.ROUTE_VIDEO, json=request)
    assert r2.json()["frames_b64"] == r1.json()["frames_b64"]

    changed = dict(request, seed=6)
    r3 = client.post(schemas.ROUTE_VIDEO, json=changed)
    assert r3.json()["frames_b64"] != r1.json()["frames_b64"]

    r = client.post(schemas.ROUTE_VIDEO, json=dict(request, duration_s=0))
    assert r.status_code == 422
    r = client.post(schemas.ROUTE_VIDEO, json=dict(request, prompt=""))
    assert r.status_code == 422


ALL_CHECKS = (
    check_embed_audio,
    check_embed_audio_errors,
    check_embed_text,
    check_chat,
    check_video,
)


def run_full_contract(client) -> None:
    for check in ALL_CHECKS:
        check(client)
