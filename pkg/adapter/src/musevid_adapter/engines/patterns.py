"""Deterministic video engine: seeded animated gradients.

Renders round(duration * fps) PNG frames at the requested size.  Palette and
motion derive from (prompt, seed) only, so equal requests are byte-equal.
A stand-in for a text-to-video model; real generators slot in behind the
same render() signature.
"""

from __future__ import annotations

import hashlib
import io
import math

import numpy as np
from PIL import Image


def _palette(prompt: str, seed: int) -> np.ndarray:
    digest = hashlib.sha256(f"{seed}:{prompt}".encode("utf-8")).digest()
    rng = np.random.default_rng(int.from_bytes(digest[:8], "big"))
    return rng.integers(40, 255, size=(3, 3)).astype(np.float64)


class GradientVideoEngine:
    identity = "gradient-video:v1"

    def load(self) -> None:
        pass

    def render(
        self, prompt: str, duration_s: float, width: int, height: int, fps: int, seed: int
    ) -> list[bytes]:
        colors = _palette(prompt, seed)
        total = max(1, round(duration_s * fps))
        ys = np.linspace(0.0, 1.0, height)[:, None]
        xs = np.linspace(0.0, 1.0, width)[None, :]
        frames: list[bytes] = []
        for index in range(total):
            phase = 2.0 * math.pi * index / max(total, 2)
            wave = 0.5 + 0.5 * np.sin(phase + 3.0 * xs + 2.0 * ys)
            mix_a = colors[0][None, None, :] * (1.0 - wave[..., None])
            mix_b = colors[1][None, None, :] * wave[..., None]
            drift = colors[2][None, None, :] * (0.25 + 0.25 * math.sin(phase))
            pixels = np.clip(mix_a + mix_b * 0.8 + drift * ys[..., None], 0, 255)
            image = Image.fromarray(pixels.astype(np.uint8), mode="RGB")
            out = io.BytesIO()
            image.save(out, format="PNG")
            frames.append(out.getvalue())
        return frames
