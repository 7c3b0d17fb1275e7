"""Deterministic chat engine.

Produces structured, seeded text: a reasoning preamble followed by a marked
script block when the prompt asks for one, a short story when the request
carries audio or asks for a concept, otherwise a one-line answer.  Output
depends only on (conversation text, audio presence, engine seed), so equal
requests get byte-equal responses.  Swap in the causal-hf engine for real
language model output.
"""

from __future__ import annotations

import hashlib
import random
import re

from .base import ChatTurn

_SCENE_COUNT_RE = re.compile(r"There are (\d+) scenes in total\.")

_SUBJECTS = (
    "a touring band",
    "two dancers",
    "a solitary figure",
    "a film crew",
    "a crowd of strangers",
    "an old projectionist",
)
_PLACES = (
    "on a rain-slicked rooftop",
    "inside a shuttered theater",
    "along a desert highway",
    "in a flooded ballroom",
    "under harbor cranes",
    "between rows of neon signs",
)
_ACTIONS = (
    "moves in slow arcs while the camera circles",
    "walks toward a distant light source",
    "assembles something from scattered parts",
    "throws long shadows against the wall",
    "releases paper lanterns into the dark",
    "watches the skyline flicker and change",
)
_LOOKS = (
    "Grainy film texture, warm backlight.",
    "Cold blue haze with hard rim lighting.",
    "Saturated color, handheld energy.",
    "High contrast monochrome, slow shutter.",
    "Golden hour glow, shallow focus.",
    "Strobing practical lights, long exposure trails.",
)

_STORY_OPENINGS = (
    "A courier carries a sealed reel of film across a city that keeps rearranging itself.",
    "Two estranged friends rebuild a broken radio tower to send one last broadcast.",
    "A night-shift projectionist discovers the audience on screen is watching her back.",
    "A harbor town wakes to find every clock running backwards except the lighthouse lamp.",
)
_STORY_MIDDLES = (
    "Each step forward costs a memory, and the route is paved with the ones already spent.",
    "The work draws neighbors out of their houses until the scaffolding glows with borrowed lamps.",
    "Reel by reel the boundary thins, and props from the film start washing up in the aisles.",
    "The tide keeps time instead, and the fishermen learn to read hours off the waterline.",
)
_STORY_ENDINGS = (
    "At dawn the journey ends where it began, but the city finally holds still.",
    "The signal goes out once, clear and bright, and that turns out to be enough.",
    "When the lights come up, both rooms applaud each other.",
    "The lamp sweeps the bay one last time and the clocks fall back into step.",
)


def _digest(parts: list[str]) -> int:
    h = hashlib.sha256()
    for part in parts:
        h.update(part.encode("utf-8"))
        h.update(b"\x00")
    return int.from_bytes(h.digest()[:8], "big")


class OutlineChatEngine:
    def __init__(self, seed: int = 0):
        self.seed = seed
        self.identity = f"outline-chat:s{seed}"

    def load(self) -> None:
        pass

    def complete(self, turns: list[ChatTurn]) -> str:
        texts = [t.text or "" for t in turns]
        has_audio = any(t.audio is not None for t in turns)
        prompt = "\n".join(texts)
        rng = random.Random(_digest([f"s{self.seed}", f"a{int(has_audio)}", prompt]))
        count_match = _SCENE_COUNT_RE.search(prompt)
        if count_match and "BEGIN SCRIPT" in prompt:
            return self._script(int(count_match.group(1)), rng)
        if has_audio or "story" in prompt.lower():
            return self._story(rng)
        return f"Understood: {texts[-1].strip()[:120]}" if texts[-1].strip() else "Understood."

    def _script(self, scenes: int, rng: random.Random) -> str:
        lines = [
            "Reasoning: the piece moves through "
            f"{scenes} sections, so the visuals should escalate in the same order, "
            "keeping one recurring subject for continuity.",
            "",
            "BEGIN SCRIPT",
            "",
        ]
        for n in range(1, scenes + 1):
            sentence = (
                f"{rng.choice(_SUBJECTS)} {rng.choice(_PLACES)} "
                f"{rng.choice(_ACTIONS)}. {rng.choice(_LOOKS)}"
            )
            sentence = sentence[0].upper() + sentence[1:]
            lines.append(f"SCENE {n}: {sentence}")
            lines.append("")
        lines.append("END SCRIPT")
        return "\n".join(lines)

    def _story(self, rng: random.Random) -> str:
        return " ".join(
            [
                rng.choice(_STORY_OPENINGS),
                rng.choice(_STORY_MIDDLES),
                rng.choice(_STORY_ENDINGS),
            ]
        )
