"""Automatic music-video generation.

Turns a song into a finished video in five stages: segment the audio,
describe each segment with zero-shot labels, write a scene-by-scene script
with a chat model, render one clip per scene with a text-to-video model, and
assemble the clips over the original audio.  All model inference sits behind
small backend protocols with deterministic mock implementations, so the whole
pipeline runs offline.
"""

__version__ = "0.1.0"
