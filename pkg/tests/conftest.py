"""Shared fixtures: synthetic audio, reference analyses, fixture loaders."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from musevid.audio import AudioBuffer, TimeSpan, write_wav
from musevid.segmentation import CutReason, Segment, SegmentMethod, SegmentPlan
from musevid.taxonomy import (
    CategoryClassification,
    LabelTaxonomy,
    SegmentAnalysis,
    TrackAnalysis,
    default_taxonomy,
)

FIXTURES = Path(__file__).parent / "fixtures"

SR = 22050


def fixture_text(name: str) -> str:
    return (FIXTURES / name).read_text()


# ---------------------------------------------------------------- synthesis


def make_sine(duration_s: float, freq: float = 220.0, sr: int = SR, amp: float = 0.3) -> AudioBuffer:
    n = round(duration_s * sr)
    t = np.arange(n) / sr
    return AudioBuffer(samples=(amp * np.sin(2 * np.pi * freq * t)), sample_rate=sr)


def make_click_track(
    duration_s: float,
    bpm: float = 120.0,
    sr: int = SR,
    first_beat_s: float = 0.26,
) -> tuple[AudioBuffer, np.ndarray]:
    """Decaying 1 kHz bursts on the beat grid; returns (audio, click times)."""
    n = round(duration_s * sr)
    samples = np.zeros(n)
    period = 60.0 / bpm
    click_len = round(0.020 * sr)
    t_click = np.arange(click_len) / sr
    burst = 0.8 * np.sin(2 * np.pi * 1000.0 * t_click) * np.exp(-t_click / 0.005)
    times = []
    beat = first_beat_s
    while beat < duration_s - 0.021:
        start = round(beat * sr)
        samples[start : start + click_len] += burst
        times.append(beat)
        beat += period
    return AudioBuffer(samples=samples, sample_rate=sr), np.array(times)


def make_switch_tone(
    duration_s: float = 60.0,
    switch_s: float = 30.0,
    sr: int = SR,
) -> AudioBuffer:
    """Steady harmonic tone whose timbre jumps at switch_s."""
    n = round(duration_s * sr)
    t = np.arange(n) / sr
    early = 0.4 * np.sin(2 * np.pi * 220.0 * t) + 0.12 * np.sin(2 * np.pi * 440.0 * t)
    late = 0.4 * np.sin(2 * np.pi * 660.0 * t) + 0.12 * np.sin(2 * np.pi * 1320.0 * t)
    samples = np.where(t < switch_s, early, late)
    return AudioBuffer(samples=samples, sample_rate=sr)


def make_fixture_song(duration_s: float = 44.01, sr: int = SR, seed: int = 2024) -> AudioBuffer:
    """Deterministic 'song': beat clicks over a slowly evolving harmonic bed."""
    n = round(duration_s * sr)
    t = np.arange(n) / sr
    rng = np.random.default_rng(seed)
    bed = (
        0.25 * np.sin(2 * np.pi * 196.0 * t)
        + 0.15 * np.sin(2 * np.pi * 294.0 * t + 0.5)
        + 0.08 * np.sin(2 * np.pi * (392.0 + 30.0 * np.sin(2 * np.pi * 0.05 * t)) * t)
    )
    envelope = 0.6 + 0.4 * np.sin(2 * np.pi * t / duration_s)
    samples = bed * envelope + 0.01 * rng.standard_normal(n)
    clicks, _ = make_click_track(duration_s, bpm=120.0, sr=sr)
    samples = samples + 0.5 * clicks.samples
    peak = np.abs(samples).max()
    return AudioBuffer(samples=samples * (0.9 / peak), sample_rate=sr)


# ---------------------------------------------------------------- reference data

REFERENCE_DURATIONS = (5.49, 7.13, 7.87, 6.66, 6.2, 5.72, 4.94)

_REFERENCE_TRACK_LABELS = {
    "instrumental_energy": "It has multiple peaks and valleys throughout.",
    "instrumental_palette": "Orchestral or cinematic instruments",
    "tempo_range": "Very fast (140+ BPM)",
    "production_quality": "Very polished, glossy, and modern",
    "mood": "Uplifting and bright",
    "location": "exterior",
    "visual_setting": "Natural",
    "visual_style": "Monochromatic or limited color palette",
    "visual_focus": "Multiple focal points or characters",
}

_INTENSITY_MODERATE = "Moderate intensity with a clear beat"
_INTENSITY_HIGH = "High energy and full instrumentation"
_ELEMENT_STRINGS = "String or orchestral elements"
_ELEMENT_SYNTHS = "Synths or electronic sounds"
_SHIFT_FLUCTUATES = "It fluctuates multiple times within the segment"
_SHIFT_UNIFORM = "It stays uniformly loud/energetic"
_RHYTHM_IRREGULAR = "Irregular or changing time signatures"
_TRANSITION_BREATHER = 'It acts as a noticeable break or "breather"'
_TRANSITION_DROP = "It features a sudden drop or pause before the next section"
_TRANSITION_CONTINUES = "It cleanly continues the energy from the previous segment"
_TRANSITION_FADES = "It slowly fades out or prepares for a drop"
_TRANSITION_SHIFTS = "It dramatically shifts the energy or mood"

_REFERENCE_SEGMENT_LABELS = [
    (_INTENSITY_MODERATE, _ELEMENT_STRINGS, _SHIFT_FLUCTUATES, _RHYTHM_IRREGULAR, _TRANSITION_BREATHER),
    (_INTENSITY_MODERATE, _ELEMENT_STRINGS, _SHIFT_FLUCTUATES, _RHYTHM_IRREGULAR, _TRANSITION_DROP),
    (_INTENSITY_HIGH, _ELEMENT_STRINGS, _SHIFT_FLUCTUATES, _RHYTHM_IRREGULAR, _TRANSITION_DROP),
    (_INTENSITY_HIGH, _ELEMENT_STRINGS, _SHIFT_FLUCTUATES, _RHYTHM_IRREGULAR, _TRANSITION_CONTINUES),
    (_INTENSITY_MODERATE, _ELEMENT_STRINGS, _SHIFT_UNIFORM, _RHYTHM_IRREGULAR, _TRANSITION_FADES),
    (_INTENSITY_HIGH, _ELEMENT_SYNTHS, _SHIFT_FLUCTUATES, _RHYTHM_IRREGULAR, _TRANSITION_SHIFTS),
    (_INTENSITY_HIGH, _ELEMENT_STRINGS, _SHIFT_FLUCTUATES, _RHYTHM_IRREGULAR, _TRANSITION_DROP),
]

_SEGMENT_CATEGORY_IDS = (
    "instrumental_intensity",
    "prominent_element",
    "dynamic_shift",
    "rhythm",
    "transition_function",
)


def _pick(taxonomy: LabelTaxonomy, category_id: str, label: str) -> CategoryClassification:
    category = taxonomy.get(category_id)
    assert label in category.labels, f"{label!r} not in {category_id}"
    scores = {l: (1.0 if l == label else 0.0) for l in category.labels}
    return CategoryClassification(
        category_id=category_id,
        display_name=category.display_name,
        chosen_label=label,
        scores=scores,
    )


def reference_track_analysis(taxonomy: LabelTaxonomy | None = None) -> TrackAnalysis:
    taxonomy = taxonomy or default_taxonomy()
    content_ids = ("instrumental_energy", "instrumental_palette", "tempo_range", "production_quality", "mood")
    visual_ids = ("location", "visual_setting", "visual_style", "visual_focus")
    return TrackAnalysis(
        content_style=tuple(_pick(taxonomy, cid, _REFERENCE_TRACK_LABELS[cid]) for cid in content_ids),
        visual_style=tuple(_pick(taxonomy, cid, _REFERENCE_TRACK_LABELS[cid]) for cid in visual_ids),
    )


def reference_segment_analyses(taxonomy: LabelTaxonomy | None = None) -> list[SegmentAnalysis]:
    taxonomy = taxonomy or default_taxonomy()
    out = []
    for i, (labels, duration) in enumerate(zip(_REFERENCE_SEGMENT_LABELS, REFERENCE_DURATIONS)):
        classifications = tuple(
            _pick(taxonomy, cid, label) for cid, label in zip(_SEGMENT_CATEGORY_IDS, labels)
        )
        out.append(
            SegmentAnalysis(segment_index=i, duration_s=duration, classifications=classifications)
        )
    return out


def reference_plan() -> SegmentPlan:
    cuts = [0.0]
    for d in REFERENCE_DURATIONS:
        cuts.append(cuts[-1] + d)
    last = len(REFERENCE_DURATIONS) - 1
    segments = tuple(
        Segment(
            index=i,
            span=TimeSpan(start_s=cuts[i], end_s=cuts[i + 1]),
            cut_reason=CutReason.END_OF_TRACK if i == last else CutReason.RANDOM_LENGTH,
        )
        for i in range(len(REFERENCE_DURATIONS))
    )
    return SegmentPlan(
        track_duration_s=cuts[-1],
        method=SegmentMethod.RANDOM,
        segments=segments,
    )


# ---------------------------------------------------------------- fixtures


@pytest.fixture(scope="session")
def taxonomy() -> LabelTaxonomy:
    return default_taxonomy()


@pytest.fixture(scope="session")
def fixture_song_path(tmp_path_factory) -> Path:
    path = tmp_path_factory.mktemp("audio") / "fixture_song.wav"
    write_wav(path, make_fixture_song())
    return path


@pytest.fixture(scope="session")
def short_song_path(tmp_path_factory) -> Path:
    path = tmp_path_factory.mktemp("audio_short") / "short_song.wav"
    write_wav(path, make_fixture_song(duration_s=12.0, seed=99))
    return path


@pytest.fixture()
def reference_prompt() -> str:
    return fixture_text("reference_prompt.txt")


@pytest.fixture()
def reference_response() -> str:
    return fixture_text("reference_response.txt")


@pytest.fixture()
def reference_story() -> str:
    return fixture_text("reference_story.txt")
