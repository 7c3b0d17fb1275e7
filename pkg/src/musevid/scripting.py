"""Prompt construction and script parsing.

One prompt template serves the embedding-analysis pipeline (analysis
sentences in, script out) and a second one decomposes a story into scenes
for the audio-chat pipeline; both end with the same output-format
instructions ("SCENE #:" markers after a "BEGIN SCRIPT" line), so a single
parser handles both.

The templates are load-bearing: downstream tests compare built prompts
byte-for-byte against golden fixtures, so spacing, line breaks, and even the
spelling of every template sentence are frozen.  Do not "fix" wording here
without updating the fixtures.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Sequence

from .backends.base import ChatBackend, ChatMessage
from .errors import (
    EmptyResponseError,
    MissingBeginMarkerError,
    MusevidError,
    NonContiguousNumberingError,
    SceneCountMismatchError,
    ScriptParseError,
)
from .segmentation import SegmentPlan
from .taxonomy import SegmentAnalysis, TrackAnalysis

BEGIN_MARKER = "BEGIN SCRIPT"
END_MARKER = "END SCRIPT"

_SCENE_RE = re.compile(r"^SCENE (\d+):", re.MULTILINE)
_END_RE = re.compile(r"^END SCRIPT\s*$", re.MULTILINE)
_SENTENCE_END_RE = re.compile(r"[.!?]+(?=\s|$)")

_CLAP_HEADER_LINES = (
    "The story structure needs to have a beginning, middle and an ending.",
    "You will write the story based on the characteristics of the music that are provided to you.",
    "The story needs to be told as descriptions of sccenes that will appear in a music video.",
    "The structure needs to be reflected in the scene layout, to try to mimic the story's progression.",
)
_CONCRETENESS_LINE = (
    "Make sure the scene descriptions are concrete and to the point, "
    "they need to be easy for a text2video model to generate videos from."
)
_FORMAT_LINES = (
    "Scene descriptions need to be as brief as possible. Every scene can be "
    "described in one sentence at the most. Omit all unnecesary details from the description.",
    "In your response, start the description of every scene with the exact letters: "
    "\"SCENE #:\", '#' substituted with the scene number. Do NOT add any special or "
    "any other type of characters to this line! Example: \"SCENE 1:\\n\"",
    "Before the start of the script, add the words \"BEGIN SCRIPT\\n\" so that I can easily extract it.",
)

_STORY_SENTENCE = "Think of a story for a music video for this song."
_ENGAGEMENT_SENTENCE = (
    "The story should be engaging and visually appealing, with a focus on "
    "the emotions conveyed by the music and lyrics."
)


class ScriptSource(str, Enum):
    CLAP_PIPELINE = "ClapPipeline"
    LALM_PIPELINE = "LalmPipeline"


@dataclass(frozen=True)
class ScriptPromptOptions:
    additional_prompt: str | None = None
    character_directive: str = "at least four people"
    # Follows the directive in the same line; phrased to agree with it
    # grammatically, so it changes together with character_directive.
    character_consistency: str = "For consistency, repeat their descriptions in every scene."
    # When None, rendered from TrackAnalysis.visual_style.
    style_guideline_text: str | None = None

    def __post_init__(self):
        if not self.character_directive.strip():
            raise ScriptParseError("character_directive must be non-empty")


@dataclass(frozen=True)
class Scene:
    number: int
    description: str


@dataclass(frozen=True)
class VideoScript:
    scenes: tuple[Scene, ...]
    raw_response: str
    source: ScriptSource


@dataclass(frozen=True)
class StoryConcept:
    text: str
    song_ref: str

    def __post_init__(self):
        if not self.text.strip():
            raise ScriptParseError("story text must be non-empty")


def format_duration(seconds: float) -> str:
    """Duration as printed in prompts: up to 2 decimals, no padded zeros."""
    return str(round(seconds, 2))


def duration_sentence(seconds: float) -> str:
    return f"The scene will be {format_duration(seconds)} seconds long."


def _sentence_run(sentences: Sequence[str]) -> str:
    """Join sentences with single spaces, keeping one trailing space."""
    return "".join(s + " " for s in sentences)


def render_style_guidelines(track: TrackAnalysis) -> str:
    return _sentence_run(track.visual_sentences())


def build_clap_script_prompt(
    track: TrackAnalysis,
    segments: Sequence[SegmentAnalysis],
    options: ScriptPromptOptions | None = None,
) -> str:
    """Render the scripting prompt from track/segment analyses."""
    if not segments:
        raise ScriptParseError("cannot build a script prompt for zero segments")
    options = options or ScriptPromptOptions()
    first = "You need to think of a story and a script for a music video."
    if options.additional_prompt:
        first += f" {options.additional_prompt}"
    style_text = (
        options.style_guideline_text
        if options.style_guideline_text is not None
        else render_style_guidelines(track)
    )
    lines = [first, *_CLAP_HEADER_LINES]
    lines.append(
        f"The story should include {options.character_directive}. {options.character_consistency}"
    )
    lines.append(_CONCRETENESS_LINE)
    lines.append(f"There are {len(segments)} scenes in total.")
    lines.append("When listening to the entire song, it can be described like this:")
    lines.append(f"the overall {_sentence_run(track.content_sentences())}")
    lines.append("")
    lines.append("When listening to individual segments, they can be described like this:")
    lines.append("")
    for i, seg in enumerate(segments, start=1):
        lines.append(f"Scene {i}:")
        lines.append(" ".join(seg.sentences() + [duration_sentence(seg.duration_s)]))
    lines.append("")
    lines.append("Each scene needs to visually match the following guidelines:")
    lines.append(style_text)
    lines.append("")
    lines.extend(_FORMAT_LINES)
    return "\n".join(lines)


def build_lalm_story_request(
    song_ref: str,
    additional_prompt: str | None = None,
) -> list[ChatMessage]:
    """Two-message conversation asking the audio-chat model for a story."""
    if not song_ref:
        raise ScriptParseError("story request needs an audio reference")
    if not Path(song_ref).exists():
        raise ScriptParseError(f"story request audio not found: {song_ref}")
    # Single-format interpolation: an empty insert leaves a double space,
    # exactly as the template behaves.
    middle = additional_prompt if additional_prompt else ""
    user_text = f"{_STORY_SENTENCE} {middle} {_ENGAGEMENT_SENTENCE}"
    return [
        ChatMessage(role="system", text="You are a helpful assistant."),
        ChatMessage(role="user", text=user_text, audio_ref=song_ref),
    ]


def build_decomposition_prompt(story: StoryConcept, plan: SegmentPlan) -> str:
    """Prompt a chat model to split a story into per-segment scenes."""
    if not plan.segments:
        raise ScriptParseError("cannot decompose a story over an empty plan")
    n = len(plan.segments)
    lines = [
        "You need to write a script for a music video based on a story that has already been written.",
        "The story needs to be split into scene descriptions that follow the song's temporal structure.",
        _CONCRETENESS_LINE,
        f"There are {n} scenes in total.",
        "This is the story the scenes need to tell:",
        "",
        story.text,
        "",
        "These are the segments of the song the scenes need to cover:",
        "",
    ]
    for i, seg in enumerate(plan.segments, start=1):
        lines.append(f"Scene {i}:")
        lines.append(duration_sentence(seg.duration_s))
    lines.append("")
    lines.extend(_FORMAT_LINES)
    return "\n".join(lines)


def conversation_to_text(messages: Sequence[ChatMessage]) -> str:
    """Readable rendering of a conversation, for prompt audit files."""
    parts = []
    for m in messages:
        body = []
        if m.audio_ref is not None:
            body.append(f"<audio: {m.audio_ref}>")
        if m.text is not None:
            body.append(m.text)
        parts.append(f"[{m.role}]\n" + "\n".join(body))
    return "\n\n".join(parts) + "\n"


def request_script(
    prompt: str | Sequence[ChatMessage],
    backend: ChatBackend,
    prompt_file: str | Path | None = None,
    response_file: str | Path | None = None,
) -> str:
    """Send a prompt/conversation; persist both sides when paths are given.

    The prompt is written before the backend call so that a crashed or
    hung backend still leaves the exact request on disk.
    """
    if isinstance(prompt, str):
        conversation: list[ChatMessage] = [ChatMessage(role="user", text=prompt)]
        prompt_text = prompt
    else:
        conversation = list(prompt)
        prompt_text = conversation_to_text(conversation)
    if prompt_file is not None:
        Path(prompt_file).write_text(prompt_text)
    response = backend.chat(conversation)
    if not isinstance(response, str) or not response.strip():
        raise EmptyResponseError("chat backend returned an empty response")
    if response_file is not None:
        Path(response_file).write_text(response)
    return response


def parse_script(
    raw: str,
    expected_scenes: int,
    source: ScriptSource = ScriptSource.CLAP_PIPELINE,
) -> VideoScript:
    """Extract scenes from a chat response.

    Everything before the *last* "BEGIN SCRIPT" is discarded (reasoning
    preambles routinely mention the marker).  Scene text runs to the next
    scene marker, an "END SCRIPT" line, or end of input.
    """
    if not isinstance(raw, str):
        raise ScriptParseError(f"script response must be text, got {type(raw).__name__}")
    idx = raw.rfind(BEGIN_MARKER)
    if idx < 0:
        raise MissingBeginMarkerError(f"response contains no {BEGIN_MARKER!r} marker")
    body = raw[idx + len(BEGIN_MARKER):]
    matches = list(_SCENE_RE.finditer(body))
    if len(matches) != expected_scenes:
        raise SceneCountMismatchError(found=len(matches), expected=expected_scenes)
    numbers = [int(m.group(1)) for m in matches]
    if numbers != list(range(1, expected_scenes + 1)):
        raise NonContiguousNumberingError(numbers)
    scenes = []
    for i, m in enumerate(matches):
        end = matches[i + 1].start() if i + 1 < len(matches) else len(body)
        chunk = body[m.end(): end]
        trailer = _END_RE.search(chunk)
        if trailer:
            chunk = chunk[: trailer.start()]
        scenes.append(Scene(number=numbers[i], description=chunk.strip()))
    return VideoScript(scenes=tuple(scenes), raw_response=raw, source=source)


def script_to_text(script: VideoScript) -> str:
    """Canonical text form of a script; parse_script round-trips it."""
    blocks = [f"SCENE {s.number}: {s.description}" for s in script.scenes]
    return f"{BEGIN_MARKER}\n\n" + "\n\n".join(blocks) + f"\n\n{END_MARKER}\n"


@dataclass(frozen=True)
class ValidationIssue:
    code: str
    message: str
    scene_number: int | None = None


@dataclass(frozen=True)
class ValidationReport:
    hard: tuple[ValidationIssue, ...] = field(default=())
    soft: tuple[ValidationIssue, ...] = field(default=())

    @property
    def ok(self) -> bool:
        return not self.hard


def validate_script(script: VideoScript, plan: SegmentPlan) -> ValidationReport:
    """Check a parsed script against its segment plan.

    Hard failures make the script unusable (wrong scene count, broken
    numbering, empty descriptions); soft findings flag instruction drift
    (multiple sentences, over-long descriptions) without blocking.
    """
    hard: list[ValidationIssue] = []
    soft: list[ValidationIssue] = []
    if len(script.scenes) != len(plan.segments):
        hard.append(
            ValidationIssue(
                code="SceneCountMismatch",
                message=f"script has {len(script.scenes)} scenes for {len(plan.segments)} segments",
            )
        )
    numbers = [s.number for s in script.scenes]
    if numbers != list(range(1, len(numbers) + 1)):
        hard.append(
            ValidationIssue(
                code="NonContiguousNumbering",
                message=f"scene numbers are not 1..{len(numbers)} in order: {numbers}",
            )
        )
    for scene in script.scenes:
        if not scene.description.strip():
            hard.append(
                ValidationIssue(
                    code="EmptyDescription",
                    message=f"scene {scene.number} has an empty description",
                    scene_number=scene.number,
                )
            )
            continue
        sentence_count = len(_SENTENCE_END_RE.findall(scene.description))
        if sentence_count > 1:
            soft.append(
                ValidationIssue(
                    code="MultiSentence",
                    message=f"scene {scene.number} has {sentence_count} sentences",
                    scene_number=scene.number,
                )
            )
        words = len(scene.description.split())
        if words > 60:
            soft.append(
                ValidationIssue(
                    code="TooLong",
                    message=f"scene {scene.number} is {words} words long",
                    scene_number=scene.number,
                )
            )
    return ValidationReport(hard=tuple(hard), soft=tuple(soft))


def script_to_json_dict(script: VideoScript) -> dict:
    return {
        "source": script.source.value,
        "scenes": [{"number": s.number, "description": s.description} for s in script.scenes],
    }


def script_from_json_dict(data: dict, raw_response: str = "") -> VideoScript:
    try:
        scenes = tuple(
            Scene(number=int(s["number"]), description=str(s["description"]))
            for s in data["scenes"]
        )
        return VideoScript(
            scenes=scenes,
            raw_response=raw_response,
            source=ScriptSource(data["source"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ScriptParseError(f"malformed script JSON: {exc}") from exc


def save_script(script: VideoScript, json_path: str | Path) -> None:
    Path(json_path).write_text(
        json.dumps(script_to_json_dict(script), indent=2, sort_keys=True) + "\n"
    )


def load_script(json_path: str | Path, raw_response: str = "") -> VideoScript:
    try:
        data = json.loads(Path(json_path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ScriptParseError(f"cannot read script {json_path}: {exc}") from exc
    return script_from_json_dict(data, raw_response=raw_response)
