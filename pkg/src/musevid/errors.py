"""Exception types raised across the pipeline.

Everything user-actionable derives from MusevidError so the CLI and service
can map failures to exit codes / HTTP statuses in one place.
"""

from __future__ import annotations


class MusevidError(Exception):
    """Base class for all package errors."""

    code = "error"


class AudioDecodeError(MusevidError):
    """Input audio could not be read or has an unsupported encoding."""

    code = "audio_decode"


class SpanError(MusevidError):
    """A requested time span falls outside the buffer."""

    code = "span"


class SegmentationError(MusevidError):
    code = "segmentation"


class NoBeatsError(SegmentationError):
    """Beat tracking found no usable periodicity in the onset envelope."""

    code = "no_beats"


class BackendError(MusevidError):
    """A model backend failed (transport error, bad payload, exhausted retries)."""

    code = "backend"


class EmptyResponseError(BackendError):
    """Chat backend returned a blank response."""

    code = "empty_response"


class AnalysisError(MusevidError):
    """Classification failed; carries the segment index when applicable."""

    code = "analysis"

    def __init__(self, message: str, segment_index: int | None = None):
        super().__init__(message)
        self.segment_index = segment_index


class ScriptParseError(MusevidError):
    code = "script_parse"


class MissingBeginMarkerError(ScriptParseError):
    code = "missing_begin_marker"


class SceneCountMismatchError(ScriptParseError):
    code = "scene_count_mismatch"

    def __init__(self, found: int, expected: int):
        super().__init__(f"found {found} scene markers, expected {expected}")
        self.found = found
        self.expected = expected


class NonContiguousNumberingError(ScriptParseError):
    code = "non_contiguous_numbering"

    def __init__(self, numbers: list[int]):
        super().__init__(f"scene numbers are not 1..{len(numbers)} in order: {numbers}")
        self.numbers = numbers


class ScriptValidationError(MusevidError):
    """A parsed script failed hard validation against the segment plan."""

    code = "script_validation"

    def __init__(self, failures: list[str]):
        super().__init__("; ".join(failures))
        self.failures = failures


class MalformedClipError(MusevidError):
    """Video backend produced unusable frames (none, undecodable, mixed sizes)."""

    code = "malformed_clip"


class GenerationError(MusevidError):
    """One or more scenes failed to render; lists the failing scene numbers."""

    code = "generation"

    def __init__(self, failures: dict[int, str]):
        parts = ", ".join(f"scene {n}: {msg}" for n, msg in sorted(failures.items()))
        super().__init__(f"clip generation failed for {parts}")
        self.failures = failures


class AssemblyError(MusevidError):
    code = "assembly"


class MissingClipError(AssemblyError):
    code = "missing_clip"

    def __init__(self, scene_numbers: list[int]):
        super().__init__(f"missing clips for scenes: {scene_numbers}")
        self.scene_numbers = scene_numbers


class MuxerUnavailableError(AssemblyError):
    code = "muxer_unavailable"


class ConfigError(MusevidError):
    """Invalid configuration; carries every detected problem, not just the first."""

    code = "config"

    def __init__(self, problems: list[str]):
        super().__init__("; ".join(problems))
        self.problems = problems


class RunStateError(MusevidError):
    """Run directory is in a state the requested operation cannot accept."""

    code = "run_state"


class IntegrityError(RunStateError):
    """A stage is marked Done but its artifacts are missing or unreadable."""

    code = "integrity"
