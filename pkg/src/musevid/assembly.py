"""Final assembly: concatenate clips chronologically over the original audio.

Two containers:

* Mp4ViaMuxer stages every clip's frames into one numbered sequence and
  invokes an external muxer via a configurable argv template with the
  placeholders {frames_pattern} {fps} {audio} {out}.  The template should
  stream-copy the audio (e.g. ffmpeg's "-c:a copy"); this module never
  re-encodes audio itself.
* ManifestOnly writes a deterministic JSON description of the final cut
  (ordered frame ranges plus the audio reference) for environments without
  a muxer binary.  All paths inside are relative to the manifest location,
  so identical runs produce byte-identical manifests anywhere on disk.
"""

from __future__ import annotations

import json
import os
import shlex
import shutil
import subprocess
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from .audio import load_audio
from .errors import (
    AssemblyError,
    AudioDecodeError,
    MissingClipError,
    MuxerUnavailableError,
)
from .generation import ClipArtifact

STAGED_FRAME_PATTERN = "frame_%06d.png"


class Container(str, Enum):
    MP4_VIA_MUXER = "Mp4ViaMuxer"
    MANIFEST_ONLY = "ManifestOnly"


@dataclass(frozen=True)
class AssemblySpec:
    clips: tuple[ClipArtifact, ...]
    audio_path: Path
    output_path: Path
    container: Container

    def __post_init__(self):
        if not self.clips:
            raise AssemblyError("assembly needs at least one clip")
        fps_values = {c.fps for c in self.clips}
        if len(fps_values) != 1:
            raise AssemblyError(f"clips disagree on fps: {sorted(fps_values)}")

    @property
    def fps(self) -> int:
        return self.clips[0].fps

    @property
    def total_frames(self) -> int:
        return sum(c.frame_count for c in self.clips)


def _check_clips(spec: AssemblySpec, expected_scene_count: int | None) -> None:
    numbers = [c.scene_number for c in spec.clips]
    expected = expected_scene_count if expected_scene_count is not None else len(numbers)
    missing = sorted(set(range(1, expected + 1)) - set(numbers))
    if missing:
        raise MissingClipError(missing)
    if numbers != list(range(1, expected + 1)):
        raise AssemblyError(f"clips out of order or duplicated: {numbers}")
    for clip in spec.clips:
        absent = [p for p in clip.frame_paths() if not p.exists()]
        if absent:
            raise MissingClipError([clip.scene_number])


def _audio_duration_s(path: Path) -> float:
    try:
        buffer = load_audio(path, analysis_rate=22050)
    except AudioDecodeError as exc:
        raise AssemblyError(f"cannot read assembly audio {path}: {exc}") from exc
    return buffer.duration_s


def _check_duration(spec: AssemblySpec, audio_duration_s: float) -> None:
    video_duration = spec.total_frames / spec.fps
    tolerance = len(spec.clips) / spec.fps + 1e-9
    if abs(video_duration - audio_duration_s) > tolerance:
        raise AssemblyError(
            f"video duration {video_duration:.3f}s deviates from audio "
            f"{audio_duration_s:.3f}s by more than {tolerance:.3f}s"
        )


def assemble_video(
    spec: AssemblySpec,
    muxer_command: str | None = None,
    expected_scene_count: int | None = None,
) -> Path:
    """Produce the final artifact `spec` describes; returns its path."""
    _check_clips(spec, expected_scene_count)
    audio_duration = _audio_duration_s(spec.audio_path)
    _check_duration(spec, audio_duration)
    spec.output_path.parent.mkdir(parents=True, exist_ok=True)
    if spec.container is Container.MANIFEST_ONLY:
        return _write_assembly_manifest(spec, audio_duration)
    return _run_muxer(spec, muxer_command)


def _write_assembly_manifest(spec: AssemblySpec, audio_duration_s: float) -> Path:
    base = spec.output_path.parent
    clips = []
    start = 0
    for clip in spec.clips:
        clips.append(
            {
                "scene_number": clip.scene_number,
                "directory": os.path.relpath(clip.directory, base),
                "frame_pattern": clip.frame_pattern,
                "frame_count": clip.frame_count,
                "start_frame": start,
                "end_frame": start + clip.frame_count,
            }
        )
        start += clip.frame_count
    doc = {
        "container": Container.MANIFEST_ONLY.value,
        "fps": spec.fps,
        "audio": os.path.relpath(spec.audio_path, base),
        "audio_duration_s": round(audio_duration_s, 6),
        "total_frames": spec.total_frames,
        "total_duration_s": round(spec.total_frames / spec.fps, 6),
        "clips": clips,
    }
    spec.output_path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return spec.output_path


def _run_muxer(spec: AssemblySpec, muxer_command: str | None) -> Path:
    if not muxer_command:
        raise MuxerUnavailableError(
            "no muxer command configured; set one or use the ManifestOnly container"
        )
    staging = spec.output_path.parent / ".mux_frames"
    if staging.exists():
        shutil.rmtree(staging)
    staging.mkdir(parents=True)
    try:
        index = 0
        for clip in spec.clips:
            for src in clip.frame_paths():
                dst = staging / (STAGED_FRAME_PATTERN % index)
                try:
                    os.link(src, dst)
                except OSError:
                    shutil.copyfile(src, dst)
                index += 1
        # Split first so placeholder values (paths with spaces) stay single argv
        # tokens after substitution.
        argv = [
            token.format(
                frames_pattern=str(staging / STAGED_FRAME_PATTERN),
                fps=str(spec.fps),
                audio=str(spec.audio_path),
                out=str(spec.output_path),
            )
            for token in shlex.split(muxer_command)
        ]
        try:
            proc = subprocess.run(argv, capture_output=True, text=True)
        except FileNotFoundError as exc:
            raise MuxerUnavailableError(
                f"muxer binary not found ({argv[0]}); use the ManifestOnly container"
            ) from exc
        if proc.returncode != 0:
            tail = (proc.stderr or proc.stdout or "").strip()[-2000:]
            raise AssemblyError(f"muxer exited with {proc.returncode}: {tail}")
        if not spec.output_path.exists():
            raise AssemblyError(f"muxer reported success but {spec.output_path} does not exist")
        return spec.output_path
    finally:
        shutil.rmtree(staging, ignore_errors=True)
