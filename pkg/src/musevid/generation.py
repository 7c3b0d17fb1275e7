"""Clip generation: one video clip per scene via the text-to-video backend.

Clips are stored as numbered PNG frame sequences under clips/scene_<n>/,
each with a manifest.json describing the frames.  After generation a clip
is conformed so frame_count = round(segment_duration * fps): TrimEnd drops
surplus tail frames (and refuses to extend), HoldLastFrame repeats the last
frame to extend and also trims surplus.  Persistence is atomic (temp dir,
then rename) so interrupted runs never leave half-written scene dirs.
"""

from __future__ import annotations

import hashlib
import io
import json
import os
import shutil
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Callable, Sequence

from PIL import Image

from .backends.base import VideoBackend
from .errors import GenerationError, MalformedClipError, MusevidError
from .scripting import VideoScript
from .segmentation import SegmentPlan

FRAME_PATTERN = "frame_%05d.png"
CLIP_MANIFEST_NAME = "manifest.json"

DEFAULT_WIDTH = 512
DEFAULT_HEIGHT = 512
DEFAULT_FPS = 12


class ConformPolicy(str, Enum):
    TRIM_END = "TrimEnd"
    HOLD_LAST_FRAME = "HoldLastFrame"


@dataclass(frozen=True)
class ClipRequest:
    scene_number: int
    prompt_text: str
    duration_s: float
    width: int = DEFAULT_WIDTH
    height: int = DEFAULT_HEIGHT
    fps: int = DEFAULT_FPS
    seed: int = 0

    def __post_init__(self):
        if self.scene_number < 1:
            raise MalformedClipError(f"scene_number must be >= 1, got {self.scene_number}")
        if not self.prompt_text.strip():
            raise MalformedClipError(f"scene {self.scene_number} has an empty prompt")
        if self.duration_s <= 0:
            raise MalformedClipError(f"duration_s must be positive, got {self.duration_s}")
        if self.width <= 0 or self.height <= 0 or self.fps <= 0:
            raise MalformedClipError("width, height, and fps must be positive")


@dataclass(frozen=True)
class ClipArtifact:
    scene_number: int
    fps: int
    frame_count: int
    directory: Path
    frame_pattern: str = FRAME_PATTERN
    width: int = 0
    height: int = 0

    @property
    def duration_s(self) -> float:
        return self.frame_count / self.fps

    def frame_path(self, index: int) -> Path:
        return self.directory / (self.frame_pattern % index)

    def frame_paths(self) -> list[Path]:
        return [self.frame_path(i) for i in range(self.frame_count)]


@dataclass(frozen=True)
class GenerationSettings:
    width: int = DEFAULT_WIDTH
    height: int = DEFAULT_HEIGHT
    fps: int = DEFAULT_FPS
    policy: ConformPolicy = ConformPolicy.TRIM_END
    max_workers: int = 1


def prompt_hash(prompt_text: str) -> str:
    return hashlib.sha256(prompt_text.encode("utf-8")).hexdigest()


def _clip_manifest(request: ClipRequest, frame_count: int) -> dict:
    return {
        "scene_number": request.scene_number,
        "fps": request.fps,
        "frame_count": frame_count,
        "frame_pattern": FRAME_PATTERN,
        "prompt_sha256": prompt_hash(request.prompt_text),
        "seed": request.seed,
        "width": request.width,
        "height": request.height,
    }


def _write_manifest(directory: Path, manifest: dict) -> None:
    (directory / CLIP_MANIFEST_NAME).write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n"
    )


def scene_dir_name(scene_number: int) -> str:
    return f"scene_{scene_number}"


def generate_clip(request: ClipRequest, backend: VideoBackend, clips_dir: str | Path) -> ClipArtifact:
    """Render one scene and persist it under clips_dir/scene_<n>/."""
    clips_dir = Path(clips_dir)
    frames = backend.generate(request)
    if not frames:
        raise MalformedClipError(f"backend returned zero frames for scene {request.scene_number}")
    size: tuple[int, int] | None = None
    for i, frame in enumerate(frames):
        try:
            with Image.open(io.BytesIO(frame)) as img:
                frame_size = img.size
        except Exception as exc:
            raise MalformedClipError(
                f"scene {request.scene_number} frame {i} is not a decodable image: {exc}"
            ) from exc
        if size is None:
            size = frame_size
        elif frame_size != size:
            raise MalformedClipError(
                f"scene {request.scene_number} frames have mixed sizes: {size} vs {frame_size}"
            )
    clips_dir.mkdir(parents=True, exist_ok=True)
    final_dir = clips_dir / scene_dir_name(request.scene_number)
    tmp_dir = clips_dir / f".tmp-scene_{request.scene_number}-{os.getpid()}"
    if tmp_dir.exists():
        shutil.rmtree(tmp_dir)
    tmp_dir.mkdir()
    try:
        for i, frame in enumerate(frames):
            (tmp_dir / (FRAME_PATTERN % i)).write_bytes(frame)
        _write_manifest(tmp_dir, _clip_manifest(request, len(frames)))
        if final_dir.exists():
            shutil.rmtree(final_dir)
        os.rename(tmp_dir, final_dir)
    except BaseException:
        shutil.rmtree(tmp_dir, ignore_errors=True)
        raise
    return ClipArtifact(
        scene_number=request.scene_number,
        fps=request.fps,
        frame_count=len(frames),
        directory=final_dir,
        width=size[0],
        height=size[1],
    )


def conform_clip(
    clip: ClipArtifact,
    target_duration_s: float,
    policy: ConformPolicy = ConformPolicy.TRIM_END,
) -> ClipArtifact:
    """Bring a clip to exactly round(target_duration_s * fps) frames."""
    if clip.frame_count == 0:
        raise MalformedClipError(f"scene {clip.scene_number} clip is empty")
    target = round(target_duration_s * clip.fps)
    if target <= 0:
        raise MalformedClipError(
            f"scene {clip.scene_number}: target duration {target_duration_s}s "
            f"rounds to zero frames at {clip.fps} fps"
        )
    have = clip.frame_count
    if have > target:
        for i in range(target, have):
            clip.frame_path(i).unlink()
    elif have < target:
        if policy is ConformPolicy.TRIM_END:
            raise MalformedClipError(
                f"scene {clip.scene_number}: clip has {have} frames, target {target}; "
                "TrimEnd cannot extend a clip (use HoldLastFrame)"
            )
        last = clip.frame_path(have - 1).read_bytes()
        for i in range(have, target):
            clip.frame_path(i).write_bytes(last)
    if have != target:
        manifest_path = clip.directory / CLIP_MANIFEST_NAME
        manifest = json.loads(manifest_path.read_text())
        manifest["frame_count"] = target
        _write_manifest(clip.directory, manifest)
    return replace(clip, frame_count=target)


def load_clip_artifact(scene_dir: str | Path) -> ClipArtifact:
    """Load a persisted clip, verifying its manifest and frame files."""
    scene_dir = Path(scene_dir)
    manifest_path = scene_dir / CLIP_MANIFEST_NAME
    try:
        manifest = json.loads(manifest_path.read_text())
        clip = ClipArtifact(
            scene_number=int(manifest["scene_number"]),
            fps=int(manifest["fps"]),
            frame_count=int(manifest["frame_count"]),
            directory=scene_dir,
            frame_pattern=str(manifest["frame_pattern"]),
            width=int(manifest.get("width", 0)),
            height=int(manifest.get("height", 0)),
        )
    except (OSError, json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise MalformedClipError(f"unreadable clip manifest in {scene_dir}: {exc}") from exc
    missing = [p.name for p in clip.frame_paths() if not p.exists()]
    if missing:
        raise MalformedClipError(
            f"scene {clip.scene_number} is missing {len(missing)} frame files (first: {missing[0]})"
        )
    return clip


def _reusable_clip(scene_dir: Path, request: ClipRequest, target_frames: int) -> ClipArtifact | None:
    """Return the existing conformed clip if it matches the request exactly."""
    if not (scene_dir / CLIP_MANIFEST_NAME).exists():
        return None
    try:
        clip = load_clip_artifact(scene_dir)
        manifest = json.loads((scene_dir / CLIP_MANIFEST_NAME).read_text())
    except MusevidError:
        return None
    if (
        clip.frame_count == target_frames
        and clip.fps == request.fps
        and manifest.get("prompt_sha256") == prompt_hash(request.prompt_text)
        and manifest.get("seed") == request.seed
        and manifest.get("width") == request.width
        and manifest.get("height") == request.height
    ):
        return clip
    return None


def scene_prompt_text(description: str, style_text: str | None) -> str:
    suffix = style_text.strip() if style_text else ""
    return f"{description} {suffix}" if suffix else description


def generate_all(
    script: VideoScript,
    plan: SegmentPlan,
    style_text: str | None,
    backend: VideoBackend,
    settings: GenerationSettings,
    clips_dir: str | Path,
    run_seed: int = 0,
    progress: Callable[[int], None] | None = None,
) -> list[ClipArtifact]:
    """Generate and conform a clip for every scene.

    Scene n uses seed run_seed + n.  Scenes already on disk from a previous
    attempt are reused when their manifest matches the request.  All scenes
    are attempted even if some fail; failures are then raised together so a
    resume only redoes the failed ones.
    """
    if not script.scenes:
        raise MalformedClipError("cannot generate clips for an empty script")
    if len(script.scenes) != len(plan.segments):
        raise MalformedClipError(
            f"script has {len(script.scenes)} scenes but the plan has {len(plan.segments)} segments"
        )
    clips_dir = Path(clips_dir)

    def job(i: int) -> ClipArtifact:
        scene = script.scenes[i]
        target_duration = plan.segments[i].duration_s
        request = ClipRequest(
            scene_number=scene.number,
            prompt_text=scene_prompt_text(scene.description, style_text),
            duration_s=target_duration,
            width=settings.width,
            height=settings.height,
            fps=settings.fps,
            seed=run_seed + scene.number,
        )
        target_frames = round(target_duration * settings.fps)
        existing = _reusable_clip(clips_dir / scene_dir_name(scene.number), request, target_frames)
        if existing is not None:
            return existing
        clip = generate_clip(request, backend, clips_dir)
        return conform_clip(clip, target_duration, settings.policy)

    indices = list(range(len(script.scenes)))
    results: dict[int, ClipArtifact] = {}
    failures: dict[int, str] = {}

    def run_one(i: int) -> None:
        try:
            results[i] = job(i)
        except MusevidError as exc:
            failures[script.scenes[i].number] = str(exc)
        if progress is not None:
            progress(script.scenes[i].number)

    if settings.max_workers <= 1:
        for i in indices:
            run_one(i)
    else:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=settings.max_workers) as pool:
            list(pool.map(run_one, indices))
    if failures:
        raise GenerationError(failures)
    return [results[i] for i in indices]
