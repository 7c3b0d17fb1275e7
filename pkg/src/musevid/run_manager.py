"""Run orchestration: a run directory, a manifest, and five ordered stages.

Every stage reads its inputs from disk and writes its outputs to disk, so
resuming is just "re-execute the stages that are not Done".  The manifest
records per-stage status and artifact paths; it is rewritten after every
stage transition so a crash between stages loses nothing.

Layout of a run directory:

    manifest.json
    input.wav
    segments/segments.json, segments/segments.txt
    analysis/track.txt, analysis/segment_<i>.txt, analysis/analysis.json
    prompts/script_prompt.txt, prompts/story_prompt.txt
    scripts/story.txt, scripts/raw_response.txt, scripts/parsed_script.json
    clips/scene_<n>/
    output/final.mp4 | output/final.manifest.json
"""

from __future__ import annotations

import datetime as _dt
import json
import os
import shutil
import uuid
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Callable

from filelock import FileLock, Timeout
from pydantic import BaseModel, Field, ValidationError

from .assembly import AssemblySpec, Container, assemble_video
from .audio import load_audio
from .backends.base import BackendEndpointConfig, BackendKind, ChatBackend, EmbeddingBackend, VideoBackend
from .backends.http import HttpChatBackend, HttpEmbeddingBackend, HttpVideoBackend
from .backends.mock import MockEmbeddingBackend, PatternVideoBackend, TemplateChatBackend
from .config import PipelineConfig, config_hash, require_valid_runtime
from .errors import (
    AudioDecodeError,
    IntegrityError,
    MusevidError,
    RunStateError,
    ScriptParseError,
    ScriptValidationError,
)
from .generation import CLIP_MANIFEST_NAME, generate_all, load_clip_artifact, scene_dir_name
from .scripting import (
    ScriptPromptOptions,
    ScriptSource,
    StoryConcept,
    build_clap_script_prompt,
    build_decomposition_prompt,
    build_lalm_story_request,
    duration_sentence,
    load_script,
    parse_script,
    render_style_guidelines,
    request_script,
    save_script,
    validate_script,
)
from .segmentation import load_plan, save_plan, segment_random, segment_rule_based
from .taxonomy import (
    SegmentAnalysis,
    TextEmbeddingCache,
    TrackAnalysis,
    analyses_from_dict,
    analyses_to_dict,
    analyze_segments,
    analyze_track,
    default_taxonomy,
    load_taxonomy,
)

AUTH_TOKEN_ENV = "MUSEVID_AUTH_TOKEN"

STAGE_ORDER = ("Segment", "Analyze", "Script", "Generate", "Assemble")


class StageStatus(str, Enum):
    PENDING = "Pending"
    DONE = "Done"
    FAILED = "Failed"


class StageState(BaseModel):
    status: StageStatus = StageStatus.PENDING
    error: str | None = None
    # Paths relative to the run directory, POSIX separators.
    artifacts: list[str] = Field(default_factory=list)


class RunManifest(BaseModel):
    run_id: str
    created_at: str
    config: PipelineConfig
    config_hash: str
    input_file: str = "input.wav"
    stages: dict[str, StageState]

    def stage(self, name: str) -> StageState:
        return self.stages[name]

    def all_done(self) -> bool:
        return all(s.status is StageStatus.DONE for s in self.stages.values())


@dataclass(frozen=True)
class RunPaths:
    run_dir: Path

    @property
    def manifest(self) -> Path:
        return self.run_dir / "manifest.json"

    @property
    def lock_file(self) -> Path:
        return self.run_dir / ".lock"

    @property
    def input_wav(self) -> Path:
        return self.run_dir / "input.wav"

    @property
    def segments_json(self) -> Path:
        return self.run_dir / "segments" / "segments.json"

    @property
    def segments_txt(self) -> Path:
        return self.run_dir / "segments" / "segments.txt"

    @property
    def analysis_dir(self) -> Path:
        return self.run_dir / "analysis"

    @property
    def track_txt(self) -> Path:
        return self.analysis_dir / "track.txt"

    def segment_txt(self, index: int) -> Path:
        return self.analysis_dir / f"segment_{index}.txt"

    @property
    def analysis_json(self) -> Path:
        return self.analysis_dir / "analysis.json"

    @property
    def prompts_dir(self) -> Path:
        return self.run_dir / "prompts"

    @property
    def script_prompt(self) -> Path:
        return self.prompts_dir / "script_prompt.txt"

    @property
    def story_prompt(self) -> Path:
        return self.prompts_dir / "story_prompt.txt"

    @property
    def scripts_dir(self) -> Path:
        return self.run_dir / "scripts"

    @property
    def story_txt(self) -> Path:
        return self.scripts_dir / "story.txt"

    @property
    def raw_response(self) -> Path:
        return self.scripts_dir / "raw_response.txt"

    @property
    def parsed_script(self) -> Path:
        return self.scripts_dir / "parsed_script.json"

    @property
    def clips_dir(self) -> Path:
        return self.run_dir / "clips"

    @property
    def output_dir(self) -> Path:
        return self.run_dir / "output"

    def final_output(self, container: Container) -> Path:
        name = "final.mp4" if container is Container.MP4_VIA_MUXER else "final.manifest.json"
        return self.output_dir / name

    def relative(self, path: Path) -> str:
        return path.relative_to(self.run_dir).as_posix()


@dataclass
class PipelineBackends:
    embed: EmbeddingBackend | None = None
    chat: ChatBackend | None = None
    chat_audio: ChatBackend | None = None
    video: VideoBackend | None = None

    def close(self) -> None:
        seen: set[int] = set()
        for backend in (self.embed, self.chat, self.chat_audio, self.video):
            if backend is None or id(backend) in seen:
                continue
            seen.add(id(backend))
            closer = getattr(backend, "close", None)
            if callable(closer):
                closer()


def build_backends(config: PipelineConfig) -> PipelineBackends:
    """Construct backends for a config: in-process mocks, or HTTP clients.

    The auth token for HTTP backends comes from the MUSEVID_AUTH_TOKEN
    environment variable; it is never stored in configs or manifests.
    """
    require_valid_runtime(config)
    if config.mock:
        chat = TemplateChatBackend(seed=config.seed)
        return PipelineBackends(
            embed=MockEmbeddingBackend(seed=config.seed),
            chat=chat,
            chat_audio=chat,
            video=PatternVideoBackend(),
        )
    token = os.environ.get(AUTH_TOKEN_ENV)

    def endpoint(url: str, kind: BackendKind) -> BackendEndpointConfig:
        return BackendEndpointConfig(
            base_url=url,
            kind=kind,
            timeout_s=config.backends.timeout_s,
            max_retries=config.backends.max_retries,
            auth_token=token,
        )

    urls = config.backends
    return PipelineBackends(
        embed=HttpEmbeddingBackend(endpoint(urls.embed_url, BackendKind.EMBED)) if urls.embed_url else None,
        chat=HttpChatBackend(endpoint(urls.chat_url, BackendKind.CHAT)) if urls.chat_url else None,
        chat_audio=HttpChatBackend(endpoint(urls.chat_audio_url, BackendKind.CHAT_AUDIO))
        if urls.chat_audio_url
        else None,
        video=HttpVideoBackend(endpoint(urls.video_url, BackendKind.VIDEO)) if urls.video_url else None,
    )


def _utc_now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def _new_manifest(config: PipelineConfig) -> RunManifest:
    return RunManifest(
        run_id=uuid.uuid4().hex,
        created_at=_utc_now(),
        config=config,
        config_hash=config_hash(config),
        stages={name: StageState() for name in STAGE_ORDER},
    )


def save_manifest(paths: RunPaths, manifest: RunManifest) -> None:
    tmp = paths.manifest.with_suffix(".json.tmp")
    tmp.write_text(manifest.model_dump_json(indent=2) + "\n")
    os.replace(tmp, paths.manifest)


def load_manifest(run_dir: str | Path) -> RunManifest:
    paths = RunPaths(Path(run_dir))
    if not paths.manifest.exists():
        raise RunStateError(f"no manifest.json in {paths.run_dir}; not a run directory")
    try:
        manifest = RunManifest.model_validate_json(paths.manifest.read_text())
    except ValidationError as exc:
        raise RunStateError(f"manifest.json is malformed: {exc}") from exc
    missing = [name for name in STAGE_ORDER if name not in manifest.stages]
    if missing:
        raise RunStateError(f"manifest is missing stages: {', '.join(missing)}")
    # A Done stage after a non-Done one means the manifest was tampered with
    # or produced by a buggy writer; order is load-bearing for resume.
    blocked = False
    for name in STAGE_ORDER:
        state = manifest.stages[name]
        if blocked and state.status is StageStatus.DONE:
            raise RunStateError(f"stage {name} is Done but an earlier stage is not")
        if state.status is not StageStatus.DONE:
            blocked = True
    return manifest


def init_run(
    config: PipelineConfig,
    input_audio: str | Path,
    run_dir: str | Path,
) -> RunManifest:
    """Create a run directory: copy the input, write a fresh manifest."""
    require_valid_runtime(config)
    input_audio = Path(input_audio)
    if not input_audio.is_file():
        raise AudioDecodeError(f"input audio not found: {input_audio}")
    run_dir = Path(run_dir)
    if run_dir.exists() and any(run_dir.iterdir()):
        raise RunStateError(f"run directory {run_dir} already exists and is not empty")
    paths = RunPaths(run_dir)
    for sub in ("segments", "analysis", "prompts", "scripts", "clips", "output"):
        (run_dir / sub).mkdir(parents=True, exist_ok=True)
    shutil.copyfile(input_audio, paths.input_wav)
    manifest = _new_manifest(config)
    save_manifest(paths, manifest)
    return manifest


def _load_analyses(paths: RunPaths) -> tuple[TrackAnalysis, list[SegmentAnalysis]]:
    return analyses_from_dict(json.loads(paths.analysis_json.read_text()))


def _taxonomy_for(config: PipelineConfig):
    if config.taxonomy_path:
        return load_taxonomy(config.taxonomy_path)
    return default_taxonomy()


def _stage_segment(paths: RunPaths, config: PipelineConfig, backends: PipelineBackends) -> list[str]:
    seg_config = config.segmentation.to_config(config.seed)
    if config.segmenter == "random":
        buffer = load_audio(paths.input_wav, config.analysis_rate)
        plan = segment_random(buffer.duration_s, seg_config)
    else:
        buffer = load_audio(paths.input_wav, config.analysis_rate)
        plan = segment_rule_based(buffer, seg_config)
    save_plan(plan, paths.segments_json, paths.segments_txt)
    return [paths.relative(paths.segments_json), paths.relative(paths.segments_txt)]


def _stage_analyze(paths: RunPaths, config: PipelineConfig, backends: PipelineBackends) -> list[str]:
    buffer = load_audio(paths.input_wav, config.analysis_rate)
    plan = load_plan(paths.segments_json)
    taxonomy = _taxonomy_for(config)
    cache = TextEmbeddingCache()
    track = analyze_track(buffer, taxonomy, backends.embed, cache=cache)
    segments: list[SegmentAnalysis] = []
    if config.pipeline == "clap":
        segments = analyze_segments(
            buffer, plan, taxonomy, backends.embed, cache=cache, max_workers=config.max_workers
        )
    artifacts = []
    track_lines = track.content_sentences() + track.visual_sentences()
    paths.track_txt.write_text("\n".join(track_lines) + "\n")
    artifacts.append(paths.relative(paths.track_txt))
    for seg in segments:
        lines = seg.sentences() + [duration_sentence(seg.duration_s)]
        paths.segment_txt(seg.segment_index).write_text("\n".join(lines) + "\n")
        artifacts.append(paths.relative(paths.segment_txt(seg.segment_index)))
    paths.analysis_json.write_text(
        json.dumps(analyses_to_dict(track, segments), indent=2, sort_keys=True) + "\n"
    )
    artifacts.append(paths.relative(paths.analysis_json))
    return artifacts


def _request_story(paths: RunPaths, config: PipelineConfig, backends: PipelineBackends) -> str:
    conversation = build_lalm_story_request(
        str(paths.input_wav), additional_prompt=config.prompt.additional_prompt
    )
    return request_script(
        conversation,
        backends.chat_audio,
        prompt_file=paths.story_prompt,
        response_file=paths.story_txt,
    )


def _stage_script(paths: RunPaths, config: PipelineConfig, backends: PipelineBackends) -> list[str]:
    plan = load_plan(paths.segments_json)
    track, segments = _load_analyses(paths)
    artifacts: list[str] = []
    if config.pipeline == "clap":
        source = ScriptSource.CLAP_PIPELINE
        options = ScriptPromptOptions(
            additional_prompt=config.prompt.additional_prompt,
            character_directive=config.prompt.character_directive,
            character_consistency=config.prompt.character_consistency,
        )
        prompt = build_clap_script_prompt(track, segments, options)
    else:
        source = ScriptSource.LALM_PIPELINE
        if paths.story_txt.exists():
            story_text = paths.story_txt.read_text()
        else:
            story_text = _request_story(paths, config, backends)
        artifacts.extend([paths.relative(paths.story_prompt), paths.relative(paths.story_txt)])
        story = StoryConcept(text=story_text.strip(), song_ref=paths.input_wav.name)
        prompt = build_decomposition_prompt(story, plan)

    last_error: MusevidError | None = None
    for _attempt in range(config.retries + 1):
        raw = request_script(
            prompt, backends.chat, prompt_file=paths.script_prompt, response_file=paths.raw_response
        )
        try:
            script = parse_script(raw, len(plan.segments), source)
            report = validate_script(script, plan)
            if not report.ok:
                raise ScriptValidationError([issue.message for issue in report.hard])
        except (ScriptParseError, ScriptValidationError) as exc:
            last_error = exc
            continue
        break
    else:
        assert last_error is not None
        raise last_error
    save_script(script, paths.parsed_script)
    artifacts.extend(
        [
            paths.relative(paths.script_prompt),
            paths.relative(paths.raw_response),
            paths.relative(paths.parsed_script),
        ]
    )
    return artifacts


def _stage_generate(paths: RunPaths, config: PipelineConfig, backends: PipelineBackends) -> list[str]:
    plan = load_plan(paths.segments_json)
    script = load_script(paths.parsed_script)
    track, _segments = _load_analyses(paths)
    style_text = render_style_guidelines(track)
    settings = config.video.to_settings(config.max_workers)
    clips = generate_all(
        script, plan, style_text, backends.video, settings, paths.clips_dir, run_seed=config.seed
    )
    return [
        paths.relative(paths.clips_dir / scene_dir_name(clip.scene_number) / CLIP_MANIFEST_NAME)
        for clip in clips
    ]


def resolve_container(config: PipelineConfig) -> Container:
    if config.container == "auto":
        return Container.MP4_VIA_MUXER if config.muxer else Container.MANIFEST_ONLY
    return Container(config.container)


def _stage_assemble(paths: RunPaths, config: PipelineConfig, backends: PipelineBackends) -> list[str]:
    plan = load_plan(paths.segments_json)
    count = len(plan.segments)
    clips = tuple(
        load_clip_artifact(paths.clips_dir / scene_dir_name(n)) for n in range(1, count + 1)
    )
    container = resolve_container(config)
    spec = AssemblySpec(
        clips=clips,
        audio_path=paths.input_wav,
        output_path=paths.final_output(container),
        container=container,
    )
    output = assemble_video(spec, muxer_command=config.muxer, expected_scene_count=count)
    return [paths.relative(output)]


_STAGE_FNS: dict[str, Callable[[RunPaths, PipelineConfig, PipelineBackends], list[str]]] = {
    "Segment": _stage_segment,
    "Analyze": _stage_analyze,
    "Script": _stage_script,
    "Generate": _stage_generate,
    "Assemble": _stage_assemble,
}


def _acquire_lock(paths: RunPaths) -> FileLock:
    lock = FileLock(str(paths.lock_file))
    try:
        lock.acquire(timeout=0.5)
    except Timeout as exc:
        raise RunStateError(f"run {paths.run_dir} is locked by another process") from exc
    return lock


def run_pipeline(
    run_dir: str | Path,
    backends: PipelineBackends | None = None,
    through_stage: str | None = None,
) -> RunManifest:
    """Execute pending stages in order, stopping after through_stage.

    Done stages are skipped; Failed stages are retried.  The manifest is
    persisted after every status change, and a stage failure is re-raised
    after being recorded so callers see the original error type.
    """
    if through_stage is not None and through_stage not in STAGE_ORDER:
        raise RunStateError(f"unknown stage {through_stage!r}; stages are {', '.join(STAGE_ORDER)}")
    paths = RunPaths(Path(run_dir))
    manifest = load_manifest(run_dir)
    own_backends = backends is None
    lock = _acquire_lock(paths)
    try:
        if backends is None:
            backends = build_backends(manifest.config)
        for name in STAGE_ORDER:
            state = manifest.stages[name]
            if state.status is not StageStatus.DONE:
                try:
                    artifacts = _STAGE_FNS[name](paths, manifest.config, backends)
                except MusevidError as exc:
                    state.status = StageStatus.FAILED
                    state.error = str(exc)
                    save_manifest(paths, manifest)
                    raise
                state.status = StageStatus.DONE
                state.error = None
                state.artifacts = artifacts
                save_manifest(paths, manifest)
            if name == through_stage:
                break
        return manifest
    finally:
        if own_backends and backends is not None:
            backends.close()
        lock.release()


def check_integrity(run_dir: str | Path, manifest: RunManifest | None = None) -> None:
    """Verify that every artifact recorded for a Done stage still exists."""
    paths = RunPaths(Path(run_dir))
    manifest = manifest or load_manifest(run_dir)
    missing: list[str] = []
    if not paths.input_wav.exists():
        missing.append(manifest.input_file)
    for name in STAGE_ORDER:
        state = manifest.stages[name]
        if state.status is not StageStatus.DONE:
            continue
        for rel in state.artifacts:
            if not (paths.run_dir / rel).exists():
                missing.append(rel)
    if missing:
        raise IntegrityError(
            f"artifacts recorded as Done are missing from disk: {', '.join(missing)}"
        )


def resume_run(run_dir: str | Path, backends: PipelineBackends | None = None) -> RunManifest:
    """Continue an interrupted run; a fully Done run is returned untouched."""
    manifest = load_manifest(run_dir)
    check_integrity(run_dir, manifest)
    if manifest.all_done():
        return manifest
    return run_pipeline(run_dir, backends=backends)


def precompute_story(run_dir: str | Path, backends: PipelineBackends | None = None) -> str:
    """Fetch and persist the story concept ahead of the Script stage.

    Only meaningful for the audio-chat pipeline; idempotent when the story
    is already on disk.
    """
    manifest = load_manifest(run_dir)
    if manifest.config.pipeline != "lalm":
        raise RunStateError("story precomputation only applies to the lalm pipeline")
    paths = RunPaths(Path(run_dir))
    if paths.story_txt.exists():
        return paths.story_txt.read_text()
    own_backends = backends is None
    lock = _acquire_lock(paths)
    try:
        if backends is None:
            backends = build_backends(manifest.config)
        return _request_story(paths, manifest.config, backends)
    finally:
        if own_backends and backends is not None:
            backends.close()
        lock.release()
