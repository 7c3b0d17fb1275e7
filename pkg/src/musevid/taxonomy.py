"""Zero-shot labeling of audio against a text-label taxonomy.

Each category holds candidate label strings; classification embeds the audio
and every label with the embedding backend, L2-normalizes both sides, and
picks the label with the highest cosine similarity (ties break toward the
lowest taxonomy index).  Categories are scoped: SegmentWise categories are
evaluated per segment, ContentStyle and VisualStyle once for the full track.

Classifications render to the sentence form consumed by prompts:
"<Display name> is <label>.".  Note that labels may themselves end with a
period (the instrumental-energy category does); rendering appends the final
period regardless, so such labels produce "..".  That is intentional and
matched by the prompt fixtures.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np

from .audio import AudioBuffer
from .errors import AnalysisError, BackendError, MusevidError
from .segmentation import SegmentPlan, slice_plan_segments

TAXONOMY_RESOURCE = "taxonomy.json"


class LabelScope(str, Enum):
    SEGMENT_WISE = "SegmentWise"
    CONTENT_STYLE = "ContentStyle"
    VISUAL_STYLE = "VisualStyle"


class TaxonomyError(MusevidError):
    code = "taxonomy"


@dataclass(frozen=True)
class LabelCategory:
    id: str
    display_name: str
    labels: tuple[str, ...]
    scope: LabelScope

    def __post_init__(self):
        if not self.id or not self.display_name:
            raise TaxonomyError("category id and display_name must be non-empty")
        if not self.labels:
            raise TaxonomyError(f"category {self.id} has no labels")
        if len(set(self.labels)) != len(self.labels):
            raise TaxonomyError(f"category {self.id} has duplicate labels")


@dataclass(frozen=True)
class LabelTaxonomy:
    categories: tuple[LabelCategory, ...]
    version: str

    def __post_init__(self):
        ids = [c.id for c in self.categories]
        if len(set(ids)) != len(ids):
            raise TaxonomyError("category ids must be unique")
        present = {c.scope for c in self.categories}
        missing = set(LabelScope) - present
        if missing:
            raise TaxonomyError(f"taxonomy must cover all scopes; missing {sorted(s.value for s in missing)}")

    def by_scope(self, scope: LabelScope) -> tuple[LabelCategory, ...]:
        return tuple(c for c in self.categories if c.scope == scope)

    def get(self, category_id: str) -> LabelCategory:
        for c in self.categories:
            if c.id == category_id:
                return c
        raise TaxonomyError(f"no such category: {category_id}")


def taxonomy_from_dict(data: dict) -> LabelTaxonomy:
    try:
        categories = tuple(
            LabelCategory(
                id=c["id"],
                display_name=c["display_name"],
                labels=tuple(c["labels"]),
                scope=LabelScope(c["scope"]),
            )
            for c in data["categories"]
        )
        return LabelTaxonomy(categories=categories, version=str(data["version"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise TaxonomyError(f"malformed taxonomy document: {exc}") from exc


def taxonomy_to_dict(taxonomy: LabelTaxonomy) -> dict:
    return {
        "version": taxonomy.version,
        "categories": [
            {
                "id": c.id,
                "display_name": c.display_name,
                "scope": c.scope.value,
                "labels": list(c.labels),
            }
            for c in taxonomy.categories
        ],
    }


def load_taxonomy(path: str | Path) -> LabelTaxonomy:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise TaxonomyError(f"cannot read taxonomy {path}: {exc}") from exc
    return taxonomy_from_dict(data)


def default_taxonomy() -> LabelTaxonomy:
    """The taxonomy shipped with the package."""
    text = resources.files("musevid.data").joinpath(TAXONOMY_RESOURCE).read_text()
    return taxonomy_from_dict(json.loads(text))


@dataclass(frozen=True)
class CategoryClassification:
    category_id: str
    display_name: str
    chosen_label: str
    scores: dict[str, float]

    def sentence(self) -> str:
        return f"{self.display_name} is {self.chosen_label}."


@dataclass(frozen=True)
class SegmentAnalysis:
    segment_index: int
    duration_s: float
    classifications: tuple[CategoryClassification, ...]

    def sentences(self) -> list[str]:
        return [c.sentence() for c in self.classifications]


@dataclass(frozen=True)
class TrackAnalysis:
    content_style: tuple[CategoryClassification, ...]
    visual_style: tuple[CategoryClassification, ...]

    def content_sentences(self) -> list[str]:
        return [c.sentence() for c in self.content_style]

    def visual_sentences(self) -> list[str]:
        return [c.sentence() for c in self.visual_style]


class EmbeddingBackendProtocol(Protocol):
    @property
    def identity(self) -> str: ...

    def embed_audio(self, audio: AudioBuffer) -> np.ndarray: ...

    def embed_texts(self, texts: Sequence[str]) -> np.ndarray: ...


class TextEmbeddingCache:
    """Per-process cache of label-text embeddings, keyed by backend identity.

    Labels repeat across every segment of every run; embedding each once per
    backend saves most of the embed traffic. Reads and writes share a lock
    (entries are tiny; contention is not a concern at this scale).
    """

    def __init__(self):
        self._entries: dict[tuple[str, str], np.ndarray] = {}
        self._lock = threading.Lock()

    def get_many(
        self, backend: EmbeddingBackendProtocol, texts: Sequence[str]
    ) -> list[np.ndarray]:
        ident = backend.identity
        with self._lock:
            missing = [t for t in texts if (ident, t) not in self._entries]
        if missing:
            vectors = np.asarray(backend.embed_texts(missing), dtype=np.float64)
            if vectors.ndim != 2 or vectors.shape[0] != len(missing):
                raise BackendError(
                    f"text embedding backend returned shape {vectors.shape} for {len(missing)} texts"
                )
            with self._lock:
                for text, vec in zip(missing, vectors):
                    self._entries[(ident, text)] = vec
        with self._lock:
            return [self._entries[(ident, t)] for t in texts]


_DEFAULT_CACHE = TextEmbeddingCache()


def _l2_normalize(vec: np.ndarray) -> np.ndarray:
    norm = float(np.linalg.norm(vec))
    if norm == 0.0 or not np.isfinite(norm):
        raise BackendError("embedding has zero or non-finite norm")
    return vec / norm


def classify_category(
    audio: AudioBuffer,
    category: LabelCategory,
    backend: EmbeddingBackendProtocol,
    cache: TextEmbeddingCache | None = None,
    audio_vec: np.ndarray | None = None,
) -> CategoryClassification:
    """Pick the category label most similar to the audio.

    audio_vec short-circuits re-embedding when the caller classifies the
    same audio against several categories.
    """
    cache = cache if cache is not None else _DEFAULT_CACHE
    if audio_vec is None:
        audio_vec = np.asarray(backend.embed_audio(audio), dtype=np.float64)
    a = _l2_normalize(np.asarray(audio_vec, dtype=np.float64))
    label_vecs = cache.get_many(backend, category.labels)
    scores: dict[str, float] = {}
    best_idx = 0
    best_score = -np.inf
    for i, (label, vec) in enumerate(zip(category.labels, label_vecs)):
        if vec.shape != a.shape:
            raise BackendError(
                f"embedding dimension mismatch: audio {a.shape} vs label {vec.shape}"
            )
        s = float(np.dot(a, _l2_normalize(vec)))
        scores[label] = s
        if s > best_score:
            best_score = s
            best_idx = i
    return CategoryClassification(
        category_id=category.id,
        display_name=category.display_name,
        chosen_label=category.labels[best_idx],
        scores=scores,
    )


def _classify_scopes(
    audio: AudioBuffer,
    categories: Sequence[LabelCategory],
    backend: EmbeddingBackendProtocol,
    cache: TextEmbeddingCache | None,
) -> tuple[CategoryClassification, ...]:
    audio_vec = np.asarray(backend.embed_audio(audio), dtype=np.float64)
    return tuple(
        classify_category(audio, cat, backend, cache=cache, audio_vec=audio_vec)
        for cat in categories
    )


def analyze_track(
    buffer: AudioBuffer,
    taxonomy: LabelTaxonomy,
    backend: EmbeddingBackendProtocol,
    cache: TextEmbeddingCache | None = None,
) -> TrackAnalysis:
    """Classify the whole track for every ContentStyle and VisualStyle category."""
    audio_vec = np.asarray(backend.embed_audio(buffer), dtype=np.float64)
    content = tuple(
        classify_category(buffer, cat, backend, cache=cache, audio_vec=audio_vec)
        for cat in taxonomy.by_scope(LabelScope.CONTENT_STYLE)
    )
    visual = tuple(
        classify_category(buffer, cat, backend, cache=cache, audio_vec=audio_vec)
        for cat in taxonomy.by_scope(LabelScope.VISUAL_STYLE)
    )
    return TrackAnalysis(content_style=content, visual_style=visual)


def analyze_segments(
    buffer: AudioBuffer,
    plan: SegmentPlan,
    taxonomy: LabelTaxonomy,
    backend: EmbeddingBackendProtocol,
    cache: TextEmbeddingCache | None = None,
    max_workers: int = 1,
) -> list[SegmentAnalysis]:
    """Classify every plan segment against all SegmentWise categories.

    Segment jobs are independent; with max_workers > 1 they run in a thread
    pool.  Results are always ordered by segment index.
    """
    categories = taxonomy.by_scope(LabelScope.SEGMENT_WISE)
    slices = slice_plan_segments(buffer, plan)

    def job(i: int) -> SegmentAnalysis:
        try:
            classifications = _classify_scopes(slices[i], categories, backend, cache)
        except MusevidError as exc:
            raise AnalysisError(f"segment {i}: {exc}", segment_index=i) from exc
        return SegmentAnalysis(
            segment_index=i,
            duration_s=plan.segments[i].duration_s,
            classifications=classifications,
        )

    indices = range(len(plan.segments))
    if max_workers <= 1:
        return [job(i) for i in indices]
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        return list(pool.map(job, indices))


def classification_to_dict(c: CategoryClassification) -> dict:
    return {
        "category_id": c.category_id,
        "display_name": c.display_name,
        "chosen_label": c.chosen_label,
        "scores": {k: round(v, 6) for k, v in c.scores.items()},
    }


def classification_from_dict(d: dict) -> CategoryClassification:
    return CategoryClassification(
        category_id=d["category_id"],
        display_name=d["display_name"],
        chosen_label=d["chosen_label"],
        scores={k: float(v) for k, v in d["scores"].items()},
    )


def analyses_to_dict(track: TrackAnalysis, segments: Sequence[SegmentAnalysis]) -> dict:
    return {
        "track": {
            "content_style": [classification_to_dict(c) for c in track.content_style],
            "visual_style": [classification_to_dict(c) for c in track.visual_style],
        },
        "segments": [
            {
                "segment_index": s.segment_index,
                "duration_s": s.duration_s,
                "classifications": [classification_to_dict(c) for c in s.classifications],
            }
            for s in segments
        ],
    }


def analyses_from_dict(data: dict) -> tuple[TrackAnalysis, list[SegmentAnalysis]]:
    try:
        track = TrackAnalysis(
            content_style=tuple(classification_from_dict(c) for c in data["track"]["content_style"]),
            visual_style=tuple(classification_from_dict(c) for c in data["track"]["visual_style"]),
        )
        segments = [
            SegmentAnalysis(
                segment_index=s["segment_index"],
                duration_s=float(s["duration_s"]),
                classifications=tuple(classification_from_dict(c) for c in s["classifications"]),
            )
            for s in data["segments"]
        ]
    except (KeyError, TypeError, ValueError) as exc:
        raise AnalysisError(f"malformed analysis document: {exc}") from exc
    return track, segments
