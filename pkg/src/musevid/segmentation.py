"""Track segmentation.

Two planners produce a contiguous tiling of the track:

* segment_random draws segment lengths uniformly from a configured range.
* segment_rule_based cuts on musical events, in priority order: a spectral
  novelty spike (timbre/instrumentation change), a fixed count of elapsed
  beats, and a hard duration cap.  A minimum-length gate suppresses cuts that
  would create very short segments, and no cut may leave a sliver (< 0.1 s)
  at the end of the track.

The novelty curve is the L2 norm across bins of the half-wave-rectified
frame-to-frame difference of the log1p-magnitude STFT.  Frames are
left-aligned and timestamped at the start of the hop-sized region a frame
gains over its predecessor, i.e. (i*hop + window - hop) / sr.  Flux at
frame i measures what appeared in exactly that region, so this stamp keeps
detected event times within about one hop of the true onset instead of
half a window early or late.

A novelty value counts as a spectral-change trigger when it exceeds
mean + k*std computed over *peer events* (frames above an absolute floor)
in a surrounding window, excluding a small zone around the candidate
itself.  Repeated similar onsets (a click track, a steady drum pattern)
therefore raise the bar for each other and do not trigger, while an
isolated timbre switch still stands out.  With fewer than three peers the
threshold falls back to the floor.
"""

from __future__ import annotations

import bisect
import json
import random
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path

import numpy as np
from scipy.signal.windows import hann

from .audio import AudioBuffer, TimeSpan, slice_span
from .errors import NoBeatsError, SegmentationError

# Cuts closer than this to the end of the track are suppressed or pulled
# back so the final segment never rounds to zero video frames.
END_GUARD_S = 0.1

# Frame-count flexibility and transition cost of the beat-tracking DP.
_DP_TIGHTNESS = 100.0


class CutReason(str, Enum):
    RANDOM_LENGTH = "RandomLength"
    SPECTRAL_CHANGE = "SpectralChange"
    BEAT_COUNT = "BeatCount"
    MAX_DURATION = "MaxDuration"
    END_OF_TRACK = "EndOfTrack"


class SegmentMethod(str, Enum):
    RANDOM = "random"
    RULE_BASED = "rules"


@dataclass(frozen=True)
class SegmentationConfig:
    min_random_s: float = 4.0
    max_random_s: float = 8.0
    max_rule_s: float = 7.0
    beats_per_cut: int = 8
    min_segment_s: float = 2.0
    novelty_threshold_k: float = 3.0
    stft_window: int = 2048
    stft_hop: int = 512
    seed: int = 0
    novelty_window_s: float = 5.0
    novelty_floor: float = 0.1
    novelty_exclusion_s: float = 0.2
    tempo_min_bpm: float = 60.0
    tempo_max_bpm: float = 180.0

    def __post_init__(self):
        problems = []
        if not (0 < self.min_random_s <= self.max_random_s):
            problems.append("need 0 < min_random_s <= max_random_s")
        if self.max_rule_s <= 0:
            problems.append("max_rule_s must be positive")
        if self.beats_per_cut < 1:
            problems.append("beats_per_cut must be >= 1")
        if self.min_segment_s < 0:
            problems.append("min_segment_s must be >= 0")
        if self.min_segment_s >= self.max_rule_s:
            problems.append("min_segment_s must be < max_rule_s")
        if self.stft_window < 16 or self.stft_hop < 1 or self.stft_hop > self.stft_window:
            problems.append("need stft_window >= 16 and 1 <= stft_hop <= stft_window")
        if not (0 < self.tempo_min_bpm < self.tempo_max_bpm):
            problems.append("need 0 < tempo_min_bpm < tempo_max_bpm")
        if problems:
            raise SegmentationError("; ".join(problems))


@dataclass(frozen=True)
class Segment:
    index: int
    span: TimeSpan
    cut_reason: CutReason

    @property
    def duration_s(self) -> float:
        return self.span.duration_s


@dataclass(frozen=True)
class SegmentPlan:
    """Contiguous tiling of [0, track_duration_s] by segments."""

    track_duration_s: float
    method: SegmentMethod
    segments: tuple[Segment, ...]

    def __post_init__(self):
        if not self.segments:
            raise SegmentationError("a plan needs at least one segment")
        if self.segments[0].span.start_s != 0.0:
            raise SegmentationError("first segment must start at 0")
        for prev, cur in zip(self.segments, self.segments[1:]):
            if prev.span.end_s != cur.span.start_s:
                raise SegmentationError(
                    f"segments {prev.index} and {cur.index} do not tile: "
                    f"{prev.span.end_s} != {cur.span.start_s}"
                )
        if self.segments[-1].span.end_s != self.track_duration_s:
            raise SegmentationError("last segment must end at the track duration")
        for i, seg in enumerate(self.segments):
            if seg.index != i:
                raise SegmentationError(f"segment indices must be 0..n-1, got {seg.index} at {i}")


@dataclass(frozen=True)
class OnsetEnvelope:
    """Spectral novelty per STFT frame.

    values[i] is the novelty of frame i; its timestamp is
    start_s + i * hop_s (near the right edge of the frame's window).
    """

    values: np.ndarray
    hop_s: float
    start_s: float

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def times(self) -> np.ndarray:
        return self.start_s + np.arange(self.values.size) * self.hop_s


@dataclass(frozen=True)
class BeatGrid:
    beat_times_s: np.ndarray
    tempo_bpm: float

    def __post_init__(self):
        times = np.asarray(self.beat_times_s, dtype=np.float64)
        if times.size == 0:
            raise NoBeatsError("beat grid has no beats")
        if np.any(np.diff(times) <= 0):
            raise SegmentationError("beat times must be strictly ascending")
        times.setflags(write=False)
        object.__setattr__(self, "beat_times_s", times)


def compute_spectral_novelty(buffer: AudioBuffer, config: SegmentationConfig) -> OnsetEnvelope:
    """Half-wave-rectified log-magnitude spectral flux, L2 over bins."""
    x = buffer.samples
    win, hop = config.stft_window, config.stft_hop
    if x.size < win + hop:
        raise SegmentationError(
            f"buffer too short for novelty analysis: {x.size} samples < window {win} + hop {hop}"
        )
    n_frames = 1 + (x.size - win) // hop
    window = hann(win, sym=False)
    flux = np.zeros(n_frames)
    prev = None
    # Chunked so long tracks do not materialise a giant frame matrix.
    chunk = 2048
    frames_view = np.lib.stride_tricks.sliding_window_view(x, win)[::hop]
    for lo in range(0, n_frames, chunk):
        hi = min(lo + chunk, n_frames)
        spectra = np.log1p(np.abs(np.fft.rfft(frames_view[lo:hi] * window, axis=1)))
        block = np.vstack([prev, spectra]) if prev is not None else spectra
        diff = np.maximum(block[1:] - block[:-1], 0.0)
        start = lo if prev is not None else lo + 1
        flux[start:hi] = np.sqrt((diff * diff).sum(axis=1))
        prev = spectra[-1:]
    flux[0] = 0.0
    return OnsetEnvelope(
        values=flux,
        hop_s=hop / buffer.sample_rate,
        start_s=(win - hop) / buffer.sample_rate,
    )


def novelty_threshold(envelope: OnsetEnvelope, config: SegmentationConfig) -> np.ndarray:
    """Adaptive trigger threshold per frame (see module docstring)."""
    v = envelope.values
    n = v.size
    floor = config.novelty_floor
    above = v >= floor
    rad_out = max(1, round(config.novelty_window_s / 2 / envelope.hop_s))
    rad_in = max(0, round(config.novelty_exclusion_s / envelope.hop_s))

    def windowed(series: np.ndarray, radius: int) -> np.ndarray:
        prefix = np.concatenate([[0.0], np.cumsum(series)])
        idx = np.arange(n)
        lo = np.maximum(idx - radius, 0)
        hi = np.minimum(idx + radius + 1, n)
        return prefix[hi] - prefix[lo]

    w1 = np.where(above, v, 0.0)
    w2 = np.where(above, v * v, 0.0)
    cnt = above.astype(np.float64)
    s1 = windowed(w1, rad_out) - windowed(w1, rad_in)
    s2 = windowed(w2, rad_out) - windowed(w2, rad_in)
    c = windowed(cnt, rad_out) - windowed(cnt, rad_in)
    safe_c = np.maximum(c, 1.0)
    mean = s1 / safe_c
    var = np.maximum(s2 / safe_c - mean * mean, 0.0)
    adaptive = mean + config.novelty_threshold_k * np.sqrt(var)
    thresh = np.where(c >= 3, np.maximum(adaptive, floor), floor)
    return thresh


def spectral_triggers(envelope: OnsetEnvelope, config: SegmentationConfig) -> np.ndarray:
    """Boolean mask of frames whose novelty clears the adaptive threshold."""
    thresh = novelty_threshold(envelope, config)
    return envelope.values >= np.maximum(thresh, config.novelty_floor)


def _estimate_period_frames(env: np.ndarray, hop_s: float, tempo_min: float, tempo_max: float) -> float:
    """Autocorrelation tempo estimate, returned as a (fractional) frame lag."""
    lag_min = int(np.floor(60.0 / (tempo_max * hop_s)))
    lag_max = int(np.ceil(60.0 / (tempo_min * hop_s)))
    lag_min = max(lag_min, 1)
    if lag_max >= env.size or lag_max <= lag_min:
        raise NoBeatsError(
            f"envelope too short for tempo search: {env.size} frames, need > {lag_max}"
        )
    centered = env - env.mean()
    ac = np.correlate(centered, centered, mode="full")[env.size - 1:]
    # A periodic envelope autocorrelates equally at every multiple of its
    # true lag; a log-normal prior centred at 120 BPM breaks those octave
    # ties toward the musically common range.
    lags = np.arange(lag_min, lag_max + 1)
    bpm = 60.0 / (lags * hop_s)
    prior = np.exp(-0.5 * (np.log2(bpm / 120.0)) ** 2)
    search = np.maximum(ac[lag_min: lag_max + 1], 0.0) * prior
    best = int(np.argmax(search))
    if search[best] <= 1e-12:
        raise NoBeatsError("onset envelope shows no periodicity in the tempo range")
    lag = lag_min + best
    # Parabolic interpolation for sub-frame period resolution; an integer
    # lag alone quantises tempo by several BPM at this hop size.
    if 0 < lag < env.size - 1:
        y0, y1, y2 = ac[lag - 1], ac[lag], ac[lag + 1]
        denom = y0 - 2 * y1 + y2
        if abs(denom) > 1e-12:
            delta = 0.5 * (y0 - y2) / denom
            if abs(delta) <= 1.0:
                return lag + float(delta)
    return float(lag)


def detect_beats(
    envelope: OnsetEnvelope,
    tempo_min_bpm: float = 60.0,
    tempo_max_bpm: float = 180.0,
    min_strength: float = 0.1,
) -> BeatGrid:
    """Dynamic-programming beat tracker over the novelty envelope.

    Estimates the tempo by autocorrelation, then finds the beat sequence
    maximising total onset strength minus a log-squared penalty on deviations
    of inter-beat gaps from the estimated period.  Weak leading/trailing
    beats are trimmed against a smoothed onset-strength threshold.

    min_strength is an absolute floor (log-magnitude flux units) the
    envelope peak must reach: steady tones produce a faint near-periodic
    leakage ripple that is not rhythm, and tracking it would turn drones
    into fake beat grids.
    """
    env = envelope.values
    if env.size < 4 or float(env.max()) < max(min_strength, 1e-6):
        raise NoBeatsError("onset envelope is flat; nothing to track")
    period_f = _estimate_period_frames(env, envelope.hop_s, tempo_min_bpm, tempo_max_bpm)
    period = int(round(period_f))
    if period < 2:
        raise NoBeatsError(f"estimated beat period {period_f:.2f} frames is too short to track")

    std = env.std()
    norm = env / std if std > 0 else env
    # Gaussian-weighted local onset strength around each frame.
    t = np.arange(-period, period + 1)
    gauss = np.exp(-0.5 * (t * 32.0 / period) ** 2)
    localscore = np.convolve(norm, gauss, mode="same")

    offsets = np.arange(-2 * period, -(period // 2) + 1)
    txwt = -_DP_TIGHTNESS * (np.log(-offsets / period_f) ** 2)
    backlink = np.full(env.size, -1, dtype=int)
    cumscore = np.zeros(env.size)
    score_thresh = 0.01 * localscore.max()
    first_beat = True
    for i, score_i in enumerate(localscore):
        z_pad = max(0, min(-offsets[0] - i, offsets.size))
        candidates = txwt.copy()
        candidates[z_pad:] += cumscore[offsets[z_pad:] + i]
        best = int(np.argmax(candidates))
        cumscore[i] = score_i + candidates[best]
        if first_beat and score_i < score_thresh:
            backlink[i] = -1
        else:
            backlink[i] = offsets[best] + i
            first_beat = False

    # Backtrack from the strongest plausible final beat.
    interior = np.zeros(env.size, dtype=bool)
    interior[1:-1] = (cumscore[1:-1] > cumscore[:-2]) & (cumscore[1:-1] >= cumscore[2:])
    if not interior.any():
        raise NoBeatsError("beat tracking produced no score maxima")
    med = np.median(cumscore[interior])
    tail_candidates = np.flatnonzero(interior & (cumscore * 2 > med))
    if tail_candidates.size == 0:
        raise NoBeatsError("beat tracking produced no confident final beat")
    tail = int(tail_candidates.max())
    beats = [tail]
    while backlink[beats[-1]] >= 0:
        beats.append(backlink[beats[-1]])
    frames = np.array(beats[::-1], dtype=int)

    # Trim spurious weak beats at either end.
    strength = np.convolve(localscore[frames], hann(5, sym=True), mode="same")
    threshold = 0.5 * float(np.sqrt((strength ** 2).mean()))
    valid = np.flatnonzero(strength > threshold)
    if valid.size == 0:
        raise NoBeatsError("all tracked beats fell below the strength threshold")
    frames = frames[valid.min(): valid.max() + 1]
    if frames.size < 2:
        raise NoBeatsError("fewer than two confident beats")

    times = envelope.start_s + frames * envelope.hop_s
    mean_gap = float((times[-1] - times[0]) / (frames.size - 1))
    tempo = 60.0 / mean_gap if mean_gap > 0 else 60.0 / (period_f * envelope.hop_s)
    tempo = float(np.clip(tempo, tempo_min_bpm, tempo_max_bpm))
    return BeatGrid(beat_times_s=times, tempo_bpm=tempo)


def segment_random(track_duration_s: float, config: SegmentationConfig) -> SegmentPlan:
    """Tile the track with uniformly drawn segment lengths.

    Drawn cuts past the end are discarded; the final segment absorbs the
    remainder (and any remainder shorter than END_GUARD_S merges into the
    last drawn segment) and is labeled EndOfTrack.
    """
    if not np.isfinite(track_duration_s) or track_duration_s <= 0:
        raise SegmentationError(f"track duration must be positive, got {track_duration_s}")
    rng = random.Random(config.seed)
    cuts: list[float] = []
    t = 0.0
    while True:
        t += rng.uniform(config.min_random_s, config.max_random_s)
        if t >= track_duration_s:
            break
        cuts.append(t)
    if cuts and track_duration_s - cuts[-1] < END_GUARD_S:
        cuts.pop()
    return _plan_from_cuts(
        track_duration_s,
        SegmentMethod.RANDOM,
        [(c, CutReason.RANDOM_LENGTH) for c in cuts],
    )


def segment_rule_based(buffer: AudioBuffer, config: SegmentationConfig) -> SegmentPlan:
    """Cut on spectral changes, elapsed beats, and a duration cap.

    Priority within a frame: SpectralChange, then BeatCount, then
    MaxDuration.  Every cut needs min_segment_s elapsed since the previous
    one.  Beat-count cuts land on the time of the configured beat; duration
    cuts land at exactly last_cut + max_rule_s (pulled back to leave at
    least END_GUARD_S of track when the cap lands inside the guard zone).
    If beat tracking fails the beat rule is disabled and the other rules
    still apply.
    """
    duration = buffer.duration_s
    envelope = compute_spectral_novelty(buffer, config)
    triggers = spectral_triggers(envelope, config)
    try:
        beats = detect_beats(
            envelope,
            config.tempo_min_bpm,
            config.tempo_max_bpm,
            min_strength=config.novelty_floor,
        ).beat_times_s
    except NoBeatsError:
        beats = None

    times = envelope.times
    cuts: list[tuple[float, CutReason]] = []
    last = 0.0

    def allowed(c: float) -> bool:
        return c - last >= config.min_segment_s - 1e-9 and duration - c >= END_GUARD_S

    for i in range(times.size):
        t = float(times[i])
        if t >= duration - END_GUARD_S:
            break
        if triggers[i] and allowed(t):
            cuts.append((t, CutReason.SPECTRAL_CHANGE))
            last = t
            continue
        if beats is not None:
            b0 = bisect.bisect_right(beats, last + 1e-9)
            k = b0 + config.beats_per_cut - 1
            cut_at = None
            if k < beats.size and beats[k] <= t:
                if allowed(beats[k]):
                    cut_at = float(beats[k])
                else:
                    # The counted beat fell inside the minimum-length gate;
                    # take the first later beat that clears it.
                    j = k + 1
                    while j < beats.size and beats[j] <= t:
                        if allowed(beats[j]):
                            cut_at = float(beats[j])
                            break
                        j += 1
            if cut_at is not None:
                cuts.append((cut_at, CutReason.BEAT_COUNT))
                last = cut_at
                continue
        if t - last >= config.max_rule_s:
            c = last + config.max_rule_s
            if duration - c < END_GUARD_S:
                c = duration - END_GUARD_S
            if allowed(c):
                cuts.append((c, CutReason.MAX_DURATION))
                last = c
    return _plan_from_cuts(duration, SegmentMethod.RULE_BASED, cuts)


def _plan_from_cuts(
    track_duration_s: float,
    method: SegmentMethod,
    cuts: list[tuple[float, CutReason]],
) -> SegmentPlan:
    bounds = [0.0] + [c for c, _ in cuts] + [track_duration_s]
    reasons = [r for _, r in cuts] + [CutReason.END_OF_TRACK]
    segments = tuple(
        Segment(index=i, span=TimeSpan(bounds[i], bounds[i + 1]), cut_reason=reasons[i])
        for i in range(len(reasons))
    )
    return SegmentPlan(track_duration_s=track_duration_s, method=method, segments=segments)


def slice_plan_segments(buffer: AudioBuffer, plan: SegmentPlan) -> list[AudioBuffer]:
    """Cut the buffer into one sub-buffer per plan segment."""
    return [slice_span(buffer, seg.span) for seg in plan.segments]


def plan_to_json_dict(plan: SegmentPlan) -> dict:
    """JSON form with boundaries at millisecond precision."""
    return {
        "track_duration_s": round(plan.track_duration_s, 3),
        "method": plan.method.value,
        "segments": [
            {
                "index": seg.index,
                "start_s": round(seg.span.start_s, 3),
                "end_s": round(seg.span.end_s, 3),
                "cut_reason": seg.cut_reason.value,
            }
            for seg in plan.segments
        ],
    }


def plan_from_json_dict(data: dict) -> SegmentPlan:
    try:
        segments = tuple(
            Segment(
                index=s["index"],
                span=TimeSpan(float(s["start_s"]), float(s["end_s"])),
                cut_reason=CutReason(s["cut_reason"]),
            )
            for s in data["segments"]
        )
        return SegmentPlan(
            track_duration_s=float(data["track_duration_s"]),
            method=SegmentMethod(data["method"]),
            segments=segments,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SegmentationError(f"malformed segment plan JSON: {exc}") from exc


def save_plan(plan: SegmentPlan, json_path: str | Path, text_path: str | Path | None = None) -> None:
    Path(json_path).write_text(json.dumps(plan_to_json_dict(plan), indent=2, sort_keys=True) + "\n")
    if text_path is not None:
        Path(text_path).write_text(plan_to_text(plan))


def load_plan(json_path: str | Path) -> SegmentPlan:
    try:
        data = json.loads(Path(json_path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise SegmentationError(f"cannot read segment plan {json_path}: {exc}") from exc
    return plan_from_json_dict(data)


def plan_to_text(plan: SegmentPlan) -> str:
    """Human-readable table of the plan."""
    lines = [
        f"Segment plan: {len(plan.segments)} segments over "
        f"{plan.track_duration_s:.3f} s (method: {plan.method.value})"
    ]
    for seg in plan.segments:
        lines.append(
            f"  segment {seg.index}: {seg.span.start_s:9.3f} .. {seg.span.end_s:9.3f}"
            f"  ({seg.duration_s:7.3f} s)  {seg.cut_reason.value}"
        )
    return "\n".join(lines) + "\n"
