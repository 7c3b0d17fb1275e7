import json
import math
import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.signal.windows import hann

from musevid.errors import NoBeatsError, SegmentationError
from musevid.segmentation import (
    CutReason,
    SegmentationConfig,
    SegmentMethod,
    compute_spectral_novelty,
    detect_beats,
    load_plan,
    novelty_threshold,
    plan_from_json_dict,
    plan_to_json_dict,
    plan_to_text,
    save_plan,
    segment_random,
    segment_rule_based,
    spectral_triggers,
)

from conftest import make_click_track, make_sine, make_switch_tone

CFG = SegmentationConfig(seed=0)
HOP_S = CFG.stft_hop / 22050


# ------------------------------------------------------- novelty oracle


def novelty_oracle(samples: np.ndarray, sr: int, window: int, hop: int) -> np.ndarray:
    """Straight-line reimplementation: framewise log-magnitude spectra,
    half-wave-rectified difference, L2 over bins."""
    win = hann(window, sym=False)
    frames = []
    pos = 0
    while pos + window <= samples.size:
        seg = samples[pos : pos + window] * win
        mag = np.abs(np.fft.rfft(seg))
        frames.append(np.log1p(mag))
        pos += hop
    frames = np.array(frames)
    flux = np.zeros(len(frames))
    for i in range(1, len(frames)):
        diff = frames[i] - frames[i - 1]
        diff[diff < 0] = 0.0
        flux[i] = math.sqrt(float(np.sum(diff * diff)))
    return flux


def test_novelty_matches_independent_oracle():
    buf = make_switch_tone(duration_s=4.0, switch_s=2.0)
    env = compute_spectral_novelty(buf, CFG)
    expected = novelty_oracle(buf.samples, buf.sample_rate, CFG.stft_window, CFG.stft_hop)
    assert env.values.shape == expected.shape
    np.testing.assert_allclose(env.values, expected, rtol=1e-9, atol=1e-12)
    assert env.values[0] == 0.0


def test_novelty_frame_timing():
    env = compute_spectral_novelty(make_sine(3.0), CFG)
    assert env.hop_s == pytest.approx(CFG.stft_hop / 22050)
    # Frame i gains the hop of samples starting at i*hop + (window - hop).
    assert env.start_s == pytest.approx((CFG.stft_window - CFG.stft_hop) / 22050)


def test_novelty_spikes_at_timbre_switch():
    buf = make_switch_tone(duration_s=10.0, switch_s=5.0)
    env = compute_spectral_novelty(buf, CFG)
    peak_time = env.times[int(np.argmax(env.values))]
    assert abs(peak_time - 5.0) < 0.05


def test_threshold_suppresses_periodic_peaks():
    # On a click track every onset has many equally strong peers, so no
    # frame may clear the adaptive threshold.
    buf, _ = make_click_track(20.0)
    env = compute_spectral_novelty(buf, CFG)
    trigger_times = env.times[spectral_triggers(env, CFG)]
    assert trigger_times.size == 0


def test_threshold_passes_isolated_change():
    buf = make_switch_tone(duration_s=20.0, switch_s=10.0)
    env = compute_spectral_novelty(buf, CFG)
    trigger_times = env.times[spectral_triggers(env, CFG)]
    assert trigger_times.size >= 1
    assert min(abs(t - 10.0) for t in trigger_times) < 0.1


def test_threshold_is_at_least_floor():
    env = compute_spectral_novelty(make_sine(5.0), CFG)
    thresh = novelty_threshold(env, CFG)
    assert np.all(thresh >= CFG.novelty_floor)


# ------------------------------------------------------- beat tracking


@pytest.mark.parametrize("bpm", [90.0, 120.0, 150.0])
def test_beat_tracking_tempo_and_alignment(bpm):
    buf, truth = make_click_track(30.0, bpm=bpm)
    env = compute_spectral_novelty(buf, CFG)
    grid = detect_beats(env)
    assert abs(grid.tempo_bpm - bpm) <= 2.0
    hits = 0
    for t in truth:
        if np.min(np.abs(grid.beat_times_s - t)) <= 0.025:
            hits += 1
    assert hits / truth.size >= 0.9


def test_beat_tracking_rejects_flat_envelope():
    env = compute_spectral_novelty(make_sine(20.0), CFG)
    with pytest.raises(NoBeatsError):
        detect_beats(env)


def test_beat_tracking_rejects_silence():
    from musevid.audio import AudioBuffer

    silent = AudioBuffer(samples=np.zeros(22050 * 10), sample_rate=22050)
    env = compute_spectral_novelty(silent, CFG)
    with pytest.raises(NoBeatsError):
        detect_beats(env)


# ------------------------------------------------------- random segmenter


def check_tiling(plan, duration):
    assert plan.segments[0].span.start_s == 0.0
    assert plan.segments[-1].span.end_s == duration
    for a, b in zip(plan.segments, plan.segments[1:]):
        assert a.span.end_s == b.span.start_s


def test_random_plan_basic():
    plan = segment_random(60.0, CFG)
    check_tiling(plan, 60.0)
    assert plan.method is SegmentMethod.RANDOM
    for seg in plan.segments[:-1]:
        assert CFG.min_random_s <= seg.duration_s <= CFG.max_random_s
        assert seg.cut_reason is CutReason.RANDOM_LENGTH
    assert plan.segments[-1].cut_reason is CutReason.END_OF_TRACK


def test_random_plan_deterministic_per_seed():
    a = segment_random(120.0, SegmentationConfig(seed=42))
    b = segment_random(120.0, SegmentationConfig(seed=42))
    c = segment_random(120.0, SegmentationConfig(seed=43))
    assert plan_to_json_dict(a) == plan_to_json_dict(b)
    assert plan_to_json_dict(a) != plan_to_json_dict(c)


def test_random_plan_short_track_single_segment():
    plan = segment_random(1.5, CFG)
    assert len(plan.segments) == 1
    assert plan.segments[0].cut_reason is CutReason.END_OF_TRACK


def test_random_plan_rejects_nonpositive_duration():
    with pytest.raises(SegmentationError):
        segment_random(0.0, CFG)
    with pytest.raises(SegmentationError):
        segment_random(float("nan"), CFG)


@settings(max_examples=200, deadline=None)
@given(
    duration=st.floats(min_value=0.5, max_value=600.0, allow_nan=False, allow_infinity=False),
    seed=st.integers(min_value=0, max_value=2**31 - 1),
)
def test_random_plan_properties(duration, seed):
    plan = segment_random(duration, SegmentationConfig(seed=seed))
    check_tiling(plan, duration)
    total = sum(seg.duration_s for seg in plan.segments)
    assert total == pytest.approx(duration, abs=1e-6)
    for seg in plan.segments[:-1]:
        assert 4.0 - 1e-9 <= seg.duration_s <= 8.0 + 1e-9


# ------------------------------------------------------- rule-based segmenter


def test_rules_featureless_drone_uses_duration_cap():
    plan = segment_rule_based(make_sine(20.0), CFG)
    check_tiling(plan, plan.track_duration_s)
    interior = plan.segments[:-1]
    assert interior, "a 20 s drone must be cut by the duration cap"
    for seg in interior:
        assert seg.cut_reason is CutReason.MAX_DURATION
        assert abs(seg.span.end_s % 7.0) < HOP_S or abs(7.0 - seg.span.end_s % 7.0) < HOP_S


def test_rules_spectral_switch_cut():
    plan = segment_rule_based(make_switch_tone(60.0, switch_s=30.0), CFG)
    spectral = [s.span.end_s for s in plan.segments if s.cut_reason is CutReason.SPECTRAL_CHANGE]
    assert spectral, "timbre switch must produce a SpectralChange cut"
    assert min(abs(c - 30.0) for c in spectral) <= 0.25


def test_rules_beat_count_cuts_every_eighth_beat():
    buf, _ = make_click_track(30.0, bpm=120.0)
    plan = segment_rule_based(buf, CFG)
    beat_cuts = [s.span.end_s for s in plan.segments if s.cut_reason is CutReason.BEAT_COUNT]
    assert len(beat_cuts) >= 3
    gaps = np.diff(np.array(beat_cuts))
    # 8 beats at 120 BPM = 4.0 s between cuts
    assert np.all(np.abs(gaps - 4.0) <= HOP_S + 1e-6)


def test_rules_min_segment_gate():
    plan = segment_rule_based(make_switch_tone(60.0, switch_s=30.0), CFG)
    for seg in plan.segments[:-1]:
        assert seg.duration_s >= CFG.min_segment_s - 1e-9


def test_rules_is_deterministic():
    buf = make_switch_tone(40.0, switch_s=20.0)
    a = segment_rule_based(buf, CFG)
    b = segment_rule_based(buf, CFG)
    assert plan_to_json_dict(a) == plan_to_json_dict(b)


def test_rules_short_track_single_segment():
    plan = segment_rule_based(make_sine(3.0), CFG)
    assert len(plan.segments) == 1
    assert plan.segments[0].cut_reason is CutReason.END_OF_TRACK


# ------------------------------------------------------- plan serialization


def test_plan_roundtrip(tmp_path):
    plan = segment_random(45.0, SegmentationConfig(seed=5))
    data = plan_to_json_dict(plan)
    again = plan_from_json_dict(data)
    assert plan_to_json_dict(again) == data

    path = tmp_path / "segments.json"
    save_plan(plan, path, tmp_path / "segments.txt")
    loaded = load_plan(path)
    assert plan_to_json_dict(loaded) == data
    text = (tmp_path / "segments.txt").read_text()
    assert str(len(plan.segments)) in text


def test_plan_text_mentions_reasons():
    plan = segment_random(30.0, CFG)
    text = plan_to_text(plan)
    assert "RandomLength" in text or "EndOfTrack" in text


def test_plan_json_rejects_garbage():
    with pytest.raises(SegmentationError):
        plan_from_json_dict({"segments": "nope"})


# ------------------------------------------------------- wall-clock sanity


def test_thousand_random_plans_under_a_second():
    start = time.perf_counter()
    for seed in range(1000):
        plan = segment_random(30.0 + (seed % 271), SegmentationConfig(seed=seed))
        check_tiling(plan, plan.track_duration_s)
    assert time.perf_counter() - start < 1.0
