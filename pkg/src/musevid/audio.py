"""Audio loading and slicing.

Everything downstream works on mono float64 buffers in [-1, 1] at a single
analysis rate (22050 Hz by default).  WAV is the only container accepted:
16-bit PCM and 32-bit float are the supported encodings, with 8/24/32-bit
integer PCM normalised when scipy can decode them.  Multi-channel input is
downmixed by taking the per-sample mean across channels.  Resampling is
polyphase windowed-sinc (scipy.signal.resample_poly).
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np
from scipy.io import wavfile
from scipy.signal import resample_poly

from .errors import AudioDecodeError, SpanError

ANALYSIS_RATE = 22050

# Peak value per integer dtype, used to scale into [-1, 1].
_INT_SCALE = {
    np.dtype(np.int16): 32768.0,
    np.dtype(np.int32): 2147483648.0,
}


@dataclass(frozen=True)
class AudioBuffer:
    """Immutable mono audio: float64 samples in [-1, 1] plus a sample rate."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise AudioDecodeError(f"AudioBuffer requires mono 1-D samples, got shape {samples.shape}")
        if samples.size == 0:
            raise AudioDecodeError("AudioBuffer requires at least one sample")
        if self.sample_rate <= 0:
            raise AudioDecodeError(f"invalid sample rate {self.sample_rate}")
        if not np.all(np.isfinite(samples)):
            raise AudioDecodeError("samples contain NaN or infinity")
        samples = np.clip(samples, -1.0, 1.0)
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate


@dataclass(frozen=True)
class TimeSpan:
    """Half-open interval [start_s, end_s) in seconds."""

    start_s: float
    end_s: float

    def __post_init__(self):
        if not (np.isfinite(self.start_s) and np.isfinite(self.end_s)):
            raise SpanError(f"span bounds must be finite, got [{self.start_s}, {self.end_s})")
        if self.start_s < 0 or self.start_s >= self.end_s:
            raise SpanError(f"span requires 0 <= start < end, got [{self.start_s}, {self.end_s})")

    @property
    def duration_s(self) -> float:
        return self.end_s - self.start_s


def _normalize_samples(data: np.ndarray) -> np.ndarray:
    if data.dtype in _INT_SCALE:
        return data.astype(np.float64) / _INT_SCALE[data.dtype]
    if data.dtype == np.uint8:
        return (data.astype(np.float64) - 128.0) / 128.0
    if data.dtype in (np.float32, np.float64):
        return data.astype(np.float64)
    raise AudioDecodeError(f"unsupported WAV sample encoding: {data.dtype}")


def _decode_wav(source, analysis_rate: int, label: str) -> AudioBuffer:
    try:
        rate, data = wavfile.read(source)
    except AudioDecodeError:
        raise
    except Exception as exc:
        raise AudioDecodeError(f"cannot read WAV {label}: {exc}") from exc
    if data.size == 0:
        raise AudioDecodeError(f"{label} contains no samples")
    samples = _normalize_samples(np.atleast_1d(data))
    if samples.ndim == 2:
        samples = samples.mean(axis=1)
    elif samples.ndim > 2:
        raise AudioDecodeError(f"{label} has unsupported shape {samples.shape}")
    if analysis_rate <= 0:
        raise AudioDecodeError(f"invalid analysis rate {analysis_rate}")
    if rate != analysis_rate:
        ratio = Fraction(analysis_rate, rate)
        samples = resample_poly(samples, ratio.numerator, ratio.denominator)
        if samples.size == 0:
            raise AudioDecodeError(f"{label} is too short to resample to {analysis_rate} Hz")
    return AudioBuffer(samples=samples, sample_rate=analysis_rate)


def load_audio(path: str | Path, analysis_rate: int = ANALYSIS_RATE) -> AudioBuffer:
    """Load a WAV file as a mono buffer at analysis_rate."""
    path = Path(path)
    if not path.exists():
        raise AudioDecodeError(f"no such file: {path}")
    return _decode_wav(str(path), analysis_rate, str(path))


def load_audio_bytes(data: bytes, analysis_rate: int = ANALYSIS_RATE) -> AudioBuffer:
    """Decode in-memory WAV bytes; same contract as load_audio."""
    return _decode_wav(io.BytesIO(data), analysis_rate, "wav payload")


def slice_span(buffer: AudioBuffer, span: TimeSpan) -> AudioBuffer:
    """Extract [start_s, end_s) as a new buffer.

    The end may overshoot the buffer by at most one sample (rounding slack
    from plans whose last boundary equals the track duration).
    """
    start = round(span.start_s * buffer.sample_rate)
    end = round(span.end_s * buffer.sample_rate)
    n = buffer.samples.size
    if start >= n:
        raise SpanError(f"span start {span.start_s}s is beyond the {buffer.duration_s:.6f}s buffer")
    if end > n:
        if end - n > 1:
            raise SpanError(f"span end {span.end_s}s is beyond the {buffer.duration_s:.6f}s buffer")
        end = n
    if end <= start:
        raise SpanError(f"span [{span.start_s}, {span.end_s}) is empty at {buffer.sample_rate} Hz")
    return AudioBuffer(samples=buffer.samples[start:end].copy(), sample_rate=buffer.sample_rate)


def write_wav(path: str | Path, buffer: AudioBuffer, encoding: str = "pcm16") -> None:
    """Write a buffer as WAV; encoding is "pcm16" or "float32"."""
    if encoding == "pcm16":
        data = np.round(buffer.samples * 32767.0).astype(np.int16)
    elif encoding == "float32":
        data = buffer.samples.astype(np.float32)
    else:
        raise ValueError(f"unknown encoding {encoding!r}")
    wavfile.write(str(path), buffer.sample_rate, data)


def encode_wav_bytes(buffer: AudioBuffer, encoding: str = "float32") -> bytes:
    """Serialize a buffer to WAV bytes (used by the HTTP backend client)."""
    if encoding == "pcm16":
        data = np.round(buffer.samples * 32767.0).astype(np.int16)
    elif encoding == "float32":
        data = buffer.samples.astype(np.float32)
    else:
        raise ValueError(f"unknown encoding {encoding!r}")
    out = io.BytesIO()
    wavfile.write(out, buffer.sample_rate, data)
    return out.getvalue()
