"""WAV decoding for request payloads.

Accepts the encodings the pipeline client produces (IEEE float and integer
PCM), returns mono float64 in [-1, 1] at the file's native rate.
"""

from __future__ import annotations

import io

import numpy as np
from scipy.io import wavfile

from .errors import AdapterError

_INT_SCALE = {
    np.dtype(np.int16): 32768.0,
    np.dtype(np.int32): 2147483648.0,
}


def decode_wav(data: bytes) -> tuple[np.ndarray, int]:
    try:
        rate, raw = wavfile.read(io.BytesIO(data))
    except Exception as exc:
        raise AdapterError(400, "audio payload is not decodable WAV", str(exc)) from exc
    samples = np.asarray(raw)
    if samples.size == 0:
        raise AdapterError(400, "audio payload contains no samples")
    if samples.ndim == 2:
        samples = samples.mean(axis=1)
    if samples.dtype == np.uint8:
        samples = (samples.astype(np.float64) - 128.0) / 128.0
    elif samples.dtype in _INT_SCALE:
        samples = samples.astype(np.float64) / _INT_SCALE[samples.dtype]
    else:
        samples = samples.astype(np.float64)
    return samples, int(rate)


def duration_s(samples: np.ndarray, rate: int) -> float:
    return samples.size / rate
