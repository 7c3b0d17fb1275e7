"""Deterministic signal-level embedder.

Desk-scale stand-in for a learned audio/text embedder: audio maps through
banded spectral statistics and a fixed random projection, text through
hashed token vectors, both into the same unit sphere.  Vectors are stable
across processes (hash-seeded generators only), which is what the pipeline's
seeded runs and the cache keyed on engine identity rely on.  Swap in the
clap-hf engine for semantically meaningful vectors.
"""

from __future__ import annotations

import hashlib
import re

import numpy as np
from scipy.signal import stft

_BANDS = 32
_GLOBAL_FEATURES = 5
_N_FEATURES = 2 * _BANDS + _GLOBAL_FEATURES
_TOKEN_RE = re.compile(r"[a-z0-9']+")


def _hash_seed(text: str) -> int:
    return int.from_bytes(hashlib.sha256(text.encode("utf-8")).digest()[:8], "big")


def _audio_features(samples: np.ndarray, rate: int) -> np.ndarray:
    nperseg = min(1024, samples.size)
    _, _, spec = stft(samples, fs=rate, nperseg=nperseg, noverlap=nperseg // 2)
    mag = np.abs(spec)  # (bins, frames)
    loggy = np.log1p(mag)
    if mag.shape[0] < _BANDS:
        # degenerate short input: repeat bin stats to fill the bands
        band = np.resize(loggy.mean(axis=1), _BANDS)
        band_std = np.resize(loggy.std(axis=1), _BANDS)
    else:
        chunks = np.array_split(loggy, _BANDS, axis=0)
        band = np.array([c.mean() for c in chunks])
        band_std = np.array([c.std() for c in chunks])
    rms = float(np.sqrt(np.mean(samples**2)))
    zcr = float(np.mean(np.abs(np.diff(np.signbit(samples)))))
    power = mag.mean(axis=1)
    total = power.sum()
    if total > 0:
        freqs = np.arange(power.size) / power.size
        centroid = float((freqs * power).sum() / total)
        bandwidth = float(np.sqrt(((freqs - centroid) ** 2 * power).sum() / total))
        flatness = float(np.exp(np.mean(np.log(power + 1e-12))) / (power.mean() + 1e-12))
    else:
        centroid = bandwidth = flatness = 0.0
    return np.concatenate(
        [band, band_std, [np.log1p(rms), zcr, centroid, bandwidth, flatness]]
    )


def _normalize(vec: np.ndarray) -> np.ndarray:
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        out = np.zeros_like(vec)
        out[0] = 1.0
        return out
    return vec / norm


class SpectralEmbedEngine:
    def __init__(self, dim: int = 512, seed: int = 0):
        self.dim = dim
        self.seed = seed
        self.identity = f"spectral-embed:d{dim}:s{seed}"
        self._projection: np.ndarray | None = None

    def load(self) -> None:
        if self._projection is None:
            rng = np.random.default_rng(_hash_seed(f"projection:{self.seed}:{self.dim}"))
            self._projection = rng.standard_normal((_N_FEATURES, self.dim)) / np.sqrt(
                _N_FEATURES
            )

    def embed_audio(self, samples: np.ndarray, rate: int) -> np.ndarray:
        self.load()
        feats = _audio_features(samples, rate)
        return _normalize(feats @ self._projection)

    def embed_texts(self, texts: list[str]) -> np.ndarray:
        self.load()
        rows = np.empty((len(texts), self.dim))
        for i, text in enumerate(texts):
            tokens = _TOKEN_RE.findall(text.lower())
            acc = np.zeros(self.dim)
            for token in tokens or ["<empty>"]:
                rng = np.random.default_rng(_hash_seed(f"token:{self.seed}:{token}"))
                acc += rng.standard_normal(self.dim)
            rows[i] = _normalize(acc)
        return rows
