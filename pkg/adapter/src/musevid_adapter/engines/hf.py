"""Engines backed by transformers checkpoints.

Heavy imports happen inside load(), so the module is importable (and the
service startable) without torch installed; routes configured with these
engines fail with a clear message instead.  Decoding is greedy and seeds are
fixed, keeping output as reproducible as the underlying model allows.
"""

from __future__ import annotations

import math

import numpy as np

from ..errors import AdapterError, EngineError
from .base import ChatTurn


def _resolve_device(device: str) -> str:
    if device != "auto":
        return device
    import torch

    return "cuda" if torch.cuda.is_available() else "cpu"


def _resample(samples: np.ndarray, rate: int, target: int) -> np.ndarray:
    if rate == target:
        return samples
    from scipy.signal import resample_poly

    g = math.gcd(rate, target)
    return resample_poly(samples, target // g, rate // g)


class ClapEmbedEngine:
    """Joint audio/text embedder over a CLAP-family checkpoint."""

    def __init__(self, model: str, device: str = "cpu"):
        self.model_id = model
        self.device = device
        self.identity = f"clap-hf:{model}"
        self._model = None
        self._processor = None

    def load(self) -> None:
        if self._model is not None:
            return
        try:
            import torch  # noqa: F401
            from transformers import ClapModel, ClapProcessor
        except ImportError as exc:
            raise EngineError(
                "clap-hf engine needs the hf extra (torch, transformers)", str(exc)
            ) from exc
        try:
            self._processor = ClapProcessor.from_pretrained(self.model_id)
            device = _resolve_device(self.device)
            self._model = ClapModel.from_pretrained(self.model_id).to(device).eval()
            self._device = device
        except Exception as exc:
            raise EngineError(f"cannot load CLAP checkpoint {self.model_id!r}", str(exc)) from exc

    def embed_audio(self, samples: np.ndarray, rate: int) -> np.ndarray:
        self.load()
        import torch

        extractor = self._processor.feature_extractor
        target = extractor.sampling_rate
        audio = _resample(samples.astype(np.float64), rate, target)
        # truncate deterministically; the extractor's own long-clip handling
        # may pick a random crop
        max_length_s = getattr(extractor, "max_length_s", None)
        if max_length_s:
            audio = audio[: int(max_length_s * target)]
        inputs = self._processor(
            audio=[audio], sampling_rate=target, return_tensors="pt"
        ).to(self._device)
        with torch.no_grad():
            out = self._model.get_audio_features(**inputs)
        vec = out.pooler_output if hasattr(out, "pooler_output") else out
        return vec[0].cpu().numpy()

    def embed_texts(self, texts: list[str]) -> np.ndarray:
        self.load()
        import torch

        inputs = self._processor(text=list(texts), return_tensors="pt", padding=True).to(
            self._device
        )
        with torch.no_grad():
            out = self._model.get_text_features(**inputs)
        vecs = out.pooler_output if hasattr(out, "pooler_output") else out
        return vecs.cpu().numpy()


class CausalChatEngine:
    """Greedy-decoding chat over a causal language model checkpoint.

    Text-only: routes that must accept audio attachments need an
    audio-capable model behind a different engine.
    """

    def __init__(self, model: str, device: str = "cpu", max_new_tokens: int = 768):
        self.model_id = model
        self.device = device
        self.max_new_tokens = max_new_tokens
        self.identity = f"causal-hf:{model}"
        self._model = None
        self._tokenizer = None

    def load(self) -> None:
        if self._model is not None:
            return
        try:
            import torch  # noqa: F401
            from transformers import AutoModelForCausalLM, AutoTokenizer
        except ImportError as exc:
            raise EngineError(
                "causal-hf engine needs the hf extra (torch, transformers)", str(exc)
            ) from exc
        try:
            self._tokenizer = AutoTokenizer.from_pretrained(self.model_id)
            device = _resolve_device(self.device)
            self._model = AutoModelForCausalLM.from_pretrained(self.model_id).to(device).eval()
            self._device = device
        except Exception as exc:
            raise EngineError(f"cannot load chat checkpoint {self.model_id!r}", str(exc)) from exc

    def _format(self, turns: list[ChatTurn]):
        messages = [{"role": t.role, "content": t.text or ""} for t in turns]
        if getattr(self._tokenizer, "chat_template", None):
            return self._tokenizer.apply_chat_template(
                messages, add_generation_prompt=True, return_tensors="pt"
            )
        flat = "\n\n".join(f"{m['role']}: {m['content']}" for m in messages)
        return self._tokenizer(flat + "\n\nassistant:", return_tensors="pt").input_ids

    def complete(self, turns: list[ChatTurn]) -> str:
        if any(t.audio is not None for t in turns):
            raise AdapterError(
                400, "this chat engine is text-only and cannot accept audio attachments"
            )
        self.load()
        import torch

        input_ids = self._format(turns).to(self._device)
        eos = self._tokenizer.eos_token_id
        with torch.no_grad():
            output = self._model.generate(
                input_ids,
                do_sample=False,
                max_new_tokens=self.max_new_tokens,
                pad_token_id=eos,
            )
        generated = output[0, input_ids.shape[1] :]
        return self._tokenizer.decode(generated, skip_special_tokens=True)
