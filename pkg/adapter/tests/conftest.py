import base64
import io
import sys
import warnings
from pathlib import Path

import numpy as np
import pytest
from fastapi.testclient import TestClient
from scipy.io import wavfile

# the wire-protocol conformance suite is shared with the pipeline repo
sys.path.insert(0, str(Path(__file__).resolve().parents[2] / "tests"))

from musevid_adapter.config import AdapterConfig
from musevid_adapter.service import create_app


def sine_wav_bytes(duration_s: float = 1.0, freq: float = 440.0, rate: int = 22050) -> bytes:
    t = np.arange(int(duration_s * rate)) / rate
    samples = (0.5 * np.sin(2 * np.pi * freq * t)).astype(np.float32)
    out = io.BytesIO()
    wavfile.write(out, rate, samples)
    return out.getvalue()


def sine_wav_b64(duration_s: float = 1.0, freq: float = 440.0, rate: int = 22050) -> str:
    return base64.b64encode(sine_wav_bytes(duration_s, freq, rate)).decode("ascii")


@pytest.fixture()
def client():
    with TestClient(create_app(AdapterConfig()), raise_server_exceptions=False) as c:
        yield c


def make_client(config: AdapterConfig | None = None, **engines) -> TestClient:
    return TestClient(create_app(config or AdapterConfig(), **engines), raise_server_exceptions=False)


@pytest.fixture(scope="session")
def tiny_causal_checkpoint(tmp_path_factory) -> str:
    """Build a minimal causal LM checkpoint on disk; no network involved."""
    import torch
    from tokenizers import Tokenizer, decoders, models, pre_tokenizers, trainers
    from transformers import GPT2Config, GPT2LMHeadModel, PreTrainedTokenizerFast

    target = tmp_path_factory.mktemp("tiny-causal")
    torch.manual_seed(0)
    tok = Tokenizer(models.BPE(unk_token=None))
    tok.pre_tokenizer = pre_tokenizers.ByteLevel(add_prefix_space=False)
    tok.decoder = decoders.ByteLevel()
    trainer = trainers.BpeTrainer(
        vocab_size=384,
        special_tokens=["<|endoftext|>"],
        initial_alphabet=pre_tokenizers.ByteLevel.alphabet(),
    )
    tok.train_from_iterator(
        ["system user assistant scene video story music", "SCENE 1: BEGIN SCRIPT END"],
        trainer,
    )
    fast = PreTrainedTokenizerFast(
        tokenizer_object=tok, eos_token="<|endoftext|>", pad_token="<|endoftext|>"
    )
    config = GPT2Config(
        vocab_size=fast.vocab_size + 10,
        n_positions=256,
        n_embd=32,
        n_layer=2,
        n_head=2,
        bos_token_id=fast.eos_token_id,
        eos_token_id=fast.eos_token_id,
    )
    GPT2LMHeadModel(config).save_pretrained(target)
    fast.save_pretrained(target)
    return str(target)


@pytest.fixture(scope="session")
def tiny_clap_checkpoint(tmp_path_factory) -> str:
    """Build a minimal CLAP-family checkpoint on disk; no network involved."""
    import torch
    from tokenizers import Tokenizer, decoders, models, pre_tokenizers, trainers
    from transformers import (
        ClapAudioConfig,
        ClapConfig,
        ClapFeatureExtractor,
        ClapModel,
        ClapTextConfig,
        PreTrainedTokenizerFast,
    )

    target = tmp_path_factory.mktemp("tiny-clap")
    torch.manual_seed(0)
    tok = Tokenizer(models.BPE(unk_token=None))
    tok.pre_tokenizer = pre_tokenizers.ByteLevel(add_prefix_space=False)
    tok.decoder = decoders.ByteLevel()
    trainer = trainers.BpeTrainer(
        vocab_size=400,
        special_tokens=["<s>", "</s>", "<pad>", "<unk>", "<mask>"],
        initial_alphabet=pre_tokenizers.ByteLevel.alphabet(),
    )
    tok.train_from_iterator(["moderate intensity with a clear beat"], trainer)
    fast = PreTrainedTokenizerFast(
        tokenizer_object=tok,
        bos_token="<s>",
        eos_token="</s>",
        pad_token="<pad>",
        unk_token="<unk>",
        mask_token="<mask>",
        cls_token="<s>",
        sep_token="</s>",
    )
    text_cfg = ClapTextConfig(
        vocab_size=420,
        hidden_size=32,
        num_hidden_layers=2,
        num_attention_heads=2,
        intermediate_size=64,
        projection_dim=16,
        max_position_embeddings=128,
    )
    # geometry constraint: mel bins <= spec_size // freq_ratio and
    # mel frames (max_length_s * rate / hop) <= spec_size * freq_ratio
    audio_cfg = ClapAudioConfig(
        spec_size=64,
        freq_ratio=1,
        patch_size=4,
        window_size=4,
        depths=[1, 1],
        num_attention_heads=[2, 2],
        patch_embeds_hidden_size=16,
        hidden_size=32,
        projection_dim=16,
        num_mel_bins=16,
    )
    cfg = ClapConfig(
        text_config=text_cfg.to_dict(), audio_config=audio_cfg.to_dict(), projection_dim=16
    )
    ClapModel(cfg).save_pretrained(target)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        extractor = ClapFeatureExtractor(
            feature_size=16,
            sampling_rate=8000,
            hop_length=256,
            max_length_s=2,
            fft_window_size=400,
            truncation="rand_trunc",
        )
    extractor.save_pretrained(target)
    fast.save_pretrained(target)
    return str(target)
