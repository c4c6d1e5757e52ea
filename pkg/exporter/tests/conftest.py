"""Fixtures: a small randomly initialized encoder checkpoint and WAV helpers.

The checkpoint keeps the standard wav2vec 2.0 feature-extractor geometry
(so frame counts match the real model family) but only two transformer
layers, and is saved locally so the suite never touches the network.
"""

from __future__ import annotations

import os
import wave

import numpy as np
import pytest

os.environ.setdefault("HF_HUB_OFFLINE", "1")
os.environ.setdefault("TRANSFORMERS_OFFLINE", "1")

SR = 16000


@pytest.fixture(scope="session")
def checkpoint_dir(tmp_path_factory):
    import torch
    from transformers import Wav2Vec2Config, Wav2Vec2Model

    torch.manual_seed(0)
    config = Wav2Vec2Config(
        hidden_size=768,
        num_hidden_layers=2,
        num_attention_heads=4,
        intermediate_size=1024,
    )
    model = Wav2Vec2Model(config)
    target = tmp_path_factory.mktemp("encoder_ckpt")
    model.save_pretrained(target)
    return str(target)


def write_wav(path, samples, sample_rate=SR, channels=1, sampwidth=2):
    samples = np.asarray(samples, dtype=np.float64)
    pcm = np.clip(np.rint(samples * 32767.0), -32768, 32767).astype("<i2")
    if channels == 2:
        pcm = np.repeat(pcm, 2)
    with wave.open(str(path), "wb") as fh:
        fh.setnchannels(channels)
        fh.setsampwidth(sampwidth)
        fh.setframerate(sample_rate)
        fh.writeframes(pcm.tobytes())


def sine(freq_hz, seconds, amp=0.4, seed=None):
    t = np.arange(int(seconds * SR)) / SR
    out = amp * np.sin(2.0 * np.pi * freq_hz * t)
    if seed is not None:
        out = out + 0.01 * np.random.default_rng(seed).standard_normal(len(t))
    return out


def make_corpus(root, seconds=1.0, n_clips=3):
    """WAVs plus a manifest with the passthrough keys the classifier uses."""
    (root / "wavs").mkdir(parents=True)
    lines = []
    for i in range(n_clips):
        clip_id = f"clip-{i:02d}"
        write_wav(root / "wavs" / f"{clip_id}.wav", sine(200.0 + 40.0 * i, seconds, seed=i))
        lines.append(
            f"id={clip_id}\tlabel={'rhythmic' if i % 2 == 0 else 'unrhythmic'}"
            f"\taudio_path=wavs/{clip_id}.wav\tteacher_id=t-{i:02d}"
        )
    manifest = root / "manifest.txt"
    manifest.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return manifest
