"""Minimal WAV ingest for the encoder: 16 kHz mono PCM-16 only."""

from __future__ import annotations

import wave
from pathlib import Path

import numpy as np

from .errors import ClipUnreadable

EXPECTED_RATE = 16000


def read_clip(path: str | Path) -> np.ndarray:
    """Samples in [-1, 1] as float32, or ClipUnreadable explaining why not."""
    try:
        with wave.open(str(path), "rb") as wav:
            if wav.getcomptype() != "NONE":
                raise ClipUnreadable(f"{path}: compressed WAV not supported")
            if wav.getsampwidth() != 2:
                raise ClipUnreadable(f"{path}: expected 16-bit PCM")
            if wav.getnchannels() != 1:
                raise ClipUnreadable(f"{path}: expected mono audio")
            if wav.getframerate() != EXPECTED_RATE:
                raise ClipUnreadable(
                    f"{path}: sample rate {wav.getframerate()}, encoder expects {EXPECTED_RATE}"
                )
            frames = wav.readframes(wav.getnframes())
    except (wave.Error, OSError, EOFError) as exc:
        raise ClipUnreadable(f"{path}: {exc}") from None
    samples = np.frombuffer(frames, dtype="<i2").astype(np.float32) / 32768.0
    if samples.size == 0:
        raise ClipUnreadable(f"{path}: no audio frames")
    return samples
