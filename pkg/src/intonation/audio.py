"""WAV ingest, fixed-length segmentation, and spectrogram images.

Audio enters the pipeline as 16-bit PCM RIFF/WAVE and is normalized to
float64 in [-1, 1) by dividing by 32768. Everything downstream runs on
15-second, 16 kHz mono clips; `segment` produces those from longer
recordings by cutting non-overlapping complete windows and dropping the
remainder.
"""

from __future__ import annotations

import struct
import wave
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    BadMagic,
    ChannelsUnsupported,
    EmptyAudio,
    InvalidClip,
    SignalTooShort,
    UnsupportedEncoding,
    WrongSampleRate,
)
from .labels import Label

CLIP_SAMPLE_RATE = 16000
CLIP_SECONDS = 15.0
CLIP_SAMPLES = int(CLIP_SECONDS * CLIP_SAMPLE_RATE)

SPECTROGRAM_FLOOR = 1e-10


@dataclass(frozen=True)
class AudioBuffer:
    """Mono signal: float64 samples in [-1, 1) plus its sample rate."""

    samples: np.ndarray
    sample_rate_hz: int

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate_hz


@dataclass(frozen=True)
class Clip:
    """One fixed-length analysis unit: 15 s of 16 kHz mono audio."""

    id: str
    audio: AudioBuffer
    label: Label | None = None
    discipline: str | None = None
    teacher_id: str | None = None

    def validate(self) -> None:
        if self.audio.sample_rate_hz != CLIP_SAMPLE_RATE:
            raise InvalidClip(
                f"clip {self.id}: rate {self.audio.sample_rate_hz}, need {CLIP_SAMPLE_RATE}"
            )
        if len(self.audio.samples) != CLIP_SAMPLES:
            raise InvalidClip(
                f"clip {self.id}: {len(self.audio.samples)} samples, need {CLIP_SAMPLES}"
            )


def read_wav(path: str | Path, downmix: bool = False) -> AudioBuffer:
    """Load a RIFF/WAVE file holding 16-bit PCM.

    Multi-channel input raises ChannelsUnsupported unless `downmix` is set,
    in which case channels are averaged. A trailing partial sample frame is
    dropped. Raises BadMagic for non-WAV containers and UnsupportedEncoding
    for anything other than 16-bit integer PCM.
    """
    blob = Path(path).read_bytes()
    if len(blob) < 12 or blob[:4] != b"RIFF" or blob[8:12] != b"WAVE":
        raise BadMagic(f"{path}: not a RIFF/WAVE file")

    fmt = None
    data = None
    pos = 12
    while pos + 8 <= len(blob):
        chunk_id = blob[pos : pos + 4]
        (size,) = struct.unpack_from("<I", blob, pos + 4)
        body = blob[pos + 8 : pos + 8 + size]
        if chunk_id == b"fmt ":
            fmt = body
        elif chunk_id == b"data":
            data = body
        pos += 8 + size + (size & 1)  # chunks are word-aligned

    if fmt is None or data is None:
        raise BadMagic(f"{path}: missing fmt or data chunk")
    if len(fmt) < 16:
        raise UnsupportedEncoding(f"{path}: fmt chunk too small")
    audio_format, channels, sample_rate, _, _, bits = struct.unpack_from("<HHIIHH", fmt)
    if audio_format != 1 or bits != 16:
        raise UnsupportedEncoding(
            f"{path}: format tag {audio_format} with {bits} bits; need 16-bit PCM"
        )
    if channels < 1:
        raise UnsupportedEncoding(f"{path}: {channels} channels")

    frame_bytes = 2 * channels
    usable = len(data) - (len(data) % frame_bytes)
    pcm = np.frombuffer(data[:usable], dtype="<i2")
    if channels > 1:
        if not downmix:
            raise ChannelsUnsupported(
                f"{path}: {channels} channels; pass downmix=True to average them"
            )
        samples = pcm.reshape(-1, channels).mean(axis=1) / 32768.0
    else:
        samples = pcm.astype(np.float64) / 32768.0
    return AudioBuffer(samples=samples, sample_rate_hz=int(sample_rate))


def write_wav(audio: AudioBuffer, path: str | Path) -> None:
    """Write mono 16-bit PCM. Samples are clipped to [-1, 1] first."""
    pcm = np.clip(np.rint(audio.samples * 32767.0), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as fh:
        fh.setnchannels(1)
        fh.setsampwidth(2)
        fh.setframerate(audio.sample_rate_hz)
        fh.writeframes(pcm.tobytes())


def segment(
    audio: AudioBuffer, clip_seconds: float = CLIP_SECONDS, source: str = "audio"
) -> list[Clip]:
    """Cut non-overlapping complete clips; the tail shorter than one clip is dropped.

    Clip ids are "<source>#<k>" with k counting from 0 in time order.
    """
    if audio.sample_rate_hz != CLIP_SAMPLE_RATE:
        raise WrongSampleRate(
            f"segment needs {CLIP_SAMPLE_RATE} Hz input, got {audio.sample_rate_hz}"
        )
    window = int(round(clip_seconds * audio.sample_rate_hz))
    n_clips = len(audio.samples) // window
    clips = []
    for k in range(n_clips):
        chunk = audio.samples[k * window : (k + 1) * window]
        clips.append(
            Clip(id=f"{source}#{k}", audio=AudioBuffer(chunk, audio.sample_rate_hz))
        )
    return clips


def hann_window(n: int) -> np.ndarray:
    """Periodic Hann window of length n."""
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


def frame_matrix(samples: np.ndarray, frame_len: int, hop_len: int) -> np.ndarray:
    """Slice a signal into (n_frames, frame_len) rows, hop samples apart."""
    n = len(samples)
    if n < frame_len:
        raise SignalTooShort(f"{n} samples < one {frame_len}-sample frame")
    n_frames = 1 + (n - frame_len) // hop_len
    idx = np.arange(frame_len)[None, :] + hop_len * np.arange(n_frames)[:, None]
    return samples[idx]


def render_spectrogram(
    audio: AudioBuffer, n_fft: int = 512, hop_len: int = 160
) -> np.ndarray:
    """Log-magnitude STFT rendered as a uint8 image.

    Frames of n_fft samples are Hann-windowed; each column is
    20*log10(max(|X|, 1e-10)) mapped linearly so the minimum becomes 0 and
    the maximum 255 (a constant image maps to all zeros). Rows are returned
    in image order: row 0 is the highest frequency bin, the bottom row is DC.
    """
    if len(audio.samples) == 0:
        raise EmptyAudio("cannot render an empty signal")
    frames = frame_matrix(audio.samples, n_fft, hop_len)
    spectra = np.abs(np.fft.rfft(frames * hann_window(n_fft), axis=1))
    db = 20.0 * np.log10(np.maximum(spectra, SPECTROGRAM_FLOOR))
    lo, hi = db.min(), db.max()
    if hi > lo:
        scaled = np.rint((db - lo) * (255.0 / (hi - lo)))
    else:
        scaled = np.zeros_like(db)
    # transpose to (bins, frames), then flip so high frequencies sit on top
    return scaled.astype(np.uint8).T[::-1]


def write_pgm(grid: np.ndarray, path: str | Path) -> None:
    """Write a uint8 grid as binary PGM (P5, maxval 255)."""
    if grid.ndim != 2:
        raise ValueError(f"PGM needs a 2-D grid, got ndim {grid.ndim}")
    rows, cols = grid.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{cols} {rows}\n255\n".encode("ascii"))
        fh.write(np.ascontiguousarray(grid, dtype=np.uint8).tobytes())
