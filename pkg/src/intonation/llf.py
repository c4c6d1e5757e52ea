"""Low-level acoustic features: MFCC, zero-crossing rate, pitch, centroid.

One 15-second clip becomes a (T, 23) float64 matrix: 20 MFCCs, the
zero-crossing rate, a YIN pitch track in Hz (0 where unvoiced), and the
spectral centroid in Hz. Frames are 25 ms with a 10 ms hop, so T = 1498
at 16 kHz. Pitch alone uses a longer 2/fmin window anchored at the same
frame starts, because the difference function needs two full periods of
the lowest trackable pitch; the window is clamped at the signal tail so
the frame count stays aligned with the other features.

Single-frame functions (`mfcc`, `zero_crossing_rate`, `pitch_yin`,
`spectral_centroid`) and the batch extractor share one implementation, so
spot-checking a frame reproduces the matrix row exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .audio import AudioBuffer, Clip, frame_matrix, hann_window
from .errors import (
    BadFrameLength,
    EmptyFrame,
    FrameTooShortForPitch,
)


@dataclass(frozen=True)
class LlfConfig:
    frame_ms: float = 25.0
    hop_ms: float = 10.0
    n_fft: int = 512
    n_mels: int = 40
    n_mfcc: int = 20
    pitch_fmin_hz: float = 50.0
    pitch_fmax_hz: float = 500.0
    mel_fmax_hz: float = 8000.0
    power_floor: float = 1e-10
    yin_threshold: float = 0.1

    def frame_len(self, sample_rate_hz: int) -> int:
        return int(round(self.frame_ms * sample_rate_hz / 1000.0))

    def hop_len(self, sample_rate_hz: int) -> int:
        return int(round(self.hop_ms * sample_rate_hz / 1000.0))

    def pitch_frame_len(self, sample_rate_hz: int) -> int:
        """Smallest window holding two periods of the lowest pitch."""
        return int(math.ceil(2.0 * sample_rate_hz / self.pitch_fmin_hz))

    @property
    def n_features(self) -> int:
        return self.n_mfcc + 3

    def feature_names(self) -> tuple[str, ...]:
        return tuple(f"mfcc{i}" for i in range(self.n_mfcc)) + (
            "zcr",
            "pitch_hz",
            "centroid_hz",
        )

    def validate(self, sample_rate_hz: int) -> None:
        if self.frame_len(sample_rate_hz) < 1 or self.hop_len(sample_rate_hz) < 1:
            raise ValueError("frame and hop must be at least one sample")
        if self.frame_len(sample_rate_hz) > self.n_fft:
            raise ValueError("frame longer than the FFT size")
        if not 0 < self.n_mfcc <= self.n_mels:
            raise ValueError("need 0 < n_mfcc <= n_mels")
        if not 0 < self.pitch_fmin_hz < self.pitch_fmax_hz:
            raise ValueError("need 0 < pitch_fmin < pitch_fmax")
        if self.mel_fmax_hz > sample_rate_hz / 2:
            raise ValueError("mel_fmax above Nyquist")
        if self.power_floor <= 0:
            raise ValueError("power_floor must be positive")
        if not 0 < self.yin_threshold < 1:
            raise ValueError("yin_threshold must lie in (0, 1)")


@dataclass(frozen=True)
class LlfMatrix:
    """Per-frame features for one clip: values[t] is one 23-dim frame."""

    values: np.ndarray
    frame_times_s: np.ndarray
    feature_names: tuple[str, ...]

    @property
    def n_frames(self) -> int:
        return self.values.shape[0]


def hz_to_mel(f):
    """Mel scale, Slaney flavor: linear below 1 kHz, log above."""
    f = np.asarray(f, dtype=np.float64)
    mel = 3.0 * f / 200.0
    log_region = f >= 1000.0
    mel = np.where(
        log_region,
        15.0 + 27.0 * np.log(np.maximum(f, 1e-30) / 1000.0) / np.log(6.4),
        mel,
    )
    return mel


def mel_to_hz(mel):
    mel = np.asarray(mel, dtype=np.float64)
    f = 200.0 * mel / 3.0
    log_region = mel >= 15.0
    return np.where(log_region, 1000.0 * np.exp(np.log(6.4) * (mel - 15.0) / 27.0), f)


@lru_cache(maxsize=8)
def mel_filterbank(
    n_mels: int, n_fft: int, sample_rate_hz: int, fmax_hz: float
) -> np.ndarray:
    """Triangular mel filters, area-normalized, shape (n_mels, n_fft//2+1)."""
    edges_hz = mel_to_hz(np.linspace(hz_to_mel(0.0), hz_to_mel(fmax_hz), n_mels + 2))
    bin_hz = np.arange(n_fft // 2 + 1) * (sample_rate_hz / n_fft)
    fb = np.zeros((n_mels, n_fft // 2 + 1))
    for m in range(n_mels):
        lo, center, hi = edges_hz[m], edges_hz[m + 1], edges_hz[m + 2]
        rising = (bin_hz - lo) / (center - lo)
        falling = (hi - bin_hz) / (hi - center)
        fb[m] = np.maximum(0.0, np.minimum(rising, falling)) * (2.0 / (hi - lo))
    return fb


@lru_cache(maxsize=8)
def dct_basis(n_out: int, n_in: int) -> np.ndarray:
    """Orthonormal DCT-II rows: basis[k] picks out coefficient k."""
    m = np.arange(n_in)
    basis = np.cos(np.pi * np.outer(np.arange(n_out), 2 * m + 1) / (2 * n_in))
    basis *= np.sqrt(2.0 / n_in)
    basis[0] *= 1.0 / np.sqrt(2.0)
    return basis


def frame_signal(audio: AudioBuffer, cfg: LlfConfig) -> np.ndarray:
    """Slice a signal into analysis frames, shape (T, frame_len)."""
    return frame_matrix(
        audio.samples,
        cfg.frame_len(audio.sample_rate_hz),
        cfg.hop_len(audio.sample_rate_hz),
    )


def _magnitude_spectra(frames: np.ndarray, cfg: LlfConfig) -> np.ndarray:
    """Hann window, zero-pad to n_fft, magnitude of the one-sided FFT."""
    windowed = frames * hann_window(frames.shape[1])
    return np.abs(np.fft.rfft(windowed, n=cfg.n_fft, axis=1))


def _mfcc_batch(frames: np.ndarray, cfg: LlfConfig, sample_rate_hz: int) -> np.ndarray:
    mag = _magnitude_spectra(frames, cfg)
    fb = mel_filterbank(cfg.n_mels, cfg.n_fft, sample_rate_hz, cfg.mel_fmax_hz)
    energies = (mag * mag) @ fb.T
    log_e = np.log(np.maximum(energies, cfg.power_floor))
    return log_e @ dct_basis(cfg.n_mfcc, cfg.n_mels).T


def _centroid_batch(
    frames: np.ndarray, cfg: LlfConfig, sample_rate_hz: int
) -> np.ndarray:
    mag = _magnitude_spectra(frames, cfg)
    bin_hz = np.arange(cfg.n_fft // 2 + 1) * (sample_rate_hz / cfg.n_fft)
    total = mag.sum(axis=1)
    weighted = mag @ bin_hz
    return np.where(total < cfg.power_floor, 0.0, weighted / np.maximum(total, 1e-300))


def _zcr_batch(frames: np.ndarray) -> np.ndarray:
    if frames.shape[1] < 2:
        return np.zeros(frames.shape[0])
    nonneg = frames >= 0.0
    changes = (nonneg[:, 1:] != nonneg[:, :-1]).sum(axis=1)
    return changes / (frames.shape[1] - 1)


def _yin_batch(frames: np.ndarray, cfg: LlfConfig, sample_rate_hz: int) -> np.ndarray:
    """Pitch per frame via YIN: difference function, cumulative-mean
    normalization, absolute threshold, then parabolic refinement around the
    local minimum the threshold crossing descends into."""
    n = frames.shape[1]
    needed = cfg.pitch_frame_len(sample_rate_hz)
    if n < needed:
        raise FrameTooShortForPitch(f"{n} samples < {needed} needed for fmin")
    tau_min = int(math.ceil(sample_rate_hz / cfg.pitch_fmax_hz))
    tau_max = int(math.floor(sample_rate_hz / cfg.pitch_fmin_hz))
    window = n - tau_max

    # d[f, tau] = sum_j (x[j] - x[j+tau])^2 over j < window, via FFT correlation
    fft_len = 1 << int(math.ceil(math.log2(n)))
    spec_head = np.fft.rfft(frames[:, :window], n=fft_len, axis=1)
    spec_full = np.fft.rfft(frames, n=fft_len, axis=1)
    corr = np.fft.irfft(np.conj(spec_head) * spec_full, n=fft_len, axis=1)
    corr = corr[:, : tau_max + 1]
    squared = frames * frames
    head_energy = squared[:, :window].sum(axis=1)
    cum = np.concatenate(
        [np.zeros((frames.shape[0], 1)), np.cumsum(squared, axis=1)], axis=1
    )
    lag_energy = cum[:, window : window + tau_max + 1] - cum[:, : tau_max + 1]
    diff = np.maximum(head_energy[:, None] + lag_energy - 2.0 * corr, 0.0)

    # cumulative-mean normalized difference; flat silence stays at 1 (unvoiced)
    running = np.cumsum(diff[:, 1:], axis=1)
    cmnd = np.ones_like(diff)
    taus = np.arange(1, tau_max + 1, dtype=np.float64)
    with np.errstate(invalid="ignore", divide="ignore"):
        cmnd[:, 1:] = np.where(running > 0.0, diff[:, 1:] * taus / running, 1.0)

    pitches = np.zeros(frames.shape[0])
    for i in range(frames.shape[0]):
        row = cmnd[i]
        below = np.nonzero(row[tau_min : tau_max + 1] < cfg.yin_threshold)[0]
        if below.size == 0:
            continue
        tau = tau_min + int(below[0])
        while tau + 1 <= tau_max and row[tau + 1] < row[tau]:
            tau += 1
        refined = float(tau)
        if 1 <= tau < tau_max:
            left, mid, right = row[tau - 1], row[tau], row[tau + 1]
            denom = left - 2.0 * mid + right
            if denom > 0.0:
                shift = 0.5 * (left - right) / denom
                refined += float(np.clip(shift, -0.5, 0.5))
        freq = sample_rate_hz / refined
        pitches[i] = float(np.clip(freq, cfg.pitch_fmin_hz, cfg.pitch_fmax_hz))
    return pitches


def _require_frame(frame: np.ndarray, cfg: LlfConfig, sample_rate_hz: int) -> np.ndarray:
    frame = np.asarray(frame, dtype=np.float64)
    if frame.ndim != 1:
        raise BadFrameLength(f"expected a 1-D frame, got ndim {frame.ndim}")
    expected = cfg.frame_len(sample_rate_hz)
    if len(frame) != expected:
        raise BadFrameLength(f"frame has {len(frame)} samples, expected {expected}")
    return frame


def mfcc(
    frame: np.ndarray, cfg: LlfConfig = LlfConfig(), sample_rate_hz: int = 16000
) -> np.ndarray:
    """First n_mfcc cepstral coefficients of one frame."""
    frame = _require_frame(frame, cfg, sample_rate_hz)
    return _mfcc_batch(frame[None, :], cfg, sample_rate_hz)[0]


def spectral_centroid(
    frame: np.ndarray, cfg: LlfConfig = LlfConfig(), sample_rate_hz: int = 16000
) -> float:
    """Magnitude-weighted mean frequency in Hz; 0 for a near-silent frame."""
    frame = _require_frame(frame, cfg, sample_rate_hz)
    return float(_centroid_batch(frame[None, :], cfg, sample_rate_hz)[0])


def zero_crossing_rate(frame: np.ndarray) -> float:
    """Fraction of adjacent sample pairs whose sign differs (zero counts as
    non-negative). A single-sample frame has no pairs and rates 0."""
    frame = np.asarray(frame, dtype=np.float64)
    if len(frame) == 0:
        raise EmptyFrame("zero-crossing rate of an empty frame")
    return float(_zcr_batch(frame[None, :])[0])


def pitch_yin(
    frame: np.ndarray, cfg: LlfConfig = LlfConfig(), sample_rate_hz: int = 16000
) -> float:
    """Fundamental frequency in Hz, or 0.0 when no periodicity clears the
    threshold. The frame must hold at least two periods of pitch_fmin."""
    frame = np.asarray(frame, dtype=np.float64)
    if frame.ndim != 1:
        raise BadFrameLength(f"expected a 1-D frame, got ndim {frame.ndim}")
    return float(_yin_batch(frame[None, :], cfg, sample_rate_hz)[0])


def extract_llf(clip: Clip, cfg: LlfConfig = LlfConfig()) -> LlfMatrix:
    """Full feature matrix for one clip: [mfcc0..n, zcr, pitch, centroid]."""
    clip.validate()
    sr = clip.audio.sample_rate_hz
    cfg.validate(sr)
    samples = clip.audio.samples
    frames = frame_signal(clip.audio, cfg)
    hop = cfg.hop_len(sr)
    starts = hop * np.arange(frames.shape[0])

    coeffs = _mfcc_batch(frames, cfg, sr)
    zcr = _zcr_batch(frames)
    centroid = _centroid_batch(frames, cfg, sr)

    # pitch windows share the frame starts but are longer; clamp at the tail
    plen = cfg.pitch_frame_len(sr)
    pstarts = np.minimum(starts, len(samples) - plen)
    pitch_frames = samples[pstarts[:, None] + np.arange(plen)[None, :]]
    pitch = _yin_batch(pitch_frames, cfg, sr)

    values = np.column_stack([coeffs, zcr, pitch, centroid])
    return LlfMatrix(
        values=values,
        frame_times_s=starts / sr,
        feature_names=cfg.feature_names(),
    )
