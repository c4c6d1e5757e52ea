"""Shared reference implementations for the test suite.

Everything here is written independently of the package code it checks:
plain loops, textbook formulas, no shared helpers. Slow is fine.
"""

from __future__ import annotations

import math

import numpy as np

# Filled in by the acceptance tests; echoed after the run so the
# one-line-per-criterion verdicts survive pytest's output capture.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def naive_dft_magnitude(frame: np.ndarray, n_fft: int) -> np.ndarray:
    """|DFT| of a zero-padded frame via the O(n^2) sum, one-sided bins."""
    padded = np.zeros(n_fft)
    padded[: len(frame)] = frame
    n_bins = n_fft // 2 + 1
    out = np.zeros(n_bins)
    for k in range(n_bins):
        re = 0.0
        im = 0.0
        for n in range(n_fft):
            angle = -2.0 * math.pi * k * n / n_fft
            re += padded[n] * math.cos(angle)
            im += padded[n] * math.sin(angle)
        out[k] = math.hypot(re, im)
    return out


def reference_hann(n: int) -> np.ndarray:
    return np.array([0.5 - 0.5 * math.cos(2.0 * math.pi * k / n) for k in range(n)])


def reference_mel(f: float) -> float:
    if f < 1000.0:
        return 3.0 * f / 200.0
    return 15.0 + 27.0 * math.log(f / 1000.0) / math.log(6.4)


def reference_mel_inv(mel: float) -> float:
    if mel < 15.0:
        return 200.0 * mel / 3.0
    return 1000.0 * math.exp(math.log(6.4) * (mel - 15.0) / 27.0)


def reference_filterbank(n_mels: int, n_fft: int, sr: int, fmax: float) -> np.ndarray:
    """Triangle filters from scratch: per-bin loop, area normalization."""
    mel_points = [reference_mel(0.0) + (reference_mel(fmax) - reference_mel(0.0)) * i / (n_mels + 1)
                  for i in range(n_mels + 2)]
    hz_points = [reference_mel_inv(m) for m in mel_points]
    n_bins = n_fft // 2 + 1
    fb = np.zeros((n_mels, n_bins))
    for m in range(n_mels):
        lo, center, hi = hz_points[m], hz_points[m + 1], hz_points[m + 2]
        for k in range(n_bins):
            f = k * sr / n_fft
            if lo <= f <= center:
                w = (f - lo) / (center - lo)
            elif center < f <= hi:
                w = (hi - f) / (hi - center)
            else:
                w = 0.0
            fb[m, k] = w * 2.0 / (hi - lo)
    return fb


def reference_mfcc(frame: np.ndarray, sr: int = 16000, n_fft: int = 512,
                   n_mels: int = 40, n_mfcc: int = 20, fmax: float = 8000.0,
                   floor: float = 1e-10) -> np.ndarray:
    """Textbook MFCC: window, pad, power spectrum, mel, log, DCT-II."""
    windowed = frame * reference_hann(len(frame))
    mag = naive_dft_magnitude(windowed, n_fft)
    power = mag * mag
    fb = reference_filterbank(n_mels, n_fft, sr, fmax)
    log_e = np.array([math.log(max(float(fb[m] @ power), floor)) for m in range(n_mels)])
    coeffs = np.zeros(n_mfcc)
    for k in range(n_mfcc):
        total = 0.0
        for m in range(n_mels):
            total += log_e[m] * math.cos(math.pi * k * (2 * m + 1) / (2 * n_mels))
        scale = math.sqrt(1.0 / n_mels) if k == 0 else math.sqrt(2.0 / n_mels)
        coeffs[k] = scale * total
    return coeffs


def count_sign_changes(frame: np.ndarray) -> int:
    """Zero crossings counted pairwise, zeros treated as non-negative."""
    changes = 0
    for a, b in zip(frame[:-1], frame[1:]):
        if (a >= 0) != (b >= 0):
            changes += 1
    return changes


def reference_linear(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    """y = x @ w + b with explicit loops."""
    n, d_in = x.shape
    d_out = w.shape[1]
    y = np.zeros((n, d_out))
    for i in range(n):
        for j in range(d_out):
            acc = b[j]
            for k in range(d_in):
                acc += x[i, k] * w[k, j]
            y[i, j] = acc
    return y


def reference_lstm_sequence(x, w_x, w_h, b):
    """Single-direction LSTM over (T, D), step by step with gate slices.

    Gate order [input, forget, cell, output], sigmoid gates, tanh cell.
    Returns hidden states (T, H).
    """
    steps, _ = x.shape
    hidden = w_h.shape[0]
    h = np.zeros(hidden)
    c = np.zeros(hidden)
    out = np.zeros((steps, hidden))
    for t in range(steps):
        z = x[t] @ w_x + h @ w_h + b
        gate_i = 1.0 / (1.0 + np.exp(-z[:hidden]))
        gate_f = 1.0 / (1.0 + np.exp(-z[hidden : 2 * hidden]))
        gate_g = np.tanh(z[2 * hidden : 3 * hidden])
        gate_o = 1.0 / (1.0 + np.exp(-z[3 * hidden :]))
        c = gate_f * c + gate_i * gate_g
        h = gate_o * np.tanh(c)
        out[t] = h
    return out


def reference_adamw_steps(p0, grads, lr, beta1, beta2, eps, weight_decay):
    """Scalar-loop AdamW over a gradient sequence; returns the final value."""
    p = float(p0)
    m = 0.0
    v = 0.0
    for t, g in enumerate(grads, start=1):
        m = beta1 * m + (1 - beta1) * g
        v = beta2 * v + (1 - beta2) * g * g
        m_hat = m / (1 - beta1**t)
        v_hat = v / (1 - beta2**t)
        p = p - lr * m_hat / (math.sqrt(v_hat) + eps) - lr * weight_decay * p
    return p


def central_difference(f, values: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Gradient of scalar f() with respect to `values`, perturbed in place."""
    flat = values.reshape(-1)
    grad = np.zeros_like(flat)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        up = f()
        flat[i] = orig - h
        down = f()
        flat[i] = orig
        grad[i] = (up - down) / (2.0 * h)
    return grad.reshape(values.shape)


def max_rel_err(a: np.ndarray, b: np.ndarray, floor: float = 1e-8) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    return float((np.abs(a - b) / denom).max())
