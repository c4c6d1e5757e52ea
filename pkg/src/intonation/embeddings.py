"""Precomputed utterance embeddings: loading, caching, synthesis.

The classifier consumes embeddings as (T_w, D_w) float32 matrices stored
in tensor files; this module never computes them from audio. For tests
and the synthetic corpus, `synth_embedding` builds deterministic matrices
from (clip_id, seed), optionally shifted by half the class bias vector in
either direction so the two classes are linearly separable after pooling.
"""

from __future__ import annotations

import hashlib
import threading
from collections import OrderedDict
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import MissingEmbedding, NonFiniteValue, ShapeError
from .labels import Label
from .tnsr import read_tnsr


@dataclass(frozen=True)
class EmbeddingMatrix:
    """values[t] is the D_w-dim embedding of analysis step t."""

    values: np.ndarray
    source: str  # "file" or "synthetic"

    @property
    def n_frames(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]


class EmbeddingCache:
    """Bounded path-keyed LRU over loaded embeddings; safe across threads.

    Cached arrays are marked read-only since hits hand out the same object.
    """

    def __init__(self, max_entries: int = 32):
        self.max_entries = max_entries
        self._lock = threading.Lock()
        self._entries: OrderedDict[str, EmbeddingMatrix] = OrderedDict()

    def get(self, path: str | Path) -> EmbeddingMatrix:
        key = str(Path(path).resolve())
        with self._lock:
            if key in self._entries:
                self._entries.move_to_end(key)
                return self._entries[key]
        emb = _load_file(path)
        emb.values.flags.writeable = False
        with self._lock:
            self._entries[key] = emb
            self._entries.move_to_end(key)
            while len(self._entries) > self.max_entries:
                self._entries.popitem(last=False)
        return emb

    def __len__(self) -> int:
        with self._lock:
            return len(self._entries)


def _load_file(path: str | Path) -> EmbeddingMatrix:
    path = Path(path)
    if not path.exists():
        raise MissingEmbedding(f"embedding file not found: {path}")
    values = read_tnsr(path)
    if values.ndim != 2:
        raise ShapeError(f"{path}: embeddings must be 2-D, got ndim {values.ndim}")
    if not np.isfinite(values).all():
        raise NonFiniteValue(f"{path}: embedding contains non-finite values")
    return EmbeddingMatrix(values=values, source="file")


def load_embedding(path: str | Path, cache: EmbeddingCache | None = None) -> EmbeddingMatrix:
    """Load a (T_w, D_w) embedding, through `cache` when one is given."""
    if cache is not None:
        return cache.get(path)
    return _load_file(path)


def _rng_for(clip_id: str, seed: int, purpose: str) -> np.random.Generator:
    digest = hashlib.sha256(f"{purpose}:{clip_id}".encode()).digest()
    words = np.frombuffer(digest[:16], dtype=np.uint32)
    return np.random.default_rng(np.random.SeedSequence([seed & 0xFFFFFFFF, *words]))


def class_bias_vector(seed: int, dim: int) -> np.ndarray:
    """The documented mean offset between the two synthetic classes."""
    rng = _rng_for("__class_bias__", seed, "bias")
    return rng.standard_normal(dim)


def synth_embedding(
    clip_id: str,
    seed: int,
    n_frames: int = 749,
    dim: int = 768,
    class_signal: Label | None = None,
) -> EmbeddingMatrix:
    """Deterministic standard-normal embedding for (clip_id, seed).

    With a class_signal, rows shift by +bias/2 for rhythmic and -bias/2 for
    unrhythmic, so the two class means differ by exactly class_bias_vector.
    """
    rng = _rng_for(clip_id, seed, "embedding")
    values = rng.standard_normal((n_frames, dim))
    if class_signal is not None:
        offset = class_bias_vector(seed, dim) / 2.0
        values += offset if class_signal == Label.RHYTHMIC else -offset
    return EmbeddingMatrix(values=values.astype(np.float32), source="synthetic")
