"""Teaching-intonation assessment: features, classifier, training, CLI."""

from .audio import AudioBuffer, Clip, read_wav, segment, write_wav
from .data import (
    EvalResult,
    FeatureRecord,
    ManifestRecord,
    Split,
    evaluate,
    read_manifest,
    stratified_split,
    synth_corpus,
    write_manifest,
)
from .embeddings import EmbeddingMatrix, load_embedding, synth_embedding
from .errors import IntonationError
from .labels import CLASS_NAMES, DISCIPLINES, Label
from .llf import LlfConfig, LlfMatrix, extract_llf
from .model import IntonationModel, ModelConfig, Variant
from .tnsr import read_tnsr, write_tnsr
from .training import TrainConfig, TrainReport, train

__version__ = "0.1.0"

__all__ = [
    "AudioBuffer",
    "CLASS_NAMES",
    "Clip",
    "DISCIPLINES",
    "EmbeddingMatrix",
    "EvalResult",
    "FeatureRecord",
    "IntonationError",
    "IntonationModel",
    "Label",
    "LlfConfig",
    "LlfMatrix",
    "ManifestRecord",
    "ModelConfig",
    "Split",
    "TrainConfig",
    "TrainReport",
    "Variant",
    "evaluate",
    "extract_llf",
    "load_embedding",
    "read_manifest",
    "read_tnsr",
    "read_wav",
    "segment",
    "stratified_split",
    "synth_corpus",
    "synth_embedding",
    "train",
    "write_manifest",
    "write_tnsr",
    "write_wav",
]
