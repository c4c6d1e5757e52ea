"""Offline wav2vec 2.0 embedding exporter.

Runs a pretrained speech encoder over the clips listed in a manifest and
writes each clip's final-hidden-layer frame embeddings as a float32 TNSR
file, then fills the manifest's embedding_path column. The downstream
classifier package consumes only these files; the two packages share file
formats, not code.
"""

from .errors import CheckpointUnavailable, ClipUnreadable, ExporterError, ManifestError
from .export import ExportJob, ExportReport, export
from .tnsr import read_tnsr, write_tnsr

__version__ = "0.1.0"

__all__ = [
    "CheckpointUnavailable",
    "ClipUnreadable",
    "ExportJob",
    "ExportReport",
    "ExporterError",
    "ManifestError",
    "export",
    "read_tnsr",
    "write_tnsr",
]
