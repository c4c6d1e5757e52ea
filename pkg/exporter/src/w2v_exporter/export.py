"""Run a pretrained wav2vec 2.0 encoder over manifest clips.

Per clip the encoder's final hidden layer is written as a (frames, dim)
float32 TNSR file with an atomic rename, and the manifest's embedding_path
is filled for every clip that succeeded. Unreadable clips are skipped and
reported rather than aborting the batch; the caller decides whether any
skips make the run a failure (the CLI exits nonzero).
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import CheckpointUnavailable, ClipUnreadable
from .manifest import read_manifest, write_manifest
from .tnsr import read_tnsr, write_tnsr
from .wav import read_clip

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ExportJob:
    manifest_path: str | Path
    checkpoint: str
    out_dir: str | Path
    batch_size: int = 4
    device: str = "cpu"
    normalize: bool = True

    def validate(self) -> None:
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")


@dataclass
class ExportReport:
    checkpoint: str
    written: list[str] = field(default_factory=list)
    skipped: list[tuple[str, str]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.skipped


def _load_encoder(checkpoint: str, device: str):
    import torch
    from transformers import Wav2Vec2Model

    try:
        model = Wav2Vec2Model.from_pretrained(checkpoint)
    except Exception as exc:
        raise CheckpointUnavailable(f"could not load {checkpoint!r}: {exc}") from None
    model.eval()
    return model.to(torch.device(device))


def _normalize(batch: np.ndarray) -> np.ndarray:
    """Zero-mean unit-variance per clip, the encoder's expected input scale."""
    mean = batch.mean(axis=1, keepdims=True)
    var = batch.var(axis=1, keepdims=True)
    return (batch - mean) / np.sqrt(var + 1e-7)


def _write_atomic(values: np.ndarray, target: Path) -> None:
    tmp = target.with_name(f"{target.name}.tmp-{os.getpid()}")
    write_tnsr(values, tmp)
    os.replace(tmp, target)


def export(job: ExportJob) -> ExportReport:
    import torch

    job.validate()
    manifest_path = Path(job.manifest_path)
    rows = read_manifest(manifest_path)
    report = ExportReport(checkpoint=job.checkpoint)
    if not rows:
        return report

    out_dir = Path(job.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    encoder = _load_encoder(job.checkpoint, job.device)

    loaded: list[tuple[dict[str, str], np.ndarray]] = []
    for row in rows:
        clip_id = row["id"]
        if not row.get("audio_path"):
            report.skipped.append((clip_id, "no audio_path in manifest"))
            continue
        try:
            loaded.append((row, read_clip(manifest_path.parent / row["audio_path"])))
        except ClipUnreadable as exc:
            report.skipped.append((clip_id, str(exc)))

    # clips are nominally all 15 s, but group by length so a mixed manifest
    # still batches correctly instead of needing padding logic
    by_length: dict[int, list[tuple[dict[str, str], np.ndarray]]] = {}
    for item in loaded:
        by_length.setdefault(len(item[1]), []).append(item)

    with torch.no_grad():
        for items in by_length.values():
            for start in range(0, len(items), job.batch_size):
                chunk = items[start : start + job.batch_size]
                batch = np.stack([samples for _, samples in chunk])
                if job.normalize:
                    batch = _normalize(batch)
                inputs = torch.from_numpy(batch).to(encoder.device)
                hidden = encoder(inputs).last_hidden_state.cpu().numpy()
                for (row, _), frames in zip(chunk, hidden):
                    target = out_dir / f"{row['id']}.w2v.tnsr"
                    _write_atomic(frames.astype(np.float32), target)
                    read_tnsr(target)  # every exported file must parse
                    row["embedding_path"] = os.path.relpath(target, manifest_path.parent)
                    report.written.append(row["id"])
                    log.info("wrote %s (%d x %d)", target, *frames.shape)

    write_manifest(rows, manifest_path)
    (out_dir / "export_report.json").write_text(
        json.dumps(
            {
                "checkpoint": report.checkpoint,
                "written": report.written,
                "skipped": [{"id": i, "reason": r} for i, r in report.skipped],
            },
            indent=2,
            sort_keys=True,
        )
        + "\n",
        encoding="utf-8",
    )
    return report
