"""Manifests, splits, metrics, evaluation, and the synthetic corpus.

A manifest is a UTF-8 text file, one record per line, tab-separated
key=value pairs. Recognized keys: id, audio_path, label, discipline,
teacher_id, split, llf_path, embedding_path. Paths are relative to the
manifest's directory, so a corpus folder can be moved wholesale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path

import numpy as np

from .audio import AudioBuffer, write_wav
from .embeddings import EmbeddingCache, load_embedding, synth_embedding
from .errors import (
    BadRatios,
    DimMismatch,
    DuplicateId,
    EmptyDataset,
    InsufficientRecords,
    MalformedRecord,
    MissingEmbedding,
    MissingFeature,
    UnknownDiscipline,
)
from .labels import DISCIPLINES, Label
from .model import IntonationModel
from .tnsr import read_tnsr, write_tnsr


class Split(str, Enum):
    TRAIN = "train"
    DEV = "dev"
    TEST = "test"


@dataclass(frozen=True)
class ManifestRecord:
    id: str
    label: Label
    audio_path: str | None = None
    discipline: str | None = None
    teacher_id: str | None = None
    split: Split | None = None
    llf_path: str | None = None
    embedding_path: str | None = None


_MANIFEST_KEYS = (
    "id",
    "audio_path",
    "label",
    "discipline",
    "teacher_id",
    "split",
    "llf_path",
    "embedding_path",
)


def _parse_line(line: str, lineno: int) -> ManifestRecord:
    fields: dict[str, str] = {}
    for token in line.split("\t"):
        key, sep, value = token.partition("=")
        if not sep or not key:
            raise MalformedRecord(f"line {lineno}: token {token!r} is not key=value")
        if key not in _MANIFEST_KEYS:
            raise MalformedRecord(f"line {lineno}: unknown key {key!r}")
        if key in fields:
            raise MalformedRecord(f"line {lineno}: repeated key {key!r}")
        fields[key] = value
    if "id" not in fields or not fields["id"]:
        raise MalformedRecord(f"line {lineno}: missing id")
    if "label" not in fields:
        raise MalformedRecord(f"line {lineno}: missing label")
    try:
        label = Label.from_name(fields["label"])
    except ValueError as exc:
        raise MalformedRecord(f"line {lineno}: {exc}") from None
    discipline = fields.get("discipline")
    if discipline is not None and discipline not in DISCIPLINES:
        raise UnknownDiscipline(f"line {lineno}: {discipline!r}")
    split = None
    if "split" in fields:
        try:
            split = Split(fields["split"])
        except ValueError:
            raise MalformedRecord(f"line {lineno}: unknown split {fields['split']!r}") from None
    return ManifestRecord(
        id=fields["id"],
        label=label,
        audio_path=fields.get("audio_path"),
        discipline=discipline,
        teacher_id=fields.get("teacher_id"),
        split=split,
        llf_path=fields.get("llf_path"),
        embedding_path=fields.get("embedding_path"),
    )


def read_manifest(path: str | Path) -> list[ManifestRecord]:
    """Parse a manifest; duplicate ids and malformed lines raise with the
    offending line number. Blank lines are allowed."""
    records = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip():
                continue
            record = _parse_line(line, lineno)
            if record.id in seen:
                raise DuplicateId(f"line {lineno}: id {record.id!r} appears twice")
            seen.add(record.id)
            records.append(record)
    return records


def write_manifest(records: list[ManifestRecord], path: str | Path) -> None:
    lines = []
    for record in records:
        pairs = [("id", record.id), ("label", record.label.display)]
        for key in ("audio_path", "discipline", "teacher_id"):
            value = getattr(record, key)
            if value is not None:
                pairs.append((key, value))
        if record.split is not None:
            pairs.append(("split", record.split.value))
        for key in ("llf_path", "embedding_path"):
            value = getattr(record, key)
            if value is not None:
                pairs.append((key, value))
        for key, value in pairs:
            if "\t" in str(value) or "\n" in str(value):
                raise MalformedRecord(f"record {record.id}: {key} contains a separator")
        lines.append("\t".join(f"{k}={v}" for k, v in pairs))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


@dataclass(frozen=True)
class ManifestSummary:
    total: int
    per_label: dict[str, int]
    per_discipline: dict[str, int]
    per_split: dict[str, int]
    with_llf: int
    with_embedding: int


def validate_manifest(path: str | Path) -> ManifestSummary:
    """Read and summarize; parsing problems surface as typed errors."""
    records = read_manifest(path)
    per_label: dict[str, int] = {}
    per_discipline: dict[str, int] = {}
    per_split: dict[str, int] = {}
    for r in records:
        per_label[r.label.display] = per_label.get(r.label.display, 0) + 1
        if r.discipline:
            per_discipline[r.discipline] = per_discipline.get(r.discipline, 0) + 1
        if r.split:
            per_split[r.split.value] = per_split.get(r.split.value, 0) + 1
    return ManifestSummary(
        total=len(records),
        per_label=per_label,
        per_discipline=per_discipline,
        per_split=per_split,
        with_llf=sum(1 for r in records if r.llf_path),
        with_embedding=sum(1 for r in records if r.embedding_path),
    )


def _largest_remainder(n: int, ratios: tuple[float, float, float]) -> list[int]:
    exact = [n * r for r in ratios]
    base = [int(math.floor(e)) for e in exact]
    remainders = [e - b for e, b in zip(exact, base)]
    for _ in range(n - sum(base)):
        idx = max(range(len(ratios)), key=lambda i: (remainders[i], -i))
        base[idx] += 1
        remainders[idx] = -1.0
    return base


def stratified_split(
    records: list[ManifestRecord],
    ratios: tuple[float, float, float] = (0.8, 0.1, 0.1),
    seed: int = 0,
    group_by_teacher: bool = False,
) -> list[ManifestRecord]:
    """Assign train/dev/test per label in the given proportions.

    Per-label counts follow the largest-remainder rule, so fractions land
    within one record of exact. With group_by_teacher, whole teachers move
    together (greedy to the neediest split), which keeps speakers out of
    more than one split at the cost of looser proportions. Returns new
    records in the original order; input records are not modified.
    """
    if len(ratios) != 3 or any(r <= 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise BadRatios(f"ratios {ratios} must be three positive numbers summing to 1")
    present = {r.label for r in records}
    if len(present) < len(Label):
        missing = [l.display for l in Label if l not in present]
        raise InsufficientRecords(f"no records for label(s): {', '.join(missing)}")

    rng = np.random.default_rng(seed)
    splits = list(Split)
    assignment: dict[str, Split] = {}

    if group_by_teacher:
        groups: dict[str, list[ManifestRecord]] = {}
        for r in records:
            key = r.teacher_id if r.teacher_id is not None else f"__solo__{r.id}"
            groups.setdefault(key, []).append(r)
        keys = sorted(groups)
        order = rng.permutation(len(keys))
        targets = _largest_remainder(len(records), ratios)
        filled = [0, 0, 0]
        for gi in order:
            group = groups[keys[gi]]
            deficit = [targets[i] - filled[i] for i in range(3)]
            pick = max(range(3), key=lambda i: (deficit[i], -i))
            for r in group:
                assignment[r.id] = splits[pick]
            filled[pick] += len(group)
    else:
        for label in sorted(Label):
            ids = [r.id for r in records if r.label == label]
            order = rng.permutation(len(ids))
            counts = _largest_remainder(len(ids), ratios)
            cursor = 0
            for split, count in zip(splits, counts):
                for k in order[cursor : cursor + count]:
                    assignment[ids[k]] = split
                cursor += count

    return [replace(r, split=assignment[r.id]) for r in records]


# -- feature loading ---------------------------------------------------------


@dataclass(frozen=True)
class FeatureRecord:
    """One clip ready for the model: raw feature matrix and pooled embedding."""

    id: str
    label: Label
    llf: np.ndarray | None = None
    emb_mean: np.ndarray | None = None


def load_features(
    records: list[ManifestRecord],
    base_dir: str | Path,
    need_llf: bool = True,
    need_emb: bool = True,
    cache: EmbeddingCache | None = None,
) -> list[FeatureRecord]:
    """Materialize per-record inputs from the paths in a manifest.

    Embeddings are mean-pooled over time here; the model never sees the
    full (T_w, D_w) matrix during training or evaluation.
    """
    base = Path(base_dir)
    out = []
    for r in records:
        llf = None
        emb_mean = None
        if need_llf:
            if not r.llf_path:
                raise MissingFeature(f"record {r.id} has no llf_path")
            llf = read_tnsr(base / r.llf_path).astype(np.float64)
        if need_emb:
            if not r.embedding_path:
                raise MissingEmbedding(f"record {r.id} has no embedding_path")
            emb = load_embedding(base / r.embedding_path, cache)
            emb_mean = emb.values.astype(np.float64).mean(axis=0)
        out.append(FeatureRecord(id=r.id, label=r.label, llf=llf, emb_mean=emb_mean))
    return out


def stack_inputs(
    model: IntonationModel, records: list[FeatureRecord]
) -> tuple[np.ndarray | None, np.ndarray | None, np.ndarray]:
    """Batch records into model inputs (standardized features, pooled
    embeddings, labels), checking widths against the model config."""
    cfg = model.cfg
    labels = np.array([int(r.label) for r in records])
    llf = None
    emb = None
    if cfg.uses_llf:
        mats = []
        for r in records:
            if r.llf is None:
                raise MissingFeature(f"record {r.id} has no framewise features")
            mats.append(r.llf)
        shapes = {m.shape for m in mats}
        if len(shapes) > 1:
            raise DimMismatch(f"records disagree on feature shape: {sorted(shapes)}")
        if mats[0].shape[1] != cfg.llf_dim:
            raise DimMismatch(f"feature width {mats[0].shape[1]}, model wants {cfg.llf_dim}")
        llf = model.normalize_llf(np.stack(mats))
    if cfg.uses_emb:
        rows = []
        for r in records:
            if r.emb_mean is None:
                raise MissingFeature(f"record {r.id} has no embedding")
            rows.append(r.emb_mean)
        emb = np.stack(rows).astype(np.float64)
        if emb.shape[1] != cfg.emb_dim:
            raise DimMismatch(f"embedding width {emb.shape[1]}, model wants {cfg.emb_dim}")
    return llf, emb, labels


def predict_labels(
    model: IntonationModel,
    llf: np.ndarray | None,
    emb_mean: np.ndarray | None,
    micro_batch: int = 64,
) -> np.ndarray:
    """Argmax labels for pre-stacked inputs, evaluated in bounded chunks."""
    n = llf.shape[0] if llf is not None else emb_mean.shape[0]
    out = np.empty(n, dtype=np.int64)
    for start in range(0, n, micro_batch):
        stop = start + micro_batch
        logits = model.forward_batch(
            None if llf is None else llf[start:stop],
            None if emb_mean is None else emb_mean[start:stop],
            train=False,
        )
        out[start:stop] = np.argmax(logits, axis=1)
    return out


# -- metrics -----------------------------------------------------------------


@dataclass(frozen=True)
class ClassScores:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass(frozen=True)
class Scores:
    accuracy: float
    macro_f1: float
    weighted_f1: float
    per_class: tuple[ClassScores, ...]


def confusion_matrix(y_true: np.ndarray, y_pred: np.ndarray, n_classes: int) -> np.ndarray:
    """conf[i, j] counts records of true class i predicted as class j."""
    conf = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(conf, (np.asarray(y_true, dtype=np.int64), np.asarray(y_pred, dtype=np.int64)), 1)
    return conf


def scores_from_confusion(conf: np.ndarray) -> Scores:
    """Accuracy plus per-class precision/recall/F1 and their macro and
    support-weighted means. Undefined ratios (empty class or empty
    prediction) score 0, and macro-F1 still averages over all classes."""
    conf = np.asarray(conf, dtype=np.float64)
    support = conf.sum(axis=1)
    predicted = conf.sum(axis=0)
    true_pos = np.diag(conf)
    total = conf.sum()
    with np.errstate(invalid="ignore", divide="ignore"):
        precision = np.where(predicted > 0, true_pos / predicted, 0.0)
        recall = np.where(support > 0, true_pos / support, 0.0)
        pr_sum = precision + recall
        f1 = np.where(pr_sum > 0, 2.0 * precision * recall / np.maximum(pr_sum, 1e-300), 0.0)
    per_class = tuple(
        ClassScores(float(precision[c]), float(recall[c]), float(f1[c]), int(support[c]))
        for c in range(conf.shape[0])
    )
    return Scores(
        accuracy=float(true_pos.sum() / total) if total else 0.0,
        macro_f1=float(f1.mean()),
        weighted_f1=float((f1 * support).sum() / total) if total else 0.0,
        per_class=per_class,
    )


@dataclass(frozen=True)
class EvalResult:
    scores: Scores
    confusion: np.ndarray
    n_records: int


def evaluate(model: IntonationModel, records: list[FeatureRecord]) -> EvalResult:
    """Score a model over records that already carry their features."""
    if not records:
        raise EmptyDataset("evaluate needs at least one record")
    llf, emb, labels = stack_inputs(model, records)
    predictions = predict_labels(model, llf, emb)
    conf = confusion_matrix(labels, predictions, model.cfg.n_classes)
    return EvalResult(scores=scores_from_confusion(conf), confusion=conf, n_records=len(records))


# -- synthetic corpus ---------------------------------------------------------

SYNTH_SAMPLE_RATE = 16000
_HARMONIC_WEIGHTS = np.array([1.0, 0.5, 0.25]) / 1.75


def _synth_clip_samples(rng: np.random.Generator, label: Label, n_samples: int) -> np.ndarray:
    """Rhythmic clips sweep pitch and loudness; unrhythmic clips hold both flat."""
    t = np.arange(n_samples) / SYNTH_SAMPLE_RATE
    if label == Label.RHYTHMIC:
        f0 = 180.0 + 60.0 * np.sin(2.0 * np.pi * 0.5 * t + rng.uniform(0, 2 * np.pi))
        amp = 0.55 * (1.0 + 0.5 * np.sin(2.0 * np.pi * 0.4 * t + rng.uniform(0, 2 * np.pi)))
    else:
        f0 = np.full(n_samples, rng.uniform(160.0, 200.0))
        amp = np.full(n_samples, 0.55)
    phase = 2.0 * np.pi * np.cumsum(f0) / SYNTH_SAMPLE_RATE
    tone = sum(w * np.sin((k + 1) * phase) for k, w in enumerate(_HARMONIC_WEIGHTS))
    return amp * tone + 0.005 * rng.standard_normal(n_samples)


def synth_corpus(
    out_dir: str | Path,
    n_per_class: int = 100,
    seed: int = 0,
    clip_seconds: float = 15.0,
    emb_frames: int = 749,
    emb_dim: int = 768,
) -> Path:
    """Generate a labeled corpus of WAVs plus embeddings and its manifest.

    Fully deterministic in (seed, n_per_class): every clip gets its own
    child generator, so corpora are byte-identical across runs.
    """
    out = Path(out_dir)
    (out / "wavs").mkdir(parents=True, exist_ok=True)
    (out / "embeddings").mkdir(parents=True, exist_ok=True)
    n_samples = int(round(clip_seconds * SYNTH_SAMPLE_RATE))
    records = []
    for label in Label:
        for i in range(n_per_class):
            clip_id = f"synth-{label.display}-{i:03d}"
            rng = np.random.default_rng([seed & 0xFFFFFFFF, int(label), i])
            samples = _synth_clip_samples(rng, label, n_samples)
            wav_rel = f"wavs/{clip_id}.wav"
            write_wav(AudioBuffer(samples, SYNTH_SAMPLE_RATE), out / wav_rel)
            emb = synth_embedding(clip_id, seed, emb_frames, emb_dim, class_signal=label)
            emb_rel = f"embeddings/{clip_id}.tnsr"
            write_tnsr(emb.values, out / emb_rel)
            global_index = int(label) * n_per_class + i
            records.append(
                ManifestRecord(
                    id=clip_id,
                    label=label,
                    audio_path=wav_rel,
                    discipline=DISCIPLINES[global_index % len(DISCIPLINES)],
                    teacher_id=f"t{int(label)}-{i // 4:03d}",
                    embedding_path=emb_rel,
                )
            )
    manifest = out / "manifest.txt"
    write_manifest(records, manifest)
    return manifest
