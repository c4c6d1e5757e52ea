"""Command-line pipeline driver.

Subcommands cover the full path from audio to scores: synth-corpus and
synth-embeddings fabricate test data, extract-llf and spectrogram process
audio, split/validate-manifest manage manifests, and train/evaluate/predict
run the classifier.

Exit codes: 0 success, 1 any pipeline error (printed as one line
"ERROR <Kind>: <detail>" on stderr), 2 usage errors from the parser.

Training options resolve in three layers: TrainConfig defaults, then the
--config file (key=value lines, # comments allowed), then explicit flags.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import fields, replace
from pathlib import Path

import numpy as np

from . import audio as audio_mod
from . import data as data_mod
from .embeddings import load_embedding, synth_embedding
from .errors import IntonationError, MalformedRecord, MissingFeature
from .labels import CLASS_NAMES
from .llf import LlfConfig, extract_llf
from .model import IntonationModel, ModelConfig, Variant
from .tnsr import read_tnsr, write_tnsr
from .training import TrainConfig, train

log = logging.getLogger(__name__)

_MODEL_KEYS = {f.name for f in fields(ModelConfig)} - {"variant"}
_TRAIN_KEYS = {f.name for f in fields(TrainConfig)}
_INT_KEYS = {
    "max_epochs", "batch_size", "patience", "seed", "micro_batch",
    "llf_dim", "lstm_hidden", "fl_out", "emb_dim", "fw_out", "n_classes",
}
_FLOAT_KEYS = {
    "lr", "beta1", "beta2", "eps", "weight_decay", "dropout_lstm", "dropout_w",
}


def _read_config_file(path: str) -> dict[str, object]:
    """Parse key=value lines into typed train/model settings."""
    out: dict[str, object] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            key, value = key.strip(), value.strip()
            if not sep or not key:
                raise MalformedRecord(f"{path} line {lineno}: expected key=value")
            if key not in _TRAIN_KEYS | _MODEL_KEYS:
                raise MalformedRecord(f"{path} line {lineno}: unknown key {key!r}")
            try:
                if key in _INT_KEYS:
                    out[key] = int(value)
                elif key in _FLOAT_KEYS:
                    out[key] = float(value)
                elif key == "class_weights":
                    out[key] = tuple(float(v) for v in value.split(","))
                else:
                    out[key] = value
            except ValueError:
                raise MalformedRecord(
                    f"{path} line {lineno}: bad value {value!r} for {key}"
                ) from None
    return out


def _parse_ratios(text: str) -> tuple[float, float, float]:
    parts = text.split(",")
    if len(parts) != 3:
        raise MalformedRecord(f"--ratios needs three comma-separated numbers, got {text!r}")
    try:
        a, b, c = (float(p) for p in parts)
    except ValueError:
        raise MalformedRecord(f"--ratios could not parse {text!r}") from None
    return (a, b, c)


def _load_clip(wav_path: str, clip_id: str) -> audio_mod.Clip:
    buf = audio_mod.read_wav(wav_path)
    clip = audio_mod.Clip(id=clip_id, audio=buf)
    clip.validate()
    return clip


# -- subcommand bodies ---------------------------------------------------


def _cmd_synth_corpus(args) -> int:
    manifest = data_mod.synth_corpus(
        args.out_dir, n_per_class=args.n_per_class, seed=args.seed
    )
    print(f"wrote {2 * args.n_per_class} clips, manifest at {manifest}")
    return 0


def _cmd_synth_embeddings(args) -> int:
    manifest_path = Path(args.manifest)
    records = data_mod.read_manifest(manifest_path)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    updated = []
    for record in records:
        emb = synth_embedding(
            record.id, args.seed, args.frames, args.dim, class_signal=record.label
        )
        target = out_dir / f"{record.id}.emb.tnsr"
        write_tnsr(emb.values, target)
        rel = os.path.relpath(target, manifest_path.parent)
        updated.append(replace(record, embedding_path=rel))
    data_mod.write_manifest(updated, manifest_path)
    print(f"embedded {len(updated)} records -> {out_dir}")
    return 0


def _cmd_extract_llf(args) -> int:
    manifest_path = Path(args.manifest)
    records = data_mod.read_manifest(manifest_path)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cfg = LlfConfig()

    def one(record):
        if not record.audio_path:
            raise MissingFeature(f"record {record.id} has no audio_path")
        clip = _load_clip(str(manifest_path.parent / record.audio_path), record.id)
        matrix = extract_llf(clip, cfg)
        target = out_dir / f"{record.id}.llf.tnsr"
        write_tnsr(matrix.values.astype(np.float32), target)
        rel = os.path.relpath(target, manifest_path.parent)
        return replace(record, llf_path=rel)

    if args.workers > 1:
        with ThreadPoolExecutor(max_workers=args.workers) as pool:
            updated = list(pool.map(one, records))
    else:
        updated = [one(r) for r in records]
    data_mod.write_manifest(updated, manifest_path)
    print(f"extracted features for {len(updated)} clips -> {out_dir}")
    return 0


def _cmd_spectrogram(args) -> int:
    buf = audio_mod.read_wav(args.wav, downmix=args.downmix)
    clips = audio_mod.segment(buf, source=Path(args.wav).stem)
    if not clips:
        raise IntonationError(
            f"{args.wav}: shorter than one {audio_mod.CLIP_SECONDS:.0f}s clip"
        )
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for k, clip in enumerate(clips):
        grid = audio_mod.render_spectrogram(clip.audio)
        target = out_dir / f"{Path(args.wav).stem}_{k}.pgm"
        audio_mod.write_pgm(grid, target)
    print(f"wrote {len(clips)} spectrograms -> {out_dir}")
    return 0


def _cmd_split(args) -> int:
    records = data_mod.read_manifest(args.manifest)
    ratios = _parse_ratios(args.ratios)
    updated = data_mod.stratified_split(
        records, ratios, seed=args.seed, group_by_teacher=args.group_by_teacher
    )
    data_mod.write_manifest(updated, args.manifest)
    counts = {}
    for r in updated:
        counts[r.split.value] = counts.get(r.split.value, 0) + 1
    print(" ".join(f"{k}={counts.get(k, 0)}" for k in ("train", "dev", "test")))
    return 0


def _cmd_validate_manifest(args) -> int:
    summary = data_mod.validate_manifest(args.manifest)
    print(f"records={summary.total}")
    for name, count in sorted(summary.per_label.items()):
        print(f"label.{name}={count}")
    for name, count in sorted(summary.per_discipline.items()):
        print(f"discipline.{name}={count}")
    for name, count in sorted(summary.per_split.items()):
        print(f"split.{name}={count}")
    print(f"with_llf={summary.with_llf}")
    print(f"with_embedding={summary.with_embedding}")
    return 0


def _split_records(records, ratios, seed):
    if any(r.split is None for r in records):
        records = data_mod.stratified_split(records, ratios, seed=seed)
    by = {split: [] for split in data_mod.Split}
    for r in records:
        by[r.split].append(r)
    return by


def _cmd_train(args) -> int:
    manifest_path = Path(args.manifest)
    records = data_mod.read_manifest(manifest_path)

    settings = _read_config_file(args.config) if args.config else {}
    if args.seed is not None:
        settings["seed"] = args.seed
    variant = Variant(args.variant)

    model_kwargs = {k: v for k, v in settings.items() if k in _MODEL_KEYS}
    train_kwargs = {k: v for k, v in settings.items() if k in _TRAIN_KEYS}
    model_cfg = ModelConfig(variant=variant, **model_kwargs)
    train_cfg = TrainConfig(**train_kwargs)

    by_split = _split_records(records, _parse_ratios(args.ratios), train_cfg.seed)
    cache = data_mod.EmbeddingCache(max_entries=8)
    loaded = {
        split: data_mod.load_features(
            recs,
            manifest_path.parent,
            need_llf=model_cfg.uses_llf,
            need_emb=model_cfg.uses_emb,
            cache=cache,
        )
        for split, recs in by_split.items()
    }

    model = IntonationModel(model_cfg, np.random.default_rng(train_cfg.seed))
    model.llf_config = LlfConfig()
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    report = train(
        model,
        loaded[data_mod.Split.TRAIN],
        loaded[data_mod.Split.DEV],
        train_cfg,
        metrics_path=out_dir / "metrics.txt",
    )
    model.save_checkpoint(
        out_dir / "checkpoint",
        extra={
            "variant": variant.value,
            "seed": train_cfg.seed,
            "best_epoch": report.best_epoch,
            "stop_reason": report.stop_reason,
        },
    )
    best = report.epochs[report.best_epoch - 1]
    print(
        f"variant={variant.value} epochs={len(report.epochs)} best_epoch={report.best_epoch} "
        f"dev_accuracy={best.dev_accuracy:.6f} dev_macro_f1={best.dev_macro_f1:.6f} "
        f"stop={report.stop_reason}"
    )
    print(f"checkpoint={out_dir / 'checkpoint'}")
    return 0


def _cmd_evaluate(args) -> int:
    manifest_path = Path(args.manifest)
    records = data_mod.read_manifest(manifest_path)
    if args.split != "all":
        records = [r for r in records if r.split == data_mod.Split(args.split)]
    model = IntonationModel.load_checkpoint(args.checkpoint)
    loaded = data_mod.load_features(
        records,
        manifest_path.parent,
        need_llf=model.cfg.uses_llf,
        need_emb=model.cfg.uses_emb,
    )
    result = data_mod.evaluate(model, loaded)
    print(f"records={result.n_records} split={args.split}")
    print("confusion (rows true, cols predicted):")
    for i, name in enumerate(CLASS_NAMES):
        row = " ".join(str(int(v)) for v in result.confusion[i])
        print(f"  {name}: {row}")
    for name, cls in zip(CLASS_NAMES, result.scores.per_class):
        print(
            f"class.{name} precision={cls.precision:.6f} recall={cls.recall:.6f} "
            f"f1={cls.f1:.6f} support={cls.support}"
        )
    print(
        f"accuracy={result.scores.accuracy:.6f} macro_f1={result.scores.macro_f1:.6f} "
        f"weighted_f1={result.scores.weighted_f1:.6f}"
    )
    return 0


def _cmd_predict(args) -> int:
    model = IntonationModel.load_checkpoint(args.checkpoint)
    llf_values = None
    emb_values = None
    if model.cfg.uses_llf:
        if args.llf:
            llf_values = read_tnsr(args.llf).astype(np.float64)
        elif args.wav:
            clip = _load_clip(args.wav, Path(args.wav).stem)
            llf_values = extract_llf(clip, model.llf_config or LlfConfig()).values
        else:
            raise MissingFeature("this model needs --llf or --wav")
    if model.cfg.uses_emb:
        if not args.embedding:
            raise MissingFeature("this model needs --embedding")
        emb_values = load_embedding(args.embedding).values
    result = model.predict(llf=llf_values, emb=emb_values)
    probs = " ".join(
        f"p_{name}={p:.6f}" for name, p in zip(CLASS_NAMES, result.probabilities)
    )
    print(f"label={result.label.display} {probs}")
    return 0


# -- parser ----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="intonation",
        description="Teaching-intonation assessment pipeline",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    parser.add_argument("--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def add(name, func, help_text):
        p = sub.add_parser(
            name, help=help_text, description=help_text,
            formatter_class=argparse.ArgumentDefaultsHelpFormatter,
        )
        p.set_defaults(func=func)
        return p

    p = add("synth-corpus", _cmd_synth_corpus, "generate a labeled synthetic corpus")
    p.add_argument("--out-dir", required=True, help="directory for wavs/embeddings/manifest")
    p.add_argument("--n-per-class", type=int, default=100, help="clips per class")
    p.add_argument("--seed", type=int, default=0, help="corpus seed")

    p = add("synth-embeddings", _cmd_synth_embeddings, "attach synthetic embeddings to a manifest")
    p.add_argument("--manifest", required=True, help="manifest to update in place")
    p.add_argument("--out-dir", required=True, help="directory for embedding files")
    p.add_argument("--seed", type=int, default=0, help="embedding seed")
    p.add_argument("--frames", type=int, default=749, help="embedding rows per clip")
    p.add_argument("--dim", type=int, default=768, help="embedding width")

    p = add("extract-llf", _cmd_extract_llf, "compute framewise features for every clip")
    p.add_argument("--manifest", required=True, help="manifest to update in place")
    p.add_argument("--out-dir", required=True, help="directory for feature files")
    p.add_argument("--workers", type=int, default=1, help="parallel extraction threads")

    p = add("spectrogram", _cmd_spectrogram, "render PGM spectrograms for each clip in a WAV")
    p.add_argument("--wav", required=True, help="input RIFF/WAVE file, 16 kHz PCM16")
    p.add_argument("--out-dir", required=True, help="directory for PGM images")
    p.add_argument("--downmix", action="store_true", help="average multi-channel input")

    p = add("split", _cmd_split, "assign stratified train/dev/test splits in place")
    p.add_argument("--manifest", required=True, help="manifest to update in place")
    p.add_argument("--ratios", default="0.8,0.1,0.1", help="train,dev,test fractions")
    p.add_argument("--seed", type=int, default=0, help="shuffle seed")
    p.add_argument("--group-by-teacher", action="store_true",
                   help="keep each teacher's clips inside one split")

    p = add("validate-manifest", _cmd_validate_manifest, "check a manifest and print counts")
    p.add_argument("--manifest", required=True, help="manifest to validate")

    p = add("train", _cmd_train, "train a classifier and write checkpoint plus metrics")
    p.add_argument("--manifest", required=True, help="manifest with features attached")
    p.add_argument("--out-dir", required=True, help="directory for checkpoint and metrics")
    p.add_argument("--config", default=None,
                   help="key=value file overriding training/model defaults")
    p.add_argument("--seed", type=int, default=None,
                   help="seed override (wins over --config)")
    p.add_argument("--variant", default="full", choices=[v.value for v in Variant],
                   help="which input branches the model uses")
    p.add_argument("--ratios", default="0.8,0.1,0.1",
                   help="split fractions used only when the manifest has no splits")

    p = add("evaluate", _cmd_evaluate, "score a checkpoint on one split of a manifest")
    p.add_argument("--manifest", required=True, help="manifest with features attached")
    p.add_argument("--checkpoint", required=True, help="checkpoint directory")
    p.add_argument("--split", default="test", choices=["train", "dev", "test", "all"],
                   help="which records to score")

    p = add("predict", _cmd_predict, "classify a single clip")
    p.add_argument("--checkpoint", required=True, help="checkpoint directory")
    p.add_argument("--wav", default=None, help="one 15 s 16 kHz clip to featurize")
    p.add_argument("--llf", default=None, help="precomputed feature tensor instead of --wav")
    p.add_argument("--embedding", default=None, help="embedding tensor for this clip")

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on usage errors, 0 on --help
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (IntonationError, OSError) as exc:
        print(f"ERROR {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
