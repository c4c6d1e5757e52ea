import io
import json
from contextlib import redirect_stderr, redirect_stdout
from pathlib import Path

import numpy as np
import pytest

from intonation.audio import AudioBuffer, write_wav
from intonation.cli import build_parser, main
from intonation.data import read_manifest
from intonation.tnsr import read_tnsr

TRAIN_CFG = """\
# small everything so the run finishes in seconds
lstm_hidden = 8
fl_out = 8
emb_dim = 16
fw_out = 8
lr = 1e-3
max_epochs = 2
batch_size = 4
micro_batch = 4
patience = 2
seed = 1
"""


def run_cli(*argv):
    out, err = io.StringIO(), io.StringIO()
    with redirect_stdout(out), redirect_stderr(err):
        code = main(list(argv))
    return code, out.getvalue(), err.getvalue()


def parse_kv(line):
    return dict(kv.split("=", 1) for kv in line.split())


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    """Tiny end-to-end corpus built through the CLI itself."""
    root = tmp_path_factory.mktemp("cli_corpus")
    manifest = root / "manifest.txt"

    code, out, err = run_cli(
        "synth-corpus", "--out-dir", str(root), "--n-per-class", "6", "--seed", "0"
    )
    assert code == 0, err
    assert "12 clips" in out

    code, out, err = run_cli(
        "extract-llf", "--manifest", str(manifest), "--out-dir", str(root / "llf")
    )
    assert code == 0, err

    code, out, err = run_cli(
        "synth-embeddings", "--manifest", str(manifest),
        "--out-dir", str(root / "emb16"), "--frames", "8", "--dim", "16",
    )
    assert code == 0, err

    code, out, err = run_cli(
        "split", "--manifest", str(manifest), "--ratios", "0.5,0.25,0.25", "--seed", "42"
    )
    assert code == 0, err
    assert parse_kv(out.strip()) == {"train": "6", "dev": "4", "test": "2"}

    cfg = root / "train.cfg"
    cfg.write_text(TRAIN_CFG)
    return {"root": root, "manifest": manifest, "cfg": cfg}


@pytest.fixture(scope="module")
def trained(corpus):
    run_dir = corpus["root"] / "run"
    code, out, err = run_cli(
        "train", "--manifest", str(corpus["manifest"]), "--out-dir", str(run_dir),
        "--config", str(corpus["cfg"]), "--variant", "full",
    )
    assert code == 0, err
    return {"run_dir": run_dir, "stdout": out, **corpus}


# -- corpus generation -------------------------------------------------------


def test_corpus_files_exist(corpus):
    records = read_manifest(corpus["manifest"])
    assert len(records) == 12
    for r in records:
        assert (corpus["root"] / r.audio_path).exists()
        assert (corpus["root"] / r.llf_path).exists()
        assert (corpus["root"] / r.embedding_path).exists()
        assert r.split is not None


def test_extracted_feature_shape(corpus):
    r = read_manifest(corpus["manifest"])[0]
    mat = read_tnsr(corpus["root"] / r.llf_path)
    assert mat.shape == (1498, 23)
    emb = read_tnsr(corpus["root"] / r.embedding_path)
    assert emb.shape == (8, 16)


def test_validate_manifest_output(corpus):
    code, out, err = run_cli("validate-manifest", "--manifest", str(corpus["manifest"]))
    assert code == 0, err
    lines = dict(l.split("=", 1) for l in out.strip().splitlines())
    assert lines["records"] == "12"
    assert lines["label.rhythmic"] == "6"
    assert lines["label.unrhythmic"] == "6"
    assert lines["with_llf"] == "12"
    assert lines["with_embedding"] == "12"
    assert lines["split.train"] == "6"


# -- training ----------------------------------------------------------------


def test_train_writes_outputs_and_summary(trained):
    summary = parse_kv(trained["stdout"].splitlines()[0])
    assert summary["variant"] == "full"
    assert summary["epochs"] == "2"
    assert summary["stop"] in {"early_stopping", "max_epochs"}
    assert 0.0 <= float(summary["dev_accuracy"]) <= 1.0
    assert (trained["run_dir"] / "metrics.txt").exists()
    assert (trained["run_dir"] / "checkpoint" / "meta.json").exists()
    metrics = (trained["run_dir"] / "metrics.txt").read_text().splitlines()
    assert len(metrics) == 3  # 2 epochs + summary line


def test_seed_flag_beats_config(corpus):
    run_dir = corpus["root"] / "run_seeded"
    code, out, err = run_cli(
        "train", "--manifest", str(corpus["manifest"]), "--out-dir", str(run_dir),
        "--config", str(corpus["cfg"]), "--variant", "w2e", "--seed", "9",
    )
    assert code == 0, err
    meta = json.loads((run_dir / "checkpoint" / "meta.json").read_text())
    assert meta["extra"]["seed"] == 9
    assert meta["extra"]["variant"] == "w2e"


def test_train_rejects_unknown_config_key(corpus, tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("learning_rate=0.1\n")
    code, out, err = run_cli(
        "train", "--manifest", str(corpus["manifest"]),
        "--out-dir", str(tmp_path / "run"), "--config", str(bad),
    )
    assert code == 1
    assert err.startswith("ERROR MalformedRecord")
    assert "learning_rate" in err


# -- evaluate ------------------------------------------------------------------


def test_evaluate_prints_metrics(trained):
    code, out, err = run_cli(
        "evaluate", "--manifest", str(trained["manifest"]),
        "--checkpoint", str(trained["run_dir"] / "checkpoint"), "--split", "dev",
    )
    assert code == 0, err
    lines = out.strip().splitlines()
    assert lines[0] == "records=4 split=dev"
    assert lines[1].startswith("confusion")
    final = parse_kv(lines[-1])
    assert 0.0 <= float(final["accuracy"]) <= 1.0
    assert 0.0 <= float(final["macro_f1"]) <= 1.0
    assert 0.0 <= float(final["weighted_f1"]) <= 1.0


def test_evaluate_all_split(trained):
    code, out, err = run_cli(
        "evaluate", "--manifest", str(trained["manifest"]),
        "--checkpoint", str(trained["run_dir"] / "checkpoint"), "--split", "all",
    )
    assert code == 0, err
    assert out.startswith("records=12 split=all")


# -- predict --------------------------------------------------------------------


def test_predict_from_wav(trained):
    r = read_manifest(trained["manifest"])[0]
    code, out, err = run_cli(
        "predict", "--checkpoint", str(trained["run_dir"] / "checkpoint"),
        "--wav", str(trained["root"] / r.audio_path),
        "--embedding", str(trained["root"] / r.embedding_path),
    )
    assert code == 0, err
    parts = parse_kv(out.strip())
    assert parts["label"] in {"rhythmic", "unrhythmic"}
    total = float(parts["p_rhythmic"]) + float(parts["p_unrhythmic"])
    assert total == pytest.approx(1.0, abs=1e-6)


def test_predict_from_precomputed_features(trained):
    r = read_manifest(trained["manifest"])[0]
    code, out, err = run_cli(
        "predict", "--checkpoint", str(trained["run_dir"] / "checkpoint"),
        "--llf", str(trained["root"] / r.llf_path),
        "--embedding", str(trained["root"] / r.embedding_path),
    )
    assert code == 0, err
    assert out.startswith("label=")


def test_predict_missing_embedding_fails(trained):
    r = read_manifest(trained["manifest"])[0]
    code, out, err = run_cli(
        "predict", "--checkpoint", str(trained["run_dir"] / "checkpoint"),
        "--wav", str(trained["root"] / r.audio_path),
    )
    assert code == 1
    assert "ERROR MissingFeature" in err
    assert "--embedding" in err


# -- spectrogram -----------------------------------------------------------------


def test_spectrogram_segments_long_wav(tmp_path):
    sr = 16000
    t = np.arange(37 * sr) / sr
    buf = AudioBuffer(0.4 * np.sin(2 * np.pi * 440 * t), sr)
    wav = tmp_path / "lesson.wav"
    write_wav(buf, wav)
    code, out, err = run_cli(
        "spectrogram", "--wav", str(wav), "--out-dir", str(tmp_path / "pgm")
    )
    assert code == 0, err
    assert "2 spectrograms" in out
    files = sorted(p.name for p in (tmp_path / "pgm").iterdir())
    assert files == ["lesson_0.pgm", "lesson_1.pgm"]
    header = (tmp_path / "pgm" / "lesson_0.pgm").read_bytes()[:2]
    assert header == b"P5"


def test_spectrogram_too_short(tmp_path):
    buf = AudioBuffer(np.zeros(16000), 16000)
    wav = tmp_path / "short.wav"
    write_wav(buf, wav)
    code, out, err = run_cli(
        "spectrogram", "--wav", str(wav), "--out-dir", str(tmp_path / "pgm")
    )
    assert code == 1
    assert "ERROR" in err


# -- exit codes and help -----------------------------------------------------------


def test_missing_file_is_exit_1(tmp_path):
    code, out, err = run_cli("validate-manifest", "--manifest", str(tmp_path / "no.txt"))
    assert code == 1
    assert err.startswith("ERROR")


def test_bad_ratio_string_is_exit_1(corpus):
    code, out, err = run_cli(
        "split", "--manifest", str(corpus["manifest"]), "--ratios", "0.8,0.2"
    )
    assert code == 1
    assert "ERROR MalformedRecord" in err


def test_usage_errors_are_exit_2():
    assert run_cli()[0] == 2
    assert run_cli("no-such-command")[0] == 2
    assert run_cli("split")[0] == 2  # missing required --manifest


def test_help_exits_zero():
    code, out, err = run_cli("--help")
    assert code == 0
    assert "COMMAND" in out


def test_every_flag_documents_itself():
    parser = build_parser()
    stack = [parser]
    while stack:
        p = stack.pop()
        for action in p._actions:
            if isinstance(action, type(p._subparsers._group_actions[0]) if p._subparsers else ()):
                continue
            if action.dest == "help":
                continue
            if hasattr(action, "choices") and action.choices and action.dest == "command":
                stack.extend(action.choices.values())
                continue
            assert action.help, f"{p.prog}: {action.dest} has no help text"
