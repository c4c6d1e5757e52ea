import io
import json
from contextlib import redirect_stderr, redirect_stdout

import numpy as np
import pytest

from conftest import SR, make_corpus, sine, write_wav
from w2v_exporter import (
    CheckpointUnavailable,
    ClipUnreadable,
    ExportJob,
    ManifestError,
    export,
    read_tnsr,
    write_tnsr,
)
from w2v_exporter.cli import main
from w2v_exporter.manifest import read_manifest, write_manifest
from w2v_exporter.wav import read_clip


def run_cli(*argv):
    out, err = io.StringIO(), io.StringIO()
    with redirect_stdout(out), redirect_stderr(err):
        code = main(list(argv))
    return code, out.getvalue(), err.getvalue()


# -- tensor files -----------------------------------------------------------


def test_tnsr_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    for shape in [(3,), (2, 3), (4, 5, 2)]:
        arr = rng.standard_normal(shape).astype(np.float32)
        write_tnsr(arr, tmp_path / "t.tnsr")
        back = read_tnsr(tmp_path / "t.tnsr")
        assert back.dtype == np.float32
        assert np.array_equal(back, arr)


def test_tnsr_rejects_bad_files(tmp_path):
    with pytest.raises(ValueError):
        write_tnsr(np.array([np.nan], dtype=np.float32), tmp_path / "bad.tnsr")
    (tmp_path / "junk.tnsr").write_bytes(b"JUNKxxxx")
    with pytest.raises(ValueError):
        read_tnsr(tmp_path / "junk.tnsr")
    write_tnsr(np.zeros((2, 2), dtype=np.float32), tmp_path / "short.tnsr")
    blob = (tmp_path / "short.tnsr").read_bytes()
    (tmp_path / "short.tnsr").write_bytes(blob[:-4])
    with pytest.raises(ValueError):
        read_tnsr(tmp_path / "short.tnsr")


# -- manifests ----------------------------------------------------------------


def test_manifest_passthrough_preserves_unknown_keys(tmp_path):
    path = tmp_path / "m.txt"
    path.write_text("id=a\tlabel=rhythmic\tdiscipline=Maths\taudio_path=a.wav\n")
    rows = read_manifest(path)
    rows[0]["embedding_path"] = "emb/a.tnsr"
    write_manifest(rows, path)
    line = path.read_text().rstrip("\n")
    assert line == (
        "id=a\tlabel=rhythmic\tdiscipline=Maths\taudio_path=a.wav\tembedding_path=emb/a.tnsr"
    )


def test_manifest_errors(tmp_path):
    path = tmp_path / "m.txt"
    path.write_text("label=rhythmic\n")
    with pytest.raises(ManifestError):
        read_manifest(path)
    path.write_text("id=a\tnot_a_pair\n")
    with pytest.raises(ManifestError):
        read_manifest(path)


# -- wav ingest -----------------------------------------------------------------


def test_wav_reader_validates(tmp_path):
    good = tmp_path / "good.wav"
    write_wav(good, sine(220.0, 0.2))
    samples = read_clip(good)
    assert samples.dtype == np.float32
    assert len(samples) == int(0.2 * SR)
    assert np.abs(samples).max() <= 1.0

    stereo = tmp_path / "stereo.wav"
    write_wav(stereo, sine(220.0, 0.1), channels=2)
    with pytest.raises(ClipUnreadable):
        read_clip(stereo)

    slow = tmp_path / "slow.wav"
    write_wav(slow, sine(220.0, 0.1), sample_rate=8000)
    with pytest.raises(ClipUnreadable):
        read_clip(slow)

    garbage = tmp_path / "garbage.wav"
    garbage.write_bytes(b"not audio at all")
    with pytest.raises(ClipUnreadable):
        read_clip(garbage)


# -- export ---------------------------------------------------------------------


def test_export_writes_embeddings_and_updates_manifest(tmp_path, checkpoint_dir):
    manifest = make_corpus(tmp_path, seconds=1.0, n_clips=3)
    report = export(
        ExportJob(manifest, checkpoint_dir, tmp_path / "emb", batch_size=2)
    )
    assert report.ok
    assert report.written == ["clip-00", "clip-01", "clip-02"]
    rows = read_manifest(manifest)
    for row in rows:
        assert row["embedding_path"]
        values = read_tnsr(tmp_path / row["embedding_path"])
        assert values.ndim == 2
        assert values.shape[1] == 768
        assert values.dtype == np.float32
        assert np.isfinite(values).all()
        # passthrough keys survive the rewrite
        assert row["teacher_id"].startswith("t-")
    payload = json.loads((tmp_path / "emb" / "export_report.json").read_text())
    assert payload["checkpoint"] == checkpoint_dir
    assert payload["skipped"] == []
    # atomic writes leave no temporaries behind
    assert not list((tmp_path / "emb").glob("*.tmp-*"))


def test_export_fifteen_second_clip_frame_count(tmp_path, checkpoint_dir):
    """The classifier package's nominal clip: 15 s at 16 kHz."""
    manifest = make_corpus(tmp_path, seconds=15.0, n_clips=1)
    report = export(ExportJob(manifest, checkpoint_dir, tmp_path / "emb", batch_size=1))
    assert report.ok
    values = read_tnsr(tmp_path / read_manifest(manifest)[0]["embedding_path"])
    assert values.shape[1] == 768
    assert 740 <= values.shape[0] <= 760
    assert values.shape[0] == 749


def test_export_is_deterministic_across_runs(tmp_path, checkpoint_dir):
    blobs = []
    for name in ("a", "b"):
        root = tmp_path / name
        manifest = make_corpus(root, seconds=0.5, n_clips=2)
        export(ExportJob(manifest, checkpoint_dir, root / "emb", batch_size=2))
        blobs.append(
            {
                row["id"]: (root / row["embedding_path"]).read_bytes()
                for row in read_manifest(manifest)
            }
        )
    assert blobs[0] == blobs[1]


def test_batch_size_does_not_change_results(tmp_path, checkpoint_dir):
    outs = []
    for name, batch in (("one", 1), ("three", 3)):
        root = tmp_path / name
        manifest = make_corpus(root, seconds=0.5, n_clips=3)
        export(ExportJob(manifest, checkpoint_dir, root / "emb", batch_size=batch))
        outs.append(
            {
                row["id"]: read_tnsr(root / row["embedding_path"])
                for row in read_manifest(manifest)
            }
        )
    for clip_id in outs[0]:
        assert np.allclose(outs[0][clip_id], outs[1][clip_id], atol=1e-5)


def test_empty_manifest_succeeds_without_output(tmp_path, checkpoint_dir):
    manifest = tmp_path / "empty.txt"
    manifest.write_text("")
    code, out, err = run_cli(
        "export", "--manifest", str(manifest),
        "--checkpoint", checkpoint_dir, "--out-dir", str(tmp_path / "emb"),
    )
    assert code == 0, err
    assert "exported 0 clips, skipped 0" in out
    assert not (tmp_path / "emb").exists()


def test_unreadable_clip_is_skipped_and_reported(tmp_path, checkpoint_dir):
    manifest = make_corpus(tmp_path, seconds=0.5, n_clips=3)
    (tmp_path / "wavs" / "clip-01.wav").write_bytes(b"broken")
    code, out, err = run_cli(
        "export", "--manifest", str(manifest),
        "--checkpoint", checkpoint_dir, "--out-dir", str(tmp_path / "emb"),
    )
    assert code == 1
    assert "exported 2 clips, skipped 1" in out
    assert "skipped clip-01" in err
    rows = {row["id"]: row for row in read_manifest(manifest)}
    assert "embedding_path" in rows["clip-00"]
    assert "embedding_path" not in rows["clip-01"]
    assert "embedding_path" in rows["clip-02"]
    payload = json.loads((tmp_path / "emb" / "export_report.json").read_text())
    assert payload["skipped"][0]["id"] == "clip-01"


def test_missing_checkpoint_fails_cleanly(tmp_path):
    manifest = make_corpus(tmp_path, seconds=0.2, n_clips=1)
    with pytest.raises(CheckpointUnavailable):
        export(ExportJob(manifest, str(tmp_path / "no_such_ckpt"), tmp_path / "emb"))
    code, out, err = run_cli(
        "export", "--manifest", str(manifest),
        "--checkpoint", str(tmp_path / "no_such_ckpt"), "--out-dir", str(tmp_path / "emb"),
    )
    assert code == 1
    assert "ERROR CheckpointUnavailable" in err


def test_bad_batch_size_rejected(tmp_path, checkpoint_dir):
    manifest = make_corpus(tmp_path, seconds=0.2, n_clips=1)
    with pytest.raises(ValueError):
        export(ExportJob(manifest, checkpoint_dir, tmp_path / "emb", batch_size=0))


def test_usage_errors_exit_2():
    assert run_cli()[0] == 2
    assert run_cli("export")[0] == 2


# -- interop with the classifier package ---------------------------------------------


def test_exported_files_feed_the_classifier(tmp_path, checkpoint_dir):
    intonation = pytest.importorskip("intonation")

    manifest = make_corpus(tmp_path, seconds=15.0, n_clips=1)
    report = export(ExportJob(manifest, checkpoint_dir, tmp_path / "emb", batch_size=1))
    assert report.ok
    path = tmp_path / read_manifest(manifest)[0]["embedding_path"]

    theirs = intonation.read_tnsr(path)
    ours = read_tnsr(path)
    assert theirs.dtype == ours.dtype
    assert np.array_equal(theirs, ours)

    emb = intonation.load_embedding(path)
    model = intonation.IntonationModel(
        intonation.ModelConfig(
            variant=intonation.Variant.W2E_ONLY, emb_dim=768, fw_out=32
        ),
        np.random.default_rng(0),
    )
    result = model.predict(emb=emb.values.astype(np.float64))
    assert result.probabilities.shape == (2,)
    assert result.probabilities.sum() == pytest.approx(1.0, abs=1e-9)


def test_tensor_bytes_match_classifier_writer(tmp_path):
    intonation = pytest.importorskip("intonation")

    arr = np.array([[0.0, 1.0, 2.0], [3.0, 4.0, -5.5]], dtype=np.float32)
    write_tnsr(arr, tmp_path / "ours.tnsr")
    intonation.write_tnsr(arr, tmp_path / "theirs.tnsr")
    assert (tmp_path / "ours.tnsr").read_bytes() == (tmp_path / "theirs.tnsr").read_bytes()
