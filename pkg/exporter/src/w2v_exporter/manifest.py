"""Reader/writer for the tab-separated key=value manifest format.

The exporter treats records as ordered key->value mappings: it needs only
`id` and `audio_path`, fills `embedding_path`, and passes every other key
through untouched so the classifier package keeps full ownership of the
schema and its validation.
"""

from __future__ import annotations

from pathlib import Path

from .errors import ManifestError


def read_manifest(path: str | Path) -> list[dict[str, str]]:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip():
                continue
            row: dict[str, str] = {}
            for token in line.split("\t"):
                key, sep, value = token.partition("=")
                if not sep or not key:
                    raise ManifestError(f"{path} line {lineno}: token {token!r} is not key=value")
                if key in row:
                    raise ManifestError(f"{path} line {lineno}: repeated key {key!r}")
                row[key] = value
            if not row.get("id"):
                raise ManifestError(f"{path} line {lineno}: missing id")
            rows.append(row)
    return rows


def write_manifest(rows: list[dict[str, str]], path: str | Path) -> None:
    lines = []
    for row in rows:
        for key, value in row.items():
            if "\t" in value or "\n" in value or "=" in key:
                raise ManifestError(f"record {row.get('id')}: {key!r} contains a separator")
        lines.append("\t".join(f"{k}={v}" for k, v in row.items()))
    Path(path).write_text("\n".join(lines) + "\n" if lines else "", encoding="utf-8")
