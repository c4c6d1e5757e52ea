"""Command-line entry: `w2v-export export --manifest ... --checkpoint ...`.

Exit codes: 0 all clips exported, 1 errors (including any skipped clip,
each printed as "skipped <id>: <reason>"), 2 usage errors.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .errors import ExporterError
from .export import ExportJob, export


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="w2v-export",
        description="Export wav2vec 2.0 frame embeddings for manifest clips",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    parser.add_argument("--verbose", action="store_true", help="log per-file progress")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser(
        "export",
        help="write one TNSR embedding file per clip and update the manifest",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    p.add_argument("--manifest", required=True, help="manifest listing clips (updated in place)")
    p.add_argument("--checkpoint", required=True,
                   help="encoder checkpoint: local directory or hub identifier")
    p.add_argument("--out-dir", required=True, help="directory for embedding files")
    p.add_argument("--batch-size", type=int, default=4, help="clips per forward pass")
    p.add_argument("--device", default="cpu", help="torch device for inference")
    p.add_argument("--no-normalize", action="store_true",
                   help="skip per-clip zero-mean/unit-variance input scaling")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    job = ExportJob(
        manifest_path=args.manifest,
        checkpoint=args.checkpoint,
        out_dir=args.out_dir,
        batch_size=args.batch_size,
        device=args.device,
        normalize=not args.no_normalize,
    )
    try:
        report = export(job)
    except (ExporterError, OSError, ValueError) as exc:
        print(f"ERROR {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    print(f"exported {len(report.written)} clips, skipped {len(report.skipped)}")
    for clip_id, reason in report.skipped:
        print(f"skipped {clip_id}: {reason}", file=sys.stderr)
    return 0 if report.ok else 1


if __name__ == "__main__":
    sys.exit(main())
