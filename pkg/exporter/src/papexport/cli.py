"""Exporter command line: list supported backbones, run an export.

Configuration comes from a YAML file, overridable by flags
(flag > file > default). Exit codes: 0 success, 1 runtime/data error,
2 usage error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path
from typing import Sequence

import yaml

from .errors import ExporterConfigError, ExporterError
from .export import ExporterConfig, export_probabilities, read_manifest
from .registry import list_supported_models


def _setup_logging() -> None:
    level = os.environ.get("CASCADE_LOG", "WARNING").upper()
    if level not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
        level = "WARNING"
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


def cmd_models(_: argparse.Namespace) -> int:
    print(f"{'model':<14} {'resolution':>10} {'embed_dim':>10}")
    for model_id, resolution, embed_dim in list_supported_models():
        print(f"{model_id:<14} {resolution:>10} {embed_dim:>10}")
    return 0


_CONFIG_KEYS = {
    "model": str,
    "stage": str,
    "fold": int,
    "checkpoint": str,
    "resolution": int,
    "normalization": str,
    "resize_mode": str,
    "batch_size": int,
    "device": str,
}


def _load_yaml(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        payload = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ExporterConfigError(f"config file not found: {path}") from None
    except yaml.YAMLError as exc:
        raise ExporterConfigError(f"config file {path}: bad YAML ({exc})") from None
    if payload is None:
        return {}
    if not isinstance(payload, dict):
        raise ExporterConfigError(f"config file {path}: expected a mapping")
    unknown = set(payload) - set(_CONFIG_KEYS)
    if unknown:
        raise ExporterConfigError(f"unknown config key(s): {sorted(unknown)}")
    return payload


def cmd_run(args: argparse.Namespace) -> int:
    values = _load_yaml(args.config)
    for key in _CONFIG_KEYS:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    for required in ("model", "stage", "fold", "checkpoint"):
        if required not in values:
            raise ExporterConfigError(f"missing required setting {required!r}")
    config = ExporterConfig(
        model=str(values["model"]),
        stage=str(values["stage"]),
        fold=int(values["fold"]),
        checkpoint=str(values["checkpoint"]),
        resolution=int(values["resolution"]) if "resolution" in values else None,
        normalization=str(values.get("normalization", "imagenet")),
        resize_mode=str(values.get("resize_mode", "resize")),
        batch_size=int(values.get("batch_size", 16)),
        device=str(values.get("device", "cpu")),
    ).validate()

    manifest = read_manifest(args.manifest)
    skipped_csv = args.skipped or None
    result = export_probabilities(config, manifest, args.out, skipped_csv)
    print(
        f"export: {result.rows} rows -> {args.out}"
        + (f" ({len(result.skipped)} skipped)" if result.skipped else "")
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="papexport",
        description="Run vision backbones over image folders, exporting probability CSVs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    models = sub.add_parser("models", help="list supported backbones")
    models.set_defaults(func=cmd_models)

    run = sub.add_parser("run", help="export probabilities for a manifest")
    run.add_argument("--config", help="YAML config file")
    run.add_argument("--manifest", required=True, help="CSV with image_id,path rows")
    run.add_argument("--out", required=True, help="output prediction CSV")
    run.add_argument("--skipped", help="sidecar CSV listing skipped images")
    run.add_argument("--model")
    run.add_argument("--stage", choices=["stage1", "stage2"])
    run.add_argument("--fold", type=int)
    run.add_argument("--checkpoint")
    run.add_argument("--resolution", type=int)
    run.add_argument("--normalization", choices=["imagenet", "none"])
    run.add_argument("--resize-mode", dest="resize_mode", choices=["resize", "center-crop"])
    run.add_argument("--batch-size", dest="batch_size", type=int)
    run.add_argument("--device")
    run.set_defaults(func=cmd_run)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ExporterConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ExporterError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
