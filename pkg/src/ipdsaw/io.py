"""Deterministic file output: CSV, JSON lines, run manifests.

Floats are written with ``repr`` (shortest round-trip form) so that a
replayed run produces byte-identical data files. All writes go through a
temporary file and an atomic rename.
"""

from __future__ import annotations

import csv
import io
import json
import os
import platform
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__

MANIFEST_SUFFIX = ".manifest.json"


def fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, np.integer):
        return str(int(value))
    return str(value)


def atomic_write(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def csv_text(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([fmt(row[c]) for c in columns])
    return buf.getvalue()


def write_csv(path, columns, rows) -> Path:
    return atomic_write(path, csv_text(columns, rows))


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def write_jsonl(path, records) -> Path:
    return atomic_write(path, "".join(json.dumps(r, sort_keys=True) + "\n" for r in records))


def read_jsonl(path) -> list[dict]:
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]


def write_json(path, obj) -> Path:
    return atomic_write(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def manifest_path(data_path) -> Path:
    data_path = Path(data_path)
    return data_path.with_name(data_path.name + MANIFEST_SUFFIX)


def build_manifest(command: str, argv, params: dict, settings: dict, outputs, *, seeds=None,
                   checkpoints=None, wall_clock: float | None = None, backend: str | None = None) -> dict:
    return {
        "command": command,
        "argv": list(argv),
        "params": params,
        "tolerances": settings,
        "seeds": seeds or [],
        "checkpoints": [str(c) for c in (checkpoints or [])],
        "outputs": [Path(o).name for o in outputs],
        "artifact_version": __version__,
        "kernel_backend": backend,
        "python": sys.version.split()[0],
        "platform": platform.platform(),
        "wall_clock_seconds": wall_clock,
    }


def write_manifest(data_path, manifest: dict) -> Path:
    return write_json(manifest_path(data_path), manifest)
