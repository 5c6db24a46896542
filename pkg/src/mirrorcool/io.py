"""CSV tables with unit-annotated headers and JSON run manifests."""

from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path
from typing import Iterable, Sequence


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, int):
        return str(v)
    return repr(float(v))


def write_table(path, columns: Sequence[str], rows: Iterable[Sequence]) -> Path:
    """Write ``rows`` under a single header line such as ``p0[hbar*k0]``."""
    path = Path(path)
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            if len(row) != len(columns):
                raise ValueError(f"row has {len(row)} fields, header has {len(columns)}")
            fh.write(",".join(_fmt(v) for v in row) + "\n")
    return path


def read_table(path) -> tuple[list[str], list[list[float]]]:
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        rows = [[float(v) for v in line.strip().split(",")] for line in fh if line.strip()]
    return header, rows


def config_hash(resolved: dict) -> str:
    blob = json.dumps(resolved, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def write_manifest(path, command: str, resolved: dict, files: Sequence, **extra) -> Path:
    path = Path(path)
    manifest = {
        "command": command,
        "config_hash": config_hash(resolved),
        "config": resolved,
        "files": [os.path.basename(str(f)) for f in files],
        **extra,
    }
    with open(path, "w", newline="\n") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path
