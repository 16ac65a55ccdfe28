"""Deterministic JSON/CSV artifact writing and run manifests.

All numeric output goes through ``repr``-level float formatting so that
rerunning a command with the same inputs and seed reproduces files
byte-for-byte.
"""

from __future__ import annotations

import datetime as dt
import hashlib
import json
from pathlib import Path

import numpy as np

TOOL_VERSION = "0.1.0"


def jsonable(value):
    """Recursively convert numpy/dataclass-ish values to plain JSON types."""
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [jsonable(v) for v in value.tolist()]
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, (dt.date, dt.datetime)):
        return value.isoformat()
    if isinstance(value, Path):
        return str(value)
    return value


def write_json(path, payload) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(jsonable(payload), handle, indent=2, sort_keys=True)
        handle.write("\n")


def format_cell(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (dt.date, dt.datetime)):
        return value.isoformat()
    return str(value)


def write_csv(path, header, rows) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as handle:
        handle.write(",".join(header) + "\n")
        for row in rows:
            handle.write(",".join(format_cell(cell) for cell in row) + "\n")


def sha256_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_manifest(outdir, command: str, options: dict, input_paths,
                   raw_config: str | None = None) -> None:
    """Record everything needed to rerun a command reproducibly.

    Contains no timestamps, so identical reruns produce identical
    manifests.
    """
    inputs = {}
    for p in input_paths:
        if p is None:
            continue
        p = Path(p)
        inputs[p.name] = {"path": str(p), "sha256": sha256_file(p)}
    payload = {
        "command": command,
        "tool_version": TOOL_VERSION,
        "options": jsonable(options),
        "inputs": inputs,
    }
    if raw_config is not None:
        payload["config_file_text"] = raw_config
    write_json(Path(outdir) / "run_manifest.json", payload)
