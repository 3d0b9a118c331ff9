"""Run manifests and CSV/JSON writers with byte-stable formatting."""

from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

OUTPUT_ENV = "SMOOTHWASS_OUT"


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def canonical_json(obj) -> str:
    return json.dumps(_plain(obj), sort_keys=True, separators=(",", ":"), allow_nan=False)


def config_hash(config: dict) -> str:
    return hashlib.sha256(canonical_json(config).encode("utf-8")).hexdigest()[:16]


def make_manifest(command: str, seed: int, config: dict) -> dict:
    """Everything needed to regenerate an output.  Thread counts and paths are excluded on purpose."""
    from . import __version__

    return {
        "package": "smoothwass",
        "version": __version__,
        "command": command,
        "seed": int(seed),
        "config": _plain(config),
        "config_hash": config_hash(config),
    }


def format_cell(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence], manifest: dict) -> Path:
    """CSV with the manifest on a leading ``# manifest`` comment line."""
    path = Path(path)
    lines = ["# manifest " + canonical_json(manifest), ",".join(header)]
    lines.extend(",".join(format_cell(v) for v in row) for row in rows)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def read_csv(path):
    """(manifest, header, rows of strings) from a file written by :func:`write_csv`."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    manifest = json.loads(lines[0][len("# manifest "):])
    header = lines[1].split(",")
    return manifest, header, [line.split(",") for line in lines[2:]]


def summary_json(manifest: dict, result: dict) -> str:
    return json.dumps(_plain({"manifest": manifest, "result": result}), sort_keys=True, indent=2, allow_nan=True)


def write_json(path, manifest: dict, result: dict) -> Path:
    path = Path(path)
    path.write_text(summary_json(manifest, result) + "\n", encoding="utf-8")
    return path


def output_dir(flag: str | None) -> Path:
    """--out wins over the environment variable, which wins over the working directory."""
    chosen = flag or os.environ.get(OUTPUT_ENV) or "."
    out = Path(chosen)
    out.mkdir(parents=True, exist_ok=True)
    return out
