"""Run manifests: a reproducibility record written beside every command's outputs."""

from __future__ import annotations

import hashlib
import json
import time
from pathlib import Path

from . import __version__


def _sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with path.open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_run_manifest(
    out_dir: str | Path,
    command: str,
    config: dict,
    seeds: dict,
    inputs: list[str | Path],
    outputs: list[str | Path],
) -> Path:
    """Write ``run_manifest.<command>.json`` capturing config, seeds, and input hashes.

    Re-running the same command with an identical manifest (same config,
    seeds, and input hashes) reproduces outputs bit-identically wherever the
    stage is deterministic; ``written_at`` is informational only.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    input_hashes = {}
    for p in inputs:
        p = Path(p)
        if p.is_file():
            input_hashes[str(p)] = _sha256_file(p)
    manifest = {
        "command": command,
        "tool_version": __version__,
        "config": config,
        "seeds": seeds,
        "input_hashes": input_hashes,
        "output_paths": [str(p) for p in outputs],
        "written_at": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
    }
    path = out_dir / f"run_manifest.{command}.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def write_metrics_json(path: str | Path, payload: dict) -> Path:
    """Canonical metric JSON: sorted keys, stable float repr, trailing newline."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path
