"""Content-hash metadata sidecars for pipeline outputs.

Every command writes a ``meta.json`` next to its outputs recording the
parameters it ran with and a sha256 per input file that influenced the
result. Paths are recorded exactly as configured (usually relative), never
absolutized, so two runs of the same project tree in different locations
produce byte-identical sidecars.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Mapping, Sequence

from . import __version__


def sha256_file(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_meta(
    directory: str | Path,
    command: str,
    params: Mapping,
    inputs: Sequence[tuple[str, str | Path]],
    outputs: Sequence[str] = (),
) -> Path:
    """Write ``meta.json`` for one command.

    ``inputs`` is a sequence of (display path, resolved path) pairs; the
    display path lands in the sidecar, the resolved path is hashed.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    payload = {
        "tool": {"name": "afindex", "version": __version__},
        "command": command,
        "params": dict(params),
        "inputs": [
            {"path": display, "sha256": sha256_file(resolved)}
            for display, resolved in inputs
        ],
        "outputs": sorted(outputs),
    }
    meta_path = directory / "meta.json"
    with open(meta_path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return meta_path
