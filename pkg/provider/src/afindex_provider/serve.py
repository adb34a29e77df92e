"""The stream loop: JSON lines in, exchange format out, order preserved."""

from __future__ import annotations

import json
from typing import IO

import numpy as np

from .encoders import EncoderLoadError, make_encoder

EXIT_OK = 0
EXIT_MODEL = 2
EXIT_INPUT = 3
EXIT_ENCODE = 4


def _read_items(stdin: IO[str], stderr: IO[str], on_bad_line: str):
    items: list[tuple[str, str]] = []
    for lineno, line in enumerate(stdin, start=1):
        if not line.strip():
            continue
        problem = None
        try:
            obj = json.loads(line)
        except json.JSONDecodeError:
            problem = "not valid JSON"
            obj = None
        if problem is None:
            if not isinstance(obj, dict) or "id" not in obj or "text" not in obj:
                problem = "expected an object with 'id' and 'text'"
            elif not str(obj["text"]).strip():
                problem = "empty text"
        if problem is not None:
            if on_bad_line == "skip":
                stderr.write(f"skipping input line {lineno}: {problem}\n")
                continue
            stderr.write(f"malformed input line {lineno}: {problem}\n")
            return None
        items.append((str(obj["id"]), str(obj["text"])))
    return items


def serve(
    model_id: str,
    stdin: IO[str],
    stdout: IO[str],
    stderr: IO[str],
    batch_size: int = 32,
    on_bad_line: str = "abort",
) -> int:
    """Run one request stream; returns the process exit code."""
    if batch_size < 1:
        stderr.write(f"batch size must be >= 1, got {batch_size}\n")
        return EXIT_INPUT
    if on_bad_line not in ("abort", "skip"):
        stderr.write(f"unknown on-bad-line policy {on_bad_line!r}\n")
        return EXIT_INPUT
    try:
        encoder = make_encoder(model_id)
    except EncoderLoadError as exc:
        stderr.write(f"{exc}\n")
        return EXIT_MODEL

    items = _read_items(stdin, stderr, on_bad_line)
    if items is None:
        return EXIT_INPUT

    stdout.write(json.dumps(
        {"dim": encoder.dim, "provider": encoder.name, "normalized": True}
    ) + "\n")

    for start in range(0, len(items), batch_size):
        batch = items[start:start + batch_size]
        vectors = encoder.encode([text for _, text in batch])
        vectors = np.atleast_2d(np.asarray(vectors, dtype=np.float64))
        if vectors.shape != (len(batch), encoder.dim):
            stderr.write(
                f"encoder returned shape {vectors.shape}, expected "
                f"({len(batch)}, {encoder.dim})\n"
            )
            return EXIT_ENCODE
        norms = np.sqrt((vectors * vectors).sum(axis=1))
        if np.any(norms == 0.0) or not np.all(np.isfinite(vectors)):
            bad = batch[int(np.argmin(norms))][0]
            stderr.write(f"degenerate vector for id {bad!r}\n")
            return EXIT_ENCODE
        vectors = vectors / norms[:, None]
        for (item_id, _), vec in zip(batch, vectors):
            stdout.write(json.dumps(
                {"id": item_id, "v": [float(x) for x in vec]}
            ) + "\n")
    return EXIT_OK
