"""Embedding providers and the embedding exchange format.

The numerical core never talks to an ML runtime directly. Text goes in, a
unit-norm ``EmbeddingMatrix`` comes out, through one of two providers:

* ``BuiltinEmbedder``: a deterministic token-hash embedder used for offline
  runs and tests. It is a test vehicle, not a model.
* ``SubprocessEmbedder``: any external encoder speaking the line protocol
  (ids and texts as JSON lines on stdin, exchange-format lines on stdout).

The exchange file format is JSON lines: a header object
``{"dim": p, "provider": "...", "normalized": true}`` followed by one
``{"id": "...", "v": [...]}`` object per text. Floats round-trip at full
binary64 precision.
"""

from __future__ import annotations

import json
import re
import subprocess
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import ProviderError, ValidationError

NORM_TOLERANCE = 1e-9

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF

_TOKEN_RE = re.compile(r"[a-z0-9]+")


@dataclass(eq=False)
class EmbeddingMatrix:
    """Unit-norm row vectors keyed by text-item id, in a fixed order."""

    ids: tuple[str, ...]
    vectors: np.ndarray
    provider: str = "unknown"

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=np.float64)
        if self.vectors.ndim != 2 or self.vectors.shape[0] != len(self.ids):
            raise ValidationError(
                f"vector block shape {self.vectors.shape} does not match {len(self.ids)} ids"
            )
        if len(set(self.ids)) != len(self.ids):
            raise ValidationError("embedding ids are not unique")
        self.vectors.setflags(write=False)

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def row(self, item_id: str) -> np.ndarray:
        return self.vectors[self.ids.index(item_id)]

    def reordered(self, ids: Sequence[str]) -> "EmbeddingMatrix":
        """Same rows in a caller-chosen id order; ids must be a permutation."""
        if set(ids) != set(self.ids) or len(ids) != len(self.ids):
            raise ValidationError("requested id order is not a permutation of the matrix ids")
        index = {i: k for k, i in enumerate(self.ids)}
        rows = self.vectors[[index[i] for i in ids]]
        return EmbeddingMatrix(ids=tuple(ids), vectors=rows, provider=self.provider)


def _fnv1a64(data: bytes) -> int:
    h = _FNV_OFFSET
    for b in data:
        h ^= b
        h = (h * _FNV_PRIME) & _MASK64
    return h


def _splitmix64(state: int) -> tuple[int, int]:
    state = (state + 0x9E3779B97F4A7C15) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    z = z ^ (z >> 31)
    return state, z


def tokenize(text: str) -> list[str]:
    """Lowercase and split on non-alphanumeric runs (ASCII letters/digits)."""
    return _TOKEN_RE.findall(text.lower())


def builtin_embed(text: str, dim: int) -> np.ndarray:
    """Deterministic token-hash embedding, identical on every platform.

    Each token is hashed with 64-bit FNV-1a; the hash seeds a splitmix64
    stream that yields ``dim`` values in [-1, 1). Token vectors are averaged
    and the result is unit-normalized.
    """
    if dim < 2:
        raise ValidationError(f"embedding dim must be >= 2, got {dim}")
    tokens = tokenize(text)
    if not tokens:
        raise ValidationError(f"text {text!r} has no tokens after normalization")
    acc = np.zeros(dim)
    for token in tokens:
        state = _fnv1a64(token.encode("utf-8"))
        vec = np.empty(dim)
        for i in range(dim):
            state, z = _splitmix64(state)
            vec[i] = 2.0 * ((z >> 11) / float(1 << 53)) - 1.0
        acc += vec
    acc /= len(tokens)
    # ufunc reduction, not BLAS dot: bit-stable across platforms and builds
    norm = float(np.sqrt((acc * acc).sum()))
    if norm == 0.0:
        raise ValidationError(f"text {text!r} produced a zero embedding")
    return acc / norm


class BuiltinEmbedder:
    """Provider wrapper around :func:`builtin_embed`."""

    def __init__(self, dim: int):
        if dim < 2:
            raise ValidationError(f"embedding dim must be >= 2, got {dim}")
        self.dim = dim

    @property
    def name(self) -> str:
        return f"builtin:p{self.dim}"

    def embed(self, ids: Sequence[str], texts: Sequence[str],
              max_workers: int = 1) -> tuple[list[np.ndarray], str]:
        if max_workers > 1:
            with ThreadPoolExecutor(max_workers=max_workers) as pool:
                rows = list(pool.map(lambda t: builtin_embed(t, self.dim), texts))
        else:
            rows = [builtin_embed(t, self.dim) for t in texts]
        return rows, self.name


class SubprocessEmbedder:
    """Provider that shells out to an external encoder process.

    Protocol: one ``{"id": ..., "text": ...}`` JSON object per input line on
    stdin; the process answers with exchange-format lines on stdout and a
    nonzero exit status on failure.
    """

    def __init__(self, command: Sequence[str]):
        if not command:
            raise ProviderError("empty provider command")
        self.command = list(command)

    @property
    def name(self) -> str:
        return "subprocess:" + " ".join(self.command)

    def embed(self, ids: Sequence[str], texts: Sequence[str],
              max_workers: int = 1) -> tuple[list[np.ndarray], str]:
        payload = "".join(
            json.dumps({"id": i, "text": t}, ensure_ascii=False) + "\n"
            for i, t in zip(ids, texts)
        )
        try:
            proc = subprocess.run(
                self.command, input=payload, capture_output=True, text=True,
            )
        except OSError as exc:
            raise ProviderError(f"cannot run provider {self.command}: {exc}") from None
        if proc.returncode != 0:
            detail = proc.stderr.strip().splitlines()
            raise ProviderError(
                f"provider exited with status {proc.returncode}"
                + (f": {detail[-1]}" if detail else "")
            )
        header, rows = _parse_exchange_lines(proc.stdout.splitlines(), source="provider stdout")
        got_ids = [i for i, _ in rows]
        if got_ids != list(ids):
            raise ProviderError(
                "provider returned ids out of order or incomplete "
                f"(expected {len(ids)} rows, got {len(rows)})"
            )
        return [v for _, v in rows], str(header.get("provider", self.name))


def embed_texts(
    texts: Mapping[str, str],
    provider,
    max_workers: int = 1,
) -> EmbeddingMatrix:
    """Embed an ordered id -> text map into a unit-norm matrix.

    Output rows follow the input order regardless of provider internals.
    Rows are re-normalized here so the unit-norm invariant is established in
    exactly one place; a zero row or a dimension mismatch is an error.
    """
    ids = list(texts)
    if not ids:
        raise ValidationError("no texts to embed")
    for i in ids:
        if not texts[i] or not texts[i].strip():
            raise ValidationError(f"text for id {i!r} is empty")
    rows, provider_name = provider.embed(ids, [texts[i] for i in ids], max_workers=max_workers)
    if len(rows) != len(ids):
        raise ProviderError(f"provider returned {len(rows)} rows for {len(ids)} texts")
    dim = len(rows[0])
    for i, row in zip(ids, rows):
        if len(row) != dim:
            raise ProviderError(
                f"dimension mismatch: row for {i!r} has {len(row)} values, expected {dim}"
            )
    matrix = np.asarray(rows, dtype=np.float64)
    if not np.all(np.isfinite(matrix)):
        raise ProviderError("provider returned non-finite values")
    norms = np.sqrt((matrix * matrix).sum(axis=1))
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise ProviderError(f"zero vector returned for id {ids[zero[0]]!r}")
    out = np.where(np.abs(norms - 1.0)[:, None] > NORM_TOLERANCE,
                   matrix / norms[:, None], matrix)
    return EmbeddingMatrix(ids=tuple(ids), vectors=out, provider=provider_name)


# ---------------------------------------------------------------------------
# exchange format
# ---------------------------------------------------------------------------

def _parse_exchange_lines(lines, source: str) -> tuple[dict, list[tuple[str, np.ndarray]]]:
    it = iter(enumerate(lines, start=1))
    header = None
    for lineno, line in it:
        if not line.strip():
            continue
        try:
            header = json.loads(line)
        except json.JSONDecodeError:
            raise ValidationError(f"{source}:{lineno}: malformed header line") from None
        break
    if not isinstance(header, dict) or "dim" not in header:
        raise ValidationError(f"{source}: missing header object with 'dim'")
    dim = header["dim"]
    if not isinstance(dim, int) or dim < 1:
        raise ValidationError(f"{source}: bad dim {dim!r} in header")

    rows: list[tuple[str, np.ndarray]] = []
    seen: set[str] = set()
    for lineno, line in it:
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError:
            raise ValidationError(f"{source}:{lineno}: malformed line") from None
        if not isinstance(obj, dict) or "id" not in obj or "v" not in obj:
            raise ValidationError(f"{source}:{lineno}: expected an object with 'id' and 'v'")
        item_id = str(obj["id"])
        if item_id in seen:
            raise ValidationError(f"{source}:{lineno}: duplicate id {item_id!r}")
        seen.add(item_id)
        vec = obj["v"]
        if not isinstance(vec, list) or len(vec) != dim:
            raise ValidationError(
                f"{source}:{lineno}: expected {dim} values, got "
                f"{len(vec) if isinstance(vec, list) else type(vec).__name__}"
            )
        try:
            arr = np.array([float(x) for x in vec])
        except (TypeError, ValueError):
            raise ValidationError(f"{source}:{lineno}: non-numeric vector entry") from None
        rows.append((item_id, arr))
    return header, rows


def read_embeddings(path: str | Path) -> EmbeddingMatrix:
    """Read an exchange-format file.

    When the header claims ``normalized: true`` the rows are validated
    against the unit-norm invariant and left bit-for-bit untouched, so a
    write/read round trip is exact. Rows of an unnormalized file are
    normalized on the way in (zero rows are an error).
    """
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        header, rows = _parse_exchange_lines(fh.read().splitlines(), source=str(path))
    if not rows:
        raise ValidationError(f"{path}: no embedding rows")
    matrix = np.asarray([v for _, v in rows])
    ids = tuple(i for i, _ in rows)
    norms = np.sqrt((matrix * matrix).sum(axis=1))
    if header.get("normalized", False):
        bad = np.flatnonzero(np.abs(norms - 1.0) > NORM_TOLERANCE)
        if bad.size:
            raise ValidationError(
                f"{path}: row for id {ids[bad[0]]!r} has norm {norms[bad[0]]!r}, "
                "but the header claims normalized vectors"
            )
    else:
        zero = np.flatnonzero(norms == 0.0)
        if zero.size:
            raise ValidationError(f"{path}: zero vector for id {ids[zero[0]]!r}")
        matrix = matrix / norms[:, None]
    return EmbeddingMatrix(
        ids=ids, vectors=matrix, provider=str(header.get("provider", "unknown")),
    )


def write_embeddings(matrix: EmbeddingMatrix, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(
            {"dim": matrix.dim, "provider": matrix.provider, "normalized": True},
            ensure_ascii=False,
        ) + "\n")
        for item_id, row in zip(matrix.ids, matrix.vectors):
            fh.write(json.dumps(
                {"id": item_id, "v": [float(x) for x in row]}, ensure_ascii=False,
            ) + "\n")
