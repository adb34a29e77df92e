"""Encoder backends.

``make_encoder`` resolves a model identifier to a backend:

* ``hash:<dim>`` is a deterministic offline encoder (bag of token hashes)
  for protocol tests and air-gapped runs; it is not a language model.
* anything else is treated as a sentence-transformers checkpoint name or
  path and loaded lazily, so the heavy dependency is only imported when a
  real model is requested.

There is deliberately no default model: the checkpoint choice changes every
downstream number, so it must be an explicit decision.
"""

from __future__ import annotations

import hashlib

import numpy as np


class EncoderLoadError(Exception):
    """The requested model could not be loaded."""


class HashEncoder:
    """Deterministic test encoder: averaged per-token hash vectors."""

    def __init__(self, dim: int):
        if dim < 2:
            raise EncoderLoadError(f"hash encoder dim must be >= 2, got {dim}")
        self.dim = dim

    @property
    def name(self) -> str:
        return f"hash:{self.dim}"

    def _token_vector(self, token: str) -> np.ndarray:
        digest = hashlib.sha256(token.encode("utf-8")).digest()
        rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
        return rng.uniform(-1.0, 1.0, size=self.dim)

    def encode(self, texts: list[str]) -> np.ndarray:
        out = np.zeros((len(texts), self.dim))
        for i, text in enumerate(texts):
            tokens = [t for t in text.lower().split() if t]
            if not tokens:
                tokens = ["<empty>"]
            for token in tokens:
                out[i] += self._token_vector(token)
            out[i] /= len(tokens)
        return out


class SentenceTransformerEncoder:
    """Wrapper around a pre-trained sentence-transformers checkpoint."""

    def __init__(self, model_id: str):
        try:
            from sentence_transformers import SentenceTransformer
        except ImportError as exc:
            raise EncoderLoadError(
                "sentence-transformers is not installed; install the 'sbert' "
                f"extra or use a hash:<dim> model ({exc})"
            ) from None
        try:
            self._model = SentenceTransformer(model_id)
        except Exception as exc:
            raise EncoderLoadError(f"cannot load model {model_id!r}: {exc}") from None
        dim = self._model.get_sentence_embedding_dimension()
        if not dim:
            raise EncoderLoadError(f"model {model_id!r} reports no embedding dimension")
        self.dim = int(dim)
        self._name = f"sbert:{model_id}:pooling={self._pooling_description()}"

    def _pooling_description(self) -> str:
        # record the checkpoint's own pooling mode in the provider string
        try:
            pooling = self._model[1]
            modes = [
                attr.removeprefix("pooling_mode_")
                for attr in vars(pooling)
                if attr.startswith("pooling_mode_") and getattr(pooling, attr) is True
            ]
            if modes:
                return "+".join(sorted(modes))
        except Exception:
            pass
        return "default"

    @property
    def name(self) -> str:
        return self._name

    def encode(self, texts: list[str]) -> np.ndarray:
        vectors = self._model.encode(
            texts, convert_to_numpy=True, show_progress_bar=False,
        )
        return np.asarray(vectors, dtype=np.float64)


def make_encoder(model_id: str):
    if model_id.startswith("hash:"):
        try:
            dim = int(model_id.split(":", 1)[1])
        except ValueError:
            raise EncoderLoadError(
                f"bad hash encoder spec {model_id!r}; expected hash:<dim>"
            ) from None
        return HashEncoder(dim)
    return SentenceTransformerEncoder(model_id)
