"""Occupation vectors, the age-friendliness embedding, and index scores.

The pipeline is three small linear-algebra steps:

1. each occupation becomes the weight-averaged embedding of its descriptors,
   re-normalized to unit length;
2. the nine amenity embeddings are combined under the chosen preference
   weights (absolute, relative, or their average) into one unit vector;
3. an occupation's score is the dot product of the two unit vectors, i.e.
   their cosine similarity, clamped into [-1, 1].

All reductions run in a fixed order (ascending descriptor id, single-threaded
numpy pairwise sums) so results are bit-identical for any worker count.
"""

from __future__ import annotations

import csv
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal, Mapping

import numpy as np

from .catalog import AmenitySpec, DescriptorCatalog
from .embedder import NORM_TOLERANCE, EmbeddingMatrix
from .errors import ValidationError

WeightMode = Literal["absolute", "relative", "average"]
WEIGHT_MODES = ("absolute", "relative", "average")


@dataclass(eq=False)
class OccupationVectors:
    """Unit-norm occupation embeddings for one year, aligned with the catalog."""

    year: int
    ids: tuple[str, ...]
    vectors: np.ndarray

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=np.float64)
        if self.vectors.shape[0] != len(self.ids):
            raise ValidationError("occupation vector block does not match ids")
        self.vectors.setflags(write=False)

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]


@dataclass(eq=False)
class AgeFriendlinessEmbedding:
    """The unit vector the index compares every occupation against."""

    vector: np.ndarray
    weights_used: tuple[float, ...]
    mode: str

    def __post_init__(self):
        self.vector = np.asarray(self.vector, dtype=np.float64)
        norm = _norm(self.vector)
        if abs(norm - 1.0) > NORM_TOLERANCE:
            raise ValidationError(f"age-friendliness vector has norm {norm!r}, expected 1")
        self.vector.setflags(write=False)

    @property
    def dim(self) -> int:
        return self.vector.shape[0]


@dataclass
class AfiTable:
    """Per-occupation index values for one year, each in [-1, 1]."""

    year: int
    values: dict[str, float]
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        for occ, v in self.values.items():
            if not -1.0 <= v <= 1.0:
                raise ValidationError(f"index value {v!r} for {occ!r} outside [-1, 1]")

    def __len__(self) -> int:
        return len(self.values)

    def occupations(self) -> tuple[str, ...]:
        return tuple(sorted(self.values))


def _weighted_row_sum(weights: np.ndarray, matrix: np.ndarray) -> np.ndarray:
    # ufunc reduction over axis 0: deterministic pairwise order, no BLAS threads
    return (weights[:, None] * matrix).sum(axis=0)


def _norm(vector: np.ndarray) -> float:
    # ufunc reduction, not BLAS dot: bit-stable across platforms and builds
    return float(np.sqrt((vector * vector).sum()))


def build_occupation_vectors(
    catalog: DescriptorCatalog,
    descriptor_embeddings: EmbeddingMatrix,
    max_workers: int = 1,
) -> OccupationVectors:
    """Weight-average descriptor embeddings into unit-norm occupation rows.

    The two inputs must cover the same descriptor ids. Every occupation needs
    at least one strictly positive weight; a row that cannot be normalized is
    an error, not a silent zero.
    """
    if set(descriptor_embeddings.ids) != set(catalog.descriptors):
        missing = set(catalog.descriptors) - set(descriptor_embeddings.ids)
        extra = set(descriptor_embeddings.ids) - set(catalog.descriptors)
        raise ValidationError(
            "descriptor ids of catalog and embeddings do not match"
            + (f"; missing from embeddings: {sorted(missing)}" if missing else "")
            + (f"; not in catalog: {sorted(extra)}" if extra else "")
        )
    emb = descriptor_embeddings.reordered(catalog.descriptors)

    def one_row(i: int) -> np.ndarray:
        w = catalog.weights[i]
        if not np.any(w > 0):
            raise ValidationError(
                f"occupation {catalog.occupations[i]!r} has no positive descriptor weight"
            )
        row = _weighted_row_sum(w, emb.vectors)
        norm = _norm(row)
        if norm == 0.0:
            raise ValidationError(
                f"occupation {catalog.occupations[i]!r} maps to the zero vector"
            )
        return row / norm

    n = catalog.n_occupations
    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            rows = list(pool.map(one_row, range(n)))
    else:
        rows = [one_row(i) for i in range(n)]
    return OccupationVectors(
        year=catalog.year, ids=catalog.occupations, vectors=np.asarray(rows),
    )


def build_age_embedding(
    amenities: AmenitySpec,
    amenity_embeddings: EmbeddingMatrix,
    mode: WeightMode = "average",
) -> AgeFriendlinessEmbedding:
    """Combine amenity embeddings under the chosen preference weights.

    ``mode="average"`` uses the elementwise mean of the absolute and relative
    weights. Negative weights are legitimate (an amenity can repel rather
    than attract); full cancellation to the zero vector is an error.
    """
    if mode not in WEIGHT_MODES:
        raise ValidationError(f"unknown weight mode {mode!r}")
    names = amenities.names()
    if set(amenity_embeddings.ids) != set(names):
        raise ValidationError("amenity embedding ids do not match the amenity spec")
    emb = amenity_embeddings.reordered(names)

    if mode == "absolute":
        weights = [a.weight_absolute for a in amenities.amenities]
    elif mode == "relative":
        weights = [a.weight_relative for a in amenities.amenities]
    else:
        weights = [(a.weight_absolute + a.weight_relative) / 2.0
                   for a in amenities.amenities]

    combined = np.zeros(emb.dim)
    for w, row in zip(weights, emb.vectors):
        combined = combined + w * row
    norm = _norm(combined)
    if norm == 0.0:
        raise ValidationError("amenity weights cancel to the zero vector")
    return AgeFriendlinessEmbedding(
        vector=combined / norm, weights_used=tuple(weights), mode=mode,
    )


def score_afi(
    vectors: OccupationVectors,
    age_embedding: AgeFriendlinessEmbedding,
) -> AfiTable:
    """Cosine-similarity scores of every occupation against the age vector."""
    if vectors.dim != age_embedding.dim:
        raise ValidationError(
            f"dimension mismatch: occupation vectors have p={vectors.dim}, "
            f"age embedding has p={age_embedding.dim}"
        )
    scores = (vectors.vectors * age_embedding.vector[None, :]).sum(axis=1)
    overflow = np.max(np.abs(scores)) - 1.0 if scores.size else 0.0
    if overflow > 1e-12:
        raise ValidationError(f"cosine score exceeds 1 by {overflow!r}")
    scores = np.clip(scores, -1.0, 1.0)
    return AfiTable(
        year=vectors.year,
        values={occ: float(s) for occ, s in zip(vectors.ids, scores)},
        metadata={"weight_mode": age_embedding.mode, "dim": vectors.dim},
    )


def rank_occupations(
    afi: AfiTable,
    direction: Literal["descending", "ascending"] = "descending",
) -> list[tuple[str, float]]:
    """Deterministic ranking; ties are broken by ascending occupation id."""
    if not afi.values:
        raise ValidationError("cannot rank an empty index table")
    items = sorted(afi.values.items())
    if direction == "descending":
        return sorted(items, key=lambda kv: (-kv[1], kv[0]))
    if direction == "ascending":
        return sorted(items, key=lambda kv: (kv[1], kv[0]))
    raise ValidationError(f"unknown direction {direction!r}")


def top_bottom(afi: AfiTable, n: int = 10) -> tuple[list[tuple[str, float]], list[tuple[str, float]]]:
    """The first and last ``n`` entries of the descending ranking."""
    ranked = rank_occupations(afi, "descending")
    return ranked[:n], ranked[-n:][::-1]


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def write_afi(afi: AfiTable, path: str | Path) -> None:
    """CSV form ``year,occupation_id,afi`` with 17 significant digits."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["year", "occupation_id", "afi"])
        for occ in sorted(afi.values):
            writer.writerow([afi.year, occ, format(afi.values[occ], ".17g")])


def read_afi(path: str | Path, metadata: Mapping | None = None) -> AfiTable:
    path = Path(path)
    values: dict[str, float] = {}
    year: int | None = None
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["year", "occupation_id", "afi"]:
            raise ValidationError(f"{path}: bad header {header!r}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise ValidationError(f"{path}:{lineno}: malformed row {row!r}")
            try:
                row_year, occ, value = int(row[0]), row[1], float(row[2])
            except ValueError:
                raise ValidationError(f"{path}:{lineno}: non-numeric field") from None
            if year is None:
                year = row_year
            elif row_year != year:
                raise ValidationError(f"{path}:{lineno}: mixed years in one table")
            if occ in values:
                raise ValidationError(f"{path}:{lineno}: duplicate occupation {occ!r}")
            values[occ] = value
    if year is None:
        raise ValidationError(f"{path}: empty table")
    return AfiTable(year=year, values=values, metadata=dict(metadata or {}))


def write_age_embedding(embedding: AgeFriendlinessEmbedding, path: str | Path) -> None:
    payload = {
        "mode": embedding.mode,
        "weights_used": list(embedding.weights_used),
        "vector": [float(x) for x in embedding.vector],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)
        fh.write("\n")


def read_age_embedding(path: str | Path) -> AgeFriendlinessEmbedding:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    return AgeFriendlinessEmbedding(
        vector=np.asarray(payload["vector"], dtype=np.float64),
        weights_used=tuple(payload["weights_used"]),
        mode=payload["mode"],
    )
