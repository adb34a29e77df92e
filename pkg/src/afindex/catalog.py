"""Ingestion and validation of the three raw inputs.

Three file-backed objects feed everything downstream:

* ``DescriptorCatalog``: per-occupation weights over descriptors plus each
  descriptor's definition text, for one year.
* ``AmenitySpec``: the ordered amenity definitions with their absolute and
  relative preference weights.
* ``EmploymentPanel``: employment (and wage) cells by year, occupation,
  age band, sex, education, and industry.

Loaders are pure functions of file contents; the returned objects are frozen
and their arrays are marked read-only, so they can be shared across threads.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import ValidationError

WEIGHT_TOLERANCE = 1e-9

SEXES = ("female", "male")
EDUCATIONS = ("college", "no-college")
DEFAULT_AGE_BANDS = ("15-24", "25-49", "50-64", "65-74")


@dataclass(eq=False)
class DescriptorCatalog:
    """One year of occupation weights over descriptors, with descriptor texts.

    ``occupations`` and ``descriptors`` are sorted ascending so that matrix
    rows/columns have one canonical order; ``weights[i, j]`` is the weight of
    descriptor ``descriptors[j]`` for occupation ``occupations[i]``.
    """

    year: int
    occupations: tuple[str, ...]
    descriptors: tuple[str, ...]
    weights: np.ndarray
    texts: dict[str, str]
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.weights.shape != (len(self.occupations), len(self.descriptors)):
            raise ValidationError(
                f"weight matrix shape {self.weights.shape} does not match "
                f"{len(self.occupations)} occupations x {len(self.descriptors)} descriptors"
            )
        self.weights.setflags(write=False)

    @property
    def n_occupations(self) -> int:
        return len(self.occupations)

    @property
    def n_descriptors(self) -> int:
        return len(self.descriptors)

    def weight_row(self, occupation: str) -> np.ndarray:
        return self.weights[self.occupations.index(occupation)]

    def same_contents(self, other: "DescriptorCatalog") -> bool:
        """Field-by-field equality on the numeric payload (metadata excluded)."""
        return (
            self.year == other.year
            and self.occupations == other.occupations
            and self.descriptors == other.descriptors
            and np.array_equal(self.weights, other.weights)
            and self.texts == other.texts
        )


@dataclass(frozen=True)
class Amenity:
    name: str
    definition: str
    weight_absolute: float
    weight_relative: float


@dataclass(frozen=True)
class AmenitySpec:
    """Ordered amenity definitions; order is preserved from the source file."""

    amenities: tuple[Amenity, ...]

    def __len__(self) -> int:
        return len(self.amenities)

    def names(self) -> tuple[str, ...]:
        return tuple(a.name for a in self.amenities)

    def texts(self) -> dict[str, str]:
        return {a.name: a.definition for a in self.amenities}


@dataclass(frozen=True)
class PanelCell:
    year: int
    occupation: str
    age_band: str
    sex: str
    education: str
    industry: str
    count: float
    wage: float | None

    @property
    def key(self) -> tuple:
        return (self.year, self.occupation, self.age_band, self.sex,
                self.education, self.industry)


class EmploymentPanel:
    """Validated employment cells with uniqueness over the six-part key."""

    def __init__(self, cells: Iterable[PanelCell]):
        cells = tuple(cells)
        seen = set()
        for cell in cells:
            if cell.key in seen:
                raise ValidationError(f"duplicate panel key {cell.key}")
            seen.add(cell.key)
            if cell.count < 0:
                raise ValidationError(
                    f"negative employment count {cell.count} for key {cell.key}"
                )
            if cell.wage is not None and cell.wage < 0:
                raise ValidationError(f"negative wage {cell.wage} for key {cell.key}")
            if cell.sex not in SEXES:
                raise ValidationError(f"unknown sex {cell.sex!r} for key {cell.key}")
            if cell.education not in EDUCATIONS:
                raise ValidationError(
                    f"unknown education {cell.education!r} for key {cell.key}"
                )
        self.cells = cells

    def __len__(self) -> int:
        return len(self.cells)

    def __iter__(self) -> Iterator[PanelCell]:
        return iter(self.cells)

    def years(self) -> tuple[int, ...]:
        return tuple(sorted({c.year for c in self.cells}))

    def occupations(self, year: int | None = None) -> tuple[str, ...]:
        return tuple(sorted({
            c.occupation for c in self.cells if year is None or c.year == year
        }))

    def categories(self, dimension: str) -> tuple[str, ...]:
        """Observed values of one of: age_band, sex, education, industry."""
        return tuple(sorted({getattr(c, dimension) for c in self.cells}))


# ---------------------------------------------------------------------------
# loaders / writers
# ---------------------------------------------------------------------------

def _read_csv_rows(path: Path, expected_header: Sequence[str]) -> Iterator[tuple[int, list[str]]]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValidationError(f"{path}: empty file") from None
        if [h.strip() for h in header] != list(expected_header):
            raise ValidationError(
                f"{path}: expected header {','.join(expected_header)!r}, "
                f"got {','.join(header)!r}"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            yield lineno, row


def load_catalog(
    weights_path: str | Path,
    texts_path: str | Path,
    year: int,
    rescale: bool = False,
) -> DescriptorCatalog:
    """Load and validate a descriptor catalog from its two CSV files.

    The weights file is long-format ``occupation_id,descriptor_id,weight``;
    pairs absent from the file get weight 0 (descriptor irrelevant to that
    occupation) and the number of such cells is recorded in metadata.

    With ``rescale=False`` (the default) weights must already lie in [0, 1];
    values outside by more than 1e-9 are rejected and values inside the
    tolerance band are clamped. With ``rescale=True`` raw scores on a native
    scale are min-max scaled to [0, 1] per descriptor over the observed cells,
    and the scaling bounds are recorded in metadata. A descriptor whose
    observed values are all equal maps to 1.0 when that constant is positive
    and 0.0 otherwise.
    """
    weights_path = Path(weights_path)
    texts_path = Path(texts_path)

    entries: dict[tuple[str, str], float] = {}
    for lineno, row in _read_csv_rows(weights_path, ("occupation_id", "descriptor_id", "weight")):
        if len(row) != 3:
            raise ValidationError(f"{weights_path}:{lineno}: malformed row {row!r}")
        occ, desc, raw = row[0].strip(), row[1].strip(), row[2].strip()
        if not occ or not desc:
            raise ValidationError(f"{weights_path}:{lineno}: empty id in row {row!r}")
        try:
            value = float(raw)
        except ValueError:
            raise ValidationError(
                f"{weights_path}:{lineno}: weight {raw!r} is not a number"
            ) from None
        if not np.isfinite(value):
            raise ValidationError(f"{weights_path}:{lineno}: non-finite weight {raw!r}")
        if (occ, desc) in entries:
            raise ValidationError(
                f"{weights_path}:{lineno}: duplicate weight cell for "
                f"occupation {occ!r}, descriptor {desc!r}"
            )
        if not rescale:
            if value < -WEIGHT_TOLERANCE or value > 1.0 + WEIGHT_TOLERANCE:
                raise ValidationError(
                    f"{weights_path}:{lineno}: weight {value!r} out of [0, 1] for "
                    f"occupation {occ!r}, descriptor {desc!r}"
                )
            value = min(max(value, 0.0), 1.0)
        entries[(occ, desc)] = value

    if not entries:
        raise ValidationError(f"{weights_path}: no weight rows")

    texts: dict[str, str] = {}
    for lineno, row in _read_csv_rows(texts_path, ("descriptor_id", "text")):
        if len(row) != 2:
            raise ValidationError(f"{texts_path}:{lineno}: malformed row {row!r}")
        desc, text = row[0].strip(), row[1]
        if desc in texts:
            raise ValidationError(f"{texts_path}:{lineno}: duplicate descriptor id {desc!r}")
        texts[desc] = text

    occupations = tuple(sorted({occ for occ, _ in entries}))
    descriptors = tuple(sorted({desc for _, desc in entries}))

    missing_texts = [d for d in descriptors if not texts.get(d, "").strip()]
    if missing_texts:
        raise ValidationError(
            f"{texts_path}: missing or empty text for descriptor(s) "
            + ", ".join(repr(d) for d in missing_texts)
        )

    weights = np.zeros((len(occupations), len(descriptors)))
    occ_index = {o: i for i, o in enumerate(occupations)}
    desc_index = {d: j for j, d in enumerate(descriptors)}
    for (occ, desc), value in entries.items():
        weights[occ_index[occ], desc_index[desc]] = value

    metadata: dict = {
        "missing_cells": len(occupations) * len(descriptors) - len(entries),
        "weights_path": str(weights_path),
        "texts_path": str(texts_path),
    }

    if rescale:
        bounds = {}
        observed = {d: [] for d in descriptors}
        for (occ, desc), value in entries.items():
            observed[desc].append(value)
        for j, desc in enumerate(descriptors):
            lo, hi = min(observed[desc]), max(observed[desc])
            bounds[desc] = [lo, hi]
            col_cells = [(occ_index[o], v) for (o, d), v in entries.items() if d == desc]
            for i, v in col_cells:
                if hi > lo:
                    weights[i, j] = (v - lo) / (hi - lo)
                else:
                    weights[i, j] = 1.0 if lo > 0 else 0.0
        metadata["rescale_bounds"] = bounds

    return DescriptorCatalog(
        year=year,
        occupations=occupations,
        descriptors=descriptors,
        weights=weights,
        texts={d: texts[d] for d in descriptors},
        metadata=metadata,
    )


def write_catalog(
    catalog: DescriptorCatalog,
    weights_path: str | Path,
    texts_path: str | Path,
) -> None:
    """Write a catalog back to its two-file CSV form.

    Numeric cells use 17 significant digits so a reload reproduces the exact
    float64 values; all cells are written, including zeros, in sorted order.
    """
    with open(weights_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["occupation_id", "descriptor_id", "weight"])
        for i, occ in enumerate(catalog.occupations):
            for j, desc in enumerate(catalog.descriptors):
                writer.writerow([occ, desc, format(catalog.weights[i, j], ".17g")])
    with open(texts_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["descriptor_id", "text"])
        for desc in catalog.descriptors:
            writer.writerow([desc, catalog.texts[desc]])


def load_amenities(path: str | Path) -> AmenitySpec:
    """Load the amenity spec (JSON tree) preserving file order."""
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as fh:
            payload = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON: {exc}") from None

    if not isinstance(payload, dict) or not isinstance(payload.get("amenities"), list):
        raise ValidationError(f"{path}: expected an object with an 'amenities' list")
    raw = payload["amenities"]
    if not raw:
        raise ValidationError(f"{path}: at least one amenity is required")

    amenities = []
    seen = set()
    for pos, item in enumerate(raw, start=1):
        if not isinstance(item, dict):
            raise ValidationError(f"{path}: amenity #{pos} is not an object")
        name = item.get("name")
        if not name or not str(name).strip():
            raise ValidationError(f"{path}: amenity #{pos} has no name")
        name = str(name)
        if name in seen:
            raise ValidationError(f"{path}: duplicate amenity name {name!r}")
        seen.add(name)
        definition = item.get("definition")
        if not definition or not str(definition).strip():
            raise ValidationError(f"{path}: amenity {name!r} has an empty definition")
        for key in ("weight_absolute", "weight_relative"):
            if key not in item:
                raise ValidationError(f"{path}: amenity {name!r} is missing {key!r}")
            if not isinstance(item[key], (int, float)) or isinstance(item[key], bool):
                raise ValidationError(f"{path}: amenity {name!r} has non-numeric {key!r}")
        amenities.append(Amenity(
            name=name,
            definition=str(definition),
            weight_absolute=float(item["weight_absolute"]),
            weight_relative=float(item["weight_relative"]),
        ))
    return AmenitySpec(amenities=tuple(amenities))


def write_amenities(spec: AmenitySpec, path: str | Path) -> None:
    payload = {"amenities": [
        {
            "name": a.name,
            "definition": a.definition,
            "weight_absolute": a.weight_absolute,
            "weight_relative": a.weight_relative,
        }
        for a in spec.amenities
    ]}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=False)
        fh.write("\n")


PANEL_HEADER = ("year", "occupation_id", "age_band", "sex", "education",
                "industry", "count", "wage")


def load_panel(path: str | Path) -> EmploymentPanel:
    """Load the employment panel CSV; an empty wage field means missing."""
    path = Path(path)
    cells = []
    for lineno, row in _read_csv_rows(path, PANEL_HEADER):
        if len(row) != len(PANEL_HEADER):
            raise ValidationError(f"{path}:{lineno}: malformed row {row!r}")
        year_s, occ, age, sex, edu, industry, count_s, wage_s = [c.strip() for c in row]
        try:
            year = int(year_s)
            count = float(count_s)
            wage = float(wage_s) if wage_s else None
        except ValueError:
            raise ValidationError(f"{path}:{lineno}: non-numeric field in {row!r}") from None
        cells.append(PanelCell(
            year=year, occupation=occ, age_band=age, sex=sex,
            education=edu, industry=industry, count=count, wage=wage,
        ))
    try:
        return EmploymentPanel(cells)
    except ValidationError as exc:
        raise ValidationError(f"{path}: {exc}") from None


def write_panel(panel: EmploymentPanel, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(PANEL_HEADER)
        for cell in sorted(panel.cells, key=lambda c: c.key):
            writer.writerow([
                cell.year, cell.occupation, cell.age_band, cell.sex,
                cell.education, cell.industry,
                format(cell.count, ".17g"),
                "" if cell.wage is None else format(cell.wage, ".17g"),
            ])
