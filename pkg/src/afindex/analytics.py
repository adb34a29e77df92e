"""Employment-weighted aggregation and change decomposition.

Cross-year comparisons anchor quantile cut points in a single year: the cut
points come from the anchor year's index values over occupations (unweighted,
linear-interpolation quantile definition) and are then applied to every other
year's values, so "the top quartile" means the same numeric range everywhere.

The change in the employment-weighted index between two years splits exactly
into a within component (index change at fixed average shares) and a between
component (share shifts at the average index) under the symmetric midpoint
weighting; t0- and t1-weighted variants with an explicit interaction term are
available behind a flag.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass, fields
from typing import Iterable, Mapping, Sequence

import numpy as np

from .catalog import EmploymentPanel, PanelCell
from .errors import ValidationError
from .index import AfiTable

OAXACA_VARIANTS = ("midpoint", "t0", "t1")
GROUP_DIMENSIONS = ("age_band", "sex", "education", "industry")


@dataclass(frozen=True)
class GroupFilter:
    """Optional cell constraints; each field is None, one value, or a set."""

    year: int | None = None
    age_band: str | frozenset[str] | None = None
    sex: str | frozenset[str] | None = None
    education: str | frozenset[str] | None = None
    industry: str | frozenset[str] | None = None

    def matches(self, cell: PanelCell) -> bool:
        for f in fields(self):
            want = getattr(self, f.name)
            if want is None:
                continue
            have = getattr(cell, f.name)
            if isinstance(want, frozenset):
                if have not in want:
                    return False
            elif have != want:
                return False
        return True

    def validate_against(self, panel: EmploymentPanel) -> None:
        """Constraint values must exist in the panel's category sets."""
        for f in fields(self):
            want = getattr(self, f.name)
            if want is None:
                continue
            if f.name == "year":
                known = set(panel.years())
                wanted = {want}
            else:
                known = set(panel.categories(f.name))
                wanted = set(want) if isinstance(want, frozenset) else {want}
            unknown = wanted - known
            if unknown:
                raise ValidationError(
                    f"filter value(s) {sorted(unknown)} not present in panel "
                    f"dimension {f.name!r}"
                )


def weighted_mean(
    values: Mapping[str, float],
    panel: EmploymentPanel,
    group_filter: GroupFilter | None = None,
    occupations: Iterable[str] | None = None,
) -> float:
    """Employment-weighted mean of per-occupation values over filtered cells.

    Every occupation carrying positive filtered employment must have a value.
    ``occupations`` optionally restricts the universe (used for per-bucket
    profiles); zero total employment under the filter is an error.
    """
    group_filter = group_filter or GroupFilter()
    group_filter.validate_against(panel)
    allowed = None if occupations is None else set(occupations)
    total = 0.0
    acc = 0.0
    for cell in panel:
        if not group_filter.matches(cell):
            continue
        if allowed is not None and cell.occupation not in allowed:
            continue
        if cell.count == 0.0:
            continue
        if cell.occupation not in values:
            raise ValidationError(
                f"occupation {cell.occupation!r} has employment under the filter "
                "but no value to average"
            )
        acc += values[cell.occupation] * cell.count
        total += cell.count
    if total == 0.0:
        raise ValidationError("zero total employment under the given filter")
    return acc / total


# ---------------------------------------------------------------------------
# anchored quantiles
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QuantileScheme:
    """Cut points frozen from one anchor year and reused across years."""

    anchor_year: int
    k: int
    cuts: tuple[float, ...]

    def __post_init__(self):
        if len(self.cuts) != self.k - 1:
            raise ValidationError(f"expected {self.k - 1} cut points, got {len(self.cuts)}")
        if any(b <= a for a, b in zip(self.cuts, self.cuts[1:])):
            raise ValidationError("cut points are not strictly ascending")


def quantile_linear(sorted_values: Sequence[float], q: float) -> float:
    """Linear-interpolation quantile of pre-sorted values (the pinned definition)."""
    n = len(sorted_values)
    if n == 0:
        raise ValidationError("no values")
    if not 0.0 <= q <= 1.0:
        raise ValidationError(f"quantile level {q!r} outside [0, 1]")
    pos = (n - 1) * q
    lo = int(math.floor(pos))
    if lo == n - 1:
        return float(sorted_values[-1])
    frac = pos - lo
    return float(sorted_values[lo] + frac * (sorted_values[lo + 1] - sorted_values[lo]))


def make_quantiles(afi: AfiTable, k: int) -> QuantileScheme:
    """Cut points at the j/k quantiles of the anchor-year values, unweighted."""
    n = len(afi)
    if k < 2:
        raise ValidationError(f"need k >= 2 quantiles, got {k}")
    if n < k:
        raise ValidationError(f"cannot form {k} quantiles from {n} occupations")
    ordered = sorted(afi.values.values())
    cuts = tuple(quantile_linear(ordered, j / k) for j in range(1, k))
    if any(b <= a for a, b in zip(cuts, cuts[1:])):
        raise ValidationError(
            "tied index values collapse adjacent quantile cut points; "
            f"cannot form {k} distinct buckets"
        )
    return QuantileScheme(anchor_year=afi.year, k=k, cuts=cuts)


def assign(scheme: QuantileScheme, value: float) -> int:
    """Bucket index in 1..k; a value equal to a cut point goes to the upper bucket."""
    return bisect_right(scheme.cuts, value) + 1


# ---------------------------------------------------------------------------
# within/between decomposition
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OaxacaResult:
    t0: int
    t1: int
    variant: str
    total: float
    within: float
    between: float
    interaction: float
    occupations: tuple[str, ...]
    excluded: tuple[str, ...]
    shares_t0: dict[str, float]
    shares_t1: dict[str, float]

    @property
    def within_share(self) -> float | None:
        return None if self.total == 0.0 else self.within / self.total


def _employment_by_occupation(panel: EmploymentPanel, year: int) -> dict[str, float]:
    totals: dict[str, float] = {}
    for cell in panel:
        if cell.year == year:
            totals[cell.occupation] = totals.get(cell.occupation, 0.0) + cell.count
    return totals


def oaxaca_decompose(
    afi_t0: AfiTable,
    afi_t1: AfiTable,
    panel: EmploymentPanel,
    variant: str = "midpoint",
) -> OaxacaResult:
    """Split the change in the employment-weighted mean index into parts.

    Shares are computed per year over the common occupation set (present in
    both index tables and employed in both years); occupations outside that
    set are reported in ``excluded``. With the default midpoint weighting the
    within and between parts add up to the total exactly; the t0/t1 variants
    carry the remainder in ``interaction``.
    """
    if variant not in OAXACA_VARIANTS:
        raise ValidationError(f"unknown decomposition variant {variant!r}")
    t0, t1 = afi_t0.year, afi_t1.year
    emp0 = _employment_by_occupation(panel, t0)
    emp1 = _employment_by_occupation(panel, t1)
    universe = set(afi_t0.values) | set(afi_t1.values) | set(emp0) | set(emp1)
    common = sorted(
        occ for occ in universe
        if occ in afi_t0.values and occ in afi_t1.values
        and emp0.get(occ, 0.0) > 0.0 and emp1.get(occ, 0.0) > 0.0
    )
    if not common:
        raise ValidationError("no occupation is present in both years")
    excluded = tuple(sorted(universe - set(common)))

    tot0 = sum(emp0[occ] for occ in common)
    tot1 = sum(emp1[occ] for occ in common)
    s0 = np.asarray([emp0[occ] / tot0 for occ in common])
    s1 = np.asarray([emp1[occ] / tot1 for occ in common])
    a0 = np.asarray([afi_t0.values[occ] for occ in common])
    a1 = np.asarray([afi_t1.values[occ] for occ in common])

    total = float((s1 * a1).sum() - (s0 * a0).sum())
    if variant == "midpoint":
        s_bar = (s0 + s1) / 2.0
        a_bar = (a0 + a1) / 2.0
        within = float((s_bar * (a1 - a0)).sum())
        between = float((a_bar * (s1 - s0)).sum())
        interaction = 0.0
    elif variant == "t0":
        within = float((s0 * (a1 - a0)).sum())
        between = float((a0 * (s1 - s0)).sum())
        interaction = float(((s1 - s0) * (a1 - a0)).sum())
    else:
        within = float((s1 * (a1 - a0)).sum())
        between = float((a1 * (s1 - s0)).sum())
        interaction = -float(((s1 - s0) * (a1 - a0)).sum())

    return OaxacaResult(
        t0=t0, t1=t1, variant=variant, total=total, within=within,
        between=between, interaction=interaction,
        occupations=tuple(common), excluded=excluded,
        shares_t0={occ: float(s) for occ, s in zip(common, s0)},
        shares_t1={occ: float(s) for occ, s in zip(common, s1)},
    )


# ---------------------------------------------------------------------------
# demographic and quantile tables
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DemographicRow:
    group: tuple[tuple[str, str], ...]
    year: int
    employment: float
    employment_share: float
    weighted_afi: float | None
    top_quantile_share: float | None
    flagged: bool


def demographic_table(
    afi_by_year: Mapping[int, AfiTable],
    panel: EmploymentPanel,
    dimensions: Sequence[str],
    scheme: QuantileScheme,
) -> list[DemographicRow]:
    """One row per demographic group per year.

    Groups are the cartesian product of the observed categories of the chosen
    panel dimensions (lexicographic order); a combination with no employment
    is emitted flagged rather than dropped. The top-bucket share assigns each
    year's own index values against the anchored cut points.
    """
    for dim in dimensions:
        if dim not in GROUP_DIMENSIONS:
            raise ValidationError(
                f"unknown grouping dimension {dim!r}; expected subset of {GROUP_DIMENSIONS}"
            )
    if len(set(dimensions)) != len(dimensions):
        raise ValidationError("duplicate grouping dimension")

    category_values = [panel.categories(dim) for dim in dimensions]
    groups: list[tuple[str, ...]] = [()]
    for values in category_values:
        groups = [g + (v,) for g in groups for v in values]

    rows: list[DemographicRow] = []
    for year in sorted(afi_by_year):
        afi = afi_by_year[year]
        cells = [c for c in panel if c.year == year]
        year_total = sum(c.count for c in cells)
        if year_total == 0.0:
            raise ValidationError(f"panel has no employment in year {year}")
        for group in groups:
            selector = dict(zip(dimensions, group))
            members = [
                c for c in cells
                if all(getattr(c, dim) == val for dim, val in selector.items())
            ]
            employment = sum(c.count for c in members)
            if employment == 0.0:
                rows.append(DemographicRow(
                    group=tuple(selector.items()), year=year, employment=0.0,
                    employment_share=0.0, weighted_afi=None,
                    top_quantile_share=None, flagged=True,
                ))
                continue
            acc = 0.0
            top = 0.0
            for c in members:
                if c.count == 0.0:
                    continue
                if c.occupation not in afi.values:
                    raise ValidationError(
                        f"occupation {c.occupation!r} employed in {year} has no index value"
                    )
                value = afi.values[c.occupation]
                acc += value * c.count
                if assign(scheme, value) == scheme.k:
                    top += c.count
            rows.append(DemographicRow(
                group=tuple(selector.items()), year=year, employment=employment,
                employment_share=employment / year_total,
                weighted_afi=acc / employment,
                top_quantile_share=top / employment,
                flagged=False,
            ))
    return rows


@dataclass(frozen=True)
class QuantileProfileRow:
    bucket: int
    year: int
    occupations: int
    employment: float
    employment_share: float
    mean_wage: float | None
    graduate_share: float | None
    median_age: float | None


def _age_band_midpoint(band: str) -> float | None:
    parts = band.split("-")
    if len(parts) != 2:
        return None
    try:
        lo, hi = float(parts[0]), float(parts[1])
    except ValueError:
        return None
    return (lo + hi) / 2.0


def _weighted_median(values: Sequence[float], weights: Sequence[float]) -> float:
    order = np.argsort(values, kind="stable")
    v = np.asarray(values)[order]
    w = np.asarray(weights)[order]
    cum = np.cumsum(w)
    half = cum[-1] / 2.0
    idx = int(np.searchsorted(cum, half))
    return float(v[min(idx, v.size - 1)])


def quantile_profile(
    afi: AfiTable,
    panel: EmploymentPanel,
    scheme: QuantileScheme,
    year: int,
) -> list[QuantileProfileRow]:
    """Per-bucket employment, wage, graduate-share, and median-age profile.

    Wage means are employment-weighted over cells with a recorded wage;
    median age uses age-band midpoints and is omitted (None) when any band
    label is not of the "lo-hi" form.
    """
    cells = [c for c in panel if c.year == year]
    if not cells:
        raise ValidationError(f"panel has no cells for year {year}")
    year_total = sum(c.count for c in cells)
    bands = {c.age_band for c in cells}
    midpoints = {b: _age_band_midpoint(b) for b in bands}
    ages_known = all(v is not None for v in midpoints.values())

    rows = []
    for bucket in range(1, scheme.k + 1):
        occs = {occ for occ, v in afi.values.items() if assign(scheme, v) == bucket}
        members = [c for c in cells if c.occupation in occs]
        employment = sum(c.count for c in members)
        wage_weight = sum(c.count for c in members if c.wage is not None and c.count > 0)
        mean_wage = (
            sum(c.wage * c.count for c in members if c.wage is not None) / wage_weight
            if wage_weight > 0 else None
        )
        grad = sum(c.count for c in members if c.education == "college")
        graduate_share = grad / employment if employment > 0 else None
        median_age = None
        if ages_known and employment > 0:
            pairs = [(midpoints[c.age_band], c.count) for c in members if c.count > 0]
            median_age = _weighted_median([p[0] for p in pairs], [p[1] for p in pairs])
        rows.append(QuantileProfileRow(
            bucket=bucket, year=year, occupations=len(occs),
            employment=employment,
            employment_share=employment / year_total if year_total else 0.0,
            mean_wage=mean_wage, graduate_share=graduate_share,
            median_age=median_age,
        ))
    return rows
