"""Report assembly: the exhibit tables and their rendered figures.

Every exhibit is written as a CSV (the canonical output) and, where a figure
makes sense, additionally rendered to PNG via the Agg backend with pinned
metadata so repeated runs produce byte-identical files.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .analytics import (  # noqa: E402
    DemographicRow,
    GroupFilter,
    QuantileScheme,
    assign,
    oaxaca_decompose,
    weighted_mean,
)
from .catalog import DescriptorCatalog, EmploymentPanel  # noqa: E402
from .errors import ValidationError  # noqa: E402
from .index import AfiTable, top_bottom  # noqa: E402

PNG_METADATA = {"Software": "afindex"}
FIG_DPI = 120


def _save(fig, path: Path) -> None:
    fig.savefig(path, dpi=FIG_DPI, metadata=PNG_METADATA)
    plt.close(fig)


def _fmt(x: float) -> str:
    return format(x, ".17g")


# ---------------------------------------------------------------------------
# exhibit datasets
# ---------------------------------------------------------------------------

def write_top_bottom(afi_by_year: Mapping[int, AfiTable], path: Path, n: int = 10) -> None:
    """Highest- and lowest-scoring occupations per year (ranking exhibit)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["year", "segment", "rank", "occupation_id", "afi"])
        for year in sorted(afi_by_year):
            top, bottom = top_bottom(afi_by_year[year], n)
            for rank, (occ, value) in enumerate(top, start=1):
                writer.writerow([year, "top", rank, occ, _fmt(value)])
            for rank, (occ, value) in enumerate(bottom, start=1):
                writer.writerow([year, "bottom", rank, occ, _fmt(value)])


def write_descriptor_by_quantile(
    catalog: DescriptorCatalog,
    afi: AfiTable,
    panel: EmploymentPanel,
    scheme: QuantileScheme,
    year: int,
    path: Path,
) -> None:
    """Employment-weighted mean descriptor weight per index bucket.

    The per-bucket columns show what kind of work each slice of the index
    contains; the final column is the top-minus-bottom difference.
    """
    bucket_occupations = {
        b: {occ for occ, v in afi.values.items() if assign(scheme, v) == b}
        for b in range(1, scheme.k + 1)
    }
    flt = GroupFilter(year=year)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["descriptor_id"]
                        + [f"q{b}" for b in range(1, scheme.k + 1)]
                        + [f"diff_q{scheme.k}_q1"])
        for j, desc in enumerate(catalog.descriptors):
            values = {occ: float(catalog.weights[i, j])
                      for i, occ in enumerate(catalog.occupations)}
            row = [desc]
            means = []
            for b in range(1, scheme.k + 1):
                mean = weighted_mean(values, panel, flt,
                                     occupations=bucket_occupations[b])
                means.append(mean)
                row.append(_fmt(mean))
            row.append(_fmt(means[-1] - means[0]))
            writer.writerow(row)


def _age_aggregates(panel: EmploymentPanel) -> dict[str, tuple[str, ...]]:
    bands = set(panel.categories("age_band"))
    if bands == {"15-24", "25-49", "50-64", "65-74"}:
        return {"15-49": ("15-24", "25-49"), "50-74": ("50-64", "65-74")}
    return {band: (band,) for band in sorted(bands)}


def write_top_quantile_groups(
    afi_by_year: Mapping[int, AfiTable],
    panel: EmploymentPanel,
    scheme: QuantileScheme,
    path: Path,
) -> None:
    """Share of each demographic group employed in top-bucket occupations.

    Education and sex include a pooled "total" level; age bands are pooled
    into the two broad pre/post-50 groups when the panel uses the standard
    four bands.
    """
    years = sorted(afi_by_year)
    age_groups = _age_aggregates(panel)
    educations = ["total"] + list(panel.categories("education"))
    sexes = ["total"] + list(panel.categories("sex"))

    def group_share(year: int, edu: str, sex: str, bands: tuple[str, ...]) -> float | None:
        afi = afi_by_year[year]
        total = 0.0
        top = 0.0
        for cell in panel:
            if cell.year != year or cell.age_band not in bands:
                continue
            if edu != "total" and cell.education != edu:
                continue
            if sex != "total" and cell.sex != sex:
                continue
            if cell.count == 0.0:
                continue
            if cell.occupation not in afi.values:
                raise ValidationError(
                    f"occupation {cell.occupation!r} employed in {year} has no index value"
                )
            total += cell.count
            if assign(scheme, afi.values[cell.occupation]) == scheme.k:
                top += cell.count
        return None if total == 0.0 else top / total

    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        header = ["education", "sex", "age_group"] + [f"share_{y}" for y in years]
        if len(years) == 2:
            header.append("change_pp")
        writer.writerow(header)
        for edu in educations:
            for sex in sexes:
                for age_name, bands in age_groups.items():
                    shares = [group_share(y, edu, sex, bands) for y in years]
                    row = [edu, sex, age_name] + [
                        "" if s is None else _fmt(s) for s in shares
                    ]
                    if len(years) == 2:
                        row.append(
                            "" if None in shares else _fmt((shares[1] - shares[0]) * 100.0)
                        )
                    writer.writerow(row)


def decile_shift_rows(
    afi_by_year: Mapping[int, AfiTable],
    panel: EmploymentPanel,
    scheme: QuantileScheme,
) -> list[dict]:
    """Employment and occupation shares per anchored bucket per year."""
    rows = []
    for year in sorted(afi_by_year):
        afi = afi_by_year[year]
        emp_by_bucket = {b: 0.0 for b in range(1, scheme.k + 1)}
        occ_by_bucket = {b: 0 for b in range(1, scheme.k + 1)}
        total_emp = 0.0
        for cell in panel:
            if cell.year != year or cell.count == 0.0:
                continue
            if cell.occupation not in afi.values:
                raise ValidationError(
                    f"occupation {cell.occupation!r} employed in {year} has no index value"
                )
            bucket = assign(scheme, afi.values[cell.occupation])
            emp_by_bucket[bucket] += cell.count
            total_emp += cell.count
        for occ, value in afi.values.items():
            occ_by_bucket[assign(scheme, value)] += 1
        for b in range(1, scheme.k + 1):
            rows.append({
                "year": year,
                "bucket": b,
                "employment": emp_by_bucket[b],
                "employment_share": emp_by_bucket[b] / total_emp if total_emp else 0.0,
                "occupations": occ_by_bucket[b],
                "occupation_share": occ_by_bucket[b] / len(afi.values),
            })
    return rows


def write_decile_shift(rows: Sequence[dict], path: Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["year", "bucket", "employment", "employment_share",
                         "occupations", "occupation_share"])
        for row in rows:
            writer.writerow([
                row["year"], row["bucket"], _fmt(row["employment"]),
                _fmt(row["employment_share"]), row["occupations"],
                _fmt(row["occupation_share"]),
            ])


def demographic_change_rows(
    demo_rows: Sequence[DemographicRow],
    t0: int,
    t1: int,
) -> list[dict]:
    """Pair up the two years' demographic rows into change records.

    Emits both absolute and relative changes wherever a base value exists,
    so the consumer can choose either convention.
    """
    by_key: dict[tuple, dict[int, DemographicRow]] = {}
    for row in demo_rows:
        by_key.setdefault(row.group, {})[row.year] = row
    out = []
    for group in sorted(by_key):
        pair = by_key[group]
        if t0 not in pair or t1 not in pair:
            continue
        r0, r1 = pair[t0], pair[t1]
        rec = {
            "group": group,
            "employment_t0": r0.employment,
            "employment_t1": r1.employment,
            "employment_change": r1.employment - r0.employment,
            "employment_change_pct": (
                (r1.employment - r0.employment) / r0.employment * 100.0
                if r0.employment > 0 else None
            ),
            "share_change_pp": (r1.employment_share - r0.employment_share) * 100.0,
            "afi_t0": r0.weighted_afi,
            "afi_t1": r1.weighted_afi,
            "afi_change": (
                r1.weighted_afi - r0.weighted_afi
                if r0.weighted_afi is not None and r1.weighted_afi is not None else None
            ),
            "afi_change_pct": (
                (r1.weighted_afi - r0.weighted_afi) / abs(r0.weighted_afi) * 100.0
                if r0.weighted_afi not in (None, 0.0) and r1.weighted_afi is not None
                else None
            ),
        }
        out.append(rec)
    return out


def write_demographic_change(rows: Sequence[dict], path: Path) -> None:
    if not rows:
        raise ValidationError("no demographic change rows to write")
    dims = [dim for dim, _ in rows[0]["group"]]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(dims + [
            "employment_t0", "employment_t1", "employment_change",
            "employment_change_pct", "share_change_pp",
            "afi_t0", "afi_t1", "afi_change", "afi_change_pct",
        ])
        for row in rows:
            values = [v for _, v in row["group"]]
            writer.writerow(values + [
                "" if row[k] is None else _fmt(row[k])
                for k in ("employment_t0", "employment_t1", "employment_change",
                          "employment_change_pct", "share_change_pp",
                          "afi_t0", "afi_t1", "afi_change", "afi_change_pct")
            ])


def afi_distribution_rows(
    afi_by_year: Mapping[int, AfiTable],
    bins: int = 24,
) -> list[dict]:
    """Shared-bin histogram (count and density) of index values per year."""
    all_values = [v for afi in afi_by_year.values() for v in afi.values.values()]
    lo, hi = min(all_values), max(all_values)
    if lo == hi:
        lo, hi = lo - 0.5, hi + 0.5
    edges = np.linspace(lo, hi, bins + 1)
    rows = []
    for year in sorted(afi_by_year):
        values = np.asarray(sorted(afi_by_year[year].values.values()))
        counts, _ = np.histogram(values, bins=edges)
        width = edges[1] - edges[0]
        for b in range(bins):
            rows.append({
                "year": year,
                "bin_left": float(edges[b]),
                "bin_right": float(edges[b + 1]),
                "count": int(counts[b]),
                "density": float(counts[b] / (values.size * width)),
            })
    return rows


def write_afi_distribution(rows: Sequence[dict], path: Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["year", "bin_left", "bin_right", "count", "density"])
        for row in rows:
            writer.writerow([row["year"], _fmt(row["bin_left"]), _fmt(row["bin_right"]),
                             row["count"], _fmt(row["density"])])


def summary_rows(
    afi_t0: AfiTable,
    afi_t1: AfiTable,
    panel: EmploymentPanel,
    anchor: AfiTable,
    variant: str = "midpoint",
) -> list[tuple[str, float]]:
    """Headline statistics of the cross-year comparison.

    Both the absolute and the relative change of the employment-weighted mean
    are reported; the above-median employment change uses the unweighted
    median of the anchor year's values as the threshold.
    """
    t0, t1 = afi_t0.year, afi_t1.year
    mean0 = weighted_mean(afi_t0.values, panel, GroupFilter(year=t0))
    mean1 = weighted_mean(afi_t1.values, panel, GroupFilter(year=t1))
    decomp = oaxaca_decompose(afi_t0, afi_t1, panel, variant=variant)

    common = [occ for occ in afi_t0.values if occ in afi_t1.values]
    increased = sum(1 for occ in common if afi_t1.values[occ] > afi_t0.values[occ])

    ordered = sorted(anchor.values.values())
    n = len(ordered)
    median = (ordered[(n - 1) // 2] + ordered[n // 2]) / 2.0
    above = {occ for occ, v in anchor.values.items() if v > median}

    def employment(year: int, subset) -> float:
        return sum(c.count for c in panel
                   if c.year == year and c.occupation in subset)

    above0 = employment(t0, above)
    above1 = employment(t1, above)

    rows = [
        (f"weighted_mean_afi_{t0}", mean0),
        (f"weighted_mean_afi_{t1}", mean1),
        ("weighted_mean_change_abs", mean1 - mean0),
        ("weighted_mean_change_pct", (mean1 - mean0) / abs(mean0) * 100.0 if mean0 else float("nan")),
        ("oaxaca_total", decomp.total),
        ("oaxaca_within", decomp.within),
        ("oaxaca_between", decomp.between),
        ("oaxaca_within_share", decomp.within_share if decomp.within_share is not None else float("nan")),
        ("occupations_compared", float(len(common))),
        ("share_occupations_increased", increased / len(common) if common else float("nan")),
        (f"above_median_employment_{t0}", above0),
        (f"above_median_employment_{t1}", above1),
        ("above_median_employment_change", above1 - above0),
    ]
    return rows


def write_summary(rows: Sequence[tuple[str, float]], path: Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["metric", "value"])
        for name, value in rows:
            writer.writerow([name, _fmt(value)])


# ---------------------------------------------------------------------------
# figures
# ---------------------------------------------------------------------------

def figure_afi_distribution(rows: Sequence[dict], path: Path) -> None:
    fig, ax = plt.subplots(figsize=(7.0, 4.0))
    years = sorted({r["year"] for r in rows})
    for year in years:
        sub = [r for r in rows if r["year"] == year]
        centers = [(r["bin_left"] + r["bin_right"]) / 2.0 for r in sub]
        ax.plot(centers, [r["density"] for r in sub], drawstyle="steps-mid",
                label=str(year))
    ax.set_xlabel("index value")
    ax.set_ylabel("density (occupations)")
    ax.legend()
    fig.tight_layout()
    _save(fig, path)


def figure_decile_shift(rows: Sequence[dict], path: Path) -> None:
    years = sorted({r["year"] for r in rows})
    buckets = sorted({r["bucket"] for r in rows})
    fig, ax = plt.subplots(figsize=(7.0, 4.0))
    width = 0.8 / len(years)
    for i, year in enumerate(years):
        shares = [next(r["employment_share"] for r in rows
                       if r["year"] == year and r["bucket"] == b) for b in buckets]
        offsets = [b + (i - (len(years) - 1) / 2.0) * width for b in buckets]
        ax.bar(offsets, shares, width=width, label=str(year))
    ax.set_xlabel("index bucket (anchored)")
    ax.set_ylabel("employment share")
    ax.set_xticks(buckets)
    ax.legend()
    fig.tight_layout()
    _save(fig, path)


def figure_quantile_change(rows: Sequence[dict], t0: int, t1: int, path: Path) -> None:
    buckets = sorted({r["bucket"] for r in rows})
    emp = {}
    occ_share = {}
    for r in rows:
        emp[(r["year"], r["bucket"])] = r["employment"]
        occ_share[(r["year"], r["bucket"])] = r["occupation_share"]
    change_pct = []
    for b in buckets:
        base = emp[(t0, b)]
        change_pct.append((emp[(t1, b)] - base) / base * 100.0 if base else float("nan"))
    share_pp = [(occ_share[(t1, b)] - occ_share[(t0, b)]) * 100.0 for b in buckets]
    fig, axes = plt.subplots(1, 2, figsize=(9.5, 4.0))
    axes[0].bar(buckets, change_pct)
    axes[0].set_xlabel("index bucket (anchored)")
    axes[0].set_ylabel(f"employment change {t0}-{t1} (%)")
    axes[1].bar(buckets, share_pp, color="C1")
    axes[1].set_xlabel("index bucket (anchored)")
    axes[1].set_ylabel("occupation share change (pp)")
    for ax in axes:
        ax.set_xticks(buckets)
    fig.tight_layout()
    _save(fig, path)


def figure_demographic_change(rows: Sequence[dict], path: Path) -> None:
    labels = [" / ".join(v for _, v in r["group"]) for r in rows]
    emp_pct = [r["employment_change_pct"] if r["employment_change_pct"] is not None
               else 0.0 for r in rows]
    afi_change = [r["afi_change"] if r["afi_change"] is not None else 0.0 for r in rows]
    pos = range(len(labels))
    fig, axes = plt.subplots(1, 2, figsize=(10.5, 0.45 * len(labels) + 1.8),
                             sharey=True)
    axes[0].barh(list(pos), emp_pct)
    axes[0].set_xlabel("employment change (%)")
    axes[1].barh(list(pos), afi_change, color="C1")
    axes[1].set_xlabel("weighted index change")
    axes[0].set_yticks(list(pos))
    axes[0].set_yticklabels(labels, fontsize=8)
    fig.tight_layout()
    _save(fig, path)


def figure_quantile_profile(profile_rows, path: Path) -> None:
    years = sorted({r.year for r in profile_rows})
    buckets = sorted({r.bucket for r in profile_rows})
    fig, axes = plt.subplots(1, 2, figsize=(9.5, 4.0))
    width = 0.8 / len(years)
    for i, year in enumerate(years):
        sub = {r.bucket: r for r in profile_rows if r.year == year}
        offsets = [b + (i - (len(years) - 1) / 2.0) * width for b in buckets]
        axes[0].bar(offsets, [sub[b].mean_wage or 0.0 for b in buckets],
                    width=width, label=str(year))
        axes[1].bar(offsets, [sub[b].graduate_share or 0.0 for b in buckets],
                    width=width, label=str(year))
    axes[0].set_ylabel("mean hourly wage")
    axes[1].set_ylabel("graduate share")
    for ax in axes:
        ax.set_xlabel("index bucket (anchored)")
        ax.set_xticks(buckets)
        ax.legend()
    fig.tight_layout()
    _save(fig, path)
