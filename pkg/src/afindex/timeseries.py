"""Release averaging and descriptor-weight backcasting.

Weight histories exist only for recent years, so earlier years are filled in
by extrapolating each (occupation, descriptor) series backwards with a
monotone piecewise-cubic Hermite interpolant (Fritsch-Carlson slopes) and
clamping the result to one standard error around the straight-line fit of the
observed points, then to [0, 1].

Every series is independent, so backcasting parallelizes trivially and stays
deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .catalog import DescriptorCatalog
from .errors import ValidationError


@dataclass(frozen=True)
class DescriptorSeries:
    """Observed weight values of one descriptor for one occupation over years."""

    occupation: str
    descriptor: str
    observations: tuple[tuple[int, float], ...]

    def __post_init__(self):
        years = [y for y, _ in self.observations]
        if len(self.observations) < 2:
            raise ValidationError(
                f"series ({self.occupation}, {self.descriptor}) needs at least "
                f"2 observations, got {len(self.observations)}"
            )
        if any(b <= a for a, b in zip(years, years[1:])):
            raise ValidationError(
                f"series ({self.occupation}, {self.descriptor}) years are not "
                "strictly increasing"
            )
        for y, v in self.observations:
            if not 0.0 <= v <= 1.0:
                raise ValidationError(
                    f"series ({self.occupation}, {self.descriptor}) value {v!r} "
                    f"at {y} outside [0, 1]"
                )

    @property
    def years(self) -> tuple[int, ...]:
        return tuple(y for y, _ in self.observations)

    @property
    def values(self) -> tuple[float, ...]:
        return tuple(v for _, v in self.observations)


class PchipInterpolant:
    """Monotone cubic Hermite interpolant with Fritsch-Carlson knot slopes.

    Interior slopes are the weighted harmonic mean of adjacent secants and
    zero wherever those secants change sign (or either is zero); endpoint
    slopes come from the non-centered three-point rule, clipped so the end
    segments cannot overshoot. Knots are reproduced exactly. Evaluation
    outside the knot range extends the first or last cubic segment.
    """

    def __init__(self, x: Sequence[float], y: Sequence[float]):
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        if x.ndim != 1 or x.shape != y.shape or x.size < 2:
            raise ValidationError("need two same-length 1-d arrays with >= 2 points")
        if np.any(np.diff(x) <= 0):
            raise ValidationError("abscissae must be strictly increasing (no duplicates)")
        self.x = x
        self.y = y
        self.slopes = self._fritsch_carlson_slopes(x, y)

    @staticmethod
    def _edge_slope(h0: float, h1: float, d0: float, d1: float) -> float:
        m = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1)
        if np.sign(m) != np.sign(d0):
            return 0.0
        if np.sign(d0) != np.sign(d1) and abs(m) > 3.0 * abs(d0):
            return 3.0 * d0
        return m

    @classmethod
    def _fritsch_carlson_slopes(cls, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        h = np.diff(x)
        delta = np.diff(y) / h
        n = x.size
        m = np.zeros(n)
        if n == 2:
            m[:] = delta[0]
            return m
        for k in range(1, n - 1):
            if delta[k - 1] * delta[k] <= 0.0:
                m[k] = 0.0
            else:
                w1 = 2.0 * h[k] + h[k - 1]
                w2 = h[k] + 2.0 * h[k - 1]
                m[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k])
        m[0] = cls._edge_slope(h[0], h[1], delta[0], delta[1])
        m[-1] = cls._edge_slope(h[-1], h[-2], delta[-1], delta[-2])
        return m

    def __call__(self, t):
        t = np.asarray(t, dtype=np.float64)
        scalar = t.ndim == 0
        tv = np.atleast_1d(t)
        # segment index, clipped so out-of-range points use the end segments
        seg = np.clip(np.searchsorted(self.x, tv, side="right") - 1, 0, self.x.size - 2)
        x0 = self.x[seg]
        h = self.x[seg + 1] - x0
        s = (tv - x0) / h
        s2 = s * s
        s3 = s2 * s
        h00 = 2.0 * s3 - 3.0 * s2 + 1.0
        h10 = s3 - 2.0 * s2 + s
        h01 = -2.0 * s3 + 3.0 * s2
        h11 = s3 - s2
        out = (h00 * self.y[seg] + h10 * h * self.slopes[seg]
               + h01 * self.y[seg + 1] + h11 * h * self.slopes[seg + 1])
        return float(out[0]) if scalar else out


def pchip_fit(observations: Iterable[tuple[float, float]]) -> PchipInterpolant:
    """Fit the monotone interpolant to (abscissa, value) pairs."""
    pts = list(observations)
    xs = [p[0] for p in pts]
    ys = [p[1] for p in pts]
    if len(set(xs)) != len(xs):
        raise ValidationError("duplicate abscissa in interpolation input")
    return PchipInterpolant(xs, ys)


@dataclass(frozen=True)
class BackcastResult:
    occupation: str
    descriptor: str
    target_year: int
    pchip_raw: float
    linear: float
    stderr: float
    final: float
    band: str


def _linear_fit(years: np.ndarray, values: np.ndarray) -> tuple[float, float, float, float, float]:
    """OLS line fit: returns (intercept, slope, residual SE, mean x, Sxx)."""
    xbar = float(years.mean())
    ybar = float(values.mean())
    dx = years - xbar
    sxx = float((dx * dx).sum())
    slope = float((dx * (values - ybar)).sum()) / sxx
    intercept = ybar - slope * xbar
    resid = values - (intercept + slope * years)
    ssr = float((resid * resid).sum())
    stderr = float(np.sqrt(ssr / (years.size - 2)))
    return intercept, slope, stderr, xbar, sxx


def backcast(
    series: DescriptorSeries,
    target_year: int,
    band: str = "residual",
) -> BackcastResult:
    """Extrapolate one series back to ``target_year``.

    Three steps: evaluate the monotone-cubic extension at the target year,
    fit a straight line to all observations, and clamp the cubic value into
    a one-standard-error band around that line (then into [0, 1]).

    ``band="residual"`` uses the regression's residual standard error;
    ``band="prediction"`` widens it to the standard error of the predicted
    mean at the target year. At least 3 observations are required, otherwise
    the standard error is undefined.
    """
    if band not in ("residual", "prediction"):
        raise ValidationError(f"unknown band mode {band!r}")
    if target_year >= series.years[0]:
        raise ValidationError(
            f"target year {target_year} is not before the first observation "
            f"({series.years[0]})"
        )
    if len(series.observations) < 3:
        raise ValidationError(
            "backcasting needs at least 3 observations for a defined standard "
            f"error, got {len(series.observations)}"
        )
    years = np.asarray(series.years, dtype=np.float64)
    values = np.asarray(series.values, dtype=np.float64)

    raw = pchip_fit(zip(years, values))(float(target_year))
    intercept, slope, stderr, xbar, sxx = _linear_fit(years, values)
    linear = intercept + slope * target_year
    if band == "prediction":
        half_width = stderr * float(np.sqrt(1.0 / years.size + (target_year - xbar) ** 2 / sxx))
    else:
        half_width = stderr
    clamped = min(max(raw, linear - half_width), linear + half_width)
    final = min(max(clamped, 0.0), 1.0)
    return BackcastResult(
        occupation=series.occupation,
        descriptor=series.descriptor,
        target_year=target_year,
        pchip_raw=float(raw),
        linear=float(linear),
        stderr=float(half_width),
        final=float(final),
        band=band,
    )


@dataclass(frozen=True)
class PseudoOutOfSampleResult:
    dropped_years: tuple[int, ...]
    errors: tuple[float, ...]
    mean_absolute_error: float


def pseudo_out_of_sample(
    series: DescriptorSeries,
    drop: int,
    band: str = "residual",
) -> PseudoOutOfSampleResult:
    """Model-validation hook: drop the earliest ``drop`` observations,
    backcast each dropped year from the rest, and report the mean absolute
    error against the held-out values."""
    if drop < 1:
        raise ValidationError("drop must be >= 1")
    if len(series.observations) - drop < 3:
        raise ValidationError(
            f"dropping {drop} of {len(series.observations)} observations leaves "
            "fewer than 3 points"
        )
    held_out = series.observations[:drop]
    remainder = DescriptorSeries(
        occupation=series.occupation,
        descriptor=series.descriptor,
        observations=series.observations[drop:],
    )
    years = []
    errors = []
    for year, value in held_out:
        result = backcast(remainder, year, band=band)
        years.append(year)
        errors.append(abs(result.final - value))
    return PseudoOutOfSampleResult(
        dropped_years=tuple(years),
        errors=tuple(errors),
        mean_absolute_error=float(np.mean(errors)),
    )


# ---------------------------------------------------------------------------
# catalog-level operations
# ---------------------------------------------------------------------------

def average_releases(catalogs: Sequence[DescriptorCatalog]) -> DescriptorCatalog:
    """Collapse several same-year releases into one catalog of cell means."""
    if not catalogs:
        raise ValidationError("no catalogs to average")
    first = catalogs[0]
    for other in catalogs[1:]:
        if other.year != first.year:
            raise ValidationError(
                f"cannot average releases from different years ({first.year} vs {other.year})"
            )
        if other.occupations != first.occupations or other.descriptors != first.descriptors:
            raise ValidationError("release catalogs do not share occupation/descriptor ids")
    stacked = np.stack([c.weights for c in catalogs])
    return DescriptorCatalog(
        year=first.year,
        occupations=first.occupations,
        descriptors=first.descriptors,
        weights=stacked.mean(axis=0),
        texts=dict(first.texts),
        metadata={"releases_averaged": len(catalogs)},
    )


def backcast_catalog(
    catalogs: Sequence[DescriptorCatalog],
    target_year: int,
    band: str = "residual",
) -> tuple[DescriptorCatalog, list[BackcastResult]]:
    """Backcast every (occupation, descriptor) cell to ``target_year``.

    The input catalogs, one per observed year, must share id sets. Descriptor
    texts for the synthetic year are taken from the earliest observed catalog
    (weight histories are extrapolated, texts are not).
    """
    if len(catalogs) < 3:
        raise ValidationError("backcasting a catalog needs at least 3 observed years")
    ordered = sorted(catalogs, key=lambda c: c.year)
    years = [c.year for c in ordered]
    if len(set(years)) != len(years):
        raise ValidationError("duplicate catalog years in backcast input")
    first = ordered[0]
    for other in ordered[1:]:
        if other.occupations != first.occupations or other.descriptors != first.descriptors:
            raise ValidationError("catalogs do not share occupation/descriptor ids")

    weights = np.zeros((first.n_occupations, first.n_descriptors))
    report: list[BackcastResult] = []
    for i, occ in enumerate(first.occupations):
        for j, desc in enumerate(first.descriptors):
            series = DescriptorSeries(
                occupation=occ,
                descriptor=desc,
                observations=tuple((c.year, float(c.weights[i, j])) for c in ordered),
            )
            result = backcast(series, target_year, band=band)
            weights[i, j] = result.final
            report.append(result)
    out = DescriptorCatalog(
        year=target_year,
        occupations=first.occupations,
        descriptors=first.descriptors,
        weights=weights,
        texts=dict(first.texts),
        metadata={
            "backcast_from_years": years,
            "band": band,
            "texts_year": first.year,
        },
    )
    return out, report
