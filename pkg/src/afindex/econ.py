"""Regression and rank-statistics layer.

Everything here is exact, small-sample arithmetic on in-memory columns:
least-squares fits with heteroskedasticity-consistent covariance (HC0-HC3,
HC1 default), partial R-squared for one focus regressor, Spearman rank
correlation with midrank tie handling (t approximation plus an exact
permutation mode for small n), and absolute-deviation summaries between two
rankings.

The Student-t tail probability is computed in-package via the regularized
incomplete beta function, so scores do not depend on an external stats stack.
"""

from __future__ import annotations

import csv
import math
from collections import Counter
from dataclasses import dataclass
from itertools import permutations
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import ValidationError

HC_VARIANTS = ("HC0", "HC1", "HC2", "HC3")


# ---------------------------------------------------------------------------
# Student-t tail probability
# ---------------------------------------------------------------------------

def _betacf(a: float, b: float, x: float) -> float:
    # modified Lentz continued fraction for the incomplete beta integral
    max_iter = 300
    eps = 3e-16
    fpmin = 1e-300
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < fpmin:
        d = fpmin
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < fpmin:
            d = fpmin
        c = 1.0 + aa / c
        if abs(c) < fpmin:
            c = fpmin
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < fpmin:
            d = fpmin
        c = 1.0 + aa / c
        if abs(c) < fpmin:
            c = fpmin
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            break
    return h


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                + a * math.log(x) + b * math.log1p(-x))
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def t_two_sided_p(t: float, dof: float) -> float:
    """Two-sided tail probability of Student's t with ``dof`` degrees of freedom."""
    if dof <= 0:
        raise ValidationError(f"degrees of freedom must be positive, got {dof}")
    if math.isinf(t):
        return 0.0
    if t == 0.0:
        return 1.0
    x = dof / (dof + t * t)
    return regularized_incomplete_beta(dof / 2.0, 0.5, x)


def significance_stars(p: float) -> str:
    if p < 0.01:
        return "***"
    if p < 0.05:
        return "**"
    if p < 0.10:
        return "*"
    return ""


# ---------------------------------------------------------------------------
# OLS with robust covariance
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RegressionSpec:
    dependent: str
    regressors: tuple[str, ...]
    intercept: bool = True
    focus: str | None = None
    label: str = ""

    def __post_init__(self):
        if len(set(self.regressors)) != len(self.regressors):
            raise ValidationError("duplicate regressor names")
        if self.dependent in self.regressors:
            raise ValidationError(f"dependent {self.dependent!r} is also a regressor")
        if self.focus is not None and self.focus not in self.regressors:
            raise ValidationError(f"focus regressor {self.focus!r} not among regressors")


@dataclass(frozen=True)
class RegressionResult:
    label: str
    dependent: str
    names: tuple[str, ...]
    coefficients: tuple[float, ...]
    std_errors: tuple[float, ...]
    t_stats: tuple[float, ...]
    p_values: tuple[float, ...]
    stars: tuple[str, ...]
    r2: float
    adj_r2: float
    partial_r2: float | None
    focus: str | None
    n: int
    dof: int
    hc: str

    def coefficient(self, name: str) -> float:
        return self.coefficients[self.names.index(name)]

    def std_error(self, name: str) -> float:
        return self.std_errors[self.names.index(name)]


def _column(data: Mapping[str, Sequence[float]], name: str) -> np.ndarray:
    if name not in data:
        raise ValidationError(f"column {name!r} not in data table")
    col = np.asarray(data[name], dtype=np.float64)
    if col.ndim != 1:
        raise ValidationError(f"column {name!r} is not one-dimensional")
    if not np.all(np.isfinite(col)):
        raise ValidationError(f"column {name!r} contains non-finite values")
    return col


def _collinear_columns(X: np.ndarray, names: Sequence[str]) -> list[str]:
    keep: list[int] = []
    collinear: list[str] = []
    rank = 0
    for j in range(X.shape[1]):
        candidate = X[:, keep + [j]]
        new_rank = np.linalg.matrix_rank(candidate)
        if new_rank > rank:
            keep.append(j)
            rank = new_rank
        else:
            collinear.append(names[j])
    return collinear


def ols_robust(
    data: Mapping[str, Sequence[float]],
    spec: RegressionSpec,
    hc: str = "HC1",
) -> RegressionResult:
    """Least-squares fit with heteroskedasticity-consistent standard errors.

    The covariance is the sandwich (X'X)^-1 X' diag(u) X (X'X)^-1 where u is
    the squared residual vector adjusted per HC variant (HC1 rescales by
    N/(N-k)). Significance stars follow the 1% / 5% / 10% convention using a
    two-sided t test with N-k degrees of freedom. ``partial_r2`` compares the
    residual sum of squares against a refit without the focus regressor.
    """
    if hc not in HC_VARIANTS:
        raise ValidationError(f"unknown HC variant {hc!r}; expected one of {HC_VARIANTS}")
    y = _column(data, spec.dependent)
    n = y.size
    columns = [_column(data, name) for name in spec.regressors]
    for name, col in zip(spec.regressors, columns):
        if col.size != n:
            raise ValidationError(
                f"column {name!r} has {col.size} rows, dependent has {n}"
            )
    names: list[str] = []
    blocks: list[np.ndarray] = []
    if spec.intercept:
        names.append("intercept")
        blocks.append(np.ones(n))
    names.extend(spec.regressors)
    blocks.extend(columns)
    X = np.column_stack(blocks)
    k = X.shape[1]
    if n <= k:
        raise ValidationError(f"need more observations than parameters (n={n}, k={k})")
    if np.linalg.matrix_rank(X) < k:
        bad = _collinear_columns(X, names)
        raise ValidationError("design matrix is rank deficient; collinear column(s): "
                              + ", ".join(repr(b) for b in bad))

    beta, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ beta
    ssr = float(resid @ resid)
    dof = n - k

    xtx_inv = np.linalg.inv(X.T @ X)
    leverage = np.einsum("ij,jk,ik->i", X, xtx_inv, X)
    e2 = resid * resid
    if hc == "HC0":
        u = e2
    elif hc == "HC1":
        u = e2 * (n / dof)
    elif hc == "HC2":
        u = e2 / (1.0 - leverage)
    else:
        u = e2 / (1.0 - leverage) ** 2
    meat = X.T @ (X * u[:, None])
    cov = xtx_inv @ meat @ xtx_inv
    se = np.sqrt(np.maximum(np.diag(cov), 0.0))

    t_stats = []
    p_values = []
    for b, s in zip(beta, se):
        if s == 0.0:
            t = math.inf if b > 0 else (-math.inf if b < 0 else 0.0)
            p = 0.0 if b != 0.0 else 1.0
        else:
            t = float(b / s)
            p = t_two_sided_p(t, dof)
        t_stats.append(t)
        p_values.append(p)

    if spec.intercept:
        tss = float(((y - y.mean()) ** 2).sum())
    else:
        tss = float((y * y).sum())
    if tss == 0.0:
        r2 = 1.0 if ssr == 0.0 else 0.0
        adj_r2 = r2
    else:
        r2 = 1.0 - ssr / tss
        if spec.intercept:
            adj_r2 = 1.0 - (ssr / dof) / (tss / (n - 1))
        else:
            adj_r2 = 1.0 - (1.0 - r2) * n / dof

    partial_r2 = None
    if spec.focus is not None:
        keep = [j for j, name in enumerate(names) if name != spec.focus]
        X_r = X[:, keep]
        if X_r.shape[1] == 0:
            ssr_r = float(y @ y)
        else:
            beta_r, *_ = np.linalg.lstsq(X_r, y, rcond=None)
            resid_r = y - X_r @ beta_r
            ssr_r = float(resid_r @ resid_r)
        # a restricted fit that is already perfect at working precision means
        # the focus regressor adds nothing; avoid a noise/noise ratio
        if ssr_r <= max(tss, 1.0) * 1e-14:
            partial_r2 = 0.0
        else:
            partial_r2 = min(max((ssr_r - ssr) / ssr_r, 0.0), 1.0)

    return RegressionResult(
        label=spec.label,
        dependent=spec.dependent,
        names=tuple(names),
        coefficients=tuple(float(b) for b in beta),
        std_errors=tuple(float(s) for s in se),
        t_stats=tuple(t_stats),
        p_values=tuple(p_values),
        stars=tuple(significance_stars(p) for p in p_values),
        r2=float(r2),
        adj_r2=float(adj_r2),
        partial_r2=partial_r2,
        focus=spec.focus,
        n=n,
        dof=dof,
        hc=hc,
    )


# ---------------------------------------------------------------------------
# rank statistics
# ---------------------------------------------------------------------------

def midranks(values: Sequence[float]) -> np.ndarray:
    """Average-rank assignment: tied observations share the mean of their ranks."""
    values = np.asarray(values, dtype=np.float64)
    n = values.size
    order = np.argsort(values, kind="stable")
    ranks = np.empty(n)
    i = 0
    while i < n:
        j = i
        while j + 1 < n and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


@dataclass(frozen=True)
class SpearmanResult:
    rho: float
    pvalue: float
    n: int
    method: str


def _pearson(x: np.ndarray, y: np.ndarray) -> float:
    dx = x - x.mean()
    dy = y - y.mean()
    sx2 = float((dx * dx).sum())
    sy2 = float((dy * dy).sum())
    if sx2 == 0.0 or sy2 == 0.0:
        raise ValidationError("rank correlation is undefined for a constant input")
    # single square root keeps integer-valued cases exact (e.g. 8/10 = 0.8)
    return float((dx * dy).sum() / math.sqrt(sx2 * sy2))


def spearman(
    x: Sequence[float],
    y: Sequence[float],
    method: str = "t",
) -> SpearmanResult:
    """Spearman rank correlation with midrank ties.

    ``method="t"`` uses the two-sided t approximation with n-2 degrees of
    freedom (a perfect correlation gets p = 0); ``method="exact"`` enumerates
    all permutations of one input, feasible for n <= 10.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.size != y.size:
        raise ValidationError(f"length mismatch: {x.size} vs {y.size}")
    n = int(x.size)
    if n < 3:
        raise ValidationError(f"need at least 3 observations, got {n}")
    if np.all(x == x[0]) or np.all(y == y[0]):
        raise ValidationError("rank correlation is undefined for a constant input")
    rx = midranks(x)
    ry = midranks(y)
    # a perfect monotone relation means identical (or mirrored) rank vectors;
    # report exactly +-1 instead of a last-ulp rounding artifact
    if np.array_equal(rx, ry):
        rho = 1.0
    elif np.array_equal(rx, (n + 1.0) - ry):
        rho = -1.0
    else:
        rho = max(-1.0, min(1.0, _pearson(rx, ry)))

    if method == "t":
        if 1.0 - rho * rho <= 0.0:
            p = 0.0
        else:
            t = rho * math.sqrt((n - 2) / (1.0 - rho * rho))
            p = t_two_sided_p(t, n - 2)
        return SpearmanResult(rho=rho, pvalue=p, n=n, method="t")
    if method == "exact":
        if n > 10:
            raise ValidationError(f"exact permutation mode is limited to n <= 10, got {n}")
        dev_x = rx - rx.mean()
        dev_y = ry - ry.mean()
        sx = float(np.sqrt((dev_x * dev_x).sum()))
        sy = float(np.sqrt((dev_y * dev_y).sum()))
        threshold = abs(rho) - 1e-12
        hits = 0
        total = 0
        for perm in permutations(range(n)):
            r = float((dev_x * dev_y[list(perm)]).sum() / (sx * sy))
            if abs(r) >= threshold:
                hits += 1
            total += 1
        return SpearmanResult(rho=rho, pvalue=hits / total, n=n, method="exact")
    raise ValidationError(f"unknown method {method!r}")


@dataclass(frozen=True)
class DeviationStats:
    n: int
    mean: float
    median: float
    histogram: tuple[tuple[float, int], ...]
    cumulative: tuple[tuple[float, float], ...]


def deviation_stats(
    ranking_a: Mapping[str, float],
    ranking_b: Mapping[str, float],
) -> DeviationStats:
    """Absolute deviations |rank_a - rank_b| per shared item, summarized.

    ``cumulative`` gives, for each observed deviation level in ascending
    order, the share of items at or below that level.
    """
    if set(ranking_a) != set(ranking_b):
        only_a = sorted(set(ranking_a) - set(ranking_b))
        only_b = sorted(set(ranking_b) - set(ranking_a))
        raise ValidationError(
            "rankings cover different items"
            + (f"; only in first: {only_a}" if only_a else "")
            + (f"; only in second: {only_b}" if only_b else "")
        )
    if not ranking_a:
        raise ValidationError("rankings are empty")
    devs = np.asarray([abs(ranking_a[i] - ranking_b[i]) for i in sorted(ranking_a)])
    counts = Counter(float(d) for d in devs)
    levels = sorted(counts)
    n = devs.size
    cumulative = []
    running = 0
    for level in levels:
        running += counts[level]
        cumulative.append((level, running / n))
    return DeviationStats(
        n=int(n),
        mean=float(devs.mean()),
        median=float(np.median(devs)),
        histogram=tuple((level, counts[level]) for level in levels),
        cumulative=tuple(cumulative),
    )


# ---------------------------------------------------------------------------
# rendering
# ---------------------------------------------------------------------------

def write_regression_csv(results: Sequence[RegressionResult], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["label", "dependent", "term", "coefficient", "std_error",
                         "t_stat", "p_value", "stars", "r2", "adj_r2",
                         "partial_r2_focus", "n", "hc"])
        for res in results:
            for i, name in enumerate(res.names):
                writer.writerow([
                    res.label, res.dependent, name,
                    format(res.coefficients[i], ".17g"),
                    format(res.std_errors[i], ".17g"),
                    format(res.t_stats[i], ".17g"),
                    format(res.p_values[i], ".17g"),
                    res.stars[i],
                    format(res.r2, ".17g"),
                    format(res.adj_r2, ".17g"),
                    "" if res.partial_r2 is None else format(res.partial_r2, ".17g"),
                    res.n, res.hc,
                ])


def format_regression_text(results: Sequence[RegressionResult], digits: int = 3) -> str:
    """Aligned text table: one column per fit, coefficient rows starred, the
    standard error in parentheses on the following line."""
    if not results:
        raise ValidationError("no regression results to render")
    term_order: list[str] = []
    for res in results:
        for name in res.names:
            if name != "intercept" and name not in term_order:
                term_order.append(name)
    if any("intercept" in res.names for res in results):
        term_order.append("intercept")

    labels = [res.label or f"({i + 1})" for i, res in enumerate(results)]
    rows: list[list[str]] = []

    def fmt(x: float) -> str:
        return f"{x:.{digits}f}"

    for term in term_order:
        coef_row = [term]
        se_row = [""]
        for res in results:
            if term in res.names:
                i = res.names.index(term)
                coef_row.append(fmt(res.coefficients[i]) + res.stars[i])
                se_row.append(f"({fmt(res.std_errors[i])})")
            else:
                coef_row.append("")
                se_row.append("")
        rows.append(coef_row)
        rows.append(se_row)

    focus = next((res.focus for res in results if res.focus), None)
    if focus is not None:
        rows.append([f"Partial R2 of {focus}"] + [
            "" if res.partial_r2 is None else f"{res.partial_r2:.5f}" for res in results
        ])
    rows.append(["Adj. R2"] + [f"{res.adj_r2:.5f}" for res in results])
    rows.append(["N"] + [str(res.n) for res in results])

    table = [[""] + labels] + rows
    widths = [max(len(row[c]) for row in table) for c in range(len(table[0]))]
    lines = []
    for row in table:
        cells = [row[0].ljust(widths[0])] + [
            row[c].rjust(widths[c]) for c in range(1, len(row))
        ]
        lines.append("  ".join(cells).rstrip())
    return "\n".join(lines) + "\n"
