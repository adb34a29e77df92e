"""Independent brute-force oracles shared by the test modules.

Everything here is deliberately plain Python (no numpy) and re-derives the
published arithmetic from scratch, so the production code path is never used
to generate its own expected values.
"""

import csv
import json
import math
import re

_M = (1 << 64) - 1


def oracle_embed(text, dim):
    """Re-implementation of the deterministic token-hash embedding rule."""
    vecs = []
    for tok in re.findall(r"[a-z0-9]+", text.lower()):
        h = 0xCBF29CE484222325
        for b in tok.encode("utf-8"):
            h = ((h ^ b) * 0x100000001B3) & _M
        s = h
        vals = []
        for _ in range(dim):
            s = (s + 0x9E3779B97F4A7C15) & _M
            z = s
            z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _M
            z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _M
            z ^= z >> 31
            vals.append(2.0 * ((z >> 11) / 2.0 ** 53) - 1.0)
        vecs.append(vals)
    avg = [sum(col) / len(vecs) for col in zip(*vecs)]
    norm = math.sqrt(sum(v * v for v in avg))
    return [v / norm for v in avg]


def brute_force_afi(weights_csv, texts_csv, amenities_json, dim, mode="average"):
    """Recompute the whole index straight from the raw CSV/JSON inputs:
    weighted descriptor average per occupation, preference-weighted amenity
    average, unit-normalize both, cosine per occupation."""
    weights = {}
    occs, descs = set(), set()
    with open(weights_csv, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            occs.add(row["occupation_id"])
            descs.add(row["descriptor_id"])
            weights[(row["occupation_id"], row["descriptor_id"])] = float(row["weight"])
    texts = {}
    with open(texts_csv, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            texts[row["descriptor_id"]] = row["text"]
    desc_vec = {d: oracle_embed(texts[d], dim) for d in sorted(descs)}

    with open(amenities_json, encoding="utf-8") as fh:
        spec = json.load(fh)
    d0 = [0.0] * dim
    for amenity in spec["amenities"]:
        vec = oracle_embed(amenity["definition"], dim)
        if mode == "average":
            w = (amenity["weight_absolute"] + amenity["weight_relative"]) / 2.0
        elif mode == "absolute":
            w = amenity["weight_absolute"]
        else:
            w = amenity["weight_relative"]
        for i in range(dim):
            d0[i] += w * vec[i]
    norm = math.sqrt(sum(v * v for v in d0))
    d0 = [v / norm for v in d0]

    afi = {}
    for occ in sorted(occs):
        x = [0.0] * dim
        for d in sorted(descs):
            w = weights.get((occ, d), 0.0)
            for i in range(dim):
                x[i] += w * desc_vec[d][i]
        norm = math.sqrt(sum(v * v for v in x))
        x = [v / norm for v in x]
        afi[occ] = sum(a * b for a, b in zip(x, d0))
    return afi


def ols_normal_equations(y, columns):
    """Gaussian-elimination least squares plus HC0/HC1 sandwich pieces.

    ``columns`` is a list of regressor columns (including any intercept
    column). Returns (beta, residuals, ssr, xtx_inv) as plain lists.
    """
    n = len(y)
    k = len(columns)
    xtx = [[sum(columns[a][i] * columns[b][i] for i in range(n)) for b in range(k)]
           for a in range(k)]
    xty = [sum(columns[a][i] * y[i] for i in range(n)) for a in range(k)]
    xtx_inv = _invert(xtx)
    beta = [sum(xtx_inv[a][b] * xty[b] for b in range(k)) for a in range(k)]
    resid = [y[i] - sum(columns[a][i] * beta[a] for a in range(k)) for i in range(n)]
    ssr = sum(e * e for e in resid)
    return beta, resid, ssr, xtx_inv


def hc_standard_errors(columns, resid, xtx_inv, variant="HC1"):
    n = len(resid)
    k = len(columns)
    if variant == "HC1":
        scale = n / (n - k)
    elif variant == "HC0":
        scale = 1.0
    else:
        raise ValueError(variant)
    meat = [[sum(columns[a][i] * resid[i] * resid[i] * columns[b][i] for i in range(n))
             for b in range(k)] for a in range(k)]
    cov = _mat_mul(_mat_mul(xtx_inv, meat), xtx_inv)
    return [math.sqrt(scale * cov[a][a]) for a in range(k)]


def _mat_mul(a, b):
    n, m, p = len(a), len(b), len(b[0])
    return [[sum(a[i][t] * b[t][j] for t in range(m)) for j in range(p)]
            for i in range(n)]


def _invert(matrix):
    n = len(matrix)
    aug = [list(row) + [1.0 if i == j else 0.0 for j in range(n)]
           for i, row in enumerate(matrix)]
    for col in range(n):
        pivot = max(range(col, n), key=lambda r: abs(aug[r][col]))
        if abs(aug[pivot][col]) < 1e-300:
            raise ValueError("singular matrix")
        aug[col], aug[pivot] = aug[pivot], aug[col]
        div = aug[col][col]
        aug[col] = [v / div for v in aug[col]]
        for r in range(n):
            if r != col and aug[r][col] != 0.0:
                factor = aug[r][col]
                aug[r] = [v - factor * w for v, w in zip(aug[r], aug[col])]
    return [row[n:] for row in aug]


def t_cdf_by_quadrature(t, dof, steps=200_000):
    """Student-t CDF via Simpson integration of the density (oracle only)."""
    c = math.exp(math.lgamma((dof + 1) / 2.0) - math.lgamma(dof / 2.0)) / math.sqrt(dof * math.pi)

    def pdf(x):
        return c * (1.0 + x * x / dof) ** (-(dof + 1) / 2.0)

    if t < 0:
        return 1.0 - t_cdf_by_quadrature(-t, dof, steps)
    lo, hi = 0.0, t
    if steps % 2:
        steps += 1
    h = (hi - lo) / steps
    total = pdf(lo) + pdf(hi)
    for i in range(1, steps):
        total += pdf(lo + i * h) * (4.0 if i % 2 else 2.0)
    return 0.5 + total * h / 3.0


def two_sided_p_by_quadrature(t, dof):
    return 2.0 * (1.0 - t_cdf_by_quadrature(abs(t), dof))
