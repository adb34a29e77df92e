"""Regression and rank-statistics tests against independent oracles."""

import math
from itertools import permutations

import numpy as np
import pytest

from afindex.econ import (
    RegressionSpec,
    deviation_stats,
    format_regression_text,
    midranks,
    ols_robust,
    significance_stars,
    spearman,
    t_two_sided_p,
)
from afindex.errors import ValidationError
from oracles import hc_standard_errors, ols_normal_equations, two_sided_p_by_quadrature


class TestStudentT:
    @pytest.mark.parametrize("t,dof,alpha", [
        # published two-sided critical values of the t distribution
        (2.228139, 10, 0.05),
        (1.812461, 10, 0.10),
        (2.015048, 5, 0.10),
        (2.845340, 20, 0.01),
        (1.959964, 10**7, 0.05),
    ])
    def test_published_critical_values(self, t, dof, alpha):
        assert t_two_sided_p(t, dof) == pytest.approx(alpha, abs=2e-6)

    @pytest.mark.parametrize("t,dof", [(0.5, 3), (1.7, 8), (2.3094, 3), (4.0, 25)])
    def test_matches_quadrature_oracle(self, t, dof):
        assert t_two_sided_p(t, dof) == pytest.approx(
            two_sided_p_by_quadrature(t, dof), abs=1e-9)

    def test_edge_values(self):
        assert t_two_sided_p(0.0, 5) == 1.0
        assert t_two_sided_p(math.inf, 5) == 0.0

    def test_matches_scipy_if_available(self):
        stats = pytest.importorskip("scipy.stats")
        rng = np.random.default_rng(0)
        for _ in range(50):
            t = float(rng.uniform(-6, 6))
            dof = int(rng.integers(2, 200))
            ref = 2.0 * stats.t.sf(abs(t), dof)
            assert t_two_sided_p(t, dof) == pytest.approx(ref, abs=1e-10)


class TestStars:
    def test_thresholds(self):
        assert significance_stars(0.005) == "***"
        assert significance_stars(0.03) == "**"
        assert significance_stars(0.07) == "*"
        assert significance_stars(0.2) == ""
        # boundaries belong to the weaker level
        assert significance_stars(0.01) == "**"
        assert significance_stars(0.05) == "*"
        assert significance_stars(0.10) == ""


class TestOlsRobust:
    def test_exact_fit_recovers_coefficients(self):
        x = [1.0, 2.0, 3.0, 4.0, 5.0]
        data = {"y": [2.0 + 3.0 * v for v in x], "x": x}
        res = ols_robust(data, RegressionSpec("y", ("x",), focus="x"))
        assert res.coefficients == pytest.approx((2.0, 3.0), abs=1e-10)
        assert res.std_errors == pytest.approx((0.0, 0.0), abs=1e-10)
        assert res.r2 == pytest.approx(1.0, abs=1e-12)

    def test_twelve_row_fixture_matches_oracle(self):
        rng = np.random.default_rng(99)
        x1 = rng.uniform(0, 10, size=12)
        x2 = rng.uniform(-3, 3, size=12)
        y = 1.5 + 0.8 * x1 - 1.1 * x2 + rng.normal(0, 0.7, size=12)
        data = {"y": y, "x1": x1, "x2": x2}
        res = ols_robust(data, RegressionSpec("y", ("x1", "x2"), focus="x1"))

        columns = [[1.0] * 12, list(x1), list(x2)]
        beta, resid, ssr, xtx_inv = ols_normal_equations(list(y), columns)
        se = hc_standard_errors(columns, resid, xtx_inv, "HC1")
        assert res.coefficients == pytest.approx(tuple(beta), abs=1e-8)
        assert res.std_errors == pytest.approx(tuple(se), abs=1e-8)

        # partial R2 against a restricted refit done by the oracle
        beta_r, resid_r, ssr_r, _ = ols_normal_equations(
            list(y), [[1.0] * 12, list(x2)])
        assert res.partial_r2 == pytest.approx((ssr_r - ssr) / ssr_r, abs=1e-8)

        # adjusted R2 from first principles
        tss = float(((y - y.mean()) ** 2).sum())
        assert res.adj_r2 == pytest.approx(
            1.0 - (ssr / (12 - 3)) / (tss / 11), abs=1e-10)

    def test_random_designs_match_oracle(self):
        rng = np.random.default_rng(7)
        for _ in range(100):
            n = int(rng.integers(8, 51))
            k = int(rng.integers(1, 7))
            X = rng.normal(0, 2, size=(n, k))
            beta_true = rng.normal(0, 1, size=k)
            y = X @ beta_true + rng.normal(0, rng.uniform(0.1, 2.0), size=n)
            data = {"y": y}
            names = []
            for j in range(k):
                data[f"x{j}"] = X[:, j]
                names.append(f"x{j}")
            res = ols_robust(data, RegressionSpec("y", tuple(names), focus=names[0]))
            columns = [[1.0] * n] + [list(X[:, j]) for j in range(k)]
            beta, resid, ssr, xtx_inv = ols_normal_equations(list(y), columns)
            se = hc_standard_errors(columns, resid, xtx_inv, "HC1")
            assert np.allclose(res.coefficients, beta, rtol=0, atol=1e-8)
            assert np.allclose(res.std_errors, se, rtol=0, atol=1e-8)

    def test_duplicate_column_is_rank_deficient(self):
        x = list(np.random.default_rng(1).uniform(0, 1, size=10))
        data = {"y": list(range(10)), "a": x, "b": x}
        with pytest.raises(ValidationError, match="'b'"):
            ols_robust(data, RegressionSpec("y", ("a", "b")))

    def test_n_must_exceed_k(self):
        data = {"y": [1.0, 2.0], "a": [0.0, 1.0]}
        with pytest.raises(ValidationError, match="more observations"):
            ols_robust(data, RegressionSpec("y", ("a",)))

    def test_residual_orthogonality(self):
        rng = np.random.default_rng(12)
        n = 40
        x1 = rng.normal(size=n)
        x2 = rng.normal(size=n)
        y = 1.0 + x1 - 2.0 * x2 + rng.normal(0, 1.5, size=n)
        data = {"y": y, "x1": x1, "x2": x2}
        res = ols_robust(data, RegressionSpec("y", ("x1", "x2")))
        resid = y - (res.coefficients[0]
                     + res.coefficients[1] * x1 + res.coefficients[2] * x2)
        assert abs(resid.sum()) < 1e-9
        assert abs((resid * x1).sum()) < 1e-9
        assert abs((resid * x2).sum()) < 1e-9

    def test_hc1_equals_scaled_classical_under_equal_residuals(self):
        # +e/-e alternating residuals: diag(e^2) = e^2 I, so the sandwich
        # collapses to the classical covariance times a known scale
        x = np.array([0.0, 1.0, 2.0, 3.0])
        y_fit = 1.0 + 2.0 * x
        e = 0.5
        y = y_fit + np.array([e, -e, -e, e])
        data = {"y": y, "x": x}
        res = ols_robust(data, RegressionSpec("y", ("x",)), hc="HC1")
        X = np.column_stack([np.ones(4), x])
        beta = np.linalg.lstsq(X, y, rcond=None)[0]
        resid = y - X @ beta
        sigma2 = float(resid @ resid) / 4.0  # HC uses 1/n inside, HC1 scales by n/(n-k)
        classical = np.linalg.inv(X.T @ X) * sigma2 * (4 / (4 - 2))
        assert np.allclose(res.std_errors, np.sqrt(np.diag(classical)), atol=1e-9)

    def test_partial_r2_zero_when_focus_coefficient_zero(self):
        # y lies exactly in the span of the other regressors: the focus
        # coefficient is 0 and dropping the focus loses nothing
        x1 = np.array([1.0, 2.0, 3.0, 4.0, 5.0, 6.0])
        x2 = np.array([1.0, -1.0, 1.0, -1.0, 1.0, -1.0])
        y = 2.0 + 0.5 * x1
        data = {"y": y, "x1": x1, "x2": x2}
        res = ols_robust(data, RegressionSpec("y", ("x1", "x2"), focus="x2"))
        assert res.coefficient("x2") == pytest.approx(0.0, abs=1e-12)
        assert res.partial_r2 == pytest.approx(0.0, abs=1e-12)

    def test_partial_r2_small_when_focus_orthogonal_to_noise(self):
        rng = np.random.default_rng(44)
        n = 24
        x1 = rng.normal(size=n)
        x2 = rng.normal(size=n)
        noise = rng.normal(size=n)
        # orthogonalize the noise against [1, x1, x2] so beta_x2 stays ~0
        X = np.column_stack([np.ones(n), x1, x2])
        noise = noise - X @ np.linalg.lstsq(X, noise, rcond=None)[0]
        y = 2.0 + 0.5 * x1 + noise
        res = ols_robust({"y": y, "x1": x1, "x2": x2},
                         RegressionSpec("y", ("x1", "x2"), focus="x2"))
        assert res.partial_r2 == pytest.approx(0.0, abs=1e-12)

    def test_hc_variants_ordering(self):
        rng = np.random.default_rng(9)
        n = 25
        x = rng.normal(size=n)
        y = 1.0 + x + rng.normal(0, 1, size=n) * (1 + np.abs(x))
        data = {"y": y, "x": x}
        ses = {}
        for hc in ("HC0", "HC1", "HC2", "HC3"):
            ses[hc] = ols_robust(data, RegressionSpec("y", ("x",)), hc=hc).std_errors[1]
        assert ses["HC0"] < ses["HC1"]
        assert ses["HC2"] < ses["HC3"]

    def test_matches_statsmodels_if_available(self):
        sm = pytest.importorskip("statsmodels.api")
        rng = np.random.default_rng(21)
        n = 30
        x1 = rng.uniform(size=n)
        x2 = rng.normal(size=n)
        y = 0.3 + 2.0 * x1 - x2 + rng.normal(0, 0.8, size=n)
        data = {"y": y, "x1": x1, "x2": x2}
        res = ols_robust(data, RegressionSpec("y", ("x1", "x2")), hc="HC1")
        X = sm.add_constant(np.column_stack([x1, x2]))
        # use_t so the reference also applies the t distribution with n-k dof
        ref = sm.OLS(y, X).fit(cov_type="HC1", use_t=True)
        assert np.allclose(res.coefficients, ref.params, atol=1e-10)
        assert np.allclose(res.std_errors, ref.bse, atol=1e-10)
        assert np.allclose(res.p_values, ref.pvalues, atol=1e-9)


class TestSpearman:
    def test_hand_case_rho_08(self):
        res = spearman([1, 2, 3, 4, 5], [1, 3, 2, 5, 4])
        assert res.rho == pytest.approx(0.8, abs=1e-15)
        # p from the t formula, checked against numeric integration
        t = 0.8 * math.sqrt(3 / (1 - 0.64))
        assert res.pvalue == pytest.approx(two_sided_p_by_quadrature(t, 3), abs=1e-9)

    def test_identical_orderings(self):
        res = spearman([1, 2, 3, 4], [10, 20, 30, 40])
        assert res.rho == 1.0
        assert res.pvalue == 0.0

    def test_reversed_orderings(self):
        res = spearman([1, 2, 3, 4], [4, 3, 2, 1])
        assert res.rho == -1.0
        assert res.pvalue == 0.0

    def test_monotone_transform_invariance(self):
        rng = np.random.default_rng(31)
        x = rng.normal(size=20)
        y = rng.normal(size=20)
        base = spearman(x, y).rho
        assert spearman(np.exp(x), y).rho == pytest.approx(base, abs=1e-12)
        assert spearman(x, 3.0 * y + 7.0).rho == pytest.approx(base, abs=1e-12)
        assert spearman(x, np.arctan(y)).rho == pytest.approx(base, abs=1e-12)

    def test_constant_input_rejected(self):
        with pytest.raises(ValidationError, match="constant"):
            spearman([1, 1, 1, 1], [1, 2, 3, 4])

    def test_length_mismatch(self):
        with pytest.raises(ValidationError, match="length"):
            spearman([1, 2, 3], [1, 2])

    def test_midranks_hand_case(self):
        assert list(midranks([10, 20, 20, 30])) == [1.0, 2.5, 2.5, 4.0]
        assert list(midranks([5, 5, 5])) == [2.0, 2.0, 2.0]

    def test_exact_mode_matches_permutation_oracle_with_ties(self):
        x = [1.0, 2.0, 2.0, 3.0, 4.0, 5.0]
        y = [2.0, 1.0, 3.0, 3.0, 5.0, 4.0]
        res = spearman(x, y, method="exact")

        # oracle: enumerate every permutation of y, midrank by hand
        def rho_of(xs, ys):
            rx = midranks(xs)
            ry = midranks(ys)
            return float(np.corrcoef(rx, ry)[0, 1])

        observed = rho_of(x, y)
        hits = 0
        total = 0
        for perm in permutations(y):
            total += 1
            if abs(rho_of(x, list(perm))) >= abs(observed) - 1e-12:
                hits += 1
        assert res.rho == pytest.approx(observed, abs=1e-12)
        assert res.pvalue == pytest.approx(hits / total, abs=1e-15)

    def test_exact_mode_size_limit(self):
        with pytest.raises(ValidationError, match="n <= 10"):
            spearman(list(range(12)), list(range(12)), method="exact")

    def test_matches_scipy_if_available(self):
        stats = pytest.importorskip("scipy.stats")
        rng = np.random.default_rng(8)
        for _ in range(25):
            n = int(rng.integers(5, 40))
            x = rng.integers(0, 6, size=n).astype(float)  # ties galore
            y = x * 0.5 + rng.normal(0, 1, size=n)
            if len(set(x)) < 2 or len(set(y)) < 2:
                continue
            ref_rho, ref_p = stats.spearmanr(x, y)
            res = spearman(x, y)
            assert res.rho == pytest.approx(float(ref_rho), abs=1e-12)
            assert res.pvalue == pytest.approx(float(ref_p), abs=1e-9)


class TestDeviationStats:
    def test_identical_rankings(self):
        ranks = {f"i{k}": float(k) for k in range(10)}
        stats = deviation_stats(ranks, dict(ranks))
        assert stats.mean == 0.0
        assert stats.median == 0.0
        assert stats.cumulative[0] == (0.0, 1.0)

    def test_two_swapped_items(self):
        a = {f"i{k}": float(k) for k in range(10)}
        b = dict(a)
        b["i0"], b["i1"] = a["i1"], a["i0"]
        stats = deviation_stats(a, b)
        assert stats.mean == pytest.approx(0.2, abs=1e-15)
        assert dict(stats.histogram) == {0.0: 8, 1.0: 2}

    def test_cumulative_shares(self):
        a = {"x": 1.0, "y": 2.0, "z": 3.0, "w": 4.0}
        b = {"x": 1.0, "y": 4.0, "z": 3.0, "w": 1.0}
        stats = deviation_stats(a, b)
        # deviations: 0, 2, 0, 3
        assert dict(stats.histogram) == {0.0: 2, 2.0: 1, 3.0: 1}
        assert stats.cumulative == ((0.0, 0.5), (2.0, 0.75), (3.0, 1.0))

    def test_item_set_mismatch(self):
        with pytest.raises(ValidationError, match="different items"):
            deviation_stats({"a": 1.0}, {"b": 1.0})

    def test_large_fixture_consistency(self):
        # response-scale fixture: recompute the summary stats independently
        rng = np.random.default_rng(17)
        n = 2627
        a = {f"r{i}": float(rng.integers(1, 11)) for i in range(n)}
        b = {f"r{i}": float(rng.integers(1, 11)) for i in range(n)}
        stats = deviation_stats(a, b)
        devs = sorted(abs(a[k] - b[k]) for k in a)
        assert stats.n == n
        assert stats.mean == pytest.approx(sum(devs) / n, abs=1e-12)
        assert stats.median == pytest.approx(
            (devs[(n - 1) // 2] + devs[n // 2]) / 2.0, abs=1e-12)
        assert stats.cumulative[-1][1] == pytest.approx(1.0, abs=1e-15)
        total = sum(count for _, count in stats.histogram)
        assert total == n


class TestRendering:
    def test_text_table_stars_and_parens(self):
        x = np.linspace(0, 1, 30)
        rng = np.random.default_rng(2)
        y = 4.0 + 9.0 * x + rng.normal(0, 0.05, size=30)
        data = {"y": y, "x": x, "z": rng.normal(size=30)}
        r1 = ols_robust(data, RegressionSpec("y", ("x",), focus="x", label="#1"))
        r2 = ols_robust(data, RegressionSpec("y", ("x", "z"), focus="x", label="#2"))
        text = format_regression_text([r1, r2])
        assert "***" in text
        assert "(" in text and ")" in text
        assert "Partial R2 of x" in text
        assert "Adj. R2" in text
        assert text.splitlines()[0].strip().startswith("#1")
        assert "N" in text.splitlines()[-1]
