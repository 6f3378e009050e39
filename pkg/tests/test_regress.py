import datetime
import math

import numpy as np
import pytest

from paperlinks.analytics import MentionRow, MentionTable
from paperlinks.classify import LinkClass
from paperlinks.ingest import Field, PaperMeta
from paperlinks.regress import (
    CITATION_COLUMNS,
    LIVENESS_COLUMNS,
    DesignMatrix,
    SingularDesignError,
    build_citation_design,
    build_liveness_design,
    doubling_odds_percent,
    fit_logistic,
    fit_negbin,
    fit_poisson_beta,
    logistic_gradient,
    logistic_log_likelihood,
    negbin_gradient,
    negbin_log_likelihood,
    rate_ratio_percent,
    significance_stars,
)


def _row(paper, canonical, domain, link_class, alive, in_footnote=False):
    return MentionRow(
        paper_id=paper.paper_id, canonical=canonical, domain=domain,
        link_class=link_class, section="S", paragraph_index=0,
        paragraph_count=10, in_footnote=in_footnote, year=paper.year,
        field=paper.field, citation_count=paper.citation_count,
        final_status=200 if alive else (404 if alive is not None else None),
        alive=alive,
    )


class TestLivenessDesign:
    def _table(self):
        pm = PaperMeta("pm", datetime.date(2015, 1, 1), Field.MATH, 7)
        pc = PaperMeta("pc", datetime.date(2018, 1, 1), Field.CS, 0)
        rows = []
        # 8 mentions on one domain so log2(domain count) == 3 for them
        for i in range(8):
            rows.append(_row(pc, f"https://big.org/u{i % 2}", "big.org",
                             LinkClass.METHODS, alive=True))
        rows.append(_row(pm, "https://solo.org/x", "solo.org",
                         LinkClass.SUPPLEMENT, alive=False))
        rows.append(_row(pm, "ftp://f.org/z", "f.org", LinkClass.DATA,
                         alive=None))  # unprobed: excluded
        return MentionTable([pm, pc], rows)

    def test_columns_and_shape(self):
        design = build_liveness_design(self._table(), 2022)
        assert design.columns == LIVENESS_COLUMNS
        assert design.X.shape == (9, len(LIVENESS_COLUMNS))  # unprobed dropped

    def test_log2_domain_count_transform(self):
        design = build_liveness_design(self._table(), 2022)
        col = design.columns.index("log2_domain_mentions")
        assert design.X[0, col] == pytest.approx(3.0)  # log2(8)

    def test_math_supplement_row_has_zero_dummies(self):
        design = build_liveness_design(self._table(), 2022)
        row = design.X[8]
        for name in ("field_cs", "field_physics", "class_methods", "class_data"):
            assert row[design.columns.index(name)] == 0.0
        assert row[design.columns.index("age")] == 7.0
        assert row[design.columns.index("age_squared")] == 49.0

    def test_hand_built_matrix(self):
        pm = PaperMeta("pm", datetime.date(2019, 1, 1), Field.PHYSICS, 3)
        rows = [
            _row(pm, "https://a.org/1", "a.org", LinkClass.DATA, alive=True,
                 in_footnote=True),
            _row(pm, "https://a.org/1", "a.org", LinkClass.DATA, alive=True),
        ]
        design = build_liveness_design(MentionTable([pm], rows), 2022)
        expected_row = [
            1.0, 1.0, 1.0, 2.0, 1.0, 0.0, 1.0, 0.0, 1.0, 3.0, 9.0,
        ]  # log2(2 domain mentions), log2(2 url mentions), log2(1+3)
        assert design.X[0].tolist() == expected_row
        assert design.y.tolist() == [1.0, 1.0]

    def test_empty_design_rejected(self):
        pm = PaperMeta("pm", datetime.date(2019, 1, 1), Field.CS, 3)
        rows = [_row(pm, "ftp://f.org/z", "f.org", LinkClass.DATA, alive=None)]
        with pytest.raises(ValueError, match="empty"):
            build_liveness_design(MentionTable([pm], rows), 2022)


class TestCitationDesign:
    def test_indicator_logic(self):
        papers = [
            PaperMeta("a", datetime.date(2015, 1, 1), Field.CS, 10),
            PaperMeta("b", datetime.date(2016, 1, 1), Field.MATH, 5),
            PaperMeta("c", datetime.date(2017, 1, 1), Field.PHYSICS, 2),
        ]
        rows = [
            _row(papers[0], "https://m.org/1", "m.org", LinkClass.METHODS, True),
            _row(papers[1], "https://d.org/1", "d.org", LinkClass.DATA, True),
            _row(papers[1], "https://d.org/2", "d.org", LinkClass.DATA, False),
        ]
        design = build_citation_design(papers, MentionTable(papers, rows), 2022)
        assert design.columns == CITATION_COLUMNS
        by_col = {name: i for i, name in enumerate(design.columns)}
        # paper a: one alive methods link only
        assert design.X[0, by_col["has_live_methods"]] == 1.0
        assert design.X[0, by_col["has_live_data"]] == 0.0
        # paper b: both an alive and a dead data link -> both indicators set
        assert design.X[1, by_col["has_live_data"]] == 1.0
        assert design.X[1, by_col["has_problematic_data"]] == 1.0
        # paper c: no links at all
        assert design.X[2, 1:5].tolist() == [0.0] * 4
        assert design.y.tolist() == [10.0, 5.0, 2.0]


class TestLogistic:
    def _synthetic(self, seed=42, n=2000, k=5):
        rng = np.random.default_rng(seed)
        X = np.column_stack([np.ones(n)] + [rng.normal(size=n) for _ in range(k - 1)])
        beta = np.array([-0.5, 1.0, -0.7, 0.3, 0.0])[:k]
        prob = 1.0 / (1.0 + np.exp(-(X @ beta)))
        y = (rng.random(n) < prob).astype(float)
        return DesignMatrix([f"c{i}" for i in range(k)], X, y), beta

    def test_recovers_truth_within_3_se(self):
        design, beta = self._synthetic()
        fit = fit_logistic(design)
        assert fit.converged
        assert np.all(np.abs(fit.beta - beta) <= 3 * fit.se)

    def test_gradient_matches_finite_differences(self):
        design, _ = self._synthetic(seed=7)
        rng = np.random.default_rng(3)
        beta0 = rng.normal(scale=0.3, size=design.X.shape[1])
        analytic = logistic_gradient(design.X, design.y, beta0)
        h = 1e-6
        for j in range(len(beta0)):
            e = np.zeros_like(beta0)
            e[j] = h
            numeric = (
                logistic_log_likelihood(design.X, design.y, beta0 + e)
                - logistic_log_likelihood(design.X, design.y, beta0 - e)
            ) / (2 * h)
            assert abs(analytic[j] - numeric) / max(1.0, abs(numeric)) < 1e-6

    def test_constant_response_flags_nonconvergence(self):
        design, _ = self._synthetic(seed=11)
        flat = DesignMatrix(design.columns, design.X, np.zeros(len(design.y)))
        fit = fit_logistic(flat)
        assert not fit.converged
        assert any("diverging" in d for d in fit.diagnostics)

    def test_log_likelihood_monotone(self):
        # step-halving keeps every accepted iterate at least as good
        design, _ = self._synthetic(seed=5, n=300)
        fit = fit_logistic(design)
        assert fit.log_likelihood >= logistic_log_likelihood(
            design.X, design.y, np.zeros(design.X.shape[1]))

    def test_gradient_small_at_optimum(self):
        design, _ = self._synthetic(seed=9)
        fit = fit_logistic(design)
        grad = logistic_gradient(design.X, design.y, fit.beta)
        assert np.linalg.norm(grad) < 1e-6 * design.X.shape[0]

    def test_covariate_shift_moves_only_intercept(self):
        design, _ = self._synthetic(seed=13, n=800)
        fit = fit_logistic(design)
        shifted = design.X.copy()
        shifted[:, 1] += 5.0
        fit2 = fit_logistic(DesignMatrix(design.columns, shifted, design.y))
        assert np.all(np.abs(fit.beta[1:] - fit2.beta[1:]) < 1e-8)
        assert abs((fit.beta[0] - 5.0 * fit.beta[1]) - fit2.beta[0]) < 1e-7

    def test_collinear_column_named(self):
        rng = np.random.default_rng(1)
        n = 200
        x = rng.normal(size=n)
        X = np.column_stack([np.ones(n), x, 2 * x])
        y = (rng.random(n) < 0.5).astype(float)
        with pytest.raises(SingularDesignError, match="collinear"):
            fit_logistic(DesignMatrix(["intercept", "x", "x_twice"], X, y))


class TestNegbin:
    def _synthetic(self, seed=42, n=5000, alpha=0.7):
        rng = np.random.default_rng(seed)
        X = np.column_stack([
            np.ones(n), rng.normal(size=n), rng.binomial(1, 0.4, n).astype(float)])
        beta = np.array([1.2, 0.5, -0.8])
        mu = np.exp(X @ beta)
        lam = rng.gamma(shape=1.0 / alpha, scale=alpha * mu)
        y = rng.poisson(lam).astype(float)
        return DesignMatrix(["intercept", "x1", "x2"], X, y), beta, alpha

    def test_recovers_beta_and_alpha_within_3_se(self):
        design, beta, alpha = self._synthetic()
        fit = fit_negbin(design)
        assert fit.converged
        assert np.all(np.abs(fit.beta - beta) <= 3 * fit.se)
        assert abs(fit.alpha - alpha) <= 3 * fit.alpha_se

    def test_gradient_matches_finite_differences(self):
        design, _, _ = self._synthetic(seed=8, n=800)
        rng = np.random.default_rng(4)
        beta0 = rng.normal(scale=0.2, size=3)
        alpha0 = 0.6
        g_beta, g_alpha = negbin_gradient(design.X, design.y, beta0, alpha0)
        h = 1e-6
        for j in range(3):
            e = np.zeros(3)
            e[j] = h
            numeric = (
                negbin_log_likelihood(design.X, design.y, beta0 + e, alpha0)
                - negbin_log_likelihood(design.X, design.y, beta0 - e, alpha0)
            ) / (2 * h)
            assert abs(g_beta[j] - numeric) / max(1.0, abs(numeric)) < 1e-6
        numeric_alpha = (
            negbin_log_likelihood(design.X, design.y, beta0, alpha0 + h)
            - negbin_log_likelihood(design.X, design.y, beta0, alpha0 - h)
        ) / (2 * h)
        assert abs(g_alpha - numeric_alpha) / max(1.0, abs(numeric_alpha)) < 1e-6

    def test_poisson_limit_matches_poisson_mle(self):
        rng = np.random.default_rng(10)
        n = 4000
        X = np.column_stack([np.ones(n), rng.normal(size=n)])
        beta = np.array([1.0, 0.4])
        y = rng.poisson(np.exp(X @ beta)).astype(float)
        design = DesignMatrix(["intercept", "x1"], X, y)
        nb = fit_negbin(design)
        poisson_beta, _ = fit_poisson_beta(X, y, design.columns)
        assert np.all(np.abs(nb.beta - poisson_beta) < 1e-3)
        assert nb.alpha < 0.01

    def test_all_zero_response_rejected(self):
        rng = np.random.default_rng(2)
        X = np.column_stack([np.ones(50), rng.normal(size=50)])
        with pytest.raises(ValueError, match="zero"):
            fit_negbin(DesignMatrix(["i", "x"], X, np.zeros(50)))

    def test_gradient_small_at_optimum(self):
        design, _, _ = self._synthetic(seed=30, n=3000)
        fit = fit_negbin(design)
        g_beta, g_alpha = negbin_gradient(
            design.X, design.y, fit.beta, fit.alpha)
        assert np.linalg.norm(np.append(g_beta, g_alpha)) < \
            1e-6 * design.X.shape[0]

    def test_variance_model_sane_by_mu_decile(self):
        design, _, _ = self._synthetic(seed=21, n=8000)
        fit = fit_negbin(design)
        mu = np.exp(design.X @ fit.beta)
        predicted_var = mu + fit.alpha * mu ** 2
        order = np.argsort(mu)
        ratios = []
        for chunk in np.array_split(order, 10):
            resid = design.y[chunk] - mu[chunk]
            ratios.append(np.mean(resid ** 2) / np.mean(predicted_var[chunk]))
        assert all(0.7 <= r <= 1.3 for r in ratios), ratios


class TestTransforms:
    def test_rate_ratio_pinned_anchors(self):
        assert rate_ratio_percent(0.47) == 60.0
        assert rate_ratio_percent(0.27) == 31.0
        assert rate_ratio_percent(0.08) == 8.3
        assert rate_ratio_percent(0.14) == 15.0
        assert rate_ratio_percent(0.0) == 0.0

    def test_doubling_odds_pinned_anchors(self):
        assert doubling_odds_percent(0.11) == 108
        assert doubling_odds_percent(0.24) == 118
        assert doubling_odds_percent(0.0) == 100

    def test_strictly_increasing(self):
        grid = [-1.0, -0.5, -0.1, 0.0, 0.1, 0.5, 1.0]
        rr = [math.expm1(b) for b in grid]
        assert rr == sorted(rr)
        do = [2.0 ** b for b in grid]
        assert do == sorted(do)

    def test_stars(self):
        assert significance_stars(0.0005) == "***"
        assert significance_stars(0.005) == "**"
        assert significance_stars(0.04) == "*"
        assert significance_stars(0.2) == ""
