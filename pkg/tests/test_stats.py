import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from eventdyn import specfun
from eventdyn.dynamics import CountryMetrics
from eventdyn.errors import DegenerateDataError, ValidationError
from eventdyn.ingest import IndicatorTable, load_country_summary
from eventdyn.stats import (
    CorrelationSpec,
    correlate_all,
    correlations_to_csv,
    jarque_bera,
    parse_correlation_specs,
    pearson,
    pearson_p,
    qq_points,
    significance_stars,
)

TEMPLATE = CountryMetrics(
    "XX", 100, 2.0, 10, 1.0, 10.0, 1.0, 0.1, 1.0, 4.0, 12.0, 0.5, 0.4, 0.3, 0.9, 0.8, -0.2, 5, 0.7
)


def fake_metrics(values: dict[str, dict]):
    return [dataclasses.replace(TEMPLATE, country=c, **kw) for c, kw in values.items()]


class TestSpecialFunctions:
    @pytest.mark.parametrize("a, b, x", [(0.5, 0.5, 0.3), (2, 3, 0.4), (4, 0.5, 0.9), (10, 0.5, 0.5), (1.5, 7, 0.05)])
    def test_betainc(self, a, b, x):
        assert specfun.betainc(a, b, x) == pytest.approx(oracles.betainc_quad(a, b, x), abs=1e-9)

    @pytest.mark.parametrize("t, df", [(0.5, 3), (2.306, 8), (-1.7, 20), (4.0, 88)])
    def test_student_t(self, t, df):
        assert specfun.student_t_two_sided(t, df) == pytest.approx(oracles.t_two_sided_quad(t, df), abs=1e-9)

    @pytest.mark.parametrize("x, df", [(0.5, 2), (5.99, 2), (12.8, 2), (3.0, 5)])
    def test_chi2(self, x, df):
        assert specfun.chi2_sf(x, df) == pytest.approx(oracles.chi2_sf_quad(x, df), abs=1e-9)

    def test_chi2_two_df_closed_form(self):
        for x in (0.1, 1.75, 12.8):
            assert specfun.chi2_sf(x, 2) == pytest.approx(math.exp(-x / 2), abs=1e-14)

    @pytest.mark.parametrize("p", [0.001, 0.05, 0.25, 0.5, 0.8, 0.975])
    def test_normal_ppf(self, p):
        assert specfun.normal_ppf(p) == pytest.approx(oracles.normal_ppf_bisect(p), abs=1e-9)

    @pytest.mark.parametrize("f, d1, d2", [(1.0, 2, 10), (3.5, 3, 40)])
    def test_f_sf(self, f, d1, d2):
        # F tail as a beta integral, computed by quadrature
        x = d2 / (d2 + d1 * f)
        assert specfun.f_sf(f, d1, d2) == pytest.approx(oracles.betainc_quad(d2 / 2, d1 / 2, x), abs=1e-9)


class TestPearson:
    def test_perfect_line(self):
        x = np.arange(10.0)
        res = pearson(x, 2 * x + 1)
        assert res.r == pytest.approx(1.0) and res.p < 1e-12

    def test_negation(self):
        x = np.arange(10.0)
        assert pearson(x, -x).r == pytest.approx(-1.0)

    def test_critical_value(self):
        assert pearson_p(0.6319, 10) == pytest.approx(0.0500, abs=5e-4)
        t = 0.6319 * math.sqrt(8 / (1 - 0.6319**2))
        assert pearson_p(0.6319, 10) == pytest.approx(oracles.t_two_sided_quad(t, 8), abs=1e-9)

    def test_constant(self):
        with pytest.raises(DegenerateDataError, match="zero variance"):
            pearson([1, 1, 1, 1], [1, 2, 3, 4])

    def test_small_n(self):
        assert pearson([1, 2], [3, 5]).p is None

    def test_pairwise_deletion(self):
        res = pearson([1, 2, None, 4, 5], [2, 4, 6, None, 10.5])
        assert res.n == 3

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 10_000), st.floats(0.1, 10), st.floats(-50, 50))
    def test_affine_invariance_and_symmetry(self, seed, scale, shift):
        rng = np.random.default_rng(seed)
        x, y = rng.normal(size=20), rng.normal(size=20)
        base = pearson(x, y)
        assert pearson(scale * x + shift, y).r == pytest.approx(base.r, abs=1e-12)
        assert pearson(-x, y).r == pytest.approx(-base.r, abs=1e-12)
        assert pearson(y, x).p == pytest.approx(base.p, abs=1e-12)

    def test_p_monotone_in_r(self):
        for n in (5, 30, 90):
            ps = [pearson_p(r, n) for r in np.linspace(0, 0.99, 100)]
            assert all(a > b for a, b in zip(ps, ps[1:]))


class TestJarqueBera:
    def test_normal_quantile_grid(self):
        x = [specfun.normal_ppf((i - 0.5) / 100) for i in range(1, 101)]
        res = jarque_bera(x)
        assert abs(res.skewness) < 1e-12
        assert -0.2 < res.excess_kurtosis < 0
        assert res.jb_statistic < 0.2
        assert res.p > 0.9

    def test_formula(self):
        x = np.random.default_rng(0).gamma(2.0, size=200)
        d = x - x.mean()
        m2 = np.mean(d**2)
        s = np.mean(d**3) / m2**1.5
        k = np.mean(d**4) / m2**2 - 3
        res = jarque_bera(x)
        assert res.jb_statistic == pytest.approx(200 / 6 * (s**2 + k**2 / 4), rel=1e-12)
        assert res.p == pytest.approx(math.exp(-res.jb_statistic / 2), rel=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 10_000), st.floats(0.01, 100), st.floats(-100, 100))
    def test_affine_invariance(self, seed, scale, shift):
        x = np.random.default_rng(seed).lognormal(size=50)
        a, b = jarque_bera(x), jarque_bera(scale * x + shift)
        assert b.jb_statistic == pytest.approx(a.jb_statistic, rel=1e-8)
        assert b.p == pytest.approx(a.p, abs=1e-10)

    def test_log_base_immaterial(self):
        tec = [load_country_summary().get(c, "tec") for c in load_country_summary().countries]
        assert jarque_bera(np.log10(tec)).p == pytest.approx(jarque_bera(np.log(tec)).p, abs=1e-12)

    def test_guards(self):
        with pytest.raises(ValidationError):
            jarque_bera([1, 2, 3])
        with pytest.raises(DegenerateDataError):
            jarque_bera([2.0] * 40)
        with pytest.warns(UserWarning, match="unreliable"):
            jarque_bera(np.arange(10.0))


class TestQQ:
    def test_fixed_point(self):
        n = 50
        x = np.array([specfun.normal_ppf((i - 0.5) / n) for i in range(1, n + 1)])
        x = (x - x.mean()) / x.std()
        qq = qq_points(x)
        np.testing.assert_allclose(qq.sample, qq.theoretical / qq.theoretical.std(), atol=1e-9)

    def test_exact_quantiles_lie_on_identity(self):
        n = 40
        q = np.array([specfun.normal_ppf((i - 0.5) / n) for i in range(1, n + 1)])
        # any affine copy standardizes back onto the same points
        qq = qq_points(3 * q + 7)
        np.testing.assert_allclose(qq.sample, (q - q.mean()) / q.std(), atol=1e-9)

    def test_two_points(self):
        qq = qq_points([0, 1])
        np.testing.assert_allclose(qq.theoretical, [oracles.normal_ppf_bisect(0.25), oracles.normal_ppf_bisect(0.75)], atol=1e-9)
        np.testing.assert_allclose(qq.theoretical, [-0.6745, 0.6745], atol=1e-4)
        np.testing.assert_allclose(qq.sample, [-1, 1])

    def test_sorted(self):
        qq = qq_points(np.random.default_rng(2).normal(size=30))
        assert np.all(np.diff(qq.sample) >= 0) and np.all(np.diff(qq.theoretical) > 0)
        assert len(qq.points) == 30

    def test_constant(self):
        with pytest.raises(DegenerateDataError):
            qq_points([1, 1, 1])


class TestCorrelateAll:
    def setup_method(self):
        rng = np.random.default_rng(1)
        self.codes = [f"C{i:02d}" for i in range(90)]
        self.metrics = fake_metrics({c: {"beta": float(rng.normal()), "d_cat": 0.5} for c in self.codes})
        rows = {c: {"gdp": float(rng.lognormal(9, 1)), "spi": float(rng.normal())} for c in self.codes}
        for c in self.codes[:7]:
            rows[c]["spi"] = None
        self.table = IndicatorTable(("gdp", "spi"), rows)

    def test_pairwise_n(self):
        (res,) = correlate_all(self.metrics, self.table, [CorrelationSpec("beta", "spi")])
        assert res.n == 83

    def test_constant_feature_recorded(self):
        out = correlate_all(
            self.metrics, self.table, [CorrelationSpec("d_cat", "gdp"), CorrelationSpec("beta", "gdp", "identity", "log10")]
        )
        assert out[0].error and out[0].r is None
        assert out[1].error is None and out[1].n == 90

    def test_log_of_non_positive_dropped(self, caplog):
        ms = fake_metrics({c: {"beta": v} for c, v in zip(self.codes[:5], [-0.5, 0.2, 0.4, 0.1, 0.3])})
        (res,) = correlate_all(ms, self.table, [CorrelationSpec("beta", "gdp", "log10", "identity")])
        assert res.n == 4
        assert "non-positive" in caplog.text

    def test_unknown_names(self):
        with pytest.raises(ValidationError, match="valid names"):
            correlate_all(self.metrics, self.table, [CorrelationSpec("nope", "gdp")])
        with pytest.raises(ValidationError, match="valid names"):
            correlate_all(self.metrics, self.table, [CorrelationSpec("beta", "nope")])

    def test_spec_parsing_and_csv(self):
        specs = parse_correlation_specs("feature,indicator,transform_feature,transform_indicator\nbeta,gdp,,log10\n")
        assert specs == [CorrelationSpec("beta", "gdp", "identity", "log10")]
        assert parse_correlation_specs('[{"feature": "beta", "indicator": "spi"}]') == [CorrelationSpec("beta", "spi")]
        text = correlations_to_csv(correlate_all(self.metrics, self.table, specs))
        assert text.splitlines()[0] == "feature,indicator,n,r,p,stars"

    @pytest.mark.parametrize("p, stars", [(0.0005, "***"), (0.005, "**"), (0.03, "*"), (0.05, ""), (None, "")])
    def test_stars(self, p, stars):
        assert significance_stars(p) == stars
