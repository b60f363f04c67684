"""Correlation and normality statistics over per-country variables."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import warnings
from dataclasses import dataclass, fields
from typing import Iterable, Sequence

import numpy as np

from . import specfun
from ._util import fmt6
from .errors import DegenerateDataError, ValidationError
from .ingest import IndicatorTable

log = logging.getLogger(__name__)

TRANSFORMS = ("identity", "log10")


def _as_float_array(x) -> np.ndarray:
    return np.array([np.nan if v is None else v for v in x], dtype=float)


def significance_stars(p: float | None) -> str:
    if p is None or math.isnan(p):
        return ""
    if p < 0.001:
        return "***"
    if p < 0.01:
        return "**"
    if p < 0.05:
        return "*"
    return ""


# -- Pearson ---------------------------------------------------------------


@dataclass(frozen=True)
class CorrelationResult:
    feature: str
    indicator: str
    n: int
    r: float | None
    p: float | None
    transform_feature: str = "identity"
    transform_indicator: str = "identity"
    error: str | None = None

    @property
    def stars(self) -> str:
        return significance_stars(self.p)


def pearson_p(r: float, n: int) -> float | None:
    """Two-sided p-value of a product-moment correlation under H0: rho = 0."""
    if n < 3:
        return None
    if abs(r) >= 1.0:
        return 0.0
    df = n - 2
    t = r * math.sqrt(df / (1.0 - r * r))
    return specfun.student_t_two_sided(t, df)


def pearson(x, y, feature: str = "x", indicator: str = "y") -> CorrelationResult:
    """Pearson r and its t-test p-value after pairwise deletion of missing values."""
    xa, ya = _as_float_array(x), _as_float_array(y)
    if xa.shape != ya.shape:
        raise ValueError("x and y must have equal length")
    ok = ~(np.isnan(xa) | np.isnan(ya))
    xa, ya = xa[ok], ya[ok]
    n = len(xa)
    if n < 2:
        raise DegenerateDataError(f"{feature} vs {indicator}: fewer than 2 complete pairs")
    dx, dy = xa - xa.mean(), ya - ya.mean()
    sxx, syy = float(dx @ dx), float(dy @ dy)
    if sxx == 0 or syy == 0:
        raise DegenerateDataError(f"{feature} vs {indicator}: zero variance")
    r = float(dx @ dy) / math.sqrt(sxx * syy)
    r = max(-1.0, min(1.0, r))
    return CorrelationResult(feature, indicator, n, r, pearson_p(r, n))


# -- Jarque-Bera and Q-Q ---------------------------------------------------


@dataclass(frozen=True)
class NormalityResult:
    variable: str
    n: int
    skewness: float
    excess_kurtosis: float
    jb_statistic: float
    p: float


def _standardized_moments(x: np.ndarray) -> tuple[float, float]:
    d = x - x.mean()
    m2 = float(np.mean(d**2))
    if m2 == 0:
        raise DegenerateDataError("zero variance")
    skew = float(np.mean(d**3)) / m2**1.5
    kurt = float(np.mean(d**4)) / m2**2 - 3.0
    return skew, kurt


def jarque_bera(x, variable: str = "x") -> NormalityResult:
    """Jarque-Bera test using population moments and the chi-square(2) tail.

    Missing values are dropped. Needs at least 8 observations; warns below 30.
    """
    xa = _as_float_array(x)
    xa = xa[~np.isnan(xa)]
    n = len(xa)
    if n < 8:
        raise ValidationError(f"{variable}: Jarque-Bera needs n >= 8, got {n}")
    if n < 30:
        warnings.warn(f"{variable}: Jarque-Bera is unreliable for n={n} < 30", stacklevel=2)
    s, k = _standardized_moments(xa)
    jb = n / 6.0 * (s * s + k * k / 4.0)
    return NormalityResult(variable, n, s, k, jb, specfun.chi2_sf(jb, 2))


@dataclass(frozen=True)
class QQData:
    variable: str
    theoretical: np.ndarray
    sample: np.ndarray

    @property
    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.theoretical.tolist(), self.sample.tolist()))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["theoretical", "sample"])
        for t, s in zip(self.theoretical, self.sample):
            w.writerow([fmt6(t), fmt6(s)])
        return buf.getvalue()


def qq_points(x, variable: str = "x") -> QQData:
    """Standardized order statistics against normal quantiles at (i - 0.5)/n."""
    xa = _as_float_array(x)
    xa = np.sort(xa[~np.isnan(xa)])
    n = len(xa)
    if n < 2:
        raise ValidationError(f"{variable}: Q-Q data needs n >= 2")
    sd = xa.std()
    if sd == 0:
        raise DegenerateDataError(f"{variable}: zero variance")
    probs = (np.arange(1, n + 1) - 0.5) / n
    theo = np.array([specfun.normal_ppf(p) for p in probs])
    return QQData(variable, theo, (xa - xa.mean()) / sd)


# -- correlation sweeps ----------------------------------------------------


@dataclass(frozen=True)
class CorrelationSpec:
    feature: str
    indicator: str
    transform_feature: str = "identity"
    transform_indicator: str = "identity"

    def __post_init__(self):
        for t in (self.transform_feature, self.transform_indicator):
            if t not in TRANSFORMS:
                raise ValidationError(f"unknown transform {t!r}; use one of {TRANSFORMS}")


def parse_correlation_specs(text: str) -> list[CorrelationSpec]:
    """Read pair specs from JSON (list of objects) or CSV with a header row."""
    stripped = text.lstrip()
    if stripped.startswith("["):
        items = json.loads(text)
    else:
        items = list(csv.DictReader(io.StringIO(text)))
    specs = []
    for item in items:
        try:
            specs.append(
                CorrelationSpec(
                    item["feature"].strip(),
                    item["indicator"].strip(),
                    (item.get("transform_feature") or "identity").strip(),
                    (item.get("transform_indicator") or "identity").strip(),
                )
            )
        except (KeyError, AttributeError):
            raise ValidationError(f"bad correlation spec entry: {item!r}") from None
    return specs


def _metric_features(metrics) -> list[str]:
    if not metrics:
        return []
    return [f.name for f in fields(metrics[0]) if f.name != "country"]


def _transform(values: dict[str, float | None], how: str, label: str) -> dict[str, float | None]:
    if how == "identity":
        return values
    out, dropped = {}, []
    for c, v in values.items():
        if v is not None and v <= 0:
            dropped.append(c)
            v = None
        out[c] = None if v is None else math.log10(v)
    if dropped:
        log.warning("log10(%s): dropped non-positive values for %s", label, ", ".join(sorted(dropped)))
    return out


def correlate_all(
    metrics: Sequence,
    indicators: IndicatorTable,
    specs: Iterable[CorrelationSpec],
) -> list[CorrelationResult]:
    """Pearson correlations for each (feature, indicator) spec, in spec order.

    Countries are matched by code and dropped pairwise when either value is
    missing (or non-positive under a log transform). A degenerate pair is
    recorded with ``error`` set instead of aborting the sweep.
    """
    specs = list(specs)
    features = _metric_features(metrics)
    for s in specs:
        if s.feature not in features:
            raise ValidationError(f"unknown feature {s.feature!r}; valid names: {', '.join(features)}")
        if s.indicator not in indicators.names:
            raise ValidationError(
                f"unknown indicator {s.indicator!r}; valid names: {', '.join(indicators.names)}"
            )

    results = []
    for s in specs:
        fx = _transform({m.country: getattr(m, s.feature) for m in metrics}, s.transform_feature, s.feature)
        iy = _transform(indicators.column(s.indicator), s.transform_indicator, s.indicator)
        countries = [c for c in fx if c in iy]
        x = [fx[c] for c in countries]
        y = [iy[c] for c in countries]
        n = sum(1 for a, b in zip(x, y) if a is not None and b is not None)
        try:
            res = pearson(x, y, s.feature, s.indicator)
            results.append(
                CorrelationResult(s.feature, s.indicator, res.n, res.r, res.p, s.transform_feature, s.transform_indicator)
            )
        except DegenerateDataError as exc:
            results.append(
                CorrelationResult(
                    s.feature, s.indicator, n, None, None, s.transform_feature, s.transform_indicator, str(exc)
                )
            )
    return results


# -- export ----------------------------------------------------------------


def correlations_to_csv(results: Iterable[CorrelationResult]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["feature", "indicator", "n", "r", "p", "stars"])
    for r in results:
        w.writerow([r.feature, r.indicator, r.n, fmt6(r.r), fmt6(r.p), r.stars])
    return buf.getvalue()


def normality_to_csv(results: Iterable[NormalityResult]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["variable", "n", "skewness", "excess_kurtosis", "jb", "p"])
    for r in results:
        w.writerow([r.variable, r.n, fmt6(r.skewness), fmt6(r.excess_kurtosis), fmt6(r.jb_statistic), fmt6(r.p)])
    return buf.getvalue()


def variable_values(table: IndicatorTable, spec: str) -> tuple[str, dict[str, float | None]]:
    """Resolve ``name`` or ``log10:name`` against an indicator table."""
    how, _, name = spec.rpartition(":")
    how = how or "identity"
    if how not in TRANSFORMS:
        raise ValidationError(f"unknown transform {how!r} in {spec!r}")
    values = _transform(table.column(name), how, name)
    return (name if how == "identity" else f"{how}_{name}"), values
