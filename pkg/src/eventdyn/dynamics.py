"""Per-country event-dynamics metrics.

Every metric is a pure function of a :class:`~eventdyn.ingest.TransactionTable`.
Metrics that need at least two windows or two inter-event gaps come back as
``None`` rather than raising, so downstream correlation code can drop them
pairwise.

All standard deviations are population (``ddof=0``) deviations.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from collections import Counter, defaultdict
from dataclasses import asdict, dataclass, fields, replace
from datetime import date, timedelta
from typing import Iterable, Mapping, Sequence

import numpy as np

from ._util import fmt6, zscore
from .errors import ValidationError
from .ingest import EventRecord, TransactionTable, load_countries

log = logging.getLogger(__name__)

METRIC_COLUMNS = (
    "country", "tec", "log_tec", "n_trans", "log_n_trans", "mu_trans", "sigma_trans", "cov",
    "mu_w", "mu_m", "mu_q", "cov_w", "cov_m", "cov_q", "p_m", "p_q", "beta", "n_cat", "d_cat",
)  # fmt: skip
_INT_COLUMNS = {"tec", "n_trans", "n_cat"}


@dataclass(frozen=True)
class OverallStats:
    tec: int
    n_trans: int
    mu_trans: float
    sigma_trans: float
    cov: float


@dataclass(frozen=True)
class TemporalProfile:
    """Weekly / monthly / quarterly aggregates of one country's events.

    ``month_week_buckets`` has one row per calendar month in the active span
    (days 1-7, 8-14, 15-21, 22-end); ``quarter_month_buckets`` one row per
    calendar quarter (its three months). Empty windows are kept as zero rows.
    """

    day_of_week_totals: tuple[int, ...]
    months: tuple[str, ...]
    month_week_buckets: np.ndarray
    quarters: tuple[str, ...]
    quarter_month_buckets: np.ndarray
    mu_w: float
    mu_m: float
    mu_q: float
    cov_w: float
    cov_m: float
    cov_q: float
    p_m: float | None = None
    p_q: float | None = None
    beta: float | None = None


@dataclass(frozen=True)
class CategoryProfile:
    n_cat: int
    category_counts: Mapping[str, int]
    d_cat: float


@dataclass(frozen=True)
class CountryMetrics:
    country: str
    tec: int
    log_tec: float
    n_trans: int
    log_n_trans: float
    mu_trans: float
    sigma_trans: float
    cov: float
    mu_w: float
    mu_m: float
    mu_q: float
    cov_w: float
    cov_m: float
    cov_q: float
    p_m: float | None
    p_q: float | None
    beta: float | None
    n_cat: int
    d_cat: float

    def as_dict(self) -> dict:
        return asdict(self)


def _cov(x: np.ndarray) -> float:
    mean = x.mean()
    return float(x.std() / mean) if mean > 0 else 0.0


def overall_stats(table: TransactionTable) -> OverallStats:
    if len(table) == 0:
        raise ValidationError("no transactions")
    sizes = np.array([t.event_count for t in table], dtype=float)
    mu = float(sizes.mean())
    sigma = float(sizes.std())
    return OverallStats(int(sizes.sum()), len(sizes), mu, sigma, sigma / mu)


def _week_bucket(day: int) -> int:
    return min((day - 1) // 7, 3)


def _month_index(d: date) -> int:
    return d.year * 12 + d.month - 1


def temporal_windows(table: TransactionTable) -> TemporalProfile:
    """Aggregate a table into day-of-week, month and quarter windows.

    ``mu_*`` are mean events per ISO week / calendar month / calendar quarter
    intersecting the span from first to last transaction; ``cov_*`` the
    coefficient of variation of the per-window totals over the same windows.
    Persistence and burstiness are left unset; see :func:`temporal_profile`.
    """
    if len(table) == 0:
        raise ValidationError("no transactions")
    first, last = table.transactions[0].date, table.transactions[-1].date

    m0, m1 = _month_index(first), _month_index(last)
    q0, q1 = m0 // 3, m1 // 3
    w0 = first - timedelta(days=first.weekday())
    n_weeks = (last - timedelta(days=last.weekday()) - w0).days // 7 + 1

    dow = np.zeros(7, dtype=np.int64)
    weekly = np.zeros(n_weeks, dtype=np.int64)
    month_weeks = np.zeros((m1 - m0 + 1, 4), dtype=np.int64)
    quarter_months = np.zeros((q1 - q0 + 1, 3), dtype=np.int64)
    for t in table:
        n = t.event_count
        d = t.date
        dow[d.weekday()] += n
        weekly[(d - w0).days // 7] += n
        mi = _month_index(d)
        month_weeks[mi - m0, _week_bucket(d.day)] += n
        quarter_months[mi // 3 - q0, mi % 3] += n

    tec = int(dow.sum())
    monthly = month_weeks.sum(axis=1)
    quarterly = quarter_months.sum(axis=1)
    months = tuple(f"{m // 12:04d}-{m % 12 + 1:02d}" for m in range(m0, m1 + 1))
    quarters = tuple(f"{q // 4:04d}-Q{q % 4 + 1}" for q in range(q0, q1 + 1))
    return TemporalProfile(
        day_of_week_totals=tuple(int(v) for v in dow),
        months=months,
        month_week_buckets=month_weeks,
        quarters=quarters,
        quarter_month_buckets=quarter_months,
        mu_w=tec / n_weeks,
        mu_m=tec / len(months),
        mu_q=tec / len(quarters),
        cov_w=_cov(weekly.astype(float)),
        cov_m=_cov(monthly.astype(float)),
        cov_q=_cov(quarterly.astype(float)),
    )


def persistence(buckets: Sequence[Sequence[float]]) -> float | None:
    """Mean cosine similarity of adjacent within-period share vectors.

    Pairs touching an all-zero vector are skipped. Returns ``None`` with
    fewer than two vectors or no usable pair.
    """
    z = np.asarray(buckets, dtype=float)
    if z.ndim != 2 or len(z) < 2:
        return None
    if (z < 0).any():
        raise ValueError("bucket counts must be non-negative")
    totals = z.sum(axis=1)
    active = totals > 0
    shares = np.zeros_like(z)
    shares[active] = z[active] / totals[active, None]
    norms = np.linalg.norm(shares, axis=1)
    sims = [
        float(shares[i] @ shares[i + 1]) / (norms[i] * norms[i + 1])
        for i in range(len(z) - 1)
        if active[i] and active[i + 1]
    ]
    if not sims:
        return None
    return min(1.0, max(0.0, math.fsum(sims) / len(sims)))


def inter_event_days(table: TransactionTable) -> np.ndarray:
    ordinals = np.array([t.date.toordinal() for t in table], dtype=np.int64)
    return np.diff(ordinals)


def burstiness_from_gaps(gaps: Sequence[float]) -> float | None:
    """(sigma - tau) / (sigma + tau) for gap mean tau and population std sigma."""
    g = np.asarray(gaps, dtype=float)
    if len(g) < 2:
        return None
    tau = g.mean()
    sigma = g.std()
    if tau + sigma <= 0:
        return None
    return float((sigma - tau) / (sigma + tau))


def burstiness(table: TransactionTable) -> float | None:
    """Burstiness of the day gaps between consecutive transactions.

    -1 for perfectly periodic activity, about 0 for memoryless gaps, towards
    1 for heavy-tailed bursts. ``None`` with fewer than three transactions.
    """
    return burstiness_from_gaps(inter_event_days(table))


def category_diversity(counts: Mapping[str, int] | Sequence[int]) -> float:
    """Shannon entropy of category counts divided by log(number of categories).

    A single category scores 0.
    """
    values = np.asarray(list(counts.values()) if isinstance(counts, Mapping) else counts, dtype=float)
    values = values[values > 0]
    if len(values) == 0:
        raise ValidationError("empty category counts")
    if len(values) == 1:
        return 0.0
    p = values / values.sum()
    h = -float(np.sum(p * np.log(p)))
    return min(1.0, max(0.0, h / math.log(len(values))))


def category_profile(table: TransactionTable) -> CategoryProfile:
    counts = table.category_totals()
    return CategoryProfile(len(counts), counts, category_diversity(counts))


def temporal_profile(table: TransactionTable) -> TemporalProfile:
    tp = temporal_windows(table)
    return replace(
        tp,
        p_m=persistence(tp.month_week_buckets),
        p_q=persistence(tp.quarter_month_buckets),
        beta=burstiness(table),
    )


def compute_country_metrics(table: TransactionTable) -> CountryMetrics:
    ov = overall_stats(table)
    tp = temporal_profile(table)
    cp = category_profile(table)
    return CountryMetrics(
        country=table.country,
        tec=ov.tec,
        log_tec=math.log10(ov.tec),
        n_trans=ov.n_trans,
        log_n_trans=math.log10(ov.n_trans),
        mu_trans=ov.mu_trans,
        sigma_trans=ov.sigma_trans,
        cov=ov.cov,
        mu_w=tp.mu_w,
        mu_m=tp.mu_m,
        mu_q=tp.mu_q,
        cov_w=tp.cov_w,
        cov_m=tp.cov_m,
        cov_q=tp.cov_q,
        p_m=tp.p_m,
        p_q=tp.p_q,
        beta=tp.beta,
        n_cat=cp.n_cat,
        d_cat=cp.d_cat,
    )


def compute_all_metrics(tables: Mapping[str, TransactionTable]) -> list[CountryMetrics]:
    """Metrics for every table, ordered by country code."""
    return [compute_country_metrics(tables[c]) for c in sorted(tables)]


# -- export ----------------------------------------------------------------


def metrics_to_csv(metrics: Iterable[CountryMetrics]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(METRIC_COLUMNS)
    for m in metrics:
        w.writerow([m.country] + [fmt6(getattr(m, c)) for c in METRIC_COLUMNS[1:]])
    return buf.getvalue()


def metrics_to_json(metrics: Iterable[CountryMetrics]) -> str:
    return json.dumps([m.as_dict() for m in metrics], indent=2) + "\n"


def read_metrics_csv(source: str) -> list[CountryMetrics]:
    """Inverse of :func:`metrics_to_csv` (values at the written precision)."""
    reader = csv.DictReader(io.StringIO(source))
    if tuple(reader.fieldnames or ()) != METRIC_COLUMNS:
        raise ValidationError("metrics CSV does not have the expected columns")
    out = []
    for row in reader:
        kw = {}
        for f in fields(CountryMetrics):
            cell = row[f.name]
            if f.name == "country":
                kw[f.name] = cell
            elif cell == "":
                kw[f.name] = None
            else:
                kw[f.name] = int(cell) if f.name in _INT_COLUMNS else float(cell)
        out.append(CountryMetrics(**kw))
    return out


# -- cumulative category timelines -----------------------------------------


@dataclass(frozen=True)
class CategoryTimeline:
    """Monthly cumulative event counts per (group, category).

    ``cumulative`` and ``zscores`` share the ``months`` axis, which spans the
    whole log so series from different groups line up.
    """

    months: tuple[str, ...]
    cumulative: Mapping[tuple[str, str], np.ndarray]
    zscores: Mapping[tuple[str, str], np.ndarray]
    excluded_countries: tuple[str, ...] = ()

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["group", "category", "month", "cumulative", "zscore"])
        for key in sorted(self.cumulative):
            cum, z = self.cumulative[key], self.zscores[key]
            for i, month in enumerate(self.months):
                w.writerow([key[0], key[1], month, int(cum[i]), fmt6(z[i])])
        return buf.getvalue()


def cumulative_category_timeline(
    records: Iterable[EventRecord],
    grouping: str = "country",
    continents: Mapping[str, str] | None = None,
) -> CategoryTimeline:
    """Cumulative monthly counts per group and category, with per-series z-scores.

    ``grouping`` is ``"country"`` or ``"continent"``; the latter uses
    ``continents`` (code -> continent), defaulting to the bundled map.
    Countries missing from the map are excluded and reported.
    """
    if grouping not in ("country", "continent"):
        raise ValueError(f"unknown grouping {grouping!r}")
    if grouping == "continent" and continents is None:
        continents = {c: v["continent"] for c, v in load_countries().items()}

    monthly: dict[tuple[str, str], Counter] = defaultdict(Counter)
    excluded: set[str] = set()
    lo = hi = None
    for r in records:
        if grouping == "country":
            group = r.country
        elif r.country in continents:
            group = continents[r.country]
        else:
            excluded.add(r.country)
            continue
        mi = _month_index(r.date)
        lo = mi if lo is None else min(lo, mi)
        hi = mi if hi is None else max(hi, mi)
        monthly[(group, r.category)][mi] += 1
    if excluded:
        log.warning("no continent for %s; excluded", ", ".join(sorted(excluded)))
    if lo is None:
        raise ValidationError("no events to build a timeline from")

    months = tuple(f"{m // 12:04d}-{m % 12 + 1:02d}" for m in range(lo, hi + 1))
    cumulative, zs = {}, {}
    for key, counts in monthly.items():
        per_month = np.array([counts.get(m, 0) for m in range(lo, hi + 1)], dtype=np.int64)
        cum = np.cumsum(per_month)
        cumulative[key] = cum
        zs[key] = zscore(cum)
    return CategoryTimeline(months, cumulative, zs, tuple(sorted(excluded)))
