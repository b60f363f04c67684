"""Category prevalence rank matrix.

Countries with enough distinct categories are kept; each contributes its
top-k categories to a shared union, and every country then ranks the union
by its own event counts (rank 1 = most events). Categories a country never
hosted get the sentinel rank ``len(union)``.

Ties in event counts are always broken by category name, ascending.
"""

from __future__ import annotations

import csv
import io
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from ._util import fmt6, zscore
from .errors import ValidationError

Counts = Mapping[str, Mapping[str, int]]


@dataclass(frozen=True)
class RankMatrix:
    countries: tuple[str, ...]
    categories: tuple[str, ...]
    ranks: np.ndarray
    sentinel_rank: int

    def row(self, country: str) -> dict[str, int]:
        i = self.countries.index(country)
        return dict(zip(self.categories, (int(v) for v in self.ranks[i])))

    def to_csv(self) -> str:
        return _matrix_csv(self.countries, self.categories, self.ranks, str)


def _matrix_csv(rows, cols, values, fmt) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["country", *cols])
    for label, vals in zip(rows, values):
        w.writerow([label, *(fmt(v) for v in vals)])
    return buf.getvalue()


def zscores_to_csv(matrix: RankMatrix, z: np.ndarray) -> str:
    return _matrix_csv(matrix.countries, matrix.categories, z, fmt6)


def _by_count(counts: Mapping[str, int]) -> list[str]:
    return sorted((c for c, n in counts.items() if n > 0), key=lambda c: (-counts[c], c))


def select_countries(metrics: Iterable, min_categories: int = 10) -> list[str]:
    """Codes of countries with at least ``min_categories`` categories, by TEC descending.

    Accepts any objects with ``country``, ``tec`` and ``n_cat`` attributes.
    """
    chosen = [m for m in metrics if m.n_cat >= min_categories]
    chosen.sort(key=lambda m: (-m.tec, m.country))
    return [m.country for m in chosen]


def top_k_union(per_country_counts: Counts, k: int = 10) -> list[str]:
    """Union of every country's ``k`` most frequent categories.

    Ordered by total count over all given countries (descending), then name.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    union: set[str] = set()
    totals: Counter = Counter()
    for counts in per_country_counts.values():
        union.update(_by_count(counts)[:k])
        totals.update(counts)
    return sorted(union, key=lambda c: (-totals[c], c))


def build_rank_matrix(
    per_country_counts: Counts,
    union: Sequence[str],
    countries: Sequence[str] | None = None,
) -> RankMatrix:
    """Rank each country's union categories by count; absent ones get the sentinel.

    Rows follow ``countries`` if given, else country code order.
    """
    if not union:
        raise ValueError("category union is empty")
    union = tuple(union)
    countries = tuple(sorted(per_country_counts) if countries is None else countries)
    sentinel = len(union)
    col = {c: j for j, c in enumerate(union)}
    ranks = np.full((len(countries), len(union)), sentinel, dtype=np.int64)
    for i, country in enumerate(countries):
        counts = per_country_counts[country]
        present = _by_count({c: counts.get(c, 0) for c in union})
        for r, c in enumerate(present, start=1):
            ranks[i, col[c]] = r
    return RankMatrix(countries, union, ranks, sentinel)


def zscore_ranks(matrix: RankMatrix, axis: str = "category") -> np.ndarray:
    """Population z-scores per category column (``"category"``) or per country row."""
    if axis == "category":
        return zscore(matrix.ranks, axis=0)
    if axis == "country":
        return zscore(matrix.ranks, axis=1)
    raise ValueError(f"axis must be 'category' or 'country', not {axis!r}")


def rank_matrix_from_tables(tables, metrics, min_categories: int = 10, k: int = 10) -> RankMatrix:
    """Country selection, top-k union and ranking in one step."""
    countries = select_countries(metrics, min_categories)
    counts = {c: tables[c].category_totals() for c in countries}
    if not counts:
        raise ValidationError(f"no country has at least {min_categories} categories")
    return build_rank_matrix(counts, top_k_union(counts, k), countries)
