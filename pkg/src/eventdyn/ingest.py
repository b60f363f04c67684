"""Event-log and indicator-table ingestion.

Events arrive as CSV (``date,country,city,category``) or JSONL with the same
keys. Every input row is treated as one distinct event; no deduplication is
attempted.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import re
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from datetime import date
from importlib import resources
from types import MappingProxyType
from typing import IO, Iterable, Iterator, Mapping

from .errors import ValidationError

log = logging.getLogger(__name__)

EVENT_FIELDS = ("date", "country", "city", "category")
MAX_REPORTED_REJECTIONS = 1000

_DATE_RE = re.compile(r"\d{4}-\d{2}-\d{2}")
_COUNTRY_RE = re.compile(r"[A-Z]{2}")
_MISSING_TOKENS = {"", "NA"}


@dataclass(frozen=True)
class EventRecord:
    date: date
    country: str
    city: str
    category: str


@dataclass(frozen=True)
class Rejection:
    line: int
    reason: str
    text: str = ""


@dataclass(frozen=True)
class EventLog:
    """Parsed events in input order plus the rows that failed validation.

    ``rejections`` holds at most ``MAX_REPORTED_REJECTIONS`` entries;
    ``n_rejected`` is always the full count.
    """

    records: tuple[EventRecord, ...]
    rejections: tuple[Rejection, ...] = ()
    n_rejected: int = 0

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[EventRecord]:
        return iter(self.records)

    def country_counts(self) -> Counter:
        return Counter(r.country for r in self.records)


@dataclass(frozen=True)
class TaxonomyEntry:
    category: str
    mid_level: str
    top_level: str


@dataclass(frozen=True)
class CategoryTaxonomy:
    entries: tuple[TaxonomyEntry, ...]

    def __post_init__(self):
        names = [e.category for e in self.entries]
        if len(set(names)) != len(names):
            raise ValidationError("taxonomy has duplicate category names")

    def __contains__(self, category: str) -> bool:
        return category in self.categories

    @property
    def categories(self) -> frozenset[str]:
        return frozenset(e.category for e in self.entries)

    @property
    def mid_levels(self) -> frozenset[str]:
        return frozenset(e.mid_level for e in self.entries)

    @property
    def top_levels(self) -> frozenset[str]:
        return frozenset(e.top_level for e in self.entries)

    def lookup(self, category: str) -> TaxonomyEntry:
        for e in self.entries:
            if e.category == category:
                return e
        raise KeyError(category)


@dataclass(frozen=True)
class Transaction:
    """All events of one country on one calendar day."""

    date: date
    category_counts: Mapping[str, int]
    event_count: int = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        counts = dict(self.category_counts)
        if not counts:
            raise ValueError("transaction needs at least one category")
        if min(counts.values()) < 1:
            raise ValueError("category counts must be positive")
        object.__setattr__(self, "category_counts", MappingProxyType(counts))
        object.__setattr__(self, "event_count", sum(counts.values()))

    @property
    def category_set(self) -> frozenset[str]:
        return frozenset(self.category_counts)


@dataclass(frozen=True)
class TransactionTable:
    country: str
    transactions: tuple[Transaction, ...]

    def __post_init__(self):
        ts = self.transactions
        for a, b in zip(ts, ts[1:]):
            if not a.date < b.date:
                raise ValueError(f"{self.country}: transaction dates must be strictly increasing")

    def __len__(self) -> int:
        return len(self.transactions)

    def __iter__(self) -> Iterator[Transaction]:
        return iter(self.transactions)

    @property
    def tec(self) -> int:
        return sum(t.event_count for t in self.transactions)

    def category_totals(self) -> dict[str, int]:
        totals: dict[str, int] = {}
        for t in self.transactions:
            for c, n in t.category_counts.items():
                totals[c] = totals.get(c, 0) + n
        return totals


@dataclass(frozen=True)
class IndicatorTable:
    """Per-country external indicators; ``None`` marks a missing value."""

    names: tuple[str, ...]
    rows: Mapping[str, Mapping[str, float | None]] = field(default_factory=dict)

    @property
    def countries(self) -> list[str]:
        return list(self.rows)

    def get(self, country: str, name: str) -> float | None:
        row = self.rows.get(country)
        if row is None:
            return None
        return row.get(name)

    def column(self, name: str) -> dict[str, float | None]:
        if name not in self.names:
            raise ValidationError(
                f"unknown indicator {name!r}; valid names: {', '.join(self.names)}"
            )
        return {c: row.get(name) for c, row in self.rows.items()}


# -- parsing ---------------------------------------------------------------


def _text_stream(source) -> IO[str]:
    if isinstance(source, (bytes, bytearray)):
        return io.StringIO(bytes(source).decode("utf-8-sig"))
    if isinstance(source, str):
        return io.StringIO(source)
    if isinstance(source, io.TextIOBase):
        return source
    return io.TextIOWrapper(source, encoding="utf-8-sig", newline="")


def _validate(raw: Mapping[str, object], taxonomy: CategoryTaxonomy | None) -> EventRecord | str:
    """Return a record, or a rejection reason string."""
    d = str(raw.get("date") or "").strip()
    if not _DATE_RE.fullmatch(d):
        return "invalid date"
    try:
        day = date.fromisoformat(d)
    except ValueError:
        return "invalid date"
    country = str(raw.get("country") or "").strip()
    if not _COUNTRY_RE.fullmatch(country):
        return "invalid country"
    category = raw.get("category")
    if not isinstance(category, str) or not category:
        return "missing category"
    if taxonomy is not None and category not in taxonomy:
        return f"unknown category {category!r}"
    city = raw.get("city")
    return EventRecord(day, country, "" if city is None else str(city), category)


def _csv_rows(stream: IO[str]) -> Iterator[tuple[int, Mapping[str, object] | None, str]]:
    reader = csv.reader(stream)
    header = next(reader, None)
    if header is None:
        return
    header = [h.strip() for h in header]
    missing = [f for f in EVENT_FIELDS if f not in header]
    if missing:
        raise ValidationError(f"CSV header lacks column(s): {', '.join(missing)}")
    width = len(header)
    for row in reader:
        if not row:
            continue
        text = ",".join(row)
        if len(row) != width:
            yield reader.line_num, None, text
            continue
        yield reader.line_num, dict(zip(header, row)), text


def _jsonl_rows(stream: IO[str]) -> Iterator[tuple[int, Mapping[str, object] | None, str]]:
    for lineno, line in enumerate(stream, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError:
            yield lineno, None, line
            continue
        yield lineno, obj if isinstance(obj, dict) else None, line


def parse_events(
    source,
    format: str = "csv",
    strict: bool = False,
    taxonomy: CategoryTaxonomy | None = None,
    check_taxonomy: bool = True,
) -> EventLog:
    """Parse an event log from a byte/text stream, bytes or a string.

    Malformed rows are collected as rejections. With ``strict=True`` the
    first rejection raises :class:`ValidationError`, and categories must
    also belong to the taxonomy (the bundled one unless ``taxonomy`` is
    given) unless ``check_taxonomy`` is false.
    """
    if format not in ("csv", "jsonl"):
        raise ValueError(f"unsupported format {format!r}")
    tax = None
    if strict and check_taxonomy:
        tax = taxonomy if taxonomy is not None else load_taxonomy()
    stream = _text_stream(source)
    rows = _csv_rows(stream) if format == "csv" else _jsonl_rows(stream)

    records: list[EventRecord] = []
    rejections: list[Rejection] = []
    n_rejected = 0
    for lineno, raw, text in rows:
        result = "malformed row" if raw is None else _validate(raw, tax)
        if isinstance(result, EventRecord):
            records.append(result)
            continue
        if strict:
            raise ValidationError(f"line {lineno}: {result}")
        n_rejected += 1
        if len(rejections) < MAX_REPORTED_REJECTIONS:
            rejections.append(Rejection(lineno, result, text))
    if n_rejected:
        log.warning("rejected %d input line(s)", n_rejected)
    return EventLog(tuple(records), tuple(rejections), n_rejected)


def write_events_csv(records: Iterable[EventRecord], stream: IO[str]) -> None:
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(EVENT_FIELDS)
    for r in records:
        w.writerow((r.date.isoformat(), r.country, r.city, r.category))


def events_to_csv(records: Iterable[EventRecord]) -> str:
    buf = io.StringIO()
    write_events_csv(records, buf)
    return buf.getvalue()


def filter_countries(log: EventLog, min_events: int = 18, top_n: int = 90) -> EventLog:
    """Drop countries with fewer than ``min_events`` events, then keep the
    ``top_n`` largest by event count (ties broken by country code)."""
    if min_events < 1 or top_n < 1:
        raise ValueError("min_events and top_n must be >= 1")
    counts = log.country_counts()
    eligible = sorted(
        (c for c, n in counts.items() if n >= min_events),
        key=lambda c: (-counts[c], c),
    )
    keep = set(eligible[:top_n])
    records = tuple(r for r in log.records if r.country in keep)
    return EventLog(records, log.rejections, log.n_rejected)


def build_transactions(log: EventLog | Iterable[EventRecord]) -> dict[str, TransactionTable]:
    """Group events into one transaction per (country, day)."""
    counts = Counter((r.country, r.date, r.category) for r in log)
    by_day: dict[str, dict[date, dict[str, int]]] = defaultdict(lambda: defaultdict(dict))
    for (country, d, category), n in counts.items():
        by_day[country][d][category] = n
    tables = {}
    for country in sorted(by_day):
        days = by_day[country]
        tables[country] = TransactionTable(
            country, tuple(Transaction(d, days[d]) for d in sorted(days))
        )
    return tables


def _parse_cell(cell: str, lineno: int, column: str) -> float | None:
    cell = cell.strip()
    if cell in _MISSING_TOKENS:
        return None
    try:
        value = float(cell)
    except ValueError:
        value = math.nan
    if not math.isfinite(value):
        raise ValidationError(f"line {lineno}, column {column!r}: non-numeric value {cell!r}")
    return value


def parse_indicators(source) -> IndicatorTable:
    """Parse ``country,<indicator>...`` CSV. Empty cells and ``NA`` are missing."""
    reader = csv.reader(_text_stream(source))
    header = next(reader, None)
    if not header or header[0].strip() != "country":
        raise ValidationError("indicator CSV must start with a 'country' column")
    names = tuple(h.strip() for h in header[1:])
    if len(set(names)) != len(names):
        raise ValidationError("duplicate indicator column names")
    rows: dict[str, dict[str, float | None]] = {}
    for row in reader:
        if not row or not any(c.strip() for c in row):
            continue
        lineno = reader.line_num
        if len(row) != len(header):
            raise ValidationError(f"line {lineno}: expected {len(header)} cells, got {len(row)}")
        country = row[0].strip()
        if country in rows:
            raise ValidationError(f"line {lineno}: duplicate country {country!r}")
        rows[country] = {n: _parse_cell(c, lineno, n) for n, c in zip(names, row[1:])}
    return IndicatorTable(names, rows)


# -- bundled reference data ------------------------------------------------


def _data_text(name: str) -> str:
    return resources.files("eventdyn").joinpath("data", name).read_text(encoding="utf-8")


def load_taxonomy() -> CategoryTaxonomy:
    """The 33-category taxonomy with its mid- and top-level groups."""
    rows = csv.DictReader(io.StringIO(_data_text("taxonomy.csv")))
    return CategoryTaxonomy(tuple(TaxonomyEntry(r["category"], r["mid_level"], r["top_level"]) for r in rows))


def load_country_summary() -> IndicatorTable:
    """Per-country summary of the 90-country reference corpus.

    Columns: lat, lon, n_city, tec, n_cat, n_trans, population (thousands),
    gdp (per capita, USD), hdi, msubs, intus.
    """
    return parse_indicators(_data_text("country_summary.csv"))


def load_countries() -> dict[str, dict[str, str]]:
    """Country code -> ``{"name", "continent"}`` for the reference corpus."""
    rows = csv.DictReader(io.StringIO(_data_text("countries.csv")))
    return {r["country"]: {"name": r["name"], "continent": r["continent"]} for r in rows}
