"""Synthetic event corpora with planted dynamics.

Each country gets its own random stream: a Philox (counter-based) generator
keyed by ``SeedSequence([seed, crc32(code)])``. Streams therefore do not
depend on which other countries are in the spec or on their order. Within a
stream the day gaps are drawn first, then the categories.

Gap distributions (in days between consecutive events):

``constant(g)``
    every gap equals ``g``.
``geometric(p)``
    support {1, 2, ...}, mean ``1/p``.
``two_point(a, b, w)``
    ``a`` with probability ``w``, else ``b``.

A gap of 0 puts two events on the same day, where they merge into one
transaction.
"""

from __future__ import annotations

import json
import math
import re
import zlib
from dataclasses import dataclass
from datetime import date, timedelta
from typing import Mapping, Sequence

import numpy as np

from .errors import ValidationError
from .ingest import EventLog, EventRecord

DEFAULT_START = date(2003, 2, 13)


@dataclass(frozen=True)
class GapDistribution:
    kind: str
    params: tuple[float, ...]

    def __post_init__(self):
        k, p = self.kind, self.params
        if k == "constant":
            ok = len(p) == 1 and p[0] >= 0 and float(p[0]).is_integer()
        elif k == "geometric":
            ok = len(p) == 1 and 0 < p[0] <= 1
        elif k == "two_point":
            ok = (
                len(p) == 3
                and all(v >= 0 and float(v).is_integer() for v in p[:2])
                and 0 <= p[2] <= 1
            )
        else:
            raise ValidationError(f"unknown gap distribution {k!r}")
        if not ok:
            raise ValidationError(f"invalid parameters for {k}: {p}")

    @classmethod
    def constant(cls, g: int) -> GapDistribution:
        return cls("constant", (g,))

    @classmethod
    def geometric(cls, p: float) -> GapDistribution:
        return cls("geometric", (p,))

    @classmethod
    def two_point(cls, a: int, b: int, w: float) -> GapDistribution:
        return cls("two_point", (a, b, w))

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.kind == "constant":
            return np.full(size, int(self.params[0]), dtype=np.int64)
        if self.kind == "geometric":
            return rng.geometric(self.params[0], size=size).astype(np.int64)
        a, b, w = self.params
        return np.where(rng.random(size) < w, int(a), int(b)).astype(np.int64)

    def moments(self) -> tuple[float, float]:
        """Mean and standard deviation of a single gap."""
        if self.kind == "constant":
            return float(self.params[0]), 0.0
        if self.kind == "geometric":
            p = self.params[0]
            return 1.0 / p, math.sqrt(1.0 - p) / p
        a, b, w = self.params
        return w * a + (1 - w) * b, abs(b - a) * math.sqrt(w * (1 - w))

    def to_dict(self) -> dict:
        names = {"constant": ("g",), "geometric": ("p",), "two_point": ("a", "b", "w")}[self.kind]
        return {"kind": self.kind, **dict(zip(names, self.params))}

    @classmethod
    def from_dict(cls, d: Mapping) -> GapDistribution:
        kind = d.get("kind")
        try:
            if kind == "constant":
                return cls.constant(d["g"])
            if kind == "geometric":
                return cls.geometric(d["p"])
            if kind == "two_point":
                return cls.two_point(d["a"], d["b"], d["w"])
        except KeyError as exc:
            raise ValidationError(f"gap distribution {kind!r} lacks parameter {exc}") from None
        raise ValidationError(f"unknown gap distribution {kind!r}")


@dataclass(frozen=True)
class CountrySpec:
    code: str
    n_events: int
    gap: GapDistribution
    category_weights: Mapping[str, float]

    def __post_init__(self):
        if not re.fullmatch(r"[A-Z]{2}", self.code):
            raise ValidationError(f"{self.code!r}: country code must be two uppercase letters")
        if self.n_events < 1:
            raise ValidationError(f"{self.code}: n_events must be >= 1")
        w = np.array(list(self.category_weights.values()), dtype=float)
        if len(w) == 0 or (w < 0).any() or abs(math.fsum(w) - 1.0) > 1e-12:
            raise ValidationError(f"{self.code}: category weights must be non-negative and sum to 1")


@dataclass(frozen=True)
class SynthSpec:
    countries: tuple[CountrySpec, ...]
    seed: int = 0
    start_date: date = DEFAULT_START

    @classmethod
    def from_dict(cls, d: Mapping) -> SynthSpec:
        try:
            countries = tuple(
                CountrySpec(c["code"], int(c["n_events"]), GapDistribution.from_dict(c["gap"]), dict(c["category_weights"]))
                for c in d["countries"]
            )
        except KeyError as exc:
            raise ValidationError(f"synth spec lacks field {exc}") from None
        start = date.fromisoformat(d["start_date"]) if "start_date" in d else DEFAULT_START
        return cls(countries, int(d.get("seed", 0)), start)

    @classmethod
    def from_json(cls, text: str) -> SynthSpec:
        return cls.from_dict(json.loads(text))

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "start_date": self.start_date.isoformat(),
            "countries": [
                {
                    "code": c.code,
                    "n_events": c.n_events,
                    "gap": c.gap.to_dict(),
                    "category_weights": dict(c.category_weights),
                }
                for c in self.countries
            ],
        }


def country_rng(seed: int, code: str) -> np.random.Generator:
    ss = np.random.SeedSequence([seed, zlib.crc32(code.encode("utf-8"))])
    return np.random.Generator(np.random.Philox(ss))


def generate_country(spec: CountrySpec, seed: int, start: date = DEFAULT_START) -> list[EventRecord]:
    rng = country_rng(seed, spec.code)
    gaps = spec.gap.sample(rng, spec.n_events - 1)
    offsets = np.concatenate([[0], np.cumsum(gaps)])
    if start.toordinal() + int(offsets[-1]) > date.max.toordinal():
        raise ValidationError(f"{spec.code}: generated span runs past year 9999")
    cats = list(spec.category_weights)
    weights = np.array([spec.category_weights[c] for c in cats], dtype=float)
    picks = rng.choice(len(cats), size=spec.n_events, p=weights / weights.sum())
    base = start.toordinal()
    return [
        EventRecord(date.fromordinal(base + int(off)), spec.code, "", cats[i])
        for off, i in zip(offsets, picks)
    ]


def generate(spec: SynthSpec) -> EventLog:
    """Deterministic event log for ``spec``: countries in spec order, dates ascending."""
    records: list[EventRecord] = []
    for c in spec.countries:
        records.extend(generate_country(c, spec.seed, spec.start_date))
    return EventLog(tuple(records))


def preference_weights(categories: Sequence[str], order: Sequence[int], decay: float = 0.7) -> dict[str, float]:
    """Geometric preference profile: ``categories[order[0]]`` most likely, then decaying."""
    raw = np.array([decay**r for r in range(len(order))])
    raw /= raw.sum()
    weights = {categories[i]: float(v) for i, v in zip(order, raw)}
    # absorb rounding so the weights sum to exactly 1 under fsum
    first = categories[order[0]]
    weights[first] += 1.0 - math.fsum(weights.values())
    return weights
