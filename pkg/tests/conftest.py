import sys
from contextlib import contextmanager
from datetime import date, timedelta
from pathlib import Path

import numpy as np
import pytest

from eventdyn.ingest import EventRecord, Transaction, TransactionTable

sys.path.insert(0, str(Path(__file__).parent))

CATEGORIES = ["Tech", "Music", "Dancing", "Writing", "Games", "Fitness", "Singles", "Support"]

_criteria: list[tuple[str, bool]] = []


@contextmanager
def criterion(label: str):
    """Record one acceptance criterion as PASS/FAIL for the terminal summary."""
    try:
        yield
    except BaseException:
        _criteria.append((label, False))
        raise
    _criteria.append((label, True))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for label, ok in _criteria:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {label}")


def table_from_days(days, sizes=None, country="XX", start=date(2015, 1, 1)):
    """Transaction table with one transaction on each ``start + day``."""
    sizes = sizes if sizes is not None else [1] * len(days)
    return TransactionTable(
        country,
        tuple(Transaction(start + timedelta(days=int(d)), {"Tech": int(n)}) for d, n in zip(days, sizes)),
    )


def random_records(rng: np.random.Generator, n: int, countries=("AA", "BB", "CC"), span_days=400):
    start = date(2012, 3, 1)
    return [
        EventRecord(
            start + timedelta(days=int(rng.integers(span_days))),
            str(rng.choice(countries)),
            "",
            str(rng.choice(CATEGORIES)),
        )
        for _ in range(n)
    ]


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
