"""Command-line entry point: ``eventdyn <subcommand> [options]``.

Exit codes: 0 success, 1 I/O failure, 2 validation failure, 3 statistical
degeneracy (for instance a constant variable).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import tempfile
from pathlib import Path

from . import cluster, dynamics, ingest, prevalence, stats, synth
from .errors import DegenerateDataError, ValidationError

log = logging.getLogger("eventdyn")

EXIT_OK, EXIT_IO, EXIT_VALIDATION, EXIT_DEGENERATE = 0, 1, 2, 3
DEFAULT_NORMALITY_VARIABLES = "log10:tec,log10:population,log10:gdp,hdi,msubs,intus"


def _write(path: Path, text: str) -> None:
    """Write-then-rename so readers never see a partial file."""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _json(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


def _output_dir(args) -> Path:
    out = args.output_dir or os.environ.get("EVENTDYN_OUTPUT_DIR") or "."
    return Path(out)


def _read_bytes(path: str) -> bytes:
    with open(path, "rb") as f:
        return f.read()


def _load_events(args) -> ingest.EventLog:
    fmt = args.format or ("jsonl" if args.input.endswith((".jsonl", ".ndjson")) else "csv")
    events = ingest.parse_events(
        _read_bytes(args.input), fmt, strict=args.strict, check_taxonomy=not args.no_taxonomy
    )
    filtered = ingest.filter_countries(events, args.min_events, args.top_n_countries)
    if len(filtered) == 0:
        raise ValidationError("no valid events")
    return filtered


def _pipeline(args):
    events = _load_events(args)
    tables = ingest.build_transactions(events)
    metrics = dynamics.compute_all_metrics(tables)
    return events, tables, metrics


def _rank_matrix(args, tables, metrics):
    rm = prevalence.rank_matrix_from_tables(tables, metrics, args.min_categories, args.top_k)
    return rm, prevalence.zscore_ranks(rm, args.zscore_axis)


def _load_indicators(path: str | None) -> ingest.IndicatorTable:
    if path is None:
        return ingest.load_country_summary()
    return ingest.parse_indicators(_read_bytes(path))


# -- subcommands -----------------------------------------------------------


def cmd_metrics(args) -> int:
    events, _, metrics = _pipeline(args)
    out = _output_dir(args)
    _write(out / "metrics.csv", dynamics.metrics_to_csv(metrics))
    _write(out / "metrics.json", dynamics.metrics_to_json(metrics))
    _write(
        out / "rejections.json",
        _json(
            {
                "n_rejected": events.n_rejected,
                "rejections": [{"line": r.line, "reason": r.reason, "text": r.text} for r in events.rejections],
            }
        ),
    )
    if args.timeline:
        tl = dynamics.cumulative_category_timeline(events, args.timeline)
        _write(out / f"timeline_{args.timeline}.csv", tl.to_csv())
    return EXIT_OK


def cmd_rank_matrix(args) -> int:
    _, tables, metrics = _pipeline(args)
    rm, z = _rank_matrix(args, tables, metrics)
    out = _output_dir(args)
    _write(out / "rank_matrix.csv", rm.to_csv())
    _write(out / "rank_matrix.z.csv", prevalence.zscores_to_csv(rm, z))
    return EXIT_OK


def cmd_cluster(args) -> int:
    _, tables, metrics = _pipeline(args)
    rm, z = _rank_matrix(args, tables, metrics)
    if len(rm.countries) < 2:
        raise ValidationError("need at least 2 eligible countries to cluster")
    dg, assignment = cluster.cluster_countries(z, rm.countries, args.clusters)
    profiles = cluster.cluster_profiles(assignment, z)
    out = _output_dir(args)
    _write(out / "dendrogram.json", _json(dg.to_tree()))
    _write(out / "clusters.csv", assignment.to_csv())
    _write(out / "profiles.csv", cluster.profiles_to_csv(profiles, rm.categories))
    if args.indicators:
        table = _load_indicators(args.indicators)
        names = args.indicator or list(table.names)
        report = {name: cluster.compare_cluster_indicators(assignment, table, name) for name in names}
        _write(out / "cluster_tests.json", _json(report))
    return EXIT_OK


def cmd_correlate(args) -> int:
    if args.metrics:
        with open(args.metrics, encoding="utf-8") as f:
            metrics = dynamics.read_metrics_csv(f.read())
    elif args.input:
        _, _, metrics = _pipeline(args)
    else:
        raise ValidationError("correlate needs --input or --metrics")
    table = _load_indicators(args.indicators)
    with open(args.spec, encoding="utf-8") as f:
        specs = stats.parse_correlation_specs(f.read())
    results = stats.correlate_all(metrics, table, specs)
    for r in results:
        if r.error:
            log.warning("%s vs %s: %s", r.feature, r.indicator, r.error)
    _write(_output_dir(args) / "correlations.csv", stats.correlations_to_csv(results))
    return EXIT_OK


def cmd_normality(args) -> int:
    table = _load_indicators(args.indicators)
    out = _output_dir(args)
    results = []
    for spec in [v.strip() for v in args.variables.split(",") if v.strip()]:
        name, values = stats.variable_values(table, spec)
        xs = list(values.values())
        results.append(stats.jarque_bera(xs, name))
        _write(out / "qq" / f"{name}.csv", stats.qq_points(xs, name).to_csv())
    _write(out / "normality.csv", stats.normality_to_csv(results))
    return EXIT_OK


def cmd_synth(args) -> int:
    with open(args.spec, encoding="utf-8") as f:
        spec = synth.SynthSpec.from_json(f.read())
    if args.seed is not None:
        spec = synth.SynthSpec(spec.countries, args.seed, spec.start_date)
    log_ = synth.generate(spec)
    _write(_output_dir(args) / "events.csv", ingest.events_to_csv(log_))
    return EXIT_OK


# -- argument parsing ------------------------------------------------------


def _add_output(p):
    p.add_argument(
        "--output-dir",
        help="directory for output files (default: $EVENTDYN_OUTPUT_DIR, else the current directory)",
    )


def _add_input(p, required=True):
    p.add_argument("--input", required=required, help="event log (CSV or JSONL)")
    p.add_argument("--format", choices=("csv", "jsonl"), help="input format (default: from file extension)")
    p.add_argument("--min-events", type=int, default=18, help="drop countries with fewer events (default: 18)")
    p.add_argument("--top-n-countries", type=int, default=90, help="keep the N largest countries (default: 90)")
    p.add_argument("--strict", action="store_true", help="abort on the first invalid row; enforce the taxonomy")
    p.add_argument("--no-taxonomy", action="store_true", help="accept category names outside the 33-category taxonomy")


def _add_prevalence(p):
    p.add_argument(
        "--min-categories", type=int, default=10, help="minimum distinct categories per country (default: 10)"
    )
    p.add_argument("--top-k", type=int, default=10, help="top categories per country in the union (default: 10)")
    p.add_argument(
        "--zscore-axis",
        choices=("category", "country"),
        default="category",
        help="standardize ranks per category column or per country row (default: category)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="eventdyn",
        description="Event dynamics, category prevalence and clustering for per-country event logs.",
        epilog="exit codes: 0 success, 1 I/O failure, 2 invalid input, 3 degenerate data",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("metrics", help="per-country event dynamics metrics")
    _add_input(p)
    p.add_argument("--timeline", choices=("country", "continent"), help="also write cumulative category timelines")
    _add_output(p)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("rank-matrix", help="category prevalence rank matrix and its z-scores")
    _add_input(p)
    _add_prevalence(p)
    _add_output(p)
    p.set_defaults(func=cmd_rank_matrix)

    p = sub.add_parser("cluster", help="Ward clustering of countries on z-scored ranks")
    _add_input(p)
    _add_prevalence(p)
    p.add_argument("--clusters", type=int, default=3, help="number of clusters to cut (default: 3)")
    p.add_argument("--indicators", help="indicator CSV; compare clusters with ANOVA and rank-sum tests")
    p.add_argument("--indicator", action="append", help="indicator column to test (repeatable; default: all)")
    _add_output(p)
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("correlate", help="Pearson correlations of metrics against indicators")
    _add_input(p, required=False)
    p.add_argument("--metrics", help="previously written metrics.csv (instead of --input)")
    p.add_argument("--indicators", required=True, help="indicator CSV")
    p.add_argument("--spec", required=True, help="pairs to test: CSV or JSON with feature,indicator[,transforms]")
    _add_output(p)
    p.set_defaults(func=cmd_correlate)

    p = sub.add_parser("normality", help="Jarque-Bera tests and Q-Q data")
    p.add_argument("--indicators", help="indicator CSV (default: the bundled 90-country summary)")
    p.add_argument(
        "--variables",
        default=DEFAULT_NORMALITY_VARIABLES,
        help=f"comma-separated columns, optionally prefixed log10: (default: {DEFAULT_NORMALITY_VARIABLES})",
    )
    _add_output(p)
    p.set_defaults(func=cmd_normality)

    p = sub.add_parser("synth", help="generate a synthetic event log from a JSON spec")
    p.add_argument("--spec", required=True, help="synthetic corpus spec (JSON)")
    p.add_argument("--seed", type=int, help="override the spec's seed")
    _add_output(p)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except DegenerateDataError as exc:
        print(f"eventdyn: degenerate data: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except (ValidationError, json.JSONDecodeError, UnicodeDecodeError) as exc:
        print(f"eventdyn: invalid input: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"eventdyn: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
