"""Batch command-line front end.

Subcommands: ``compute`` (annual emissions), ``project`` (partial-year
growth nowcast), ``uncertainty`` (Monte Carlo band and contributions),
``compare`` (scenario spread), ``report`` (growth/intensity/driver tables
from prior outputs).

Every flag can also be set through a ``CARBONLEDGER_<FLAG>`` environment
variable; explicit flags win. Outputs are written atomically (temp file,
rename) with a ``<output>.manifest.json`` sidecar recording input digests,
scenario, seed, version, timestamp and command line. Exit codes: 0 ok,
1 runtime or data error, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import shlex
import sys
import tempfile
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .balance import yoy_growth
from .domain import CarbonLedgerError, Period, SOURCE_ORDER
from .emission import (
    fmt_sig,
    scenario_compare,
    total_emissions,
    write_emissions_csv,
)
from .ingest import Dataset, ParseError, ParseIssue, load_dataset, parse_gdp_csv, parse_products_csv, parse_scenario_config
from .nowcast import (
    format_projection_line,
    project_emission_growth,
    write_projection_csv,
)
from .uncertainty import (
    MIN_DRAWS_FOR_BAND,
    contribution_decomposition,
    monte_carlo_band,
    write_band_csv,
    write_contributions_csv,
)

ENV_PREFIX = "CARBONLEDGER_"

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_USAGE = 2


# dest -> (env suffix, cast); every flag of every subcommand is settable via
# CARBONLEDGER_<FLAG>, explicit flags win
_ENV_VARS = {
    "flows": ("FLOWS", "list"),
    "monthly": ("MONTHLY", "list"),
    "config": ("CONFIG", str),
    "out": ("OUT", str),
    "scenario": ("SCENARIO", str),
    "scenarios": ("SCENARIOS", str),
    "year": ("YEAR", int),
    "months": ("MONTHS", int),
    "draws": ("DRAWS", int),
    "seed": ("SEED", int),
    "year_from": ("FROM", int),
    "year_to": ("TO", int),
    "format": ("FORMAT", str),
    "gdp": ("GDP", str),
    "products": ("PRODUCTS", str),
    "in_path": ("IN", str),
    "pooled": ("POOLED", "flag"),
}


def _apply_env_defaults(args: argparse.Namespace, parser: argparse.ArgumentParser) -> None:
    for dest, (suffix, cast) in _ENV_VARS.items():
        if not hasattr(args, dest):
            continue
        current = getattr(args, dest)
        raw = os.environ.get(ENV_PREFIX + suffix)
        if raw is None:
            continue
        if cast == "flag":
            if current is False and raw.lower() in ("1", "true", "yes"):
                setattr(args, dest, True)
            continue
        if current is not None and current is not False:
            continue
        if cast == "list":
            setattr(args, dest, [raw])
        elif cast is int:
            try:
                setattr(args, dest, int(raw))
            except ValueError:
                parser.error(f"{ENV_PREFIX}{suffix} must be an integer, got {raw!r}")
        else:
            setattr(args, dest, raw)


@dataclass(frozen=True)
class RunManifest:
    """Reproducibility sidecar: everything needed to re-run one output."""

    inputs: list[dict]
    scenario: str | None
    seed: int | None
    version: str
    timestamp: str
    command: str

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"


def sha256_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def build_manifest(input_paths, scenario: str | None, seed: int | None, argv) -> RunManifest:
    return RunManifest(
        inputs=[{"path": str(p), "sha256": sha256_file(p)} for p in input_paths],
        scenario=scenario,
        seed=seed,
        version=__version__,
        timestamp=datetime.now(timezone.utc).isoformat(),
        command=shlex.join(["carbonledger", *argv]),
    )


def verify_manifest(manifest_path) -> list[str]:
    """Digest mismatches between the manifest and the files it names."""
    with open(manifest_path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    problems = []
    for entry in doc["inputs"]:
        actual = sha256_file(entry["path"])
        if actual != entry["sha256"]:
            problems.append(f"{entry['path']}: digest {actual} != recorded {entry['sha256']}")
    return problems


def atomic_write_text(path, text: str) -> None:
    """Write whole content to a temp file in the target directory and rename;
    a failing command never leaves a partial output behind."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_output(path, text: str, manifest: RunManifest) -> None:
    atomic_write_text(path, text)
    atomic_write_text(str(path) + ".manifest.json", manifest.to_json())


def _flows_paths(args, parser) -> list[str]:
    paths = list(args.flows or [])
    if getattr(args, "monthly", None):
        paths.extend(args.monthly)
    if not paths:
        parser.error("--flows is required (or set CARBONLEDGER_FLOWS)")
    return paths


def _config_path(args, parser) -> str:
    if not args.config:
        parser.error("--config is required (or set CARBONLEDGER_CONFIG)")
    return args.config


def _select_scenario(config, args, parser) -> str:
    name = args.scenario or config.default
    if name not in config.scenarios:
        print(
            f"error: unknown scenario {name!r}; available: {list(config.scenarios)}",
            file=sys.stderr,
        )
        raise SystemExit(EXIT_USAGE)
    return name


def _year_range(dataset: Dataset, args) -> list[int]:
    common = dataset.common_annual_years()
    start = args.year_from if args.year_from is not None else (common[0] if common else None)
    stop = args.year_to if args.year_to is not None else (common[-1] if common else None)
    if start is None or stop is None:
        raise CarbonLedgerError("dataset has no annual records; specify --from/--to")
    if start > stop:
        raise CarbonLedgerError(f"--from {start} is after --to {stop}")
    return list(range(start, stop + 1))


def cmd_compute(args, parser, argv) -> int:
    flow_paths = _flows_paths(args, parser)
    config_path = _config_path(args, parser)
    dataset = load_dataset(flow_paths)
    config = parse_scenario_config(config_path)
    name = _select_scenario(config, args, parser)
    scenario = config.scenarios[name]
    years = _year_range(dataset, args)
    estimates = total_emissions(dataset, scenario, years)
    seed = args.seed if args.seed is not None else config.uncertainty.seed
    if args.draws:
        if args.draws < MIN_DRAWS_FOR_BAND:
            print(
                f"error: percentile bands need at least {MIN_DRAWS_FOR_BAND} draws,"
                f" got {args.draws}",
                file=sys.stderr,
            )
            return EXIT_USAGE
        spec = config.uncertainty.replace(draws=args.draws, seed=seed)
        banded = []
        for e in estimates:
            result = monte_carlo_band(dataset, scenario, e.year, spec)
            banded.append(e.with_band(result.lo68.magnitude, result.hi68.magnitude))
        estimates = banded
    buffer = io.StringIO()
    write_emissions_csv(estimates, buffer)
    manifest = build_manifest(flow_paths + [config_path], name, seed, argv)
    _write_output(args.out, buffer.getvalue(), manifest)
    print(f"computed {len(years)} years under scenario {name!r} -> {args.out}")
    return EXIT_OK


def cmd_project(args, parser, argv) -> int:
    flow_paths = _flows_paths(args, parser)
    config_path = _config_path(args, parser)
    dataset = load_dataset(flow_paths)
    config = parse_scenario_config(config_path)
    name = _select_scenario(config, args, parser)
    scenario = config.scenarios[name]
    spec = config.uncertainty
    if args.seed is not None:
        spec = spec.replace(seed=args.seed)
    if args.draws is not None:
        spec = spec.replace(draws=args.draws)
    projection = project_emission_growth(
        dataset, scenario, args.year, months=args.months, spec=spec, pooled=args.pooled
    )
    for source in SOURCE_ORDER:
        if source in projection.per_source:
            print(format_projection_line(source.value, projection.per_source[source]))
    print(format_projection_line("total", projection.total))
    buffer = io.StringIO()
    write_projection_csv(projection, buffer)
    manifest = build_manifest(flow_paths + [config_path], name, spec.seed, argv)
    _write_output(args.out, buffer.getvalue(), manifest)
    return EXIT_OK


def cmd_uncertainty(args, parser, argv) -> int:
    flow_paths = _flows_paths(args, parser)
    config_path = _config_path(args, parser)
    dataset = load_dataset(flow_paths)
    config = parse_scenario_config(config_path)
    name = _select_scenario(config, args, parser)
    scenario = config.scenarios[name]
    spec = config.uncertainty
    if args.draws is not None:
        spec = spec.replace(draws=args.draws)
    if args.seed is not None:
        spec = spec.replace(seed=args.seed)
    if spec.draws < MIN_DRAWS_FOR_BAND:
        print(
            f"error: percentile bands need at least {MIN_DRAWS_FOR_BAND} draws,"
            f" got {spec.draws}",
            file=sys.stderr,
        )
        return EXIT_USAGE
    result = monte_carlo_band(dataset, scenario, args.year, spec)
    band_buffer = io.StringIO()
    write_band_csv(result, args.year, name, spec, band_buffer)
    manifest = build_manifest(flow_paths + [config_path], name, spec.seed, argv)
    _write_output(args.out, band_buffer.getvalue(), manifest)
    contributions_path = Path(args.out).with_name(Path(args.out).stem + "_contributions.csv")
    try:
        contributions = contribution_decomposition(dataset, scenario, args.year, spec)
    except CarbonLedgerError as exc:
        print(f"contributions skipped: {exc}", file=sys.stderr)
    else:
        contrib_buffer = io.StringIO()
        write_contributions_csv(contributions, contrib_buffer)
        _write_output(contributions_path, contrib_buffer.getvalue(), manifest)
    print(f"uncertainty band for {args.year} ({spec.draws} draws) -> {args.out}")
    return EXIT_OK


def cmd_compare(args, parser, argv) -> int:
    flow_paths = _flows_paths(args, parser)
    config_path = _config_path(args, parser)
    names = [n.strip() for n in args.scenarios.split(",") if n.strip()]
    if len(names) < 2:
        parser.error("--scenarios needs at least 2 comma-separated names")
    dataset = load_dataset(flow_paths)
    config = parse_scenario_config(config_path)
    for name in names:
        if name not in config.scenarios:
            print(
                f"error: unknown scenario {name!r}; available: {list(config.scenarios)}",
                file=sys.stderr,
            )
            return EXIT_USAGE
    baseline = config.default if config.default in names else names[0]
    years = _year_range(dataset, args)
    comparison = scenario_compare(
        dataset, [config.scenarios[n] for n in names], years, baseline=baseline
    )
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["year", "scenario", "source", "emissions_MtCO2", "deviation_pct"])
    for year, scenario_name, source, tco2, deviation in comparison.deviation_rows():
        writer.writerow(
            [year, scenario_name, source, fmt_sig(tco2 / 1e6), fmt_sig(deviation)]
        )
    manifest = build_manifest(flow_paths + [config_path], baseline, None, argv)
    _write_output(args.out, buffer.getvalue(), manifest)
    for scenario_name, message in comparison.errors.items():
        print(f"scenario {scenario_name!r} failed: {message}", file=sys.stderr)
    return EXIT_ERROR if comparison.errors else EXIT_OK


def _read_emissions_csv(path) -> list[dict]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        expected = {"year", "scenario", "source", "emissions_MtCO2"}
        if reader.fieldnames is None or not expected.issubset(reader.fieldnames):
            raise ParseError(
                [ParseIssue(str(path), 1, f"not an emissions CSV (header {reader.fieldnames})")]
            )
        rows = []
        for lineno, row in enumerate(reader, start=2):
            try:
                rows.append(
                    {
                        "year": int(row["year"]),
                        "scenario": row["scenario"],
                        "source": row["source"],
                        "mt": float(row["emissions_MtCO2"]),
                    }
                )
            except (TypeError, ValueError) as exc:
                raise ParseError([ParseIssue(str(path), lineno, f"malformed row: {exc}")])
    return rows


def _growth_table(rows: list[dict]) -> list[tuple[str, str, int, float]]:
    table = []
    keys = sorted({(r["scenario"], r["source"]) for r in rows})
    for scenario_name, source in keys:
        series = {
            Period(r["year"]): r["mt"]
            for r in rows
            if r["scenario"] == scenario_name and r["source"] == source
        }
        for year in sorted(p.year for p in series):
            try:
                g = yoy_growth(series, Period(year))
            except (CarbonLedgerError, ValueError):
                continue
            table.append((scenario_name, source, year, g.rate))
    return table


def _render_sections(sections, fmt: str) -> str:
    """Sections are (title, header, body rows). Text gets aligned columns;
    csv gets one tidy long table tagged by section."""
    out = io.StringIO()
    if fmt == "csv":
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["table", "scenario", "source_or_product", "year", "months", "value"])
        for title, _, body, tidy in sections:
            for row in body:
                writer.writerow([title, *tidy(row)])
    else:
        for title, header, body, _ in sections:
            out.write(f"# {title}\n")
            widths = [
                max(len(str(h)), *(len(str(r[i])) for r in body)) if body else len(str(h))
                for i, h in enumerate(header)
            ]
            out.write("  ".join(str(h).ljust(w) for h, w in zip(header, widths)).rstrip() + "\n")
            for row in body:
                out.write("  ".join(str(c).ljust(w) for c, w in zip(row, widths)).rstrip() + "\n")
            out.write("\n")
    return out.getvalue()


def cmd_report(args, parser, argv) -> int:
    rows = _read_emissions_csv(args.in_path)
    sections = [
        (
            "growth",
            ["scenario", "source", "year", "growth_pct"],
            [[s, src, y, fmt_sig(g, 4)] for s, src, y, g in _growth_table(rows)],
            lambda r: [r[0], r[1], r[2], "", r[3]],
        )
    ]
    if args.gdp:
        gdp, _share = parse_gdp_csv(args.gdp)
        intensity_rows = [
            [
                r["scenario"],
                r["year"],
                fmt_sig(r["mt"] / 1e3, 4),
                fmt_sig(gdp[r["year"]], 6),
                fmt_sig(r["mt"] * 1e6 / gdp[r["year"]], 4),
            ]
            for r in rows
            if r["source"] == "total" and r["year"] in gdp
        ]
        sections.append(
            (
                "intensity",
                ["scenario", "year", "total_GtCO2", "gdp_index", "tCO2_per_gdp"],
                intensity_rows,
                lambda r: [r[0], "", r[1], "", r[4]],
            )
        )
    if args.products:
        from .balance import driver_growth

        products = parse_products_csv(args.products)
        driver_rows = []
        for name in sorted({name for name, _ in products}):
            for year in sorted({p.year for _, p in products}):
                try:
                    g = driver_growth(products, name, year, args.months)
                except (CarbonLedgerError, ValueError):
                    continue
                driver_rows.append([name, year, args.months, fmt_sig(g.rate, 4)])
        sections.append(
            (
                "driver_growth",
                ["product", "year", "months", "growth_pct"],
                driver_rows,
                lambda r: ["", r[0], r[1], r[2], r[3]],
            )
        )

    text = _render_sections(sections, args.format)
    if args.out:
        manifest = build_manifest(
            [args.in_path]
            + ([args.gdp] if args.gdp else [])
            + ([args.products] if args.products else []),
            None,
            None,
            argv,
        )
        _write_output(args.out, text, manifest)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _add_common_io(sub, monthly: bool = False) -> None:
    sub.add_argument("--flows", action="append", help="flows CSV (repeatable; later files revise earlier ones)")
    if monthly:
        sub.add_argument("--monthly", action="append", help="extra monthly-statistics CSV (merged after --flows)")
    sub.add_argument("--config", default=None, help="scenario config TOML")
    sub.add_argument("--out", default=None, help="output CSV path")
    sub.add_argument("--scenario", default=None, help="scenario name (default: config default)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="carbonledger",
        description="fuel-cycle CO2 accounting: balances, scenarios, uncertainty, nowcasts",
    )
    parser.add_argument("--version", action="version", version=f"carbonledger {__version__}")
    subs = parser.add_subparsers(dest="command", required=True)

    compute = subs.add_parser("compute", help="annual emissions per source and total")
    _add_common_io(compute)
    compute.add_argument("--from", dest="year_from", type=int, default=None)
    compute.add_argument("--to", dest="year_to", type=int, default=None)
    compute.add_argument("--draws", type=int, default=None, help="attach Monte Carlo bands with this many draws")
    compute.add_argument("--seed", type=int, default=None)
    compute.set_defaults(func=cmd_compute)

    project = subs.add_parser("project", help="partial-year growth nowcast")
    _add_common_io(project, monthly=True)
    project.add_argument("--year", type=int, default=None, help="target year to project")
    project.add_argument("--months", type=int, choices=range(1, 12), default=None, metavar="1..11")
    project.add_argument("--seed", type=int, default=None)
    project.add_argument("--draws", type=int, default=None)
    project.add_argument("--pooled", action="store_true", help="pool fuels per flow kind when fitting")
    project.set_defaults(func=cmd_project)

    uncertainty = subs.add_parser("uncertainty", help="Monte Carlo band and factor contributions")
    _add_common_io(uncertainty)
    uncertainty.add_argument("--year", type=int, default=None)
    uncertainty.add_argument("--draws", type=int, default=None)
    uncertainty.add_argument("--seed", type=int, default=None)
    uncertainty.set_defaults(func=cmd_uncertainty)

    compare = subs.add_parser("compare", help="side-by-side scenario emissions")
    _add_common_io(compare)
    compare.add_argument("--scenarios", default=None, help="comma-separated scenario names")
    compare.add_argument("--from", dest="year_from", type=int, default=None)
    compare.add_argument("--to", dest="year_to", type=int, default=None)
    compare.set_defaults(func=cmd_compare)

    report = subs.add_parser("report", help="growth/intensity/driver tables from prior outputs")
    report.add_argument("--in", dest="in_path", default=None, help="emissions CSV from compute")
    report.add_argument("--gdp", default=None, help="gdp.csv for intensity table")
    report.add_argument("--products", default=None, help="products.csv for driver table")
    report.add_argument("--months", type=int, choices=range(1, 12), default=None, metavar="1..11")
    report.add_argument("--format", choices=("text", "csv"), default=None)
    report.add_argument("--out", default=None, help="write here instead of stdout")
    report.set_defaults(func=cmd_report)
    return parser


_REQUIRED = {
    "compute": ("out",),
    "project": ("year", "out"),
    "uncertainty": ("year", "out"),
    "compare": ("scenarios", "out"),
    "report": ("in_path",),
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    _apply_env_defaults(args, parser)
    for dest in _REQUIRED[args.command]:
        if getattr(args, dest) is None:
            flag = {"in_path": "in", "year_from": "from", "year_to": "to"}.get(dest, dest)
            parser.error(
                f"--{flag} is required (or set {ENV_PREFIX}{_ENV_VARS[dest][0]})"
            )
    if getattr(args, "months", None) is None and hasattr(args, "months"):
        args.months = 10
    if hasattr(args, "format") and args.format is None:
        args.format = "text"
    if hasattr(args, "format") and args.format not in ("text", "csv"):
        parser.error(f"--format must be text or csv, got {args.format!r}")
    if hasattr(args, "months") and not 1 <= args.months <= 11:
        parser.error(f"--months must be in 1..11, got {args.months}")
    try:
        return args.func(args, parser, argv)
    except SystemExit:
        raise
    except (CarbonLedgerError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
