"""Parsing and validation of flow CSVs, auxiliary series, and scenario
configuration.

File conventions: UTF-8, ``.`` decimal separator, ``,`` field separator,
mandatory header row. Flow values are in file units of 1e6 t (coal, oil,
cement) and 1e9 m3 (gas); the loader scales them to tonnes and cubic
metres. A blank month column marks an annual record.

Parsing is total: a file either yields records or a ParseError carrying
every issue found, each tagged with its line number. Later files may
re-state earlier periods; the loader keeps the last value and records an
audit entry, since official statistics are revised repeatedly after first
publication.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable, Mapping, Sequence

try:
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - python < 3.11
    import tomli as tomllib

from .domain import (
    CarbonLedgerError,
    ConfigurationError,
    DEFAULT_COAL_HEATING_VALUE,
    EmissionFactorSet,
    FUEL_SOURCES,
    FlowRecord,
    HeatingValueSeries,
    MissingDataError,
    Period,
    Quantity,
    SOURCE_ORDER,
    SourceKind,
    aggregate_flows,
    flow_violations,
    native_unit,
)
from .uncertainty import (
    CEMENT_INPUT_KINDS,
    FUEL_INPUT_KINDS,
    UncertaintySpec,
    default_sigmas,
)

logger = logging.getLogger(__name__)

FILE_UNIT_SCALE = {
    SourceKind.COAL: 1e6,
    SourceKind.OIL: 1e6,
    SourceKind.NATURAL_GAS: 1e9,
    SourceKind.CEMENT: 1e6,
}

FLOWS_COLUMNS = [
    "year",
    "month",
    "source",
    "production",
    "import",
    "export",
    "stock_change",
    "non_energy_use",
]


@dataclass(frozen=True)
class ParseIssue:
    label: str
    line: int | None
    message: str

    def __str__(self) -> str:
        where = self.label if self.line is None else f"{self.label}:{self.line}"
        return f"{where}: {self.message}"


class ParseError(CarbonLedgerError):
    """Total-parse failure: carries every issue, none silently dropped."""

    def __init__(self, issues: Sequence[ParseIssue]):
        self.issues = list(issues)
        super().__init__("\n".join(str(i) for i in self.issues))


def _open_text(source, label: str | None) -> tuple[IO[str], str, bool]:
    if isinstance(source, (str, Path)):
        return open(source, "r", encoding="utf-8", newline=""), label or str(source), True
    if isinstance(source, bytes):
        name = label or "<bytes>"
        try:
            return io.StringIO(source.decode("utf-8")), name, False
        except UnicodeDecodeError as exc:
            raise ParseError([ParseIssue(name, None, f"not valid UTF-8: {exc}")]) from exc
    return source, label or "<stream>", False


def parse_flows_csv(source, label: str | None = None) -> list[FlowRecord]:
    """Parse one flows file into validated records (file-unit scaling
    applied). All issues are collected before failing."""
    stream, label, should_close = _open_text(source, label)
    issues: list[ParseIssue] = []
    records: list[FlowRecord] = []
    seen: dict[tuple[Period, SourceKind, str], int] = {}
    try:
        reader = csv.reader(stream)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError([ParseIssue(label, None, "empty file; header row mandatory")])
        header = [h.strip() for h in header]
        has_sector = header and header[-1] == "sector"
        base = header[:-1] if has_sector else header
        has_non_energy = "non_energy_use" in base
        expected = FLOWS_COLUMNS if has_non_energy else FLOWS_COLUMNS[:-1]
        if base != expected:
            raise ParseError(
                [ParseIssue(label, 1, f"bad header {header}, expected {FLOWS_COLUMNS} (+ optional sector)")]
            )
        if not has_non_energy:
            logger.warning("%s: no non_energy_use column, defaulting to 0", label)
        ncols = len(expected) + (1 if has_sector else 0)

        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != ncols:
                issues.append(ParseIssue(label, lineno, f"expected {ncols} fields, got {len(row)}"))
                continue
            cells = dict(zip(expected, row))
            sector = row[-1].strip() if has_sector else "national"

            row_issues = len(issues)
            try:
                year = int(cells["year"].strip())
            except ValueError:
                issues.append(ParseIssue(label, lineno, f"malformed year {cells['year']!r}"))
                year = None
            month_cell = cells["month"].strip()
            month = None
            if month_cell:
                try:
                    month = int(month_cell)
                except ValueError:
                    issues.append(ParseIssue(label, lineno, f"malformed month {month_cell!r}"))
                    year = None  # cannot build a period
            token = cells["source"].strip()
            try:
                source_kind = SourceKind(token)
            except ValueError:
                issues.append(ParseIssue(label, lineno, f"unknown source {token!r}"))
                continue

            values = {}
            for column in ("production", "import", "export", "stock_change", "non_energy_use"):
                if column == "non_energy_use" and not has_non_energy:
                    values[column] = 0.0
                    continue
                cell = cells[column].strip()
                try:
                    value = float(cell)
                    if not math.isfinite(value):
                        raise ValueError
                    values[column] = value * FILE_UNIT_SCALE[source_kind]
                except ValueError:
                    issues.append(ParseIssue(label, lineno, f"malformed {column} {cell!r}"))

            if len(issues) > row_issues or year is None:
                continue
            try:
                period = Period(year, month)
            except ValueError as exc:
                issues.append(ParseIssue(label, lineno, str(exc)))
                continue
            unit = native_unit(source_kind)
            record = FlowRecord(
                period=period,
                source=source_kind,
                production=Quantity(values["production"], unit),
                imports=Quantity(values["import"], unit),
                exports=Quantity(values["export"], unit),
                stock_change=Quantity(values["stock_change"], unit),
                non_energy_use=Quantity(values["non_energy_use"], unit),
                sector=sector,
            )
            for violation in flow_violations(record):
                issues.append(ParseIssue(label, lineno, violation))
            key = record.key()
            if key in seen:
                issues.append(
                    ParseIssue(
                        label,
                        lineno,
                        f"duplicate key ({period}, {source_kind.value}, {sector}),"
                        f" first seen at line {seen[key]}",
                    )
                )
                continue
            seen[key] = lineno
            records.append(record)
    except (UnicodeDecodeError, csv.Error) as exc:
        raise ParseError(issues + [ParseIssue(label, None, f"unreadable input: {exc}")]) from exc
    finally:
        if should_close:
            stream.close()
    if issues:
        raise ParseError(issues)
    return records


def _file_unit_str(magnitude: float, scale: float) -> str:
    """Shortest file-unit decimal that reparses to ``magnitude`` bit-exactly
    where one exists within an ulp (scaling across binades can otherwise
    double-round)."""
    y = magnitude / scale
    if y * scale == magnitude:
        return repr(y)
    for candidate in (math.nextafter(y, -math.inf), math.nextafter(y, math.inf)):
        if candidate * scale == magnitude:
            return repr(candidate)
    return repr(y)


def serialize_flows_csv(records: Iterable[FlowRecord], out: IO[str]) -> None:
    """Inverse of :func:`parse_flows_csv`, canonical ordering, sector column
    always present."""
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(FLOWS_COLUMNS + ["sector"])
    ordered = sorted(
        records,
        key=lambda r: (r.period.sort_key(), SOURCE_ORDER.index(r.source), r.sector),
    )
    for r in ordered:
        scale = FILE_UNIT_SCALE[r.source]
        writer.writerow(
            [
                r.period.year,
                r.period.month if r.period.month is not None else "",
                r.source.value,
                _file_unit_str(r.production.magnitude, scale),
                _file_unit_str(r.imports.magnitude, scale),
                _file_unit_str(r.exports.magnitude, scale),
                _file_unit_str(r.stock_change.magnitude, scale),
                _file_unit_str(r.non_energy_use.magnitude, scale),
                r.sector,
            ]
        )


def parse_gdp_csv(source, label: str | None = None) -> tuple[dict[int, float], dict[int, float]]:
    """gdp.csv: ``year,gdp_index,secondary_share``; blank share allowed."""
    stream, label, should_close = _open_text(source, label)
    issues: list[ParseIssue] = []
    gdp: dict[int, float] = {}
    share: dict[int, float] = {}
    try:
        reader = csv.reader(stream)
        header = [h.strip() for h in next(reader, [])]
        if header != ["year", "gdp_index", "secondary_share"]:
            raise ParseError([ParseIssue(label, 1, f"bad header {header}")])
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                year = int(row[0])
                value = float(row[1])
            except (ValueError, IndexError):
                issues.append(ParseIssue(label, lineno, f"malformed row {row}"))
                continue
            if value <= 0:
                issues.append(ParseIssue(label, lineno, f"gdp_index must be > 0, got {value}"))
                continue
            if year in gdp:
                issues.append(ParseIssue(label, lineno, f"duplicate year {year}"))
                continue
            gdp[year] = value
            cell = row[2].strip() if len(row) > 2 else ""
            if cell:
                try:
                    s = float(cell)
                except ValueError:
                    issues.append(ParseIssue(label, lineno, f"malformed secondary_share {cell!r}"))
                    continue
                if not 0 <= s <= 1:
                    issues.append(ParseIssue(label, lineno, f"secondary_share outside [0,1]: {s}"))
                    continue
                share[year] = s
    except (UnicodeDecodeError, csv.Error) as exc:
        raise ParseError(issues + [ParseIssue(label, None, f"unreadable input: {exc}")]) from exc
    finally:
        if should_close:
            stream.close()
    if issues:
        raise ParseError(issues)
    return gdp, share


def parse_products_csv(source, label: str | None = None) -> dict[tuple[str, Period], float]:
    """products.csv: ``year,month,product,output`` (monthly output levels)."""
    stream, label, should_close = _open_text(source, label)
    issues: list[ParseIssue] = []
    products: dict[tuple[str, Period], float] = {}
    try:
        reader = csv.reader(stream)
        header = [h.strip() for h in next(reader, [])]
        if header != ["year", "month", "product", "output"]:
            raise ParseError([ParseIssue(label, 1, f"bad header {header}")])
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                period = Period(int(row[0]), int(row[1]))
                name = row[2].strip()
                output = float(row[3])
                if not name or not math.isfinite(output):
                    raise ValueError
            except (ValueError, IndexError):
                issues.append(ParseIssue(label, lineno, f"malformed row {row}"))
                continue
            if (name, period) in products:
                issues.append(ParseIssue(label, lineno, f"duplicate ({name}, {period})"))
                continue
            products[(name, period)] = output
    except (UnicodeDecodeError, csv.Error) as exc:
        raise ParseError(issues + [ParseIssue(label, None, f"unreadable input: {exc}")]) from exc
    finally:
        if should_close:
            stream.close()
    if issues:
        raise ParseError(issues)
    return products


@dataclass(frozen=True)
class Dataset:
    """Merged, validated view of every input series for one run."""

    flows: Mapping[tuple[Period, SourceKind, str], FlowRecord]
    gdp: Mapping[int, float] = field(default_factory=dict)
    secondary_share: Mapping[int, float] = field(default_factory=dict)
    industrial_products: Mapping[tuple[str, Period], float] = field(default_factory=dict)
    audit: tuple[str, ...] = ()

    def annual_record(self, year: int, source: SourceKind, sector: str = "national"):
        return self.flows.get((Period(year), source, sector))

    def annual_flow(self, year: int, source: SourceKind) -> FlowRecord | None:
        """Annual record with sector tags collapsed by field-wise summation."""
        records = [
            record
            for (period, src, _), record in self.flows.items()
            if period.annual and period.year == year and src is source
        ]
        if not records:
            return None
        return aggregate_flows(records, sector="national")

    def monthly_map(self, year: int, source: SourceKind, sector: str = "national") -> dict[int, FlowRecord]:
        return {
            period.month: record
            for (period, src, sect), record in self.flows.items()
            if not period.annual and period.year == year and src is source and sect == sector
        }

    def annual_years(self, source: SourceKind) -> list[int]:
        return sorted(
            {period.year for (period, src, _) in self.flows if period.annual and src is source}
        )

    def common_annual_years(self) -> list[int]:
        """Years covered by every source present; the CLI's default range."""
        per_source = [set(self.annual_years(s)) for s in SOURCE_ORDER if self.annual_years(s)]
        if not per_source:
            return []
        return sorted(set.intersection(*per_source))


def _contiguity_issues(flows: Mapping[tuple[Period, SourceKind, str], FlowRecord]) -> list[ParseIssue]:
    monthly: dict[tuple[int, SourceKind, str], list[int]] = {}
    for (period, source, sector) in flows:
        if not period.annual:
            monthly.setdefault((period.year, source, sector), []).append(period.month)
    issues = []
    for (year, source, sector), months in sorted(
        monthly.items(), key=lambda kv: (kv[0][0], SOURCE_ORDER.index(kv[0][1]), kv[0][2])
    ):
        months = sorted(months)
        expected = list(range(1, len(months) + 1))
        if months != expected:
            missing = sorted(set(range(1, max(months) + 1)) - set(months))
            issues.append(
                ParseIssue(
                    "<dataset>",
                    None,
                    f"monthly records for {year}/{source.value}/{sector} are not a"
                    f" contiguous prefix: missing months {missing}",
                )
            )
    return issues


def merge_flow_fragments(
    fragments: Sequence[tuple[str, Sequence[FlowRecord]]],
) -> tuple[dict[tuple[Period, SourceKind, str], FlowRecord], list[str]]:
    """Fold fragments in argument order, last write wins, one audit entry per
    re-stated key."""
    flows: dict[tuple[Period, SourceKind, str], FlowRecord] = {}
    origin: dict[tuple[Period, SourceKind, str], str] = {}
    audit: list[str] = []
    for label, records in fragments:
        for record in records:
            key = record.key()
            if key in flows:
                period, source, sector = key
                audit.append(
                    f"{label} re-states ({period}, {source.value}, {sector})"
                    f" first loaded from {origin[key]}"
                )
            flows[key] = record
            origin[key] = label
    return flows, audit


def build_dataset(
    flows: Mapping[tuple[Period, SourceKind, str], FlowRecord],
    gdp: Mapping[int, float] | None = None,
    secondary_share: Mapping[int, float] | None = None,
    industrial_products: Mapping[tuple[str, Period], float] | None = None,
    audit: Sequence[str] = (),
) -> Dataset:
    issues = _contiguity_issues(flows)
    if issues:
        raise ParseError(issues)
    return Dataset(
        flows=dict(flows),
        gdp=dict(gdp or {}),
        secondary_share=dict(secondary_share or {}),
        industrial_products=dict(industrial_products or {}),
        audit=tuple(audit),
    )


def dataset_from_records(records: Iterable[FlowRecord], **kwargs) -> Dataset:
    """Dataset straight from records; duplicate keys are an error here."""
    flows: dict[tuple[Period, SourceKind, str], FlowRecord] = {}
    for record in records:
        key = record.key()
        if key in flows:
            period, source, sector = key
            raise ParseError(
                [ParseIssue("<records>", None, f"duplicate key ({period}, {source.value}, {sector})")]
            )
        flows[key] = record
    return build_dataset(flows, **kwargs)


def load_dataset(
    flow_paths: Sequence,
    gdp_path=None,
    products_path=None,
) -> Dataset:
    """Parse and merge every input file into one validated Dataset."""
    fragments = []
    for path in flow_paths:
        fragments.append((str(path), parse_flows_csv(path)))
    flows, audit = merge_flow_fragments(fragments)
    for entry in audit:
        logger.info("revision: %s", entry)
    gdp: Mapping[int, float] = {}
    share: Mapping[int, float] = {}
    if gdp_path is not None:
        gdp, share = parse_gdp_csv(gdp_path)
    products: Mapping[tuple[str, Period], float] = {}
    if products_path is not None:
        products = parse_products_csv(products_path)
    return build_dataset(flows, gdp, share, products, audit)


def cumulative_months(
    dataset: Dataset, source: SourceKind, year: int, n: int, sector: str = "national"
) -> FlowRecord:
    """Field-wise sum of months 1..n; the result's period carries
    (year, month=n) as the cumulative marker."""
    if not 1 <= n <= 12:
        raise ValueError(f"month count {n} outside [1, 12]")
    monthly = dataset.monthly_map(year, source, sector)
    missing = [m for m in range(1, n + 1) if m not in monthly]
    if missing:
        raise MissingDataError(
            f"incomplete monthly prefix for {year}/{source.value}/{sector}:"
            f" missing months {missing}"
        )
    return aggregate_flows(
        [monthly[m] for m in range(1, n + 1)], period=Period(year, n), sector=sector
    )


# --------------------------------------------------------------------------
# scenario configuration
# --------------------------------------------------------------------------

_SOURCE_TOKENS = {s.value: s for s in FUEL_SOURCES}


def _coal_preset(name: str, v: float = DEFAULT_COAL_HEATING_VALUE,
                 c: float = 26.59, o: float = 0.92) -> EmissionFactorSet:
    return EmissionFactorSet(
        scenario_name=name,
        v=HeatingValueSeries(fallback={SourceKind.COAL: v}),
        c={SourceKind.COAL: c},
        o={SourceKind.COAL: o},
    )


# Built-in coal factor presets named after the agency whose assumption they
# carry. Oil, gas and cement factors are deliberately absent: configs extend
# a preset and must supply them.
PRESETS: dict[str, EmissionFactorSet] = {
    "this-study": _coal_preset("this-study"),
    "UNFCCC-CN": _coal_preset("UNFCCC-CN", o=0.94),
    "CDIAC": _coal_preset("CDIAC", o=0.98),
    "IEA": _coal_preset("IEA", o=0.98),
    "EDGAR": _coal_preset("EDGAR", o=1.00),
    "BP": _coal_preset("BP", o=1.00),
    "EIA": _coal_preset("EIA", o=1.00),
    "WorldBank": _coal_preset("WorldBank", o=1.00),
    "UN-HV": _coal_preset("UN-HV", v=21.4),
    "IPCC-default": _coal_preset("IPCC-default", c=25.9),
}


def preset(name: str) -> EmissionFactorSet:
    if name not in PRESETS:
        raise ConfigurationError(f"unknown preset {name!r}; available: {sorted(PRESETS)}")
    return PRESETS[name]


@dataclass(frozen=True)
class ScenarioConfig:
    scenarios: Mapping[str, EmissionFactorSet]
    default: str
    uncertainty: UncertaintySpec

    def __post_init__(self) -> None:
        if not self.scenarios:
            raise ConfigurationError("config defines no scenarios")
        if self.default not in self.scenarios:
            raise ConfigurationError(
                f"default scenario {self.default!r} not among {sorted(self.scenarios)}"
            )

    def get(self, name: str) -> EmissionFactorSet:
        if name not in self.scenarios:
            raise ConfigurationError(
                f"unknown scenario {name!r}; available: {list(self.scenarios)}"
            )
        return self.scenarios[name]


def _parse_fuel_token(token: str, context: str) -> SourceKind:
    if token not in _SOURCE_TOKENS:
        raise ConfigurationError(
            f"{context}: unknown fuel {token!r}, expected one of {sorted(_SOURCE_TOKENS)}"
        )
    return _SOURCE_TOKENS[token]


def _parse_heating_values(
    table: Mapping, fallback: dict, by_year: dict, context: str
) -> None:
    for token, value in table.items():
        source = _parse_fuel_token(token, context)
        if isinstance(value, Mapping):
            for key, hv in value.items():
                if key == "default":
                    fallback[source] = float(hv)
                elif str(key).isdigit():
                    by_year.setdefault(source, {})[int(key)] = float(hv)
                else:
                    raise ConfigurationError(
                        f"{context}: heating_value.{token} keys must be years or 'default', got {key!r}"
                    )
            if source not in fallback:
                raise ConfigurationError(
                    f"{context}: heating_value.{token} year series needs a 'default'"
                    " constant (directly or from the preset)"
                )
        else:
            fallback[source] = float(value)


def _scenario_from_table(name: str, table: Mapping) -> EmissionFactorSet:
    context = f"scenario {name!r}"
    base = None
    if "preset" in table:
        base = preset(str(table["preset"]))
    fallback = dict(base.v.fallback) if base else {}
    by_year = {s: dict(m) for s, m in (base.v.by_year if base else {}).items()}
    c = dict(base.c) if base else {}
    o = dict(base.o) if base else {}
    cement_factor = base.cement_factor if base else None

    for key, value in table.items():
        if key == "preset":
            continue
        elif key == "heating_value":
            _parse_heating_values(value, fallback, by_year, context)
        elif key == "carbon_content":
            for token, cc in value.items():
                c[_parse_fuel_token(token, context)] = float(cc)
        elif key == "oxidation":
            for token, ox in value.items():
                o[_parse_fuel_token(token, context)] = float(ox)
        elif key == "cement_factor":
            cement_factor = float(value)
        else:
            raise ConfigurationError(f"{context}: unknown key {key!r}")
    try:
        return EmissionFactorSet(
            scenario_name=name,
            v=HeatingValueSeries(fallback=fallback, by_year=by_year),
            c=c,
            o=o,
            cement_factor=cement_factor,
        )
    except ValueError as exc:
        raise ConfigurationError(f"{context}: {exc}") from exc


def _parse_sigma_table(table: Mapping) -> dict[tuple[str, SourceKind], float]:
    sigmas = default_sigmas()
    for kind, value in table.items():
        if kind in CEMENT_INPUT_KINDS:
            sigmas[(kind, SourceKind.CEMENT)] = float(value)
        elif kind in FUEL_INPUT_KINDS:
            if isinstance(value, Mapping):
                for token, sigma in value.items():
                    source = _parse_fuel_token(token, f"sigma.{kind}")
                    sigmas[(kind, source)] = float(sigma)
            else:
                for source in FUEL_SOURCES:
                    sigmas[(kind, source)] = float(value)
        else:
            raise ConfigurationError(f"sigma: unknown input kind {kind!r}")
    return {key: value for key, value in sigmas.items() if value != 0.0}


def parse_scenario_config(source, label: str | None = None) -> ScenarioConfig:
    """Read the TOML scenario config (see data/scenarios.toml for the
    grammar): per-scenario factor sections, optional preset inheritance,
    sigma table, draws and seed."""
    if isinstance(source, (str, Path)):
        with open(source, "rb") as fh:
            raw = fh.read()
    elif isinstance(source, bytes):
        raw = source
    else:
        raw = source.read()
        if isinstance(raw, str):
            raw = raw.encode("utf-8")
    try:
        doc = tomllib.loads(raw.decode("utf-8"))
    except (tomllib.TOMLDecodeError, UnicodeDecodeError) as exc:
        raise ConfigurationError(f"{label or 'config'}: {exc}") from exc

    scenario_tables = doc.get("scenario", {})
    if not isinstance(scenario_tables, Mapping) or not scenario_tables:
        raise ConfigurationError("config needs at least one [scenario.<name>] section")
    scenarios = {
        name: _scenario_from_table(name, table) for name, table in scenario_tables.items()
    }
    default = str(doc.get("default", next(iter(scenarios))))
    try:
        spec = UncertaintySpec(
            sigmas=_parse_sigma_table(doc.get("sigma", {})),
            draws=int(doc.get("draws", 10000)),
            seed=int(doc.get("seed", 0)),
        )
    except ValueError as exc:
        raise ConfigurationError(str(exc)) from exc
    return ScenarioConfig(scenarios=scenarios, default=default, uncertainty=spec)
