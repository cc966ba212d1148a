"""CO2 emission computation and scenario comparison.

Fuel emissions follow the factor chain

    energy (TJ) x carbon content (tC/TJ) x oxidation x 44/12

and cement process emissions are production x cement factor (tC/t) x 44/12.
Everything is carried in tC internally; CO2 appears only in the returned
quantities and output files. Oxidation is a per-source national constant
within a scenario.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterable, Mapping, Sequence, TextIO

from .balance import apparent_consumption
from .domain import (
    CO2_PER_C,
    ConfigurationError,
    EmissionFactorSet,
    FUEL_SOURCES,
    MissingDataError,
    Quantity,
    SOURCE_ORDER,
    SourceKind,
    Unit,
    aggregate_flows,
)

if TYPE_CHECKING:  # pragma: no cover
    from .ingest import Dataset


def fmt_sig(x: float | None, sig: int = 6) -> str:
    """Output-boundary rounding: ``sig`` significant digits, blank for None."""
    return "" if x is None else f"{x:.{sig}g}"


def fuel_emission_tco2(energy_tj: float, carbon_content: float, oxidation: float) -> float:
    """Float core of the fuel chain; also the Monte Carlo hot path."""
    return energy_tj * carbon_content * oxidation * CO2_PER_C


def cement_emission_tco2(production_t: float, cement_factor: float) -> float:
    return production_t * cement_factor * CO2_PER_C


def fuel_emissions(ac, factors: EmissionFactorSet) -> Quantity:
    """CO2 mass for one source-period's apparent consumption.

    A negative (anomalous) balance yields a negative quantity on purpose;
    clamping would bias annual totals.
    """
    if ac.source is SourceKind.CEMENT:
        raise ConfigurationError("cement is priced via cement_emissions")
    tco2 = fuel_emission_tco2(
        ac.energy.magnitude,
        factors.carbon_content(ac.source),
        factors.oxidation(ac.source),
    )
    return Quantity(tco2, Unit.T_CO2)


def cement_emissions(production: Quantity, factors: EmissionFactorSet) -> Quantity:
    """Process CO2 from cement production; the factor must be configured."""
    if production.unit is not Unit.TONNE:
        raise ConfigurationError(f"cement production must be in tonnes, got {production.unit.value}")
    if production.magnitude < 0:
        raise ValueError("cement production must be >= 0")
    if factors.cement_factor is None:
        raise ConfigurationError(
            f"scenario {factors.scenario_name!r} has no cement_factor configured"
        )
    return Quantity(
        cement_emission_tco2(production.magnitude, factors.cement_factor), Unit.T_CO2
    )


@dataclass(frozen=True)
class EmissionEstimate:
    """Per-source and total CO2 for one year under one scenario.

    ``per_source_energy`` keeps the TJ behind each fuel's number so shares
    and output files do not need to re-run the balance. ``band`` is the
    one-sigma (16th/84th percentile) range on the total when a Monte Carlo
    run supplied one.
    """

    year: int
    scenario_name: str
    per_source: Mapping[SourceKind, Quantity]
    per_source_energy: Mapping[SourceKind, Quantity]
    total: Quantity
    band: tuple[float, float] | None = None

    def __post_init__(self) -> None:
        summed = sum(q.magnitude for q in self.per_source.values())
        if abs(summed - self.total.magnitude) > 1e-6 * max(abs(summed), 1e-300):
            raise ValueError(
                f"total {self.total.magnitude} differs from per-source sum {summed}"
            )
        if self.band is not None:
            lo, hi = self.band
            if not lo <= self.total.magnitude <= hi:
                raise ValueError(f"band ({lo}, {hi}) does not bracket the total")

    def with_band(self, lo: float, hi: float) -> "EmissionEstimate":
        return EmissionEstimate(
            self.year,
            self.scenario_name,
            self.per_source,
            self.per_source_energy,
            self.total,
            (lo, hi),
        )


def present_sources(dataset: "Dataset") -> list[SourceKind]:
    """Sources with any annual record, in canonical order."""
    seen = {
        key[1]
        for key, record in dataset.flows.items()
        if key[0].annual
    }
    return [s for s in SOURCE_ORDER if s in seen]


def _annual_flow(dataset: "Dataset", year: int, source: SourceKind):
    """Annual record for (year, source), sector tags collapsed by summation."""
    records = [
        record
        for (period, src, _sector), record in dataset.flows.items()
        if period.annual and period.year == year and src is source
    ]
    if not records:
        return None
    return aggregate_flows(records, sector="national")


def total_emissions(
    dataset: "Dataset", scenario: EmissionFactorSet, years: Iterable[int]
) -> list[EmissionEstimate]:
    """One estimate per requested year, summed over every source present in
    the dataset. Any missing (year, source) aborts with the full gap list."""
    years = list(years)
    sources = present_sources(dataset)
    if not sources:
        raise MissingDataError("dataset has no annual flow records")
    flows: dict[tuple[int, SourceKind], object] = {}
    gaps = []
    for year in years:
        for source in sources:
            record = _annual_flow(dataset, year, source)
            if record is None:
                gaps.append(f"{year}/{source.value}")
            else:
                flows[(year, source)] = record
    if gaps:
        raise MissingDataError("missing annual records: " + ", ".join(gaps))

    estimates = []
    for year in years:
        per_source: dict[SourceKind, Quantity] = {}
        per_energy: dict[SourceKind, Quantity] = {}
        for source in sources:
            record = flows[(year, source)]
            if source is SourceKind.CEMENT:
                per_source[source] = cement_emissions(record.production, scenario)
            else:
                ac = apparent_consumption(record, scenario.v)
                per_energy[source] = ac.energy
                per_source[source] = fuel_emissions(ac, scenario)
        total = Quantity(sum(q.magnitude for q in per_source.values()), Unit.T_CO2)
        estimates.append(
            EmissionEstimate(
                year=year,
                scenario_name=scenario.scenario_name,
                per_source=per_source,
                per_source_energy=per_energy,
                total=total,
            )
        )
    return estimates


@dataclass(frozen=True)
class ScenarioComparison:
    """Per-scenario estimates plus failures, deviations taken against the
    baseline scenario's totals."""

    baseline: str
    estimates: Mapping[str, list[EmissionEstimate]]
    errors: Mapping[str, str]

    def deviation_rows(self) -> list[tuple[int, str, str, float, float | None]]:
        """Tidy rows (year, scenario, source, tCO2, pct deviation vs baseline)."""
        base = {
            (e.year, src): q.magnitude
            for e in self.estimates.get(self.baseline, [])
            for src, q in list(e.per_source.items()) + [("total", e.total)]
        }
        rows = []
        for name, ests in self.estimates.items():
            for e in ests:
                for src, q in list(e.per_source.items()) + [("total", e.total)]:
                    ref = base.get((e.year, src))
                    dev = None
                    if ref:
                        dev = 100.0 * (q.magnitude - ref) / ref
                    label = src if isinstance(src, str) else src.value
                    rows.append((e.year, name, label, q.magnitude, dev))
        return rows


def scenario_compare(
    dataset: "Dataset",
    scenarios: Sequence[EmissionFactorSet],
    years: Iterable[int],
    baseline: str | None = None,
) -> ScenarioComparison:
    """Evaluate every scenario over ``years``; a failing scenario is recorded
    and does not abort the others."""
    if len(scenarios) < 2:
        raise ConfigurationError("scenario comparison needs at least 2 scenarios")
    years = list(years)
    names = [s.scenario_name for s in scenarios]
    if len(set(names)) != len(names):
        raise ConfigurationError("scenario names must be unique within a run")
    baseline = baseline or names[0]
    if baseline not in names:
        raise ConfigurationError(f"baseline scenario {baseline!r} not among {names}")
    estimates: dict[str, list[EmissionEstimate]] = {}
    errors: dict[str, str] = {}
    for scenario in scenarios:
        try:
            estimates[scenario.scenario_name] = total_emissions(dataset, scenario, years)
        except Exception as exc:  # noqa: BLE001 - per-scenario isolation is the contract
            errors[scenario.scenario_name] = str(exc)
    return ScenarioComparison(baseline=baseline, estimates=estimates, errors=errors)


@dataclass(frozen=True)
class IndicatorRow:
    co2_intensity: float
    coal_share_energy: float
    secondary_share: float | None


@dataclass(frozen=True)
class DriverIndicators:
    rows: Mapping[int, IndicatorRow]


def intensity_indicators(
    estimates: Sequence[EmissionEstimate], dataset: "Dataset"
) -> DriverIndicators:
    """CO2/GDP intensity, coal share of fuel energy, and the secondary-industry
    share for the estimate years. GDP must cover every year."""
    missing = [e.year for e in estimates if e.year not in dataset.gdp]
    if missing:
        raise MissingDataError(f"gdp missing for years: {missing}")
    rows = {}
    for e in estimates:
        gdp = dataset.gdp[e.year]
        if gdp <= 0:
            raise ValueError(f"gdp must be > 0, got {gdp} in {e.year}")
        fuel_energy = sum(
            e.per_source_energy[s].magnitude for s in FUEL_SOURCES if s in e.per_source_energy
        )
        if fuel_energy <= 0:
            raise ValueError(f"no fuel energy in {e.year}; coal share undefined")
        coal = e.per_source_energy.get(SourceKind.COAL)
        rows[e.year] = IndicatorRow(
            co2_intensity=e.total.magnitude / gdp,
            coal_share_energy=(coal.magnitude if coal else 0.0) / fuel_energy,
            secondary_share=dataset.secondary_share.get(e.year),
        )
    return DriverIndicators(rows=rows)


EMISSIONS_HEADER = [
    "year",
    "scenario",
    "source",
    "energy_TJ",
    "emissions_MtCO2",
    "lo68_MtCO2",
    "hi68_MtCO2",
]


def write_emissions_csv(
    estimates: Sequence[EmissionEstimate], out: TextIO, sig: int = 6
) -> None:
    """Tidy per-source rows plus a total row per year; magnitudes in Mt CO2,
    bands only where a Monte Carlo run attached one."""
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(EMISSIONS_HEADER)
    for e in sorted(estimates, key=lambda x: (x.year, x.scenario_name)):
        for source in SOURCE_ORDER:
            if source not in e.per_source:
                continue
            energy = e.per_source_energy.get(source)
            writer.writerow(
                [
                    e.year,
                    e.scenario_name,
                    source.value,
                    fmt_sig(energy.magnitude if energy else None, sig),
                    fmt_sig(e.per_source[source].magnitude / 1e6, sig),
                    "",
                    "",
                ]
            )
        fuel_energy = sum(q.magnitude for q in e.per_source_energy.values())
        lo, hi = e.band if e.band is not None else (None, None)
        writer.writerow(
            [
                e.year,
                e.scenario_name,
                "total",
                fmt_sig(fuel_energy, sig),
                fmt_sig(e.total.magnitude / 1e6, sig),
                fmt_sig(lo / 1e6 if lo is not None else None, sig),
                fmt_sig(hi / 1e6 if hi is not None else None, sig),
            ]
        )
