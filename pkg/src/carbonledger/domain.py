"""Core value types for fuel-cycle CO2 accounting.

Unit conventions used throughout the package:

* coal, oil and cement quantities are metric tonnes; natural gas is cubic
  metres (the CSV loader scales file units of 1e6 t / 1e9 m3 to these)
* heating values are GJ per native unit, so activity -> energy conversion
  divides by 1000 to land in TJ
* carbon is carried internally in tonnes of carbon (tC); conversion to
  tonnes of CO2 uses the stoichiometric ratio 44/12 and happens only at
  reporting boundaries

All types are immutable values; all functions here are pure.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping

logger = logging.getLogger(__name__)

CO2_PER_C = 44.0 / 12.0

# Measured national-average heating value for raw coal, GJ/t.
DEFAULT_COAL_HEATING_VALUE = 20.95


class CarbonLedgerError(Exception):
    """Base class for every error this package raises deliberately."""


class UnitMismatchError(CarbonLedgerError):
    pass


class UnsupportedSourceError(CarbonLedgerError):
    pass


class ConfigurationError(CarbonLedgerError):
    pass


class MissingDataError(CarbonLedgerError):
    """A requested (period, source) slice is absent; message lists every gap."""


class InsufficientDataError(CarbonLedgerError):
    pass


class FlowValidationError(CarbonLedgerError):
    """Carries the complete list of invariant violations, not just the first."""

    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class Unit(str, Enum):
    TONNE = "mass-tonne"
    M3 = "volume-m3"
    TJ = "energy-TJ"
    T_CO2 = "mass-tCO2"
    T_C = "mass-tC"


class SourceKind(str, Enum):
    COAL = "coal"
    OIL = "oil"
    NATURAL_GAS = "natural_gas"
    CEMENT = "cement"


FUEL_SOURCES = (SourceKind.COAL, SourceKind.OIL, SourceKind.NATURAL_GAS)
SOURCE_ORDER = (SourceKind.COAL, SourceKind.OIL, SourceKind.NATURAL_GAS, SourceKind.CEMENT)


def native_unit(source: SourceKind) -> Unit:
    """Unit a source's mass-balance quantities are expressed in."""
    return Unit.M3 if source is SourceKind.NATURAL_GAS else Unit.TONNE


@dataclass(frozen=True)
class Period:
    """A calendar year, optionally narrowed to one month (1..12).

    ``month=None`` marks an annual record; ``Period(2018, 10)`` is also used
    as the cumulative marker for "first ten months of 2018".
    """

    year: int
    month: int | None = None

    # accepted year window; widen these before loading pre-1949 archives
    MIN_YEAR = 1949
    MAX_YEAR = 2100

    def __post_init__(self) -> None:
        if not Period.MIN_YEAR <= self.year <= Period.MAX_YEAR:
            raise ValueError(
                f"year {self.year} outside [{Period.MIN_YEAR}, {Period.MAX_YEAR}]"
            )
        if self.month is not None and not 1 <= self.month <= 12:
            raise ValueError(f"month {self.month} outside [1, 12]")

    @property
    def annual(self) -> bool:
        return self.month is None

    def sort_key(self) -> tuple[int, int]:
        return (self.year, self.month or 0)

    def previous_year(self) -> "Period":
        """Same period one year earlier (same month index)."""
        return Period(self.year - 1, self.month)

    def __str__(self) -> str:
        return f"{self.year}" if self.month is None else f"{self.year}-{self.month:02d}"


@dataclass(frozen=True)
class Quantity:
    """A finite magnitude tagged with one of the five ledger units.

    Addition and subtraction are defined only between identical units;
    multiplication only by plain scalars. Unit changes go through the
    explicit conversion functions below.
    """

    magnitude: float
    unit: Unit

    def __post_init__(self) -> None:
        if not math.isfinite(self.magnitude):
            raise ValueError(f"non-finite magnitude {self.magnitude!r}")

    def _require_same_unit(self, other: "Quantity") -> None:
        if self.unit is not other.unit:
            raise UnitMismatchError(
                f"cannot combine {self.unit.value} with {other.unit.value}"
            )

    def __add__(self, other: "Quantity") -> "Quantity":
        if not isinstance(other, Quantity):
            return NotImplemented
        self._require_same_unit(other)
        return Quantity(self.magnitude + other.magnitude, self.unit)

    def __sub__(self, other: "Quantity") -> "Quantity":
        if not isinstance(other, Quantity):
            return NotImplemented
        self._require_same_unit(other)
        return Quantity(self.magnitude - other.magnitude, self.unit)

    def __neg__(self) -> "Quantity":
        return Quantity(-self.magnitude, self.unit)

    def __mul__(self, k: float) -> "Quantity":
        if isinstance(k, Quantity):
            raise UnitMismatchError("quantity-by-quantity products are not defined")
        return Quantity(self.magnitude * float(k), self.unit)

    __rmul__ = __mul__


@dataclass(frozen=True)
class FlowRecord:
    """One period's mass-balance inputs for one source.

    ``stock_change > 0`` means a net addition to inventories (a stock build)
    and is subtracted from apparent consumption. Construction is permissive;
    run :func:`validate_flow` to enforce the invariants and get the full
    violation list.
    """

    period: Period
    source: SourceKind
    production: Quantity
    imports: Quantity
    exports: Quantity
    stock_change: Quantity
    non_energy_use: Quantity
    sector: str = "national"

    def key(self) -> tuple[Period, SourceKind, str]:
        return (self.period, self.source, self.sector)


def flow_violations(record: FlowRecord) -> list[str]:
    """Every invariant violation of ``record``, empty when well formed."""
    problems: list[str] = []
    want = native_unit(record.source)
    for name in ("production", "imports", "exports", "stock_change", "non_energy_use"):
        q: Quantity = getattr(record, name)
        if q.unit is not want:
            problems.append(
                f"{name} unit {q.unit.value} does not match {record.source.value}"
                f" native unit {want.value}"
            )
    for name in ("production", "imports", "exports", "non_energy_use"):
        if getattr(record, name).magnitude < 0:
            problems.append(f"negative {name}")
    if record.source is SourceKind.CEMENT:
        for name in ("imports", "exports", "stock_change", "non_energy_use"):
            if getattr(record, name).magnitude != 0:
                problems.append(f"cement carries production only ({name} is nonzero)")
    if not record.sector:
        problems.append("empty sector tag")
    return problems


def validate_flow(record: FlowRecord) -> FlowRecord:
    """Return ``record`` unchanged iff all invariants hold.

    Raises :class:`FlowValidationError` carrying the complete violation list
    otherwise. Idempotent by construction.
    """
    problems = flow_violations(record)
    if problems:
        raise FlowValidationError(problems)
    return record


def aggregate_flows(
    records: list[FlowRecord],
    period: Period | None = None,
    sector: str | None = None,
) -> FlowRecord:
    """Field-wise sum of records for one source (used for month prefixes and
    for collapsing sector tags). Unit checks ride on Quantity addition."""
    if not records:
        raise ValueError("nothing to aggregate")
    source = records[0].source
    if any(r.source is not source for r in records):
        raise UnitMismatchError("cannot aggregate flows across sources")
    total = records[0]
    for r in records[1:]:
        total = FlowRecord(
            period=total.period,
            source=source,
            production=total.production + r.production,
            imports=total.imports + r.imports,
            exports=total.exports + r.exports,
            stock_change=total.stock_change + r.stock_change,
            non_energy_use=total.non_energy_use + r.non_energy_use,
            sector=total.sector,
        )
    if period is not None or sector is not None:
        total = FlowRecord(
            period=period if period is not None else total.period,
            source=source,
            production=total.production,
            imports=total.imports,
            exports=total.exports,
            stock_change=total.stock_change,
            non_energy_use=total.non_energy_use,
            sector=sector if sector is not None else total.sector,
        )
    return total


@dataclass(frozen=True)
class HeatingValueSeries:
    """Heating values in GJ per native unit, per fuel source.

    ``by_year`` holds the year-dependent trajectory where one is known;
    lookups outside it fall back to the per-source constant with a logged
    warning (projections routinely reach past the last tabulated year).
    Cement never has a heating value.
    """

    fallback: Mapping[SourceKind, float]
    by_year: Mapping[SourceKind, Mapping[int, float]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for source, value in self.fallback.items():
            if source is SourceKind.CEMENT:
                raise UnsupportedSourceError("cement has no heating value")
            if value <= 0:
                raise ValueError(f"heating value for {source.value} must be > 0")
        for source, series in self.by_year.items():
            if source is SourceKind.CEMENT:
                raise UnsupportedSourceError("cement has no heating value")
            if source not in self.fallback:
                raise ConfigurationError(
                    f"{source.value} has a year series but no constant fallback"
                )
            for year, value in series.items():
                if value <= 0:
                    raise ValueError(
                        f"heating value for {source.value} in {year} must be > 0"
                    )

    def value(self, source: SourceKind, year: int) -> float:
        if source is SourceKind.CEMENT:
            raise UnsupportedSourceError("cement has no heating value")
        series = self.by_year.get(source)
        if series is not None and year in series:
            return series[year]
        if source not in self.fallback:
            raise ConfigurationError(f"no heating value configured for {source.value}")
        if series:
            logger.warning(
                "heating value for %s has no entry for %d, using fallback %.4g GJ",
                source.value,
                year,
                self.fallback[source],
            )
        return self.fallback[source]


@dataclass(frozen=True)
class EmissionFactorSet:
    """One scenario's factor assumptions: v (GJ/native unit), c (tC/TJ),
    o (oxidised fraction) per fuel, and the cement process factor (tC/t).

    ``cement_factor=None`` means the scenario cannot price cement at all;
    there is deliberately no built-in default for it.
    """

    scenario_name: str
    v: HeatingValueSeries
    c: Mapping[SourceKind, float]
    o: Mapping[SourceKind, float]
    cement_factor: float | None = None

    def __post_init__(self) -> None:
        if not self.scenario_name:
            raise ValueError("scenario_name must be non-empty")
        for source, value in self.c.items():
            if source is SourceKind.CEMENT:
                raise UnsupportedSourceError("cement uses cement_factor, not c")
            if value <= 0:
                raise ValueError(f"carbon content for {source.value} must be > 0")
        for source, value in self.o.items():
            if source is SourceKind.CEMENT:
                raise UnsupportedSourceError("cement uses cement_factor, not o")
            if not 0 < value <= 1:
                raise ValueError(
                    f"oxidation rate for {source.value} must be in (0, 1], got {value}"
                )
        if self.cement_factor is not None and self.cement_factor < 0:
            raise ValueError("cement_factor must be >= 0")

    def carbon_content(self, source: SourceKind) -> float:
        if source not in self.c:
            raise ConfigurationError(
                f"scenario {self.scenario_name!r} has no carbon content for {source.value}"
            )
        return self.c[source]

    def oxidation(self, source: SourceKind) -> float:
        if source not in self.o:
            raise ConfigurationError(
                f"scenario {self.scenario_name!r} has no oxidation rate for {source.value}"
            )
        return self.o[source]


def convert_unit(
    q: Quantity, source: SourceKind, year: int, hv: HeatingValueSeries
) -> Quantity:
    """Convert a native-unit fuel quantity to energy (TJ) at that year's
    heating value. Linear in the magnitude; sign is preserved."""
    if source is SourceKind.CEMENT:
        raise UnsupportedSourceError("cement quantities have no energy equivalent")
    if q.unit is not native_unit(source):
        raise UnitMismatchError(
            f"{source.value} expects {native_unit(source).value}, got {q.unit.value}"
        )
    return Quantity(q.magnitude * hv.value(source, year) / 1000.0, Unit.TJ)


def co2_from_carbon(q: Quantity) -> Quantity:
    """Carbon mass (tC) to CO2 mass (tCO2), exact 44/12."""
    if q.unit is not Unit.T_C:
        raise UnitMismatchError(f"expected {Unit.T_C.value}, got {q.unit.value}")
    if q.magnitude < 0:
        raise ValueError("carbon mass must be >= 0")
    return Quantity(q.magnitude * CO2_PER_C, Unit.T_CO2)


def carbon_from_co2(q: Quantity) -> Quantity:
    """CO2 mass (tCO2) back to carbon mass (tC).

    Divides by the same 44/12 constant the forward conversion multiplies by,
    which keeps the round trip within one ulp.
    """
    if q.unit is not Unit.T_CO2:
        raise UnitMismatchError(f"expected {Unit.T_CO2.value}, got {q.unit.value}")
    if q.magnitude < 0:
        raise ValueError("CO2 mass must be >= 0")
    return Quantity(q.magnitude / CO2_PER_C, Unit.T_C)
