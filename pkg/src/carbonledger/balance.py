"""Apparent-consumption mass balances and growth-rate arithmetic.

Apparent consumption infers fuel availability from supply-side statistics:

    production + imports - exports - stock_change - non_energy_use

with stock_change > 0 meaning a net inventory build (so it reduces what was
burned). A negative balance is possible under large stock builds; it is
preserved and flagged anomalous rather than clamped, since clamping would
bias totals.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

from .domain import (
    FlowRecord,
    HeatingValueSeries,
    MissingDataError,
    Period,
    Quantity,
    SourceKind,
    UnsupportedSourceError,
    convert_unit,
    native_unit,
)


@dataclass(frozen=True)
class ApparentConsumption:
    """Mass-balance result in the source's native unit and in TJ."""

    source: SourceKind
    period: Period
    native: Quantity
    energy: Quantity
    anomalous: bool = False


@dataclass(frozen=True)
class GrowthRate:
    """Year-over-year percent change between two same-basis periods."""

    base_period: Period
    period: Period
    rate: float


def apparent_native(
    production: float,
    imports: float,
    exports: float,
    stock_change: float,
    non_energy_use: float,
) -> float:
    """Plain-float mass balance; shared by the record path and the Monte
    Carlo perturbation path so both compute through one formula."""
    return production + imports - exports - stock_change - non_energy_use


def apparent_consumption(
    record: FlowRecord, heating_values: HeatingValueSeries
) -> ApparentConsumption:
    """Balance one validated flow record and convert it to energy at the
    record year's heating value (monthly records use the annual value)."""
    if record.source is SourceKind.CEMENT:
        raise UnsupportedSourceError("cement does not enter the energy balance")
    native = Quantity(
        apparent_native(
            record.production.magnitude,
            record.imports.magnitude,
            record.exports.magnitude,
            record.stock_change.magnitude,
            record.non_energy_use.magnitude,
        ),
        native_unit(record.source),
    )
    energy = convert_unit(native, record.source, record.period.year, heating_values)
    return ApparentConsumption(
        source=record.source,
        period=record.period,
        native=native,
        energy=energy,
        anomalous=native.magnitude < 0,
    )


def _magnitude(value) -> float:
    return value.magnitude if isinstance(value, Quantity) else float(value)


def yoy_growth(series: Mapping[Period, object], at: Period) -> GrowthRate:
    """Percent change at ``at`` relative to the same-basis period one year
    earlier. Both periods must exist and the base must be > 0."""
    base_period = at.previous_year()
    if at not in series:
        raise MissingDataError(f"no value for {at}")
    if base_period not in series:
        raise MissingDataError(f"no predecessor value for {base_period}")
    base = _magnitude(series[base_period])
    current = _magnitude(series[at])
    if base <= 0:
        raise ValueError(f"growth undefined on nonpositive base {base} at {base_period}")
    return GrowthRate(base_period, at, 100.0 * (current - base) / base)


def driver_growth(
    products: Mapping[tuple[str, Period], float],
    product: str,
    year: int,
    n_months: int,
) -> GrowthRate:
    """Year-over-year growth of a product's cumulative first-n-months output,
    always comparing identical prefixes."""
    sums = {}
    for y in (year - 1, year):
        total = 0.0
        missing = [m for m in range(1, n_months + 1) if (product, Period(y, m)) not in products]
        if missing:
            raise MissingDataError(
                f"{product}: months {missing} of {y} missing from the first-{n_months} prefix"
            )
        for m in range(1, n_months + 1):
            total += products[(product, Period(y, m))]
        sums[y] = total
    series = {Period(y, n_months): v for y, v in sums.items()}
    return yoy_growth(series, Period(year, n_months))
