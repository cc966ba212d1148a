"""Partial-year to full-year growth nowcasting.

The projection machinery answers one question: given the first n months of
a year (official annual figures lag by up to two years), how much did each
source grow over the full year, with what one-sigma range?

Approach: for every (source, flow kind) the historical panel provides
pairs (cumulative first-n-months YoY growth, full-year YoY growth). An OLS
line links the two, and a Student-t prediction interval with n-2 degrees
of freedom quantifies what the late months can still change. Projected
production/import/export levels are then pushed through the mass balance;
the stock-change term, which has no monthly statistics, enters as a normal
draw around its historical mean with the historical standard deviation.
Per-source emission growth intervals are finally combined into a total by
prior-year emission shares, sampling each source as an independent normal
matched to its 68% interval.

All Monte Carlo here follows the substream contract of
:mod:`carbonledger.uncertainty` (purpose keys 0..3 for the per-source
streams, 4 for the combination stream).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy import stats

from .balance import apparent_native
from .domain import (
    ConfigurationError,
    EmissionFactorSet,
    InsufficientDataError,
    MissingDataError,
    SOURCE_ORDER,
    SourceKind,
)
from .emission import EmissionEstimate, fmt_sig, present_sources, total_emissions
from .ingest import Dataset, cumulative_months
from .uncertainty import UncertaintySpec, stock_change_sigma, substream

FLOW_FIELDS = ("production", "imports", "exports")

# z such that Phi(z) = 0.84; converts a 16th-84th percentile half-width
# into the sigma of the matching normal
Z84 = float(stats.norm.ppf(0.84))

_SOURCE_STREAM = {source: index for index, source in enumerate(SOURCE_ORDER)}
_COMBINE_STREAM = len(SOURCE_ORDER)


@dataclass(frozen=True)
class PartialYearModel:
    """OLS fit of full-year growth on first-n-months growth (percent units)."""

    n: int
    slope: float
    intercept: float
    residual_se: float
    r2: float
    mean_x: float
    sxx: float
    source: SourceKind | None = None
    flow: str | None = None


def fit_partial_year_model(
    pairs: Sequence[tuple[float, float]],
    source: SourceKind | None = None,
    flow: str | None = None,
) -> PartialYearModel:
    """Least-squares line through (partial-year growth, full-year growth)
    pairs. Needs >= 3 pairs and non-degenerate x variance."""
    n = len(pairs)
    if n < 3:
        raise InsufficientDataError(f"regression needs >= 3 pairs, got {n}")
    x = np.array([p[0] for p in pairs], dtype=float)
    y = np.array([p[1] for p in pairs], dtype=float)
    mean_x = float(x.mean())
    mean_y = float(y.mean())
    sxx = float(((x - mean_x) ** 2).sum())
    if sxx <= 0:
        raise InsufficientDataError("all partial-year growths identical; zero x variance")
    slope = float(((x - mean_x) * (y - mean_y)).sum()) / sxx
    intercept = mean_y - slope * mean_x
    residuals = y - (intercept + slope * x)
    ssr = float((residuals**2).sum())
    sst = float(((y - mean_y) ** 2).sum())
    residual_se = math.sqrt(ssr / (n - 2))
    r2 = 1.0 if sst == 0 else min(1.0, max(0.0, 1.0 - ssr / sst))
    return PartialYearModel(
        n=n,
        slope=slope,
        intercept=intercept,
        residual_se=residual_se,
        r2=r2,
        mean_x=mean_x,
        sxx=sxx,
        source=source,
        flow=flow,
    )


def project_full_year(
    model: PartialYearModel, g_first: float, level: float = 0.68
) -> tuple[float, float, float]:
    """Point projection and prediction interval for a new partial-year
    growth observation.

    The half-width is t_{(1+level)/2, n-2} * residual_se *
    sqrt(1 + 1/n + (x - mean_x)^2 / sxx): widest far from the fitted
    panel's centre, never narrower than the residual scatter.
    """
    if not 0 < level < 1:
        raise ValueError(f"confidence level must be in (0, 1), got {level}")
    central = model.intercept + model.slope * g_first
    t = float(stats.t.ppf((1 + level) / 2, model.n - 2))
    half = (
        t
        * model.residual_se
        * math.sqrt(1.0 + 1.0 / model.n + (g_first - model.mean_x) ** 2 / model.sxx)
    )
    return central, central - half, central + half


@dataclass(frozen=True)
class GrowthBand:
    """Percent growth with its one-sigma (16th-84th percentile) range."""

    central: float
    lo68: float
    hi68: float

    def __post_init__(self) -> None:
        slack = 1e-9 * max(1.0, abs(self.central))
        if not self.lo68 - slack <= self.central <= self.hi68 + slack:
            raise ValueError(
                f"band [{self.lo68}, {self.hi68}] does not bracket central {self.central}"
            )

    @property
    def half_width(self) -> float:
        return (self.hi68 - self.lo68) / 2.0

    @property
    def sigma(self) -> float:
        """Sigma of the normal whose 16th-84th band matches this one."""
        return self.half_width / Z84

    @property
    def midpoint(self) -> float:
        return (self.lo68 + self.hi68) / 2.0


@dataclass(frozen=True)
class GrowthProjection:
    per_source: Mapping[SourceKind, GrowthBand]
    total: GrowthBand
    basis_months: int

    def __post_init__(self) -> None:
        if not 1 <= self.basis_months <= 11:
            raise ValueError(f"basis_months {self.basis_months} outside [1, 11]")


def growth_pairs(
    dataset: Dataset,
    sources: SourceKind | Sequence[SourceKind],
    flow: str,
    months: int,
    last_year: int,
) -> list[tuple[float, float]]:
    """Historical (first-n-months growth, full-year growth) pairs up to and
    including ``last_year``. Years lacking a complete prefix, an annual
    record, or a positive base drop out silently."""
    if flow not in FLOW_FIELDS:
        raise ValueError(f"flow must be one of {FLOW_FIELDS}, got {flow!r}")
    if isinstance(sources, SourceKind):
        sources = [sources]
    pairs = []
    for source in sources:
        years = set(dataset.annual_years(source))
        for year in sorted(years):
            if year > last_year or (year - 1) not in years:
                continue
            try:
                cum_now = cumulative_months(dataset, source, year, months)
                cum_prev = cumulative_months(dataset, source, year - 1, months)
            except MissingDataError:
                continue
            annual_now = dataset.annual_flow(year, source)
            annual_prev = dataset.annual_flow(year - 1, source)
            x_base = getattr(cum_prev, flow).magnitude
            y_base = getattr(annual_prev, flow).magnitude
            if x_base <= 0 or y_base <= 0:
                continue
            x = 100.0 * (getattr(cum_now, flow).magnitude - x_base) / x_base
            y = 100.0 * (getattr(annual_now, flow).magnitude - y_base) / y_base
            pairs.append((x, y))
    return pairs


def current_prefix_growth(
    dataset: Dataset, source: SourceKind, flow: str, target_year: int, months: int
) -> float:
    """YoY growth of the target year's first-n-months cumulative flow."""
    cum_now = cumulative_months(dataset, source, target_year, months)
    cum_prev = cumulative_months(dataset, source, target_year - 1, months)
    base = getattr(cum_prev, flow).magnitude
    if base <= 0:
        raise ValueError(
            f"nonpositive {flow} base for {source.value} in {target_year - 1}"
        )
    return 100.0 * (getattr(cum_now, flow).magnitude - base) / base


def stock_projection_sigma(
    dataset: Dataset, source: SourceKind, upto_year: int
) -> tuple[float, float]:
    """(central, sigma) for the projected year's unknown stock-change term:
    mean and sample standard deviation of the annual history."""
    years = [y for y in dataset.annual_years(source) if y <= upto_year]
    series = [dataset.annual_flow(y, source).stock_change.magnitude for y in years]
    sigma = stock_change_sigma(series)
    return float(np.mean(series)), sigma


def _flow_level_projection(
    dataset: Dataset,
    source: SourceKind,
    flow: str,
    target_year: int,
    months: int,
    base_level: float,
    pooled: bool,
) -> tuple[float, float]:
    """(central level, level sigma) of one flow kind in the target year."""
    if base_level == 0.0:
        # flows that are identically zero (e.g. no trade) stay zero
        cum = cumulative_months(dataset, source, target_year, months)
        if getattr(cum, flow).magnitude == 0.0:
            return 0.0, 0.0
        raise ValueError(
            f"{source.value} {flow} has zero base in {target_year - 1} but a"
            f" nonzero prefix in {target_year}; growth undefined"
        )
    fit_sources = list(dataset_fuels(dataset)) if pooled and source is not SourceKind.CEMENT else source
    pairs = growth_pairs(dataset, fit_sources, flow, months, last_year=target_year - 1)
    model = fit_partial_year_model(pairs, source=None if pooled else source, flow=flow)
    g_now = current_prefix_growth(dataset, source, flow, target_year, months)
    central, lo, hi = project_full_year(model, g_now)
    level = base_level * (1.0 + central / 100.0)
    sigma = base_level * ((hi - lo) / 2.0 / Z84) / 100.0
    return level, sigma


def dataset_fuels(dataset: Dataset) -> list[SourceKind]:
    return [s for s in present_sources(dataset) if s is not SourceKind.CEMENT]


def project_source_growth(
    dataset: Dataset,
    source: SourceKind,
    target_year: int,
    months: int,
    scenario: EmissionFactorSet,
    spec: UncertaintySpec,
    pooled: bool = False,
) -> GrowthBand:
    """Full-year emission growth band for one source.

    Fuels: project production/import/export levels from their partial-year
    regressions, sample the stock-change term from its historical
    distribution, run the mass balance per draw, and convert to energy
    growth (heating values of the two years included, factors cancel).
    Cement: emission growth is production growth, so the regression's
    prediction interval is the band.
    """
    prev = dataset.annual_flow(target_year - 1, source)
    if prev is None:
        raise MissingDataError(f"no annual record for {target_year - 1}/{source.value}")

    if source is SourceKind.CEMENT:
        pairs = growth_pairs(dataset, source, "production", months, last_year=target_year - 1)
        model = fit_partial_year_model(pairs, source=source, flow="production")
        g_now = current_prefix_growth(dataset, source, "production", target_year, months)
        central, lo, hi = project_full_year(model, g_now)
        return GrowthBand(central, lo, hi)

    levels = {}
    sigmas = {}
    for flow in FLOW_FIELDS:
        base = getattr(prev, flow).magnitude
        levels[flow], sigmas[flow] = _flow_level_projection(
            dataset, source, flow, target_year, months, base, pooled
        )
    stock_central, stock_sigma = stock_projection_sigma(dataset, source, target_year - 1)
    non_energy = prev.non_energy_use.magnitude

    ac_prev = apparent_native(
        prev.production.magnitude,
        prev.imports.magnitude,
        prev.exports.magnitude,
        prev.stock_change.magnitude,
        non_energy,
    )
    if ac_prev <= 0:
        raise ValueError(
            f"apparent consumption of {source.value} in {target_year - 1} is"
            f" {ac_prev}; growth base must be positive"
        )
    v_prev = scenario.v.value(source, target_year - 1)
    v_now = scenario.v.value(source, target_year)
    energy_prev = ac_prev * v_prev

    def growth_of(ac_now: float) -> float:
        return 100.0 * (ac_now * v_now / energy_prev - 1.0)

    central_ac = apparent_native(
        levels["production"], levels["imports"], levels["exports"], stock_central, non_energy
    )
    central = growth_of(central_ac)

    tag = _SOURCE_STREAM[source]
    draws = np.empty(spec.draws)
    scale = np.array(
        [sigmas["production"], sigmas["imports"], sigmas["exports"], stock_sigma]
    )
    base_vec = np.array(
        [levels["production"], levels["imports"], levels["exports"], stock_central]
    )
    for i in range(spec.draws):
        z = substream(spec.seed, i, key_path=(tag,)).standard_normal(4)
        p, imp, exp_, stock = base_vec + scale * z
        draws[i] = growth_of(apparent_native(p, imp, exp_, stock, non_energy))
    lo, hi = np.quantile(np.sort(draws), [0.16, 0.84])
    return GrowthBand(central, float(lo), float(hi))


def combine_total_growth(
    per_source: Mapping[SourceKind, GrowthBand],
    prior_year: EmissionEstimate,
    spec: UncertaintySpec,
    basis_months: int = 10,
) -> GrowthProjection:
    """Total growth as the prior-year-share weighted mean of the source
    growths; the interval samples each source as an independent normal
    matched to its 68% band."""
    total = prior_year.total.magnitude
    if total <= 0:
        raise ValueError("prior-year total must be > 0")
    shares = {
        source: quantity.magnitude / total
        for source, quantity in prior_year.per_source.items()
    }
    if any(share < 0 for share in shares.values()):
        raise ValueError("prior-year per-source emissions must be >= 0")
    if abs(sum(shares.values()) - 1.0) > 1e-6:
        raise ValueError(
            f"prior-year shares sum to {sum(shares.values())!r}, not 1 within 1e-6"
        )
    missing = [s.value for s, w in shares.items() if w > 0 and s not in per_source]
    if missing:
        raise ConfigurationError(f"missing source projections for: {missing}")

    active = [s for s in SOURCE_ORDER if shares.get(s, 0.0) > 0]
    central = sum(shares[s] * per_source[s].central for s in active)
    if len(active) == 1:
        # degenerate weighting: the total is that source's band verbatim
        band = per_source[active[0]]
        total_band = GrowthBand(band.central, band.lo68, band.hi68)
    else:
        weights = np.array([shares[s] for s in active])
        mids = np.array([per_source[s].midpoint for s in active])
        sigmas = np.array([per_source[s].sigma for s in active])
        draws = np.empty(spec.draws)
        for i in range(spec.draws):
            z = substream(spec.seed, i, key_path=(_COMBINE_STREAM,)).standard_normal(len(active))
            draws[i] = float(weights @ (mids + sigmas * z))
        lo, hi = np.quantile(np.sort(draws), [0.16, 0.84])
        total_band = GrowthBand(central, min(float(lo), central), max(float(hi), central))
    return GrowthProjection(
        per_source=dict(per_source), total=total_band, basis_months=basis_months
    )


def project_emission_growth(
    dataset: Dataset,
    scenario: EmissionFactorSet,
    target_year: int,
    months: int = 10,
    spec: UncertaintySpec | None = None,
    pooled: bool = False,
) -> GrowthProjection:
    """End-to-end nowcast: per-source bands plus the share-weighted total."""
    spec = spec or UncertaintySpec()
    per_source = {
        source: project_source_growth(
            dataset, source, target_year, months, scenario, spec, pooled=pooled
        )
        for source in present_sources(dataset)
    }
    prior = total_emissions(dataset, scenario, [target_year - 1])[0]
    return combine_total_growth(per_source, prior, spec, basis_months=months)


PROJECTION_HEADER = ["source", "basis_months", "growth_central_pct", "lo68_pct", "hi68_pct"]


def write_projection_csv(projection: GrowthProjection, out, sig: int = 6) -> None:
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(PROJECTION_HEADER)
    for source in SOURCE_ORDER:
        if source not in projection.per_source:
            continue
        band = projection.per_source[source]
        writer.writerow(
            [
                source.value,
                projection.basis_months,
                fmt_sig(band.central, sig),
                fmt_sig(band.lo68, sig),
                fmt_sig(band.hi68, sig),
            ]
        )
    writer.writerow(
        [
            "total",
            projection.basis_months,
            fmt_sig(projection.total.central, sig),
            fmt_sig(projection.total.lo68, sig),
            fmt_sig(projection.total.hi68, sig),
        ]
    )


def format_projection_line(label: str, band: GrowthBand) -> str:
    return (
        f"{label}: {band.central:+.1f}%"
        f" (range: {band.lo68:+.1f}% to {band.hi68:+.1f}%)"
    )
