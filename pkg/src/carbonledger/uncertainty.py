"""Monte Carlo propagation of input uncertainties to emission totals.

Random-number contract
----------------------
Streams come from numpy's Philox 4x64 counter-based generator. Draw ``i``
of a run seeded with ``s`` uses ``Philox(key=s, counter=[0, 0, i, 0])``:
the substream is a pure function of (seed, draw index), so results are
bit-identical across reruns and across any partitioning of the draw range
over workers. Purpose-scoped runs (the per-source projection streams in
:mod:`carbonledger.nowcast`) derive their key through a SeedSequence spawn
key instead, keeping them independent of the band streams.

Each uncertain input is perturbed by an independent relative normal factor
``1 + sigma * z`` with ``z`` truncated at +/-4 (violations are resampled
from the same substream). Perturbed factors are not re-clamped to physical
ranges; truncation is what keeps fuel quantities positive at small sigmas.
Percentile reduction sorts the full draw vector, so accumulation order
cannot matter.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Mapping, Sequence

import numpy as np

from .balance import apparent_native
from .domain import (
    ConfigurationError,
    EmissionFactorSet,
    FUEL_SOURCES,
    InsufficientDataError,
    Quantity,
    SOURCE_ORDER,
    SourceKind,
    Unit,
)
from .emission import cement_emission_tco2, fmt_sig, fuel_emission_tco2, present_sources

if TYPE_CHECKING:  # pragma: no cover
    from .ingest import Dataset

MIN_DRAWS_FOR_BAND = 100
TRUNCATION_SIGMAS = 4.0
_MASK64 = (1 << 64) - 1

FUEL_INPUT_KINDS = (
    "production",
    "import",
    "export",
    "stock_change",
    "statistical_error",
    "heating_value",
    "carbon_content",
    "oxidation",
)
CEMENT_INPUT_KINDS = ("cement_production", "cement_factor")
INPUT_KINDS = FUEL_INPUT_KINDS + CEMENT_INPUT_KINDS

# Relative one-sigma defaults: production and trade statistics are good to
# about 2%, carbon content from sampling campaigns to 0.3%; the residual
# statistical error on apparent consumption is kept at the same 2% level.
DEFAULT_FUEL_SIGMAS = {
    "production": 0.02,
    "import": 0.02,
    "export": 0.02,
    "statistical_error": 0.02,
    "carbon_content": 0.003,
}
DEFAULT_CEMENT_PRODUCTION_SIGMA = 0.02


def default_sigmas() -> dict[tuple[str, SourceKind], float]:
    sigmas: dict[tuple[str, SourceKind], float] = {}
    for source in FUEL_SOURCES:
        for kind, value in DEFAULT_FUEL_SIGMAS.items():
            sigmas[(kind, source)] = value
    sigmas[("cement_production", SourceKind.CEMENT)] = DEFAULT_CEMENT_PRODUCTION_SIGMA
    return sigmas


@dataclass(frozen=True)
class UncertaintySpec:
    """Relative one-sigma values per (input kind, source), plus the draw
    count and seed every stochastic routine in the package keys off."""

    sigmas: Mapping[tuple[str, SourceKind], float] = field(default_factory=default_sigmas)
    draws: int = 10000
    seed: int = 0

    def __post_init__(self) -> None:
        if self.draws < 1:
            raise ValueError("draws must be >= 1")
        for (kind, source), sigma in self.sigmas.items():
            if kind not in INPUT_KINDS:
                raise ConfigurationError(f"unknown uncertain input kind {kind!r}")
            if kind in CEMENT_INPUT_KINDS and source is not SourceKind.CEMENT:
                raise ConfigurationError(f"{kind} applies to cement, not {source.value}")
            if kind in FUEL_INPUT_KINDS and source is SourceKind.CEMENT:
                raise ConfigurationError(f"{kind} does not apply to cement")
            if sigma < 0:
                raise ValueError(f"sigma for ({kind}, {source.value}) must be >= 0")

    def sigma(self, kind: str, source: SourceKind) -> float:
        return self.sigmas.get((kind, source), 0.0)

    def active(self) -> list[tuple[str, SourceKind, float]]:
        """Nonzero-sigma inputs in canonical (kind, source) order."""
        items = [
            (kind, source, sigma)
            for (kind, source), sigma in self.sigmas.items()
            if sigma > 0
        ]
        items.sort(key=lambda t: (INPUT_KINDS.index(t[0]), SOURCE_ORDER.index(t[1])))
        return items

    def replace(self, **kwargs) -> "UncertaintySpec":
        params = {"sigmas": self.sigmas, "draws": self.draws, "seed": self.seed}
        params.update(kwargs)
        return UncertaintySpec(**params)


@dataclass(frozen=True)
class UncertaintyResult:
    """Central estimate with the empirical 16th/84th percentile band.

    ``lo68``/``hi68`` are None when the band was refused (too few draws) and
    equal to ``central`` when every sigma is zero.
    """

    central: Quantity
    lo68: Quantity | None
    hi68: Quantity | None
    draws_used: int
    contributions: Mapping[tuple[str, SourceKind], float] | None = None


def substream(seed: int, draw_index: int, key_path: tuple[int, ...] = ()) -> np.random.Generator:
    """Generator for one draw, derived purely from (seed, draw index) and an
    optional purpose key. See the module docstring for the exact contract."""
    if key_path:
        ss = np.random.SeedSequence(entropy=seed & _MASK64, spawn_key=key_path)
        bitgen = np.random.Philox(seed=ss, counter=[0, 0, draw_index, 0])
    else:
        bitgen = np.random.Philox(key=seed & _MASK64, counter=[0, 0, draw_index, 0])
    return np.random.Generator(bitgen)


def truncated_standard_normals(
    gen: np.random.Generator, n: int, cap: float = TRUNCATION_SIGMAS
) -> np.ndarray:
    z = gen.standard_normal(n)
    bad = np.abs(z) > cap
    while bad.any():
        z[bad] = gen.standard_normal(int(bad.sum()))
        bad = np.abs(z) > cap
    return z


@dataclass(frozen=True)
class _FuelInputs:
    production: float
    imports: float
    exports: float
    stock_change: float
    non_energy_use: float
    heating_value: float
    carbon_content: float
    oxidation: float


@dataclass(frozen=True)
class YearInputs:
    """Plain-float view of one year's flows and factors, in canonical source
    order, so the draw loop touches no domain objects."""

    year: int
    fuels: Mapping[SourceKind, _FuelInputs]
    cement: tuple[float, float] | None  # (production t, factor tC/t)


def collect_year_inputs(
    dataset: "Dataset", scenario: EmissionFactorSet, year: int
) -> YearInputs:
    from .emission import total_emissions  # local: avoids import at module load

    # reuse the gap checking of the deterministic path
    total_emissions(dataset, scenario, [year])
    fuels: dict[SourceKind, _FuelInputs] = {}
    cement = None
    for source in present_sources(dataset):
        record = dataset.annual_flow(year, source)
        if source is SourceKind.CEMENT:
            if scenario.cement_factor is None:
                raise ConfigurationError(
                    f"scenario {scenario.scenario_name!r} has no cement_factor configured"
                )
            cement = (record.production.magnitude, scenario.cement_factor)
        else:
            fuels[source] = _FuelInputs(
                production=record.production.magnitude,
                imports=record.imports.magnitude,
                exports=record.exports.magnitude,
                stock_change=record.stock_change.magnitude,
                non_energy_use=record.non_energy_use.magnitude,
                heating_value=scenario.v.value(source, year),
                carbon_content=scenario.carbon_content(source),
                oxidation=scenario.oxidation(source),
            )
    return YearInputs(year=year, fuels=fuels, cement=cement)


def evaluate_total(
    inputs: YearInputs, factors: Mapping[tuple[str, SourceKind], float]
) -> float:
    """Total tCO2 with each input scaled by its perturbation factor (absent
    keys mean 1.0). The unperturbed call is the band's central value."""
    get = factors.get
    total = 0.0
    for source, f in inputs.fuels.items():
        native = apparent_native(
            f.production * get(("production", source), 1.0),
            f.imports * get(("import", source), 1.0),
            f.exports * get(("export", source), 1.0),
            f.stock_change * get(("stock_change", source), 1.0),
            f.non_energy_use,
        ) * get(("statistical_error", source), 1.0)
        energy_tj = native * f.heating_value * get(("heating_value", source), 1.0) / 1000.0
        total += fuel_emission_tco2(
            energy_tj,
            f.carbon_content * get(("carbon_content", source), 1.0),
            f.oxidation * get(("oxidation", source), 1.0),
        )
    if inputs.cement is not None:
        production, factor = inputs.cement
        total += cement_emission_tco2(
            production * get(("cement_production", SourceKind.CEMENT), 1.0),
            factor * get(("cement_factor", SourceKind.CEMENT), 1.0),
        )
    return total


def relevant_active(
    spec: UncertaintySpec, inputs: YearInputs
) -> list[tuple[str, SourceKind, float]]:
    """Active inputs that can actually move this year's total: fuel kinds
    for fuels present, cement kinds only when cement is present."""
    return [
        (kind, source, sigma)
        for kind, source, sigma in spec.active()
        if (source in inputs.fuels) or (kind in CEMENT_INPUT_KINDS and inputs.cement is not None)
    ]


def draw_totals(
    inputs: YearInputs,
    active: Sequence[tuple[str, SourceKind, float]],
    seed: int,
    start: int,
    stop: int,
) -> np.ndarray:
    """Perturbed totals for draw indices [start, stop); any partitioning of
    the index range concatenates to the same vector."""
    keys = [(kind, source) for kind, source, _ in active]
    sigmas = np.array([sigma for _, _, sigma in active])
    out = np.empty(stop - start)
    for i in range(start, stop):
        z = truncated_standard_normals(substream(seed, i), len(active))
        factors = dict(zip(keys, 1.0 + sigmas * z))
        out[i - start] = evaluate_total(inputs, factors)
    return out


def monte_carlo_band(
    dataset: "Dataset",
    scenario: EmissionFactorSet,
    year: int,
    spec: UncertaintySpec,
) -> UncertaintyResult:
    """One-sigma band on the year's total from ``spec.draws`` perturbed
    recomputations. Bit-identical for identical (inputs, spec, seed)."""
    inputs = collect_year_inputs(dataset, scenario, year)
    central = evaluate_total(inputs, {})
    active = relevant_active(spec, inputs)
    if not active:
        q = Quantity(central, Unit.T_CO2)
        return UncertaintyResult(central=q, lo68=q, hi68=q, draws_used=0)
    if spec.draws < MIN_DRAWS_FOR_BAND:
        return UncertaintyResult(
            central=Quantity(central, Unit.T_CO2), lo68=None, hi68=None, draws_used=0
        )
    totals = draw_totals(inputs, active, spec.seed, 0, spec.draws)
    lo, hi = np.quantile(np.sort(totals), [0.16, 0.84])
    return UncertaintyResult(
        central=Quantity(central, Unit.T_CO2),
        lo68=Quantity(float(lo), Unit.T_CO2),
        hi68=Quantity(float(hi), Unit.T_CO2),
        draws_used=spec.draws,
    )


def contribution_decomposition(
    dataset: "Dataset",
    scenario: EmissionFactorSet,
    year: int,
    spec: UncertaintySpec,
) -> dict[tuple[str, SourceKind], float]:
    """One-at-a-time variance attribution: each input is perturbed alone
    (same substreams as the band run), and its share is its variance over
    the sum of all single-input variances. Descending order."""
    inputs = collect_year_inputs(dataset, scenario, year)
    active = relevant_active(spec, inputs)
    if not active:
        raise ConfigurationError("all sigmas are zero; contributions are undefined")
    n = len(active)
    totals = np.empty((n, spec.draws))
    for i in range(spec.draws):
        z = truncated_standard_normals(substream(spec.seed, i), n)
        for j, (kind, source, sigma) in enumerate(active):
            totals[j, i] = evaluate_total(inputs, {(kind, source): 1.0 + sigma * z[j]})
    variances = totals.var(axis=1, ddof=1)
    total_var = float(variances.sum())
    if total_var == 0.0:
        raise ConfigurationError("total variance is zero; contributions are undefined")
    shares = {
        (kind, source): 100.0 * float(var) / total_var
        for (kind, source, _), var in zip(active, variances)
    }
    return dict(sorted(shares.items(), key=lambda kv: kv[1], reverse=True))


def stock_change_sigma(series: Sequence[float] | Mapping[int, float]) -> float:
    """Sample standard deviation (n-1 denominator) of an annual stock-change
    history, in native units. Needs at least 3 values."""
    values = list(series.values()) if isinstance(series, Mapping) else list(series)
    if len(values) < 3:
        raise InsufficientDataError(
            f"stock-change sigma needs >= 3 annual values, got {len(values)}"
        )
    return float(np.std(np.asarray(values, dtype=float), ddof=1))


BAND_HEADER = ["year", "scenario", "central_MtCO2", "lo68", "hi68", "draws", "seed"]
CONTRIBUTIONS_HEADER = ["factor", "source", "share_percent"]


def write_band_csv(result: UncertaintyResult, year: int, scenario_name: str,
                   spec: UncertaintySpec, out, sig: int = 6) -> None:
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(BAND_HEADER)
    writer.writerow(
        [
            year,
            scenario_name,
            fmt_sig(result.central.magnitude / 1e6, sig),
            fmt_sig(result.lo68.magnitude / 1e6 if result.lo68 else None, sig),
            fmt_sig(result.hi68.magnitude / 1e6 if result.hi68 else None, sig),
            result.draws_used,
            spec.seed,
        ]
    )


def write_contributions_csv(
    contributions: Mapping[tuple[str, SourceKind], float], out, sig: int = 6
) -> None:
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(CONTRIBUTIONS_HEADER)
    for (kind, source), share in contributions.items():
        writer.writerow([kind, source.value, fmt_sig(share, sig)])
