"""carbonledger: national fuel-cycle CO2 accounting and nowcasting.

Library layout mirrors the pipeline: :mod:`domain` (units, flows, factor
sets), :mod:`ingest` (CSV and config parsing), :mod:`balance` (apparent
consumption), :mod:`emission` (factor chain, scenarios), :mod:`uncertainty`
(Monte Carlo bands), :mod:`nowcast` (partial-year growth projection),
:mod:`cli` (batch front end).
"""

__version__ = "0.1.0"

from .balance import ApparentConsumption, GrowthRate, apparent_consumption, yoy_growth
from .domain import (
    CarbonLedgerError,
    EmissionFactorSet,
    FlowRecord,
    HeatingValueSeries,
    Period,
    Quantity,
    SourceKind,
    Unit,
    co2_from_carbon,
    convert_unit,
    validate_flow,
)
from .emission import (
    DriverIndicators,
    EmissionEstimate,
    cement_emissions,
    fuel_emissions,
    intensity_indicators,
    scenario_compare,
    total_emissions,
)
from .ingest import (
    Dataset,
    ScenarioConfig,
    cumulative_months,
    load_dataset,
    parse_flows_csv,
    parse_scenario_config,
    preset,
)
from .nowcast import (
    GrowthBand,
    GrowthProjection,
    PartialYearModel,
    combine_total_growth,
    fit_partial_year_model,
    project_emission_growth,
    project_full_year,
)
from .uncertainty import (
    UncertaintyResult,
    UncertaintySpec,
    contribution_decomposition,
    monte_carlo_band,
    stock_change_sigma,
)

__all__ = [
    "__version__",
    "ApparentConsumption",
    "CarbonLedgerError",
    "Dataset",
    "DriverIndicators",
    "EmissionEstimate",
    "EmissionFactorSet",
    "FlowRecord",
    "GrowthBand",
    "GrowthProjection",
    "GrowthRate",
    "HeatingValueSeries",
    "PartialYearModel",
    "Period",
    "Quantity",
    "ScenarioConfig",
    "SourceKind",
    "UncertaintyResult",
    "UncertaintySpec",
    "Unit",
    "apparent_consumption",
    "cement_emissions",
    "co2_from_carbon",
    "combine_total_growth",
    "contribution_decomposition",
    "convert_unit",
    "cumulative_months",
    "fit_partial_year_model",
    "fuel_emissions",
    "intensity_indicators",
    "load_dataset",
    "monte_carlo_band",
    "parse_flows_csv",
    "parse_scenario_config",
    "preset",
    "project_emission_growth",
    "project_full_year",
    "scenario_compare",
    "stock_change_sigma",
    "total_emissions",
    "validate_flow",
    "yoy_growth",
]
