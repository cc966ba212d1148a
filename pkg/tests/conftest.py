import pytest

from carbonledger.domain import (
    FlowRecord,
    Period,
    Quantity,
    SourceKind,
    native_unit,
)
from carbonledger.ingest import load_dataset, parse_scenario_config

DATA_FILES = ["flows.csv", "gdp.csv", "products.csv", "scenarios.toml"]


def make_flow(
    source=SourceKind.COAL,
    year=2017,
    month=None,
    production=100.0,
    imports=0.0,
    exports=0.0,
    stock_change=0.0,
    non_energy_use=0.0,
    sector="national",
) -> FlowRecord:
    """FlowRecord builder with base-unit magnitudes (t or m3)."""
    unit = native_unit(source)
    return FlowRecord(
        period=Period(year, month),
        source=source,
        production=Quantity(production, unit),
        imports=Quantity(imports, unit),
        exports=Quantity(exports, unit),
        stock_change=Quantity(stock_change, unit),
        non_energy_use=Quantity(non_energy_use, unit),
        sector=sector,
    )


@pytest.fixture(scope="session")
def data_dir():
    from pathlib import Path

    path = Path(__file__).resolve().parent.parent / "data"
    missing = [name for name in DATA_FILES if not (path / name).exists()]
    if missing:
        pytest.skip(f"bundled dataset incomplete, missing {missing}")
    return path


@pytest.fixture(scope="session")
def bundled_dataset(data_dir):
    return load_dataset(
        [data_dir / "flows.csv"],
        gdp_path=data_dir / "gdp.csv",
        products_path=data_dir / "products.csv",
    )


@pytest.fixture(scope="session")
def bundled_config(data_dir):
    return parse_scenario_config(data_dir / "scenarios.toml")
