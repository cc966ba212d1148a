#!/usr/bin/env python3
"""Regenerate the bundled example dataset under data/.

Synthetic national panel, 2000-2018: annual mass-balance records for coal,
oil, gas and cement plus monthly production/import/export series (full
years through 2017, ten months of 2018), a GDP index file and monthly
industrial product output. Trajectory shape: fast growth through 2013, a
2014-2016 dip, then a rebound with coal near +5%, oil mid-single digits,
gas high-teens and cement low-single digits in 2018, with coal around
two thirds of fuel energy.

Deterministic: fixed seed, rounded file values. Run from the repo root:

    python scripts/build_example_data.py
"""

from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

SEED = 20181231
FIRST_YEAR = 2000
LAST_YEAR = 2018
PARTIAL_MONTHS = 10  # months of the last year with data

DATA_DIR = Path(__file__).resolve().parent.parent / "data"


def integrate(level0: float, growth_pct: dict[int, float]) -> dict[int, float]:
    levels = {FIRST_YEAR: level0}
    for year in range(FIRST_YEAR + 1, LAST_YEAR + 1):
        levels[year] = levels[year - 1] * (1.0 + growth_pct[year] / 100.0)
    return levels


def growth_path(rng, segments, final: float | None = None) -> dict[int, float]:
    """Piecewise mean growth with noise; ``final`` pins the 2018 value."""
    growth = {}
    for start, stop, mean, sigma in segments:
        for year in range(start, stop + 1):
            growth[year] = mean + sigma * rng.standard_normal()
    if final is not None:
        growth[LAST_YEAR] = final
    return growth


def seasonal_weights(rng, phase: float, amplitude: float = 0.08, noise: float = 0.03):
    base = 1.0 + amplitude * np.sin(2.0 * math.pi * (np.arange(12) / 12.0) + phase)
    jitter = base * (1.0 + noise * rng.standard_normal(12))
    jitter = np.clip(jitter, 0.2, None)
    return jitter / jitter.sum()


def build_series(rng):
    paths = {}
    paths["coal"] = {
        "production": integrate(
            1384.0,
            growth_path(
                rng,
                [(2001, 2013, 9.0, 1.5), (2014, 2016, -2.5, 0.8), (2017, 2017, 1.5, 0.3)],
                final=4.6,
            ),
        ),
        "import": integrate(
            2.2,
            growth_path(
                rng,
                [(2001, 2008, 38.0, 6.0), (2009, 2013, 24.0, 5.0), (2014, 2016, -6.0, 3.0), (2017, 2017, 5.0, 1.0)],
                final=6.0,
            ),
        ),
        "export": integrate(
            55.0, growth_path(rng, [(2001, 2017, -14.0, 3.0)], final=-10.0)
        ),
        "non_energy": integrate(15.0, growth_path(rng, [(2001, 2017, 3.0, 0.5)], final=3.0)),
        "stock_mean": 6.0,
        "stock_sigma": 24.0,
        "phase": 0.7,
    }
    paths["oil"] = {
        "production": integrate(
            163.0,
            growth_path(
                rng,
                [(2001, 2014, 1.6, 0.6), (2015, 2017, -1.2, 0.5)],
                final=0.4,
            ),
        ),
        "import": integrate(
            70.0,
            growth_path(
                rng,
                [(2001, 2010, 12.5, 2.5), (2011, 2015, 7.5, 2.0), (2016, 2017, 10.0, 1.5)],
                final=9.0,
            ),
        ),
        "export": integrate(22.0, growth_path(rng, [(2001, 2017, -2.5, 1.0)], final=-2.0)),
        "non_energy": integrate(20.0, growth_path(rng, [(2001, 2017, 6.0, 0.8)], final=6.0)),
        "stock_mean": 1.0,
        "stock_sigma": 5.5,
        "phase": 2.1,
    }
    paths["natural_gas"] = {
        "production": integrate(
            27.2,
            growth_path(
                rng,
                [(2001, 2014, 11.5, 1.8), (2015, 2017, 6.0, 1.0)],
                final=8.0,
            ),
        ),
        "import": integrate(
            0.8,
            growth_path(
                rng,
                [(2001, 2006, 10.0, 3.0), (2007, 2012, 76.0, 8.0), (2013, 2016, 15.0, 4.0), (2017, 2017, 26.0, 2.0)],
                final=31.0,
            ),
        ),
        "export": integrate(3.0, growth_path(rng, [(2001, 2017, 1.0, 1.0)], final=1.0)),
        "non_energy": integrate(1.9, growth_path(rng, [(2001, 2017, 8.0, 1.0)], final=8.0)),
        "stock_mean": 0.25,
        "stock_sigma": 1.1,
        "phase": 3.6,
    }
    paths["cement"] = {
        "production": integrate(
            597.0,
            growth_path(
                rng,
                [(2001, 2013, 11.0, 1.5), (2014, 2016, -2.0, 0.8), (2017, 2017, -0.2, 0.2)],
                final=2.6,
            ),
        ),
        "phase": 1.3,
    }
    return paths


def write_flows(paths, rng):
    rows = []
    for source, p in paths.items():
        is_cement = source == "cement"
        stock = {}
        for year in range(FIRST_YEAR, LAST_YEAR + 1):
            if is_cement:
                stock[year] = 0.0
            else:
                stock[year] = p["stock_mean"] + p["stock_sigma"] * rng.standard_normal()
        for year in range(FIRST_YEAR, LAST_YEAR + 1):
            production = p["production"][year]
            imports = 0.0 if is_cement else p["import"][year]
            exports = 0.0 if is_cement else p["export"][year]
            non_energy = 0.0 if is_cement else p["non_energy"][year]
            rows.append(
                [
                    year,
                    "",
                    source,
                    round(production, 3),
                    round(imports, 3),
                    round(exports, 3),
                    round(stock[year], 3),
                    round(non_energy, 3),
                ]
            )
            months = PARTIAL_MONTHS if year == LAST_YEAR else 12
            weights = {
                "production": seasonal_weights(rng, p["phase"]),
                "import": seasonal_weights(rng, p["phase"] + 1.0),
                "export": seasonal_weights(rng, p["phase"] + 2.0),
            }
            for month in range(1, months + 1):
                rows.append(
                    [
                        year,
                        month,
                        source,
                        round(production * weights["production"][month - 1], 3),
                        round(imports * weights["import"][month - 1], 3),
                        round(exports * weights["export"][month - 1], 3),
                        0.0,
                        0.0,
                    ]
                )
    with open(DATA_DIR / "flows.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            ["year", "month", "source", "production", "import", "export", "stock_change", "non_energy_use"]
        )
        writer.writerows(rows)
    return rows


def write_gdp(rng):
    index = 100.0
    share = 0.455
    rows = []
    for year in range(FIRST_YEAR, LAST_YEAR + 1):
        if year > FIRST_YEAR:
            if year <= 2010:
                g = 9.5
            elif year <= 2015:
                g = 7.5
            else:
                g = 6.7
            index *= 1.0 + (g + 0.3 * rng.standard_normal()) / 100.0
        if year <= 2006:
            share += 0.003
        elif year <= 2015:
            share -= 0.006
        else:
            share += 0.002
        rows.append([year, round(index, 2), round(share, 4)])
    with open(DATA_DIR / "gdp.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["year", "gdp_index", "secondary_share"])
        writer.writerows(rows)


def write_products(rng):
    products = {"steel": 68.0, "iron": 60.0, "plate_glass": 70.0}
    annual_growth = {"steel": {2017: 3.0, 2018: 5.5}, "iron": {2017: 1.5, 2018: 4.5},
                     "plate_glass": {2017: 2.0, 2018: 5.0}}
    rows = []
    for name, base in products.items():
        level = {2016: base}
        for year in (2017, 2018):
            level[year] = level[year - 1] * (1.0 + annual_growth[name][year] / 100.0)
        for year in (2016, 2017, 2018):
            months = PARTIAL_MONTHS if year == 2018 else 12
            weights = seasonal_weights(rng, 0.5, amplitude=0.05, noise=0.02)
            for month in range(1, months + 1):
                rows.append([year, month, name, round(level[year] * weights[month - 1], 3)])
    with open(DATA_DIR / "products.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["year", "month", "product", "output"])
        writer.writerows(rows)


SCENARIOS_TOML = """\
# Scenario configuration for the bundled example dataset.
#
# Coal factors come from the named built-in presets. Oil, gas and cement
# factors below are illustrative config inputs chosen at plausible
# magnitudes; replace them with your own measured or published values.
# Heating values are GJ per native unit (t or m3), carbon contents tC/TJ,
# the cement factor tC per t cement.

default = "this-study"
draws = 10000
seed = 20180101

[sigma]
# relative one-sigma values; unset inputs keep package defaults
production = 0.02
import = 0.02
export = 0.02
statistical_error = 0.02
carbon_content = 0.003
stock_change = 1.0
cement_production = 0.02

[scenario.this-study]
preset = "this-study"
heating_value.oil = 41.87
heating_value.natural_gas = 0.03893
carbon_content.oil = 20.0
carbon_content.natural_gas = 15.3
oxidation.oil = 0.98
oxidation.natural_gas = 0.99
cement_factor = 0.085

[scenario.BP]
preset = "BP"
heating_value.oil = 41.87
heating_value.natural_gas = 0.03893
carbon_content.oil = 20.0
carbon_content.natural_gas = 15.3
oxidation.oil = 0.98
oxidation.natural_gas = 0.99
cement_factor = 0.085

[scenario.UN-HV]
preset = "UN-HV"
heating_value.oil = 41.87
heating_value.natural_gas = 0.03893
carbon_content.oil = 20.0
carbon_content.natural_gas = 15.3
oxidation.oil = 0.98
oxidation.natural_gas = 0.99
cement_factor = 0.085

[scenario.IPCC-default]
preset = "IPCC-default"
heating_value.oil = 41.87
heating_value.natural_gas = 0.03893
carbon_content.oil = 20.0
carbon_content.natural_gas = 15.3
oxidation.oil = 0.98
oxidation.natural_gas = 0.99
cement_factor = 0.085
"""


def main() -> None:
    DATA_DIR.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(SEED)
    paths = build_series(rng)
    write_flows(paths, rng)
    write_gdp(rng)
    write_products(rng)
    (DATA_DIR / "scenarios.toml").write_text(SCENARIOS_TOML, encoding="utf-8")
    print(f"wrote flows.csv, gdp.csv, products.csv, scenarios.toml under {DATA_DIR}")


if __name__ == "__main__":
    main()
