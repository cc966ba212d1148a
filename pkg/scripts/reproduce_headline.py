#!/usr/bin/env python3
"""Run the whole pipeline on the bundled dataset and print the headline
numbers: 2018 per-source and total growth nowcasts on the 10- and 9-month
bases, the Monte Carlo one-sigma band on the 2018 total, and the scenario
spread. Outputs land under out/.

    python scripts/reproduce_headline.py
"""

from __future__ import annotations

import sys
from pathlib import Path

from carbonledger.cli import main

ROOT = Path(__file__).resolve().parent.parent
DATA = ROOT / "data"
OUT = ROOT / "out"


def run(*argv: str) -> None:
    code = main([str(a) for a in argv])
    if code != 0:
        sys.exit(code)


def banner(title: str) -> None:
    print(f"\n=== {title} " + "=" * max(0, 60 - len(title)))


if __name__ == "__main__":
    flows, config = DATA / "flows.csv", DATA / "scenarios.toml"
    OUT.mkdir(exist_ok=True)

    banner("annual emissions, this-study scenario")
    run("compute", "--flows", flows, "--config", config, "--out", OUT / "emissions.csv")

    banner("2018 growth nowcast, first ten months")
    run("project", "--flows", flows, "--config", config, "--year", "2018",
        "--months", "10", "--out", OUT / "projection_m10.csv")

    banner("2018 growth nowcast, first nine months")
    run("project", "--flows", flows, "--config", config, "--year", "2018",
        "--months", "9", "--out", OUT / "projection_m9.csv")

    banner("one-sigma band and factor contributions, 2018")
    run("uncertainty", "--flows", flows, "--config", config, "--year", "2018",
        "--out", OUT / "uncertainty_2018.csv")

    banner("scenario spread")
    run("compare", "--flows", flows, "--config", config,
        "--scenarios", "this-study,BP,UN-HV,IPCC-default",
        "--from", "2016", "--to", "2018", "--out", OUT / "compare.csv")

    banner("growth and intensity report")
    run("report", "--in", OUT / "emissions.csv", "--gdp", DATA / "gdp.csv",
        "--products", DATA / "products.csv")

    print(f"\nwrote CSV outputs and manifests under {OUT}")
