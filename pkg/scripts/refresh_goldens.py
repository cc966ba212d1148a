#!/usr/bin/env python3
"""Rewrite tests/golden/ from a fresh pipeline run over data/.

Only do this after an intentional change to the bundled dataset or output
formats; the acceptance suite compares bytes against these files.
"""

from __future__ import annotations

import sys
from pathlib import Path

from carbonledger.cli import main

ROOT = Path(__file__).resolve().parent.parent
GOLDEN = ROOT / "tests" / "golden"


def run(*argv) -> None:
    code = main([str(a) for a in argv])
    if code != 0:
        sys.exit(code)


if __name__ == "__main__":
    GOLDEN.mkdir(parents=True, exist_ok=True)
    flows, config = ROOT / "data" / "flows.csv", ROOT / "data" / "scenarios.toml"
    run("compute", "--flows", flows, "--config", config, "--out", GOLDEN / "emissions.csv")
    for months in (10, 9):
        run("project", "--flows", flows, "--config", config, "--year", "2018",
            "--months", str(months), "--out", GOLDEN / f"projection_m{months}.csv")
    for sidecar in GOLDEN.glob("*.manifest.json"):
        sidecar.unlink()
    print(f"refreshed {GOLDEN}")
