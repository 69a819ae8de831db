#!/usr/bin/env python3
"""Run the two flagship scenarios through the CLI pipeline and print the
reports.  Writes JSON reports and CSV sidecars next to this script's
--out directory (default ./flagship_out)."""

import argparse
import json
import os
import sys

from morsegraph.cli import main as cli_main

HALFLINE = {
    "id": "halfline-well",
    "graph": {"generator": "half_line", "length": 60},
    "potential": {"family": "constant_well", "depth": 8.0, "center": 0, "radius": 4},
    "exhaustion": {"center": 0, "radii": [4, 8, 16, 40]},
    "operations": ["pipeline"],
    "params": {"pipeline": {"sensitivity": True}},
}

Z3 = {
    "id": "z3-well",
    "graph": {"generator": "lattice", "dimension": 3, "radius": 10,
              "vertex_cap": 100000},
    "potential": {"family": "constant_well", "depth": 5.0,
                  "center": [0, 0, 0], "radius": 1},
    "exhaustion": {"center": [0, 0, 0], "radii": [2, 3, 4, 5, 6, 8]},
    "operations": ["pipeline"],
    "params": {"pipeline": {"sensitivity": True}},
}

if __name__ == "__main__":
    parser = argparse.ArgumentParser()
    parser.add_argument("--out", default="flagship_out")
    args = parser.parse_args()
    os.makedirs(args.out, exist_ok=True)
    batch_path = os.path.join(args.out, "flagships.json")
    with open(batch_path, "w") as fh:
        json.dump({"scenarios": [HALFLINE, Z3]}, fh, indent=2)
    code = cli_main([
        "batch", "--config", batch_path,
        "--out", os.path.join(args.out, "reports.json"),
        "--csv", args.out,
    ])
    with open(os.path.join(args.out, "reports.json")) as fh:
        reports = json.load(fh)
    for rep in reports["reports"]:
        frag = rep["results"]["pipeline"]
        print(f"{rep['scenario_id']}: morse_index={frag.get('morse_index')}, "
              f"verdicts_ok={frag.get('ok')}, "
              f"sensitivity={frag.get('sensitivity')}")
    print(f"exit code {code}; reports in {args.out}/reports.json")
    sys.exit(code)
