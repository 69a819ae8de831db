"""Command-line interface.

One subcommand per operation plus ``batch``:

    morsegraph morse --config scenario.json
    morsegraph pipeline --config scenario.json --out report.json --csv out/
    morsegraph batch --config batch.json --jobs 2 --out reports.json

Single-operation subcommands override the config's operation list; ``batch``
runs each scenario's own list.  Exit code 0 iff every verdict in every
report is true and no operation errored.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import os
import sys

from .config import KNOWN_OPERATIONS, parse_config
from .errors import MorsegraphError
from .runner import run


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="morsegraph",
        description="Bound-state counting and potential theory on weighted graphs",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", required=True, help="scenario JSON document")
        p.add_argument("--out", default=None, help="report path (default: stdout)")
        p.add_argument("--csv", default=None, metavar="DIR", help="write CSV sidecars")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument(
            "--tol", action="append", default=[], metavar="NAME=VALUE",
            help="tolerance override, repeatable",
        )
        p.add_argument(
            "--normalize", action="store_true",
            help="omit wall-clock timings for byte-stable reports",
        )
        p.add_argument(
            "--jobs", type=int, default=1,
            help="concurrent scenarios (meaningful for batch)",
        )

    for op in KNOWN_OPERATIONS:
        p = sub.add_parser(op, help=f"run the {op} operation")
        add_common(p)

    p = sub.add_parser("batch", help="run every scenario in a batch document")
    add_common(p)
    return parser


def _apply_overrides(doc: dict, args, operation: str | None) -> dict:
    doc = dict(doc)
    if operation is not None:
        doc["operations"] = [operation]
    if args.seed is not None:
        doc["seed"] = args.seed
    if args.tol:
        tols = dict(doc.get("tolerances", {}))
        for item in args.tol:
            name, _, value = item.partition("=")
            if not value:
                raise SystemExit(f"--tol needs NAME=VALUE, got {item!r}")
            tols[name] = float(value)
        doc["tolerances"] = tols
    return doc


def _emit(doc: dict, out_path) -> None:
    text = json.dumps(doc, sort_keys=True, indent=2) + "\n"
    if out_path is None:
        sys.stdout.write(text)
    else:
        with open(out_path, "w") as fh:
            fh.write(text)


def _run_one(doc: dict, csv_dir, normalize: bool) -> dict:
    config = parse_config(doc)
    report = run(config, csv_dir=csv_dir)
    payload = report.as_json(normalize=normalize)
    return payload


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    with open(args.config) as fh:
        doc = json.load(fh)
    if args.csv is not None:
        os.makedirs(args.csv, exist_ok=True)

    try:
        if args.command == "batch":
            scenarios = doc.get("scenarios")
            if not isinstance(scenarios, list) or not scenarios:
                raise SystemExit('batch document needs {"scenarios": [...]}')
            prepared = [_apply_overrides(s, args, None) for s in scenarios]
            if args.jobs > 1:
                with concurrent.futures.ProcessPoolExecutor(args.jobs) as pool:
                    futures = [
                        pool.submit(_run_one, s, args.csv, args.normalize)
                        for s in prepared
                    ]
                    payloads = [f.result() for f in futures]
            else:
                payloads = [_run_one(s, args.csv, args.normalize) for s in prepared]
            # deterministic merge in declaration order
            out = {"reports": payloads, "ok": all(p["ok"] for p in payloads)}
            _emit(out, args.out)
            return 0 if out["ok"] else 1
        payload = _run_one(_apply_overrides(doc, args, args.command), args.csv,
                           args.normalize)
        _emit(payload, args.out)
        return 0 if payload["ok"] else 1
    except MorsegraphError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
