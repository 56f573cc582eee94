"""Command-line front end: run scenarios, sweep parameters, dump trace CDFs."""

import argparse
import copy
import json
import os
import sys

import numpy as np

from .driver import export, run, scenario_from_dict
from .errors import (
    ConfigError,
    InvariantViolation,
    ParseError,
    SimulationError,
    UnknownConfiguration,
)
from .memmodel import PAGES_PER_REGION
from .telemetry import cdf_from_counts, write_cdf_csv
from .workload import ingest_trace

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INVARIANT = 3


def _load_doc(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"scenario file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def _apply_overrides(doc: dict, args) -> dict:
    doc = copy.deepcopy(doc)
    if args.seed is not None:
        doc["rng_seed"] = args.seed
    if args.policy is not None:
        doc.setdefault("policy", {})["variant"] = args.policy
    if args.gpac is not None or args.cl is not None:
        for guest in doc.get("guests", []):
            if args.gpac is not None:
                guest["gpac"] = args.gpac == "on"
            if args.cl is not None:
                guest["cl"] = args.cl
    return doc


def _cmd_run(args) -> int:
    doc = _apply_overrides(_load_doc(args.scenario), args)
    report = run(scenario_from_dict(doc))
    export(report, args.out)
    overall = report.summary["overall"]
    print(f"wrote {args.out}: near_residency="
          f"{overall['mean_near_residency_pct']:.1f}% "
          f"throughput_proxy={overall['throughput_proxy']:.4f}")
    return EXIT_OK


def _parse_sweep(param: str):
    try:
        name, spec = param.split("=", 1)
        start, stop, step = (int(x) for x in spec.split(":"))
    except ValueError:
        raise ConfigError(
            f"--param must look like name=start:stop:step, got {param!r}"
        ) from None
    if name not in ("cl", "near_regions"):
        raise ConfigError(f"sweepable parameters are cl, near_regions; got {name!r}")
    if step <= 0 or stop < start:
        raise ConfigError("sweep needs step > 0 and stop >= start")
    return name, list(range(start, stop + 1, step))


def _cmd_sweep(args) -> int:
    base = _apply_overrides(_load_doc(args.scenario), args)
    name, values = _parse_sweep(args.param)
    os.makedirs(args.out, exist_ok=True)
    rows = []
    for value in values:
        doc = copy.deepcopy(base)
        if name == "cl":
            for guest in doc.get("guests", []):
                guest["cl"] = value
                guest.setdefault("gpac", True)
        else:
            doc["tiers"]["near"] = {"capacity_regions": value}
        report = run(scenario_from_dict(doc))
        export(report, os.path.join(args.out, f"{name}_{value}"))
        overall = report.summary["overall"]
        rows.append((value, overall["mean_near_residency_pct"],
                     overall["throughput_proxy"],
                     overall["promoted_bytes_total"],
                     overall["demoted_bytes_total"]))
    with open(os.path.join(args.out, "sweep.csv"), "w", newline="") as fh:
        fh.write(f"{name},mean_near_residency_pct,throughput_proxy,"
                 "promoted_bytes_total,demoted_bytes_total\n")
        for value, res, thr, pb, db in rows:
            fh.write(f"{value},{res:.9g},{thr:.9g},{pb},{db}\n")
    print(f"wrote {args.out}/sweep.csv ({len(rows)} runs)")
    return EXIT_OK


def _cmd_cdf(args) -> int:
    try:
        traces = ingest_trace(args.trace)
    except FileNotFoundError:
        raise ConfigError(f"trace file not found: {args.trace}") from None
    if not traces:
        raise ConfigError(f"{args.trace}: no accesses")
    pages = np.unique(np.concatenate([t.gvas for t in traces]))
    _, counts = np.unique(pages // PAGES_PER_REGION, return_counts=True)
    write_cdf_csv(cdf_from_counts(counts), args.out)
    print(f"wrote {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tiersim",
        description="Simulate memory tiering under virtualization.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one scenario and export reports")
    p_run.add_argument("--scenario", required=True, help="scenario JSON file")
    p_run.add_argument("--out", required=True, help="output directory")
    _common_overrides(p_run)
    p_run.set_defaults(func=_cmd_run)

    p_sweep = sub.add_parser("sweep", help="run a scenario across a parameter range")
    p_sweep.add_argument("--scenario", required=True)
    p_sweep.add_argument("--param", required=True,
                         help="name=start:stop:step, e.g. cl=10:290:40")
    p_sweep.add_argument("--out", required=True)
    _common_overrides(p_sweep)
    p_sweep.set_defaults(func=_cmd_sweep)

    p_cdf = sub.add_parser("cdf", help="per-region distinct-page CDF of a trace file")
    p_cdf.add_argument("--trace", required=True)
    p_cdf.add_argument("--out", required=True, help="output CSV path")
    p_cdf.set_defaults(func=_cmd_cdf)
    return parser


def _common_overrides(p: argparse.ArgumentParser):
    p.add_argument("--seed", type=int, default=None, help="override rng_seed")
    p.add_argument("--policy", choices=["memtierd", "tpp", "autonuma"],
                   default=None, help="override tiering policy")
    p.add_argument("--gpac", choices=["on", "off"], default=None,
                   help="toggle consolidation for every guest")
    p.add_argument("--cl", type=int, default=None,
                   help="override consolidation limit for every guest")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, UnknownConfiguration, ParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SimulationError as exc:
        # anything that slipped past validation is a mid-run consistency failure
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
