"""Command line front end.

Subcommands:
  generate      build one ground-truth graph and write it as a community file
  attack        run the attack trials of a config for a single replicate
  experiment    full replicate x trial Monte Carlo run with CSV/SVG output
  verify-props  Monte Carlo check of the moment/sparsity/factorization claims
  bounds        print the closed-form query/error bounds for a config
  ingest        parse and filter a SNAP-style community file

Every subcommand takes --config/--seed/--out/--jobs; --seed overrides the
config's seed, --out its output directory.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
from pathlib import Path

from . import bounds as bounds_mod
from .generator import generate_ground_truth
from .harness import (bound_for_config, config_from_json, emit_results,
                      run_sweep, substream, RNG_FAMILY)
from .snap import ingest_snap_communities, write_snap_communities


def _common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="JSON experiment config")
    parser.add_argument("--seed", type=int, help="override the config seed (u64)")
    parser.add_argument("--out", type=Path, help="override the output directory")
    parser.add_argument("--jobs", type=int, default=1, help="parallel replicate workers")


def _load_config(args):
    if args.config is None:
        raise SystemExit("this subcommand needs --config")
    config = config_from_json(args.config)
    if args.seed is not None:
        config = dataclasses.replace(config, seed=args.seed)
    if args.out is not None:
        config = dataclasses.replace(config, output_dir=str(args.out))
    return config


def _cmd_generate(args) -> int:
    config = _load_config(args)
    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = substream(config.seed, 1, 0)
    result = generate_ground_truth(config.generation, rng)
    graph_path = out_dir / "graph.communities"
    write_snap_communities(result.graph, graph_path)
    manifest = {
        "n": result.graph.num_groups, "m": result.graph.num_users,
        "edges": result.graph.total_edges, "skips": result.num_skips,
        "seed": config.seed, "rng": RNG_FAMILY,
    }
    with open(out_dir / "graph_manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(json.dumps(manifest))
    return 0


def _cmd_attack(args) -> int:
    config = _load_config(args)
    config = dataclasses.replace(config, replicates=1, sweep=())
    records, summaries = run_sweep(config, jobs=args.jobs)
    print(json.dumps(summaries[0], indent=2, sort_keys=True))
    if args.out is not None:
        emit_results(records, summaries, config.output_dir, config.formats, config)
    return 0


def _cmd_experiment(args) -> int:
    config = _load_config(args)
    records, summaries = run_sweep(config, jobs=args.jobs)
    written = emit_results(records, summaries, config.output_dir, config.formats, config)
    for kind, path in sorted(written.items()):
        print(f"{kind}: {path}")
    return 0


def _cmd_verify_props(args) -> int:
    config = _load_config(args)
    rng = substream(config.seed, 5)
    report = bounds_mod.verify_propositions(config.generation, config.trials, rng)
    for cell in report.cells:
        print(cell)
    print(f"{report.num_failed} failed cell(s) out of {len(report.cells)}")
    if args.out is not None:
        out_dir = Path(config.output_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        payload = {"seed": config.seed, "num_samples": report.num_samples,
                   "rng": RNG_FAMILY,
                   "cells": [dataclasses.asdict(c) for c in report.cells]}
        with open(out_dir / "propositions.json", "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True, default=str)
            fh.write("\n")
    return 0 if report.passed else 1


def _cmd_bounds(args) -> int:
    config = _load_config(args)
    report = bound_for_config(config)
    if report is None:
        raise SystemExit("no bound calculator matches this config")
    payload = {
        "q_bar_bound": report.q_bar_bound,
        "pe_bound": report.pe_bound,
        "vacuous": report.vacuous,
        "components": report.components,
    }
    print(json.dumps(payload, indent=2, sort_keys=True,
                     default=lambda v: "inf" if v == math.inf else v))
    return 0


def _cmd_ingest(args) -> int:
    graph, manifest = ingest_snap_communities(
        args.input, min_group_size=args.min_group_size,
        min_user_memberships=args.min_user_memberships)
    print(json.dumps(manifest.as_dict(), indent=2, sort_keys=True))
    if args.out is not None:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        write_snap_communities(graph, out_dir / "filtered.communities")
        with open(out_dir / "ingest_manifest.json", "w", encoding="utf-8") as fh:
            json.dump(manifest.as_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="deanonsim", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    for name, func in (("generate", _cmd_generate), ("attack", _cmd_attack),
                       ("experiment", _cmd_experiment),
                       ("verify-props", _cmd_verify_props), ("bounds", _cmd_bounds)):
        p = sub.add_parser(name)
        _common_flags(p)
        p.set_defaults(func=func)

    p = sub.add_parser("ingest")
    _common_flags(p)
    p.add_argument("--input", type=Path, required=True, help="community file to parse")
    p.add_argument("--min-group-size", type=int, default=0)
    p.add_argument("--min-user-memberships", type=int, default=0)
    p.set_defaults(func=_cmd_ingest)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
