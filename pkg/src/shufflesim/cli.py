"""Command-line interface.

    shufflesim <command> [-c config.yaml] [--set section.key=value ...]

Commands: simulate, fluid, compare, sweep, verify, poisson-check, gap,
martingale, graph-dump.  Without -c the built-in default experiment is
used.  Exit codes: 0 success, 1 check failure, 2 configuration error.
The SHUFFLESIM_OUT environment variable sets the root for relative output
directories.
"""

from __future__ import annotations

import argparse
import os
import sys

import yaml

from . import harness, network
from .config import (ExperimentConfig, apply_overrides, canonical_yaml,
                     config_from_dict)
from .errors import ConfigError

COMMANDS = ("simulate", "fluid", "compare", "sweep", "verify",
            "poisson-check", "gap", "martingale", "graph-dump")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="shufflesim",
        description="Simulate pairwise particle systems on shuffled regular "
                    "networks and verify their fluid-limit behavior.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
            ("simulate", "write one trajectory CSV per (N, seed)"),
            ("fluid", "integrate the limiting ODE to CSV"),
            ("compare", "sup distance between trajectories and the fluid path"),
            ("sweep", "full multi-N study: compare + all diagnostics CSVs"),
            ("verify", "run the invariant suite; nonzero exit on failure"),
            ("poisson-check", "Monte Carlo vs closed-form counting tail"),
            ("gap", "gap process series for the first (N, seed)"),
            ("martingale", "residual second moments vs the analytic ceiling"),
            ("graph-dump", "write the edge list of the first N (debug)")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("-c", "--config", metavar="FILE",
                       help="experiment config (YAML); defaults are built in")
        p.add_argument("--set", dest="overrides", action="append", default=[],
                       metavar="KEY=VALUE",
                       help="override a config field, e.g. --set run.T=5")
        p.add_argument("-o", "--output", metavar="DIR",
                       help="output directory (same as --set output=DIR)")
        p.add_argument("-v", "--verbose", action="store_true",
                       help="print per-run progress")
        if name == "verify":
            p.add_argument("--show-config", action="store_true",
                           help="print the resolved config before running")
    return parser


def resolve_config(args) -> ExperimentConfig:
    if args.config:
        try:
            with open(args.config, "r", encoding="utf-8") as fh:
                data = yaml.safe_load(fh) or {}
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}")
        except yaml.YAMLError as exc:
            raise ConfigError(f"config {args.config} is not valid YAML: {exc}")
    else:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("config root must be a mapping")
    apply_overrides(data, args.overrides)
    if args.output:
        data["output"] = args.output
    return config_from_dict(data)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    try:
        if args.command == "simulate":
            manifest = harness.run_simulate(cfg, quiet=not args.verbose)
            print(f"wrote {len(manifest['runs'])} trajectories to {cfg.output_dir()}")
        elif args.command == "fluid":
            harness.run_fluid(cfg)
            print(f"wrote fluid.csv to {cfg.output_dir()}")
        elif args.command == "compare":
            medians = harness.run_compare(cfg, quiet=not args.verbose)
            for m in medians:
                print(f"N={m['N']}: median sup distance "
                      f"{m['median_sup_distance']:.5f} over {m['seeds']} seeds")
        elif args.command == "sweep":
            harness.run_sweep(cfg, quiet=not args.verbose)
            print(f"sweep outputs written to {cfg.output_dir()}")
        elif args.command == "verify":
            if getattr(args, "show_config", False):
                print(canonical_yaml(cfg))
            ok, results = harness.run_verify(cfg, quiet=False)
            print(f"{sum(r.passed for r in results)}/{len(results)} checks passed")
            return 0 if ok else 1
        elif args.command == "poisson-check":
            ok, checks = harness.run_poisson_check(cfg)
            for c in checks:
                status = "ok" if c.within_ci else "OUTSIDE CI"
                print(f"N={c.N} alpha={c.alpha}: mc={c.p_hat:.6f} "
                      f"analytic={c.analytic:.6f} [{status}]")
            return 0 if ok else 1
        elif args.command == "gap":
            harness.run_gap(cfg)
            print(f"gap series written to {cfg.output_dir()}")
        elif args.command == "martingale":
            summaries = harness.run_martingale(cfg)
            for s in summaries:
                worst = float(s.mean_square.max())
                print(f"N={s.N}: max_k E[Mbar_k(T)^2] = {worst:.3e} "
                      f"(ceiling {s.ceiling:.3e})")
        elif args.command == "graph-dump":
            N = cfg.n_list()[0]
            graph = network.generate_regular_bipartite(
                N, cfg.graph.d, cfg.graph.graph_seed)
            outdir = cfg.output_dir()
            os.makedirs(outdir, exist_ok=True)
            path = os.path.join(outdir, f"edges_N{N}.txt")
            network.dump_edge_list(graph, path)
            print(f"edge list written to {path}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
