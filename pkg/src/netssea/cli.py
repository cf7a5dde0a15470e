"""Command-line entry point: ``netssea <command> ...``."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import harness, topology
from .metrics import SpreadRecord, spreading_analysis, write_csv


def _gen_graph(args) -> int:
    rng = np.random.default_rng(args.seed)
    spec = harness.TopologySpec(model=args.model, n=args.n, p=args.p, links=args.links,
                                gamma=args.gamma, k_min=args.k_min, k_max=args.k_max,
                                k=args.k, r=args.r)
    if args.connected:
        g, _ = spec.build(args.seed)
    else:
        g = spec.generate(rng)
    if g.is_complete and g.n > 5000:
        raise harness.CampaignError("refusing to write a complete graph with more than 5000 nodes")
    topology.save_edge_list(g, args.out)
    print(f"wrote {g.n} nodes, {g.n_links} links to {args.out}")
    return 0


def _stats(args) -> int:
    g = topology.load_edge_list(args.path)
    st = topology.stats(g)
    doc = st.as_dict()
    if args.json:
        print(json.dumps(doc, indent=2))
        return 0
    print(f"nodes          {st.n}")
    print(f"links          {st.n_links}")
    print(f"mean degree    {st.mean_degree:.4f}")
    print(f"APL            {st.apl:.4f}")
    print(f"diameter       {st.diameter}")
    print(f"mean CC (std)  {st.mean_cc:.4f} ({st.std_cc:.4f})")
    if not st.connected:
        print(f"disconnected: statistics over the largest component ({st.component_size} nodes)")
    return 0


def _print_summary(summary: harness.CampaignSummary) -> None:
    print(f"{summary.name}: {summary.runs} runs, {summary.failures} without convergence")
    for key, st in summary.stats.items():
        if st.mean is None:
            print(f"  {key:<22} undefined in all runs")
        else:
            print(f"  {key:<22} mean {st.mean:9.2f}  std {st.std:8.2f}  "
                  f"median {st.median:8.1f}  undefined {st.undefined}")


def _load(args):
    cfg, raw = harness.load_config(args.config)
    if getattr(args, "out", None):
        cfg.output_dir = args.out
    if getattr(args, "runs", None):
        cfg.runs = args.runs
    if getattr(args, "workers", None):
        cfg.workers = args.workers
    return cfg, raw


def _run(args) -> int:
    cfg, _ = _load(args)
    camp = harness.run_campaign(cfg)
    _print_summary(camp.summary)
    if cfg.output_dir:
        print(f"outputs in {cfg.output_dir}")
    return 0


def _sweep(args) -> int:
    cfg, raw = _load(args)
    values = dict(raw["values"])
    if args.out:
        values["experiment.output_dir"] = args.out
    if args.runs:
        values["experiment.runs"] = args.runs
    cells = harness.expand_grid(values, raw["grid"])
    result = harness.sweep(cells, output_dir=args.out or cfg.output_dir)
    for params, camp, err in result.cells:
        if camp is None:
            print(f"{params}: FAILED {err}")
        else:
            _print_summary(camp.summary)
    return 0 if all(err is None for _, _, err in result.cells) else 1


def _spread(args) -> int:
    cfg, _ = _load(args)
    graph_seed = harness.derive_seed(cfg.master_seed, 0 if cfg.topology.shared else args.run_index, 0)
    graph, _ = cfg.topology.build(graph_seed)
    outcome = harness.execute_run(cfg, args.run_index, graph=graph)
    m = outcome.metrics
    if m.fht is None:
        print("no optimum reached; nothing to analyse", file=sys.stderr)
        return 1
    record = SpreadRecord.from_metrics(m, graph)
    summary = spreading_analysis(record)
    out = Path(args.out or cfg.output_dir or ".")
    out.mkdir(parents=True, exist_ok=True)
    prov = harness.provenance(cfg, run=args.run_index, engine_seed=outcome.engine_seed,
                              graph_seed=outcome.graph_seed)
    record.write_csv(out / "spread.csv", prov)
    write_csv(out / "spread_summary.csv", ["distance", "count", "median", "q1", "q3", "min", "max"],
               summary.rows(), prov)
    m.write_series_csv(out / "series.csv", prov)
    print(f"FHT {m.fht}  FCT {m.fct}  N0 nodes {m.n0_nodes.size}  "
          f"never optimal {summary.never_optimal}")
    print(f"wrote spread.csv, spread_summary.csv, series.csv to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="netssea",
                                description="Spatially-structured EAs on complex networks.")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-graph", help="generate a graph and write it as an edge list")
    g.add_argument("--model", required=True, choices=["complete", "er", "sf", "sw"])
    g.add_argument("--n", type=int, required=True, help="node count")
    g.add_argument("--p", type=float, help="ER connection probability")
    g.add_argument("--links", type=float, help="ER expected link count (instead of --p)")
    g.add_argument("--gamma", type=float, default=harness.SF_GAMMA, help="scale-free exponent")
    g.add_argument("--k-min", type=int, default=2, help="scale-free minimum degree")
    g.add_argument("--k-max", type=int, help="scale-free degree cutoff (default sqrt(n))")
    g.add_argument("--k", type=int, default=2, help="small-world neighbours per side")
    g.add_argument("--r", type=float, default=0.0, help="small-world rewiring probability")
    g.add_argument("--seed", type=int, default=0, help="RNG seed")
    g.add_argument("--connected", action="store_true", help="regenerate until connected")
    g.add_argument("--out", required=True, help="output edge-list path")
    g.set_defaults(func=_gen_graph)

    s = sub.add_parser("stats", help="APL, diameter, clustering of an edge-list file")
    s.add_argument("path")
    s.add_argument("--json", action="store_true", help="print JSON instead of text")
    s.set_defaults(func=_stats)

    r = sub.add_parser("run", help="run one campaign from a config file")
    r.add_argument("config")
    r.add_argument("--out", help="output directory (overrides the config)")
    r.add_argument("--runs", type=int, help="number of runs (overrides the config)")
    r.add_argument("--workers", type=int, help="parallel worker processes")
    r.set_defaults(func=_run)

    w = sub.add_parser("sweep", help="run every cell of a config's [sweep] grid")
    w.add_argument("config")
    w.add_argument("--out", help="output directory (overrides the config)")
    w.add_argument("--runs", type=int, help="runs per cell (overrides the config)")
    w.add_argument("--workers", type=int, help="parallel worker processes per cell")
    w.set_defaults(func=_sweep)

    d = sub.add_parser("spread", help="single run; per-node first-optimum generation vs distance")
    d.add_argument("config")
    d.add_argument("--run-index", type=int, default=0, help="which seeded run to replay")
    d.add_argument("--out", help="output directory (overrides the config)")
    d.set_defaults(func=_spread)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (harness.ConfigError, harness.CampaignError, topology.GraphError,
            topology.EdgeListError, OSError, ValueError) as exc:
        print(f"netssea {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
