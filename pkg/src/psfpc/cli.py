"""Command-line interface: ``psfpc run|presets|show-config|topology``."""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import harness
from .config import ALGORITHMS, EM_MODES, PRESETS, ConfigError, ScenarioConfig, dump_config, load_config, preset
from .kernels import BACKEND
from .network import TopologyError, generate, read_adjacency, write_adjacency


def _add_scenario_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="flat TOML file of scenario keys")
    p.add_argument("--preset", choices=PRESETS, help="named scenario sweep (see `psfpc presets`)")
    p.add_argument("--algorithm", choices=ALGORITHMS)
    p.add_argument("--em-mode", choices=EM_MODES)
    p.add_argument("--em-init", dest="em_init_case", choices=("poor_a", "good_b", "genie"))
    p.add_argument("--alpha", dest="alpha_em", type=float, help="EM forgetting factor")
    p.add_argument("--n-nodes", type=int)
    p.add_argument("--connectivity", type=float)
    p.add_argument("--undirected", action="store_true", help="generate undirected networks")
    p.add_argument("--snr-db", type=float)
    p.add_argument("--trials", dest="n_trials", type=int)
    p.add_argument("--iterations", dest="n_iterations", type=int)
    p.add_argument("--seed", dest="base_seed", type=int)


def _configs(args) -> list[ScenarioConfig]:
    if args.config and args.preset:
        raise ConfigError("--config and --preset are mutually exclusive")
    if args.preset:
        configs = preset(args.preset)
    elif args.config:
        configs = [load_config(args.config)]
    else:
        configs = [ScenarioConfig()]
    keys = ("algorithm", "em_mode", "em_init_case", "alpha_em", "n_nodes", "connectivity",
            "snr_db", "n_trials", "n_iterations", "base_seed")
    overrides = {k: getattr(args, k) for k in keys}
    if args.undirected:
        overrides["directed"] = False
    try:
        return [c.with_overrides(**overrides) for c in configs]
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def cmd_run(args) -> int:
    configs = _configs(args)
    network = None
    if args.topology_file:
        network = read_adjacency(args.topology_file)
        configs = [replace(c, n_nodes=network.n_nodes) for c in configs]
    stamp = not args.no_timestamp
    summaries, aborted = [], 0
    sweep = len(configs) > 1
    out = Path(args.out) if args.out else Path("results") / (args.preset or configs[0].name)
    for cfg in configs:
        result = harness.run(cfg, workers=args.workers, network=network, trace_nodes=args.trace_nodes)
        target = out / f"{cfg.name}.csv" if sweep else (out if out.suffix == ".csv" else out.with_suffix(".csv"))
        harness.write_outputs(result, target, timestamp=stamp, trace_nodes=args.trace_nodes)
        summaries.append(result.summary)
        aborted += result.summary.n_aborted
        s = result.summary
        print(f"{cfg.name}: final std phase {s.mean_final_std_phase_deg:.4g} "
              f"+/- {s.std_final_std_phase_deg:.3g} deg, convergence ~{s.mean_convergence_iter:.3g} it",
              file=sys.stderr)
    if sweep:
        (out / "summary.csv").write_text(harness.summary_csv(summaries, stamp))
    n_total = sum(s.n_trials for s in summaries)
    print(f"done: {n_total} trials, {aborted} aborted, backend={BACKEND}, output in {out}",
          file=sys.stderr)
    return 0


def cmd_presets(args) -> int:
    for name in PRESETS:
        cfgs = preset(name)
        print(f"{name}: {len(cfgs)} scenario(s)")
    return 0


def cmd_show_config(args) -> int:
    for cfg in _configs(args):
        if len(_configs(args)) > 1:
            print(f"# --- {cfg.name}")
        sys.stdout.write(dump_config(cfg))
    return 0


def cmd_topology(args) -> int:
    net = generate(args.n_nodes, args.connectivity, not args.undirected,
                   np.random.default_rng(args.seed))
    write_adjacency(net, args.out)
    print(f"wrote {net.n_connections} links ({net.fingerprint()}) to {args.out}", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="psfpc", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run Monte Carlo trials and write CSV")
    _add_scenario_args(p)
    p.add_argument("--out", help="CSV path (single scenario) or directory (preset sweep)")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--no-timestamp", action="store_true", help="omit the timestamp header line")
    p.add_argument("--trace-nodes", action="store_true", help="also write per-node error traces")
    p.add_argument("--topology-file", type=Path, help="fixed adjacency list used by every trial")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("presets", help="list named presets")
    p.set_defaults(func=cmd_presets)

    p = sub.add_parser("show-config", help="print the resolved scenario config(s) as TOML")
    _add_scenario_args(p)
    p.set_defaults(func=cmd_show_config)

    p = sub.add_parser("topology", help="generate a network and write its adjacency list")
    p.add_argument("--n-nodes", type=int, default=20)
    p.add_argument("--connectivity", type=float, default=0.2)
    p.add_argument("--undirected", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_topology)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, TopologyError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
