"""Command-line interface.

Subcommands: ``solve`` (one instance, prints the report), ``sweep`` (Monte
Carlo sweep to CSV), ``converge`` (EE trace per outer iteration), ``oracle``
(grid-search spot check). Powers are entered in dBm on the command line and
converted to watts at this boundary; a key=value config file can supply any
field, with explicit flags taking precedence.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import fields, replace

import numpy as np

from bsnoma.channel import LayoutConfig, build_topology, derive_seed, sample_channels
from bsnoma.experiments import (
    ExperimentConfig,
    config_from_mapping,
    dbm_to_watts,
    emit_convergence,
    parse_config_file,
    run_sweep,
    watts_to_dbm,
)
from bsnoma.model import SystemParams, compute_metrics
from bsnoma.oracle import GridSpec, grid_search
from bsnoma.solver import NBS, WBS, SolveConfig, optimize

_SOLVE_INT_KEYS = {"max_outer", "max_dual_iters", "interference_rounds", "stall_window"}


def _add_common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key=value config file; flags override it")
    p.add_argument("--seed", type=int, help="base RNG seed")
    p.add_argument("--cells", type=int, dest="num_cells", help="number of cells K")
    p.add_argument("--noise-variance", type=float, dest="noise_variance")
    p.add_argument("--sic-error", type=float, dest="sic_error",
                   help="residual SIC error fraction in [0,1]")
    p.add_argument("--circuit-power", type=float, dest="circuit_power")
    p.add_argument("--p-max-dbm", type=float, dest="p_max_dbm",
                   help="per-source power budget in dBm")
    p.add_argument("--r-min", type=float, dest="r_min", help="rate floor, bits/s/Hz")
    p.add_argument("--path-loss-exp", type=float, dest="path_loss_exp")
    for f in fields(LayoutConfig):
        p.add_argument(f"--{f.name.replace('_', '-')}", type=float, dest=f.name)
    for f in fields(SolveConfig):
        typ = int if f.name in _SOLVE_INT_KEYS else float
        p.add_argument(f"--{f.name.replace('_', '-')}", type=typ, dest=f.name)


def _gather_mapping(args: argparse.Namespace) -> dict:
    mapping = {}
    if getattr(args, "config", None):
        mapping.update(parse_config_file(args.config))
    for f in fields(SystemParams):
        if f.name == "p_max":
            continue
        v = getattr(args, f.name, None)
        if v is not None:
            mapping[f.name] = str(v)
    for holder in (LayoutConfig, SolveConfig):
        for f in fields(holder):
            v = getattr(args, f.name, None)
            if v is not None:
                mapping[f.name] = str(v)
    if getattr(args, "p_max_dbm", None) is not None:
        mapping["p_max_dbm"] = str(args.p_max_dbm)
    if getattr(args, "seed", None) is not None:
        mapping["seed"] = str(args.seed)
    return mapping


def _base_config(args: argparse.Namespace) -> ExperimentConfig:
    return config_from_mapping(_gather_mapping(args))


def _print_report(rep, params) -> None:
    print(f"mode={rep.mode} converged={rep.converged} outer_iters={rep.outer_iters} "
          f"dual_iters={rep.dual_iters}")
    print(f"ee_total={rep.metrics.ee_total:.6g} bits/s/Hz/W  "
          f"f_residual={rep.f_residual:.3g}")
    print(f"allocated_power={rep.alloc.total_radiated:.6g} W "
          f"(budget {params.p_max:.6g} W = {watts_to_dbm(params.p_max):.1f} dBm/cell)")
    print(f"feasible={rep.feasibility.all_ok}")
    with np.printoptions(precision=5, suppress=True):
        print(f"power[W]     = {rep.alloc.power}")
        print(f"pac_near     = {rep.alloc.pac_near}")
        print(f"pac_far      = {rep.alloc.pac_far}")
        print(f"reflection   = {rep.alloc.reflection}")
        print(f"rate_near    = {rep.metrics.rate_near}")
        print(f"rate_far     = {rep.metrics.rate_far}")
        print(f"ee_trajectory= {rep.trajectory}")


def _cmd_solve(args) -> int:
    cfg = _base_config(args)
    topo = build_topology(cfg.params, cfg.layout)
    chan = sample_channels(topo, cfg.params, derive_seed(cfg.seed, args.trial))
    modes = (WBS, NBS) if args.mode == "both" else (args.mode,)
    for mode in modes:
        rep = optimize(chan, cfg.params, cfg.solve, mode=mode)
        _print_report(rep, cfg.params)
    return 0


def _cmd_sweep(args) -> int:
    cfg = _base_config(args)
    overrides = {}
    if args.sweep is not None:
        overrides["sweep_param"] = args.sweep
    if args.values is not None:
        overrides["sweep_values"] = tuple(float(v) for v in args.values.split(","))
    if args.trials is not None:
        overrides["trials"] = args.trials
    if args.workers is not None:
        overrides["workers"] = args.workers
    if args.modes is not None:
        overrides["modes"] = tuple(m.strip() for m in args.modes.split(","))
    cfg = replace(cfg, **overrides)
    result = run_sweep(cfg, output=args.output)
    for r in result.rows:
        print(f"{r.sweep_param}={r.sweep_value:g} mode={r.mode}: "
              f"mean_ee={r.mean_ee:.6g} (std {r.std_ee:.3g}, n={r.trials}) "
              f"feasible={r.feasibility_rate:.2f} iters={r.mean_outer_iters:.1f}")
    if args.output:
        print(f"wrote {args.output}")
    return 0


def _cmd_converge(args) -> int:
    cfg = _base_config(args)
    k_values = tuple(int(v) for v in args.k_values.split(","))
    traces = emit_convergence(cfg, instance_seed=cfg.seed, k_values=k_values,
                              output=args.output)
    for k, traj in traces.items():
        print(f"K={k}: {len(traj)} iterations, final ee_estimate={traj[-1]:.6g}")
    if args.output:
        print(f"wrote {args.output}")
    return 0


def _cmd_oracle(args) -> int:
    cfg = _base_config(args)
    if cfg.params.num_cells != 1 and args.force_joint is False:
        print("oracle: use --cells 1 (joint multi-cell search needs --force-joint "
              "and very coarse grids)", file=sys.stderr)
        return 2
    topo = build_topology(cfg.params, cfg.layout)
    chan = sample_channels(topo, cfg.params, derive_seed(cfg.seed, args.trial))
    grid = GridSpec(n_power=args.grid[0], n_pac=args.grid[1], n_phi=args.grid[2])
    res = grid_search(chan, cfg.params, grid, mode=args.mode)
    if not res.feasible:
        print("infeasible: no grid point satisfies the rate floors")
        return 1
    print(f"grid best ee={res.ee:.6g}")
    with np.printoptions(precision=5, suppress=True):
        print(f"power={res.alloc.power} pac_near={res.alloc.pac_near} "
              f"reflection={res.alloc.reflection}")
    rep = optimize(chan, cfg.params, cfg.solve, mode=args.mode)
    print(f"solver ee={rep.metrics.ee_total:.6g} "
          f"(ratio {rep.metrics.ee_total / res.ee:.4f})")
    return 0


def _grid_triple(text: str) -> tuple:
    parts = text.lower().split("x")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("grid must look like 200x200x100")
    return tuple(int(p) for p in parts)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bsnoma",
        description="Energy-efficiency optimization of backscatter-aided "
                    "multi-cell NOMA networks",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="solve one seeded instance")
    _add_common_flags(p_solve)
    p_solve.add_argument("--mode", choices=(WBS, NBS, "both"), default="both")
    p_solve.add_argument("--trial", type=int, default=0,
                         help="trial index for the derived seed")
    p_solve.set_defaults(func=_cmd_solve)

    p_sweep = sub.add_parser("sweep", help="run a Monte Carlo sweep")
    _add_common_flags(p_sweep)
    p_sweep.add_argument("--sweep", choices=("p_max_dbm", "sic_error",
                                             "circuit_power", "r_min", "num_cells"))
    p_sweep.add_argument("--values", help="comma-separated sweep values")
    p_sweep.add_argument("--trials", type=int)
    p_sweep.add_argument("--workers", type=int)
    p_sweep.add_argument("--modes", help="comma-separated subset of wbs,nbs")
    p_sweep.add_argument("--output", help="CSV output path")
    p_sweep.set_defaults(func=_cmd_sweep)

    p_conv = sub.add_parser("converge", help="emit per-iteration EE traces")
    _add_common_flags(p_conv)
    p_conv.add_argument("--k-values", default="1,5,10",
                        help="comma-separated cell counts")
    p_conv.add_argument("--output", help="CSV output path")
    p_conv.set_defaults(func=_cmd_converge)

    p_or = sub.add_parser("oracle", help="grid-search spot check vs the solver")
    _add_common_flags(p_or)
    p_or.add_argument("--mode", choices=(WBS, NBS), default=WBS)
    p_or.add_argument("--trial", type=int, default=0)
    p_or.add_argument("--grid", type=_grid_triple, default=(200, 200, 100),
                      help="interval counts n_power x n_pac x n_phi")
    p_or.add_argument("--force-joint", action="store_true",
                      help="allow the exhaustive joint search for K >= 2")
    p_or.set_defaults(func=_cmd_oracle)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
