"""Command-line entry points; every subcommand exits 0 only after its outputs are written and checked."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace

import numpy as np

from .agent import make_net, read_metrics_csv, write_metrics_csv
from .baselines import bsp_search, mdq_training
from .experiment import (ConfigError, ExperimentConfig, build_env, evaluate_policy, read_rows, run_experiment,
                         run_sweep, train_larv, write_rows)
from .nn import SignatureError
from .policies import GreedyQPolicy, random_policy
from .topology import Topology, generate_waxman
from .traffic import generate_diurnal, load_trace


def _load_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    if getattr(args, "trace", None):
        cfg = replace(cfg, traffic=replace(cfg.traffic, source="file", path=str(args.trace)))
    if getattr(args, "seed", None) is not None:
        cfg = replace(cfg, seeds=replace(cfg.seeds, agent_seed=args.seed))
    if getattr(args, "episodes", None) is not None:
        cfg = replace(cfg, run=replace(cfg.run, episodes=args.episodes))
    if getattr(args, "init_from", None):
        cfg = replace(cfg, run=replace(cfg.run, init_from=str(args.init_from)))
    cfg.validate()
    return cfg


def cmd_generate_topology(args) -> int:
    if args.config:
        cfg = ExperimentConfig.load(args.config)
        t = cfg.topology
        topo = generate_waxman(t.n_nodes, t.alpha, t.beta, cfg.seeds.topology_seed, (t.n_es, t.n_fs, t.n_ru),
                               t.area_km, t.fs_capacity_rc, t.es_capacity_rc)
    else:
        topo = generate_waxman(args.n_nodes, args.alpha, args.beta, args.seed, (args.n_es, args.n_fs, args.n_ru),
                               args.area_km)
    topo.save(args.out)
    Topology.load(args.out)
    print(f"wrote {args.out}: {len(topo.nodes)} nodes, {len(topo.links)} links")
    return 0


def cmd_export_trace(args) -> int:
    if args.config:
        cfg = ExperimentConfig.load(args.config)
        env = build_env(cfg)
        trace = env.trace
    else:
        trace = generate_diurnal(args.days, args.n_bs, args.peak_gbps, args.seed)
    trace.save(args.out)
    back = load_trace(args.out)
    if not np.array_equal(back.demands, trace.demands):
        raise RuntimeError("trace did not survive a save/load round trip")
    print(f"wrote {args.out}: {trace.n_slots} slots x {trace.n_bs} BSs")
    return 0


def cmd_train(args) -> int:
    cfg = _load_config(args)
    env = build_env(cfg)
    result = train_larv(cfg, env, progress=args.verbose)
    result.save_checkpoint(args.out_checkpoint)
    write_metrics_csv(result.metrics, args.metrics_csv)
    make_net(env, cfg.agent.config(), np.random.default_rng(0)).load(args.out_checkpoint)
    if len(read_metrics_csv(args.metrics_csv)) != cfg.run.episodes:
        raise RuntimeError("metrics CSV is incomplete")
    last = result.metrics[-1] if result.metrics else {}
    print(f"trained {cfg.run.episodes} episodes; final cost {last.get('cost_total', float('nan')):.2f}")
    return 0


def cmd_evaluate(args) -> int:
    cfg = _load_config(args)
    env = build_env(cfg)
    net = make_net(env, cfg.agent.config(), np.random.default_rng(0))
    net.load(args.checkpoint)
    horizon = args.horizon or cfg.run.eval_slots
    ev = evaluate_policy(GreedyQPolicy(net, env), env, horizon, cfg.seeds.eval_seed, cfg.run.eval_start_slot)
    write_rows(args.csv, ev.rows)
    if len(read_rows(args.csv)) != horizon:
        raise RuntimeError("evaluation CSV is incomplete")
    print(json.dumps(ev.summary, indent=2))
    return 0


def cmd_baseline(args) -> int:
    cfg = _load_config(args)
    env = build_env(cfg)
    r = cfg.run
    if args.kind == "mdq":
        res = mdq_training(env, cfg.agent.config(), r.episodes, cfg.seeds.agent_seed, r.mdq_observation,
                           (r.train_start_slot,))
        write_metrics_csv(res.metrics, args.metrics_csv)
        print(f"trained MDQ for {r.episodes} episodes")
        return 0
    if args.kind == "bsp":
        res = bsp_search(env, env.trace.window(r.eval_start_slot, r.eval_slots), r.bsp_mode, allow_violations=True)
        policy = res.policy
        print(f"BSP ({res.mode}{', repaired' if res.repaired else ''}) peak-slot cost {res.cost:.4f}")
    else:
        policy = random_policy(env, cfg.seeds.eval_seed)
    ev = evaluate_policy(policy, env, r.eval_slots, cfg.seeds.eval_seed, r.eval_start_slot)
    write_rows(args.metrics_csv, ev.rows)
    print(json.dumps(ev.summary, indent=2))
    return 0


def cmd_run(args) -> int:
    cfg = _load_config(args)
    summary = run_experiment(cfg, args.out_dir, progress=args.verbose)
    print(json.dumps({k: v["total_cost"] for k, v in summary["policies"].items()}, indent=2))
    return 0


def cmd_sweep(args) -> int:
    cfg = _load_config(args)
    values = [float(v) for v in args.values.split(",")]
    rows = run_sweep(cfg, args.param, values, args.out_dir, progress=args.verbose)
    for row in rows:
        print(f"{row['value']:>8g} {row['policy']:>7} cost={row['total_cost']:.2f} "
              f"events={row['reconfiguration_events']}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="vranrl", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate-topology", help="write a Waxman topology as JSON")
    g.add_argument("--config")
    g.add_argument("--n-nodes", type=int, default=40)
    g.add_argument("--alpha", type=float, default=0.5)
    g.add_argument("--beta", type=float, default=0.1)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--n-es", type=int, default=4)
    g.add_argument("--n-fs", type=int, default=8)
    g.add_argument("--n-ru", type=int, default=8)
    g.add_argument("--area-km", type=float, default=10.0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate_topology)

    e = sub.add_parser("export-trace", help="write a demand trace CSV")
    e.add_argument("--config")
    e.add_argument("--days", type=int, default=3)
    e.add_argument("--n-bs", type=int, default=8)
    e.add_argument("--peak-gbps", type=float, default=4.0)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_export_trace)

    t = sub.add_parser("train", help="train the branching agent")
    t.add_argument("--config")
    t.add_argument("--seed", type=int)
    t.add_argument("--episodes", type=int)
    t.add_argument("--out-checkpoint", required=True)
    t.add_argument("--metrics-csv", required=True)
    t.add_argument("--init-from")
    t.set_defaults(func=cmd_train)

    v = sub.add_parser("evaluate", help="greedy evaluation of a checkpoint")
    v.add_argument("--config")
    v.add_argument("--checkpoint", required=True)
    v.add_argument("--horizon", type=int)
    v.add_argument("--csv", required=True)
    v.set_defaults(func=cmd_evaluate)

    b = sub.add_parser("baseline", help="run a reference policy")
    b.add_argument("--kind", choices=["bsp", "random", "mdq"], required=True)
    b.add_argument("--config")
    b.add_argument("--trace")
    b.add_argument("--metrics-csv", required=True)
    b.set_defaults(func=cmd_baseline)

    r = sub.add_parser("run", help="full experiment: train, evaluate, baselines, summary")
    r.add_argument("--config")
    r.add_argument("--seed", type=int)
    r.add_argument("--out-dir", required=True)
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="one experiment per parameter value")
    s.add_argument("--config")
    s.add_argument("--param", required=True, help="section.key, e.g. costs.kappa_r_per_rc")
    s.add_argument("--values", required=True, help="comma-separated values")
    s.add_argument("--out-dir", required=True)
    s.set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, SignatureError, FileNotFoundError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
