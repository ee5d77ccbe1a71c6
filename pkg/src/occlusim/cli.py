"""Command line entry point.

Subcommands:
  run      one episode, optional JSONL trajectory dump
  ablate   sweep injection ratio or existence prior over the mode grid
  compare  run the agent comparison grid
  bench    planner+filter latency over an N x M grid
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import harness
from .config import load_configs
from .world import ALL_MODES, PedMode


def _parse_floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _parse_ints(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def _mode(text: str) -> PedMode:
    try:
        return PedMode(text)
    except ValueError:
        names = ", ".join(m.value for m in ALL_MODES)
        raise argparse.ArgumentTypeError(f"unknown mode {text!r}; choose from: {names}")


def _print_cells(cells, env_cfg):
    header = f"{'label':<14}{'mode':<20}{'n':>5}{'CR':>8}{'PR':>8}{'PT':>8}{'minTTC':>8}"
    print(header)
    labels = []
    for c in cells:
        if c.label not in labels:
            labels.append(c.label)
    for c in cells:
        m = c.metrics
        pt = "-" if m.pass_time is None else f"{m.pass_time:.2f}"
        ttc = "-" if m.min_ttc is None else f"{m.min_ttc:.2f}"
        print(
            f"{c.label:<14}{c.mode:<20}{m.n:>5}{m.collision_rate:>8.3f}"
            f"{m.pass_rate:>8.3f}{pt:>8}{ttc:>8}"
        )
    for label in labels:
        m = harness.pooled_metrics(cells, label, env_cfg)
        pt = "-" if m.pass_time is None else f"{m.pass_time:.2f}"
        ttc = "-" if m.min_ttc is None else f"{m.min_ttc:.2f}"
        print(
            f"{label:<14}{'pooled':<20}{m.n:>5}{m.collision_rate:>8.3f}"
            f"{m.pass_rate:>8.3f}{pt:>8}{ttc:>8}"
        )


def cmd_run(args) -> int:
    env_cfg, agent_cfg, rule_cfg = load_configs(args.config)
    result = harness.run_episode(
        args.agent, args.mode, args.seed, env_cfg, agent_cfg, rule_cfg,
        log_diagnostics=args.diagnostics,
    )
    if args.out:
        result.write_jsonl(args.out)
    print(
        f"mode={result.mode} seed={result.seed} agent={result.agent} "
        f"status={result.status.value} steps={result.n_steps} "
        f"time={result.n_steps * env_cfg.dt:.1f}s"
    )
    return 0


def cmd_ablate(args) -> int:
    env_cfg, agent_cfg, rule_cfg = load_configs(args.config)
    cells = harness.ablation_sweep(
        args.axis, _parse_floats(args.values), args.episodes, env_cfg, agent_cfg,
        base_seed=args.seed, workers=args.workers,
    )
    _print_cells(cells, env_cfg)
    if args.out:
        harness.write_sweep_csv(args.out, cells, env_cfg)
        print(f"wrote {args.out}")
    return 0


def cmd_compare(args) -> int:
    env_cfg, agent_cfg, rule_cfg = load_configs(args.config)
    kinds = [k.strip() for k in args.agents.split(",") if k.strip()]
    for k in kinds:
        if k not in harness.AGENT_KINDS:
            raise ValueError(f"unknown agent {k!r}; expected one of {harness.AGENT_KINDS}")
    cells = harness.compare_agents(
        kinds, args.episodes, env_cfg, agent_cfg, rule_cfg,
        base_seed=args.seed, workers=args.workers,
    )
    _print_cells(cells, env_cfg)
    if args.out:
        harness.write_sweep_csv(args.out, cells, env_cfg)
        print(f"wrote {args.out}")
    return 0


def cmd_bench(args) -> int:
    env_cfg, agent_cfg, _ = load_configs(args.config)
    rows = harness.bench_latency(
        _parse_ints(args.n), _parse_ints(args.m), env_cfg, agent_cfg,
        repeats=args.repeats, loops=args.loops,
    )
    print(f"{'N':>6}{'M':>6}{'ms/step':>10}")
    for r in rows:
        print(f"{r['n_particles']:>6}{r['n_samples']:>6}{r['ms_per_step']:>10.2f}")
    if args.out:
        harness.write_bench_csv(args.out, rows)
        print(f"wrote {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="occlusim", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    pr = sub.add_parser("run", help="run one episode")
    pr.add_argument("--mode", type=_mode, default=PedMode.HESITANT)
    pr.add_argument("--seed", type=int, default=0)
    pr.add_argument("--agent", choices=harness.AGENT_KINDS, default="ours")
    pr.add_argument("--config", type=Path, default=None)
    pr.add_argument("--out", type=Path, default=None, help="JSONL trajectory path")
    pr.add_argument("--diagnostics", action="store_true", help="log planner diagnostics")
    pr.set_defaults(func=cmd_run)

    pa = sub.add_parser("ablate", help="sweep one agent knob over all modes")
    pa.add_argument("--axis", choices=("rho", "prior"), required=True)
    pa.add_argument("--values", required=True, help="comma separated, e.g. 0,0.1,0.3,0.8")
    pa.add_argument("--episodes", type=int, default=40, help="episodes per (value, mode) cell")
    pa.add_argument("--seed", type=int, default=0)
    pa.add_argument("--config", type=Path, default=None)
    pa.add_argument("--workers", type=int, default=None)
    pa.add_argument("--out", type=Path, default=None, help="CSV output path")
    pa.set_defaults(func=cmd_ablate)

    pc = sub.add_parser("compare", help="compare agents on a shared seed grid")
    pc.add_argument("--agents", default="ours,reactive,rule")
    pc.add_argument("--episodes", type=int, default=40)
    pc.add_argument("--seed", type=int, default=0)
    pc.add_argument("--config", type=Path, default=None)
    pc.add_argument("--workers", type=int, default=None)
    pc.add_argument("--out", type=Path, default=None)
    pc.set_defaults(func=cmd_compare)

    pb = sub.add_parser("bench", help="latency of one agent step over an N x M grid")
    pb.add_argument("--n", default="50,100", help="particle counts, comma separated")
    pb.add_argument("--m", default="50,100", help="candidate counts, comma separated")
    pb.add_argument("--repeats", type=int, default=10)
    pb.add_argument("--loops", type=int, default=20)
    pb.add_argument("--config", type=Path, default=None)
    pb.add_argument("--out", type=Path, default=None)
    pb.set_defaults(func=cmd_bench)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
