"""Command-line entry point: ``nodelambda {oracle build,train,eval,bench,gradcheck}``."""
from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

from .. import nn, oracle
from ..agents import RandomAgent
from ..env import ConfigError
from . import run
from .config import load_config, with_overrides

EXIT_OK, EXIT_CONFIG, EXIT_IO = 0, 2, 3


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="TOML experiment config")
    p.add_argument("--seed", type=int, help="master seed (u64)")
    p.add_argument("--out", default="runs", help="output directory (default: runs)")
    p.add_argument("--agent", choices=sorted(run.AGENT_KINDS))
    p.add_argument("--timesteps", type=int, help="training budget")
    p.add_argument("--eval-cubes", type=int)
    p.add_argument("--depth-min", type=int, help="evaluation scramble depth lower bound")
    p.add_argument("--depth-max", type=int, help="evaluation scramble depth upper bound")
    p.add_argument("--max-steps", type=int, help="evaluation step budget per cube")
    p.add_argument("--workers", type=int, help="evaluation threads")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nodelambda", description="2x2x2 cube RL lab")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("oracle", help="distance table tools")
    osub = p.add_subparsers(dest="oracle_command", required=True)
    b = osub.add_parser("build", help="BFS the full state space and save the table")
    b.add_argument("--out", default="runs", help="output directory (default: runs)")

    p = sub.add_parser("train", help="train one agent")
    _common(p)
    p = sub.add_parser("eval", help="evaluate a saved model or the random agent")
    _common(p)
    p.add_argument("--model", help="model file (default: <out>/<agent>.model)")
    p.add_argument("--oracle", help="distance table file used for the optimality gap")
    p = sub.add_parser("bench", help="train and evaluate all four agents on the same cubes")
    _common(p)
    p = sub.add_parser("gradcheck", help="finite-difference check of the nn engine")
    p.add_argument("--cases", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    return parser


def _config(args):
    cfg = load_config(args.config)
    return with_overrides(
        cfg,
        seed=args.seed,
        agent=args.agent,
        total_timesteps=args.timesteps,
        **{
            "eval.cubes": args.eval_cubes,
            "eval.depth_min": args.depth_min,
            "eval.depth_max": args.depth_max,
            "eval.max_steps": args.max_steps,
            "eval.workers": args.workers,
        },
    )


def cmd_oracle_build(args) -> int:
    t0 = time.perf_counter()
    table = oracle.build()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "oracle.bin"
    table.save(path)
    hist = table.histogram()
    print(f"{int(hist.sum())} states, max distance {table.max_distance}, "
          f"{time.perf_counter() - t0:.1f}s -> {path}")
    print("histogram:", " ".join(str(int(h)) for h in hist))
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _config(args)
    if cfg.agent == "random":
        raise ConfigError("the random agent has no parameters to train")
    res = run.train(cfg, args.out)
    solved = sum(e.solved for e in res.log.episodes)
    print(f"{cfg.agent}: {res.timesteps} steps, {len(res.log.episodes)} episodes "
          f"({solved} reached the goal), {res.wall_time:.1f}s -> {res.model}")
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg = _config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if cfg.agent == "random" and args.model is None:
        agent, steps = RandomAgent(), 0
    else:
        path = args.model or run.model_path(out, cfg.agent)
        agent, steps = run.load_agent(path), run.trained_timesteps(path)
    table = run.shared_oracle(args.oracle)
    rep = run.evaluate(agent, cfg, table=table, timesteps=steps)
    run.report_emit(rep, out / "results.csv", out / f"{agent.kind}_report.json")
    print(run.format_table({agent.kind: rep}))
    return EXIT_OK


def cmd_bench(args) -> int:
    cfg = _config(args)
    reports = run.bench(cfg, args.out)
    print(run.format_table(reports))
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    worst = max(nn.gradcheck(n_cases=args.cases, seed=args.seed))
    ok = worst < 1e-4
    print(f"{args.cases} cases, max relative error {worst:.3e}: {'ok' if ok else 'FAILED'}")
    return EXIT_OK if ok else 1


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handler = {
        "train": cmd_train,
        "eval": cmd_eval,
        "bench": cmd_bench,
        "gradcheck": cmd_gradcheck,
    }.get(args.command, cmd_oracle_build)
    try:
        return handler(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, run.FormatError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
