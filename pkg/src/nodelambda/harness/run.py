"""Training, evaluation and report emission."""
from __future__ import annotations

import csv
import functools
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .. import cube, env, oracle
from ..agents import AGENT_KINDS, Agent, RandomAgent, TrainLog
from ..cube import CubeState
from ..env import ConfigError, EnvConfig, splitmix64
from .config import ExperimentConfig

CSV_COLUMNS = ["agent", "seed", "total", "solved", "solve_rate", "mean_steps", "optimality_gap",
               "timesteps", "wall_time"]
# the comparison table leaves out wall_time so repeated runs are byte-identical
BENCH_COLUMNS = CSV_COLUMNS[:-1]
LOG_COLUMNS = ["episode", "timestep", "backward", "length", "solved", "loss", "loss_ns"]

EVAL_SALT = 0xE7A1_C0BE
VALID_SALT = 0x5A11_DA7E
BENCH_ORDER = ("tabular", "dqn", "nodelambda", "random")
NN_MAGIC = b"NLRL"
TABULAR_MAGIC = b"NLTQ"


class FormatError(ValueError):
    """Model or table file that cannot be read as the expected format/version."""


# --- agents and model files ------------------------------------------------

def make_agent(config: ExperimentConfig, kind: str | None = None) -> Agent:
    kind = kind or config.agent
    params = config.section(kind).agent_params()
    if kind in ("dqn", "nodelambda"):
        params["seed"] = config.seed
    return AGENT_KINDS[kind](**params)


def model_path(out: str | Path, kind: str) -> Path:
    return Path(out) / f"{kind}.model"


def trained_timesteps(path: str | Path) -> int:
    """Training budget recorded in a model's sidecar (0 when unknown)."""
    sidecar = Path(str(path) + ".json")
    if not sidecar.exists():
        return 0
    return int(json.loads(sidecar.read_text()).get("timesteps", 0))


def load_agent(path: str | Path) -> Agent:
    """Load any saved agent, dispatching on the file magic and the JSON sidecar."""
    path = Path(path)
    with open(path, "rb") as fh:
        magic = fh.read(4)
    sidecar = Path(str(path) + ".json")
    meta = json.loads(sidecar.read_text()) if sidecar.exists() else {}
    params = meta.get("params")
    try:
        if magic == TABULAR_MAGIC:
            return AGENT_KINDS["tabular"].load(path, params)
        if magic == NN_MAGIC:
            from .. import nn

            kind = meta.get("agent")
            if kind is None:
                count = len(nn.load_networks(path))
                kind = {2: "dqn", 13: "nodelambda"}.get(count)
                if kind is None:
                    raise ValueError(f"{path}: {count} networks matches no agent kind")
            if kind not in ("dqn", "nodelambda"):
                raise ValueError(f"{path}: sidecar names agent '{kind}' but the file holds networks")
            return AGENT_KINDS[kind].load(path, params)
    except (ValueError, TypeError) as exc:
        raise FormatError(str(exc)) from exc
    raise FormatError(f"{path}: unknown model magic {magic!r}")


# --- training ----------------------------------------------------------------

@dataclass
class TrainResult:
    agent: Agent
    log: TrainLog
    model: Path | None
    timesteps: int
    wall_time: float
    checkpoints: list[Path] = field(default_factory=list)


def write_train_log(path: Path, log: TrainLog) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(LOG_COLUMNS)
        for row in log.rows():
            w.writerow([_fmt(row[c]) for c in LOG_COLUMNS])


def train(config: ExperimentConfig, out: str | Path, kind: str | None = None) -> TrainResult:
    """Train one agent kind and write ``<kind>.model``, its sidecar and ``<kind>_train_log.csv``."""
    kind = kind or config.agent
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    agent = make_agent(config, kind)
    timesteps = config.timesteps_for(kind)
    t0 = time.perf_counter()
    if kind == "random":
        return TrainResult(agent, TrainLog(), None, 0, 0.0)

    path = model_path(out, kind)
    ckpt_dir = out / "checkpoints"
    written: list[Path] = []
    best = [-1.0]

    def checkpoint(t: int) -> None:
        ckpt_dir.mkdir(exist_ok=True)
        p = ckpt_dir / f"{kind}-{t:08d}.model"
        agent.save(p)
        agent.write_sidecar(p, timesteps=t)
        written.append(p)
        if config.early_stop:
            rate = _validation_rate(agent, config)
            if rate > best[0]:
                best[0] = rate
                agent.save(path)
                agent.write_sidecar(path, timesteps=t)

    every = config.checkpoint_every or None
    hook = checkpoint if every else None
    log = agent.train(config.train_env(kind), timesteps, checkpoint=hook, checkpoint_every=every)
    wall = time.perf_counter() - t0
    if not config.early_stop or _validation_rate(agent, config) > best[0]:
        agent.save(path)
        agent.write_sidecar(path, timesteps=timesteps)
    write_train_log(out / f"{kind}_train_log.csv", log)
    return TrainResult(agent, log, path, timesteps, wall, written)


def _validation_rate(agent: Agent, config: ExperimentConfig) -> float:
    cfg = config.model_copy(update={"eval": config.eval.model_copy(update={"cubes": config.early_stop_cubes})})
    report = evaluate(agent, cfg, seed=splitmix64(config.seed ^ VALID_SALT), with_oracle=False)
    return report.solved / report.total


# --- evaluation --------------------------------------------------------------

@functools.lru_cache(maxsize=1)
def shared_oracle(path: str | None = None) -> oracle.DistanceTable:
    """Distance table for reporting; loaded from ``path`` when it exists, else built in memory."""
    if path is not None and Path(path).exists():
        try:
            return oracle.DistanceTable.load(path)
        except ValueError as exc:
            raise FormatError(str(exc)) from exc
    return oracle.build()


def eval_scramble(config: EnvConfig, rng: np.random.Generator) -> tuple[CubeState, int]:
    """Like ``env.reset`` but also returns the drawn scramble depth."""
    while True:
        depth = int(rng.integers(config.scramble_depth_min, config.scramble_depth_max + 1))
        s, _ = cube.scramble(depth, rng)
        if not cube.is_solved(s):
            return s, depth


@dataclass
class Episode:
    depth: int
    solved: bool
    steps: int
    start: CubeState


def run_episode(agent: Agent, config: EnvConfig, index: int) -> Episode:
    rng = env.episode_rng(config.seed, index)
    s, depth = eval_scramble(config, rng)
    start = s
    for steps in range(1, config.max_steps + 1):
        s = cube.apply_move(s, agent.act(s, rng))
        if cube.is_solved(s):
            return Episode(depth, True, steps, start)
    return Episode(depth, False, config.max_steps, start)


@dataclass
class EvalReport:
    agent: str
    seed: int
    total: int
    solved: int
    mean_steps: float  # over solved episodes
    optimality_gap: float  # mean(steps - oracle distance) over solved episodes
    per_depth: dict[int, tuple[int, int, float]]  # depth -> (attempted, solved, mean steps of solved)
    timesteps: int = 0
    wall_time: float = 0.0
    config_digest: str = ""

    def __post_init__(self):
        if self.total < 1:
            raise ValueError("a report needs at least one episode")
        if not 0 <= self.solved <= self.total:
            raise ValueError("solved count out of range")

    @property
    def solve_rate(self) -> float:
        return self.solved / self.total

    def row(self, columns=CSV_COLUMNS) -> list[str]:
        values = dict(asdict(self), solve_rate=self.solve_rate)
        return [_fmt(values[c]) for c in columns]

    def to_json(self) -> dict:
        d = asdict(self)
        d["solve_rate"] = self.solve_rate
        d["per_depth"] = {str(k): {"attempted": a, "solved": s, "mean_steps": _json_float(m)}
                          for k, (a, s, m) in sorted(self.per_depth.items())}
        for k in ("mean_steps", "optimality_gap"):
            d[k] = _json_float(d[k])
        return d


def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _json_float(x: float):
    return None if math.isnan(x) else x


def evaluate(agent: Agent, config: ExperimentConfig, seed: int | None = None, table=None,
             with_oracle: bool = True, timesteps: int = 0) -> EvalReport:
    """Greedy evaluation on ``config.eval.cubes`` fresh scrambles.

    Cube ``i`` is fully determined by (seed, i), so every agent evaluated with
    the same seed sees the same cubes regardless of worker count.
    """
    seed = config.seed if seed is None else seed
    ecfg = config.eval_env(splitmix64(seed ^ EVAL_SALT))
    before = agent.digest()
    t0 = time.perf_counter()
    run = functools.partial(run_episode, agent, ecfg)
    if config.eval.workers > 1:
        with ThreadPoolExecutor(config.eval.workers) as pool:
            episodes = list(pool.map(run, range(config.eval.cubes)))
    else:
        episodes = [run(i) for i in range(config.eval.cubes)]
    wall = time.perf_counter() - t0
    if agent.digest() != before:
        raise RuntimeError("evaluation changed the model parameters")

    won = [e for e in episodes if e.solved]
    gap = float("nan")
    if with_oracle and won:
        table = table if table is not None else shared_oracle()
        d = table.distance_batch(np.stack([e.start.array() for e in won]))
        gap = float(np.mean([e.steps for e in won] - d.astype(np.float64)))
    per_depth = {}
    for depth in sorted({e.depth for e in episodes}):
        at = [e for e in episodes if e.depth == depth]
        ok = [e.steps for e in at if e.solved]
        per_depth[depth] = (len(at), len(ok), float(np.mean(ok)) if ok else float("nan"))
    return EvalReport(
        agent=agent.kind,
        seed=seed,
        total=len(episodes),
        solved=len(won),
        mean_steps=float(np.mean([e.steps for e in won])) if won else float("nan"),
        optimality_gap=gap,
        per_depth=per_depth,
        timesteps=timesteps,
        wall_time=wall,
        config_digest=config.digest(),
    )


class OracleGreedy(Agent):
    """Reference policy that follows the distance table downhill."""

    kind = "oracle"

    def __init__(self, table: oracle.DistanceTable):
        self.table = table

    def act(self, s, rng=None):
        return oracle.optimal_move(self.table, s)

    def digest(self) -> str:
        return "oracle"


# --- reports -----------------------------------------------------------------

def report_emit(report: EvalReport, csv_path: str | Path, json_path: str | Path | None = None) -> None:
    """Append one CSV row (header on first write) and write the full JSON report."""
    csv_path = Path(csv_path)
    fresh = not csv_path.exists() or csv_path.stat().st_size == 0
    with open(csv_path, "a", newline="") as fh:
        w = csv.writer(fh)
        if fresh:
            w.writerow(CSV_COLUMNS)
        w.writerow(report.row())
    if json_path is not None:
        Path(json_path).write_text(json.dumps(report.to_json(), indent=2, sort_keys=True) + "\n")


def parse_row(row: dict) -> dict:
    """Inverse of the CSV formatting for the numeric columns."""
    out = {"agent": row["agent"]}
    for c in ("seed", "total", "solved", "timesteps"):
        if c in row:
            out[c] = int(row[c])
    for c in ("solve_rate", "mean_steps", "optimality_gap", "wall_time"):
        if c in row:
            out[c] = float(row[c])
    return out


# --- bench -------------------------------------------------------------------

def bench(config: ExperimentConfig, out: str | Path, kinds=BENCH_ORDER) -> dict[str, EvalReport]:
    """Train every agent kind and evaluate all of them on the same cubes.

    Writes ``bench.csv`` (deterministic comparison table), ``bench.json``
    (full reports including timings) and the trained models.
    """
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    table = shared_oracle()
    reports = {}
    for kind in kinds:
        result = train(config, out, kind)
        if result.model is None:
            agent, steps = result.agent, 0
        else:
            agent, steps = load_agent(result.model), trained_timesteps(result.model)
        rep = evaluate(agent, config, table=table, timesteps=steps)
        rep.wall_time = result.wall_time + rep.wall_time
        reports[kind] = rep
    with open(out / "bench.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(BENCH_COLUMNS)
        for rep in reports.values():
            w.writerow(rep.row(BENCH_COLUMNS))
    (out / "bench.json").write_text(
        json.dumps({k: r.to_json() for k, r in reports.items()}, indent=2, sort_keys=True) + "\n")
    return reports


def format_table(reports: dict[str, EvalReport]) -> str:
    lines = [f"{'agent':<12}{'solved':>8}{'total':>7}{'rate':>8}{'steps':>8}{'gap':>7}"]
    for kind, r in reports.items():
        lines.append(f"{kind:<12}{r.solved:>8}{r.total:>7}{r.solve_rate:>8.3f}{r.mean_steps:>8.2f}"
                     f"{r.optimality_gap:>7.2f}")
    return "\n".join(lines)


__all__ = [
    "BENCH_COLUMNS", "CSV_COLUMNS", "ConfigError", "EvalReport", "FormatError", "OracleGreedy", "TrainResult",
    "bench", "evaluate", "load_agent", "make_agent", "parse_row", "report_emit", "train",
]
