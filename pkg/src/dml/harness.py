"""Experiment runner: configure, run, sweep, and compare.

One master seed is split into named substreams (agent, environment,
exploring starts, sweep replication) through numpy SeedSequence spawn
keys, so agent and environment randomness never interact and every run is
reproducible bit for bit: identical configs produce byte-identical CSVs.

Output schema (RFC-4180 CSVs, one directory per run, inventoried in
``manifest.json``):

* ``epochs.csv``        epoch,state,action,outcome,spikes
* ``values.csv``        state,action,value
* ``policy.csv``        state,greedy_action
* ``moa.csv``           window,value           (bandit)
* ``returns.csv``       window,value
* ``returns_phaseK.csv``window,value           (maze, per arena phase)
* ``oracle_policy_phaseK.csv`` / ``oracle_distance_phaseK.csv``  (maze)
* ``maze_phaseK.json``  arena description      (maze)
* ``energy.csv``        epoch,current_vc_spikes,total_vc_spikes (spiking blackjack)
* ``checkpoints.csv``   episode,state,action,value (when checkpointing)
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from .agent import Agent, AgentConfig
from .baseline import ValueTable, maze_value_iteration, mc_control
from .circuits import ValueCircuitConfig
from .envs import (
    Bandit,
    BanditSpec,
    Blackjack,
    Maze,
    MazeSpec,
    center_goal_walls,
)
from .metrics import (
    EpochLog,
    EpochLogBuilder,
    average_return,
    js_divergence,
    moa,
    policy_diff,
    spikes_per_epoch,
)

TASKS = ("bandit", "maze", "blackjack")
BACKENDS = ("spiking", "cpu")

# substream names for the master-seed split
STREAM_AGENT = 0
STREAM_ENV = 1
STREAM_EXPLORE = 2
STREAM_SWEEP = 3


class ConfigError(ValueError):
    pass


def substream(master_seed: int, *key: int) -> np.random.Generator:
    """Named child generator of the master seed (documented split rule:
    child k is SeedSequence(master, spawn_key=k))."""
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=key))


def derive_seed(master_seed: int, *key: int) -> int:
    """64-bit child seed for sweep entries, from the same split rule."""
    words = np.random.SeedSequence(master_seed, spawn_key=key).generate_state(2)
    return int(words[0]) << 32 | int(words[1])


@dataclass(frozen=True)
class MazePhase:
    goal: tuple[int, int]
    walls: frozenset
    epochs: int


def default_maze_phases(epochs_per_phase: int = 4000) -> tuple[MazePhase, ...]:
    """Open arena, walled goal (northern approach only), relocated goal.

    The walls raised in the second phase stay up when the goal moves."""
    walls = center_goal_walls((2, 2))
    return (
        MazePhase((2, 2), frozenset(), epochs_per_phase),
        MazePhase((2, 2), walls, epochs_per_phase),
        MazePhase((2, 0), walls, epochs_per_phase),
    )


@dataclass(frozen=True)
class ExperimentConfig:
    task: str
    backend: str = "spiking"
    epochs: int = 2000  # bandit: pulls; blackjack: episodes; maze: per config
    epsilon: float = 0.1
    window: int = 64  # rate-coding readout length (the sweepable "T")
    theta: int = 64
    dq: int = 1
    seed: int = 0
    checkpoint_every: int = 0
    bandit: BanditSpec = field(default_factory=BanditSpec)
    maze: MazeSpec = field(default_factory=MazeSpec)
    maze_phases: tuple[MazePhase, ...] = field(default_factory=default_maze_phases)

    def __post_init__(self):
        if self.task not in TASKS:
            raise ConfigError(f"task must be one of {TASKS}, got {self.task!r}")
        if self.backend not in BACKENDS:
            raise ConfigError(f"backend must be one of {BACKENDS}")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if not 0 <= self.epsilon <= 1:
            raise ConfigError("epsilon must lie in [0, 1]")
        if self.window < 1 or self.theta < 1 or self.dq < 1:
            raise ConfigError("window, theta, dq must be >= 1")
        if self.dq > self.theta:
            raise ConfigError("dq cannot exceed theta")
        if self.checkpoint_every < 0:
            raise ConfigError("checkpoint_every must be >= 0")

    @property
    def vc(self) -> ValueCircuitConfig:
        return ValueCircuitConfig(theta=self.theta, dq=self.dq)

    def to_dict(self) -> dict:
        d = {
            "task": self.task,
            "backend": self.backend,
            "epochs": self.epochs,
            "epsilon": self.epsilon,
            "window": self.window,
            "theta": self.theta,
            "dq": self.dq,
            "seed": self.seed,
            "checkpoint_every": self.checkpoint_every,
        }
        if self.task == "bandit":
            d["bandit"] = {"arm_probs": list(self.bandit.arm_probs)}
        if self.task == "maze":
            d["maze"] = {
                "width": self.maze.width,
                "height": self.maze.height,
                "step_limit": self.maze.step_limit,
                "exploring_starts": self.maze.exploring_starts,
                "phases": [
                    {
                        "goal": list(p.goal),
                        "walls": sorted([x, y, dd] for x, y, dd in p.walls),
                        "epochs": p.epochs,
                    }
                    for p in self.maze_phases
                ],
            }
        return d

    @staticmethod
    def from_dict(doc: dict) -> "ExperimentConfig":
        try:
            kwargs = {
                k: doc[k]
                for k in (
                    "task",
                    "backend",
                    "epochs",
                    "epsilon",
                    "window",
                    "theta",
                    "dq",
                    "seed",
                    "checkpoint_every",
                )
                if k in doc
            }
            if "bandit" in doc:
                kwargs["bandit"] = BanditSpec(tuple(doc["bandit"]["arm_probs"]))
            if "maze" in doc:
                m = doc["maze"]
                kwargs["maze"] = MazeSpec(
                    width=m.get("width", 5),
                    height=m.get("height", 5),
                    step_limit=m.get("step_limit", 8),
                    exploring_starts=m.get("exploring_starts", True),
                )
                if "phases" in m:
                    kwargs["maze_phases"] = tuple(
                        MazePhase(
                            tuple(p["goal"]),
                            frozenset(tuple(w) for w in p.get("walls", [])),
                            p["epochs"],
                        )
                        for p in m["phases"]
                    )
        except (KeyError, TypeError) as e:
            raise ConfigError(f"malformed config: {e}") from e
        return ExperimentConfig(**kwargs)

    @staticmethod
    def from_json_file(path) -> "ExperimentConfig":
        with open(path) as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as e:
                raise ConfigError(f"config is not valid JSON: {e}") from e
        return ExperimentConfig.from_dict(doc)


# ---------------------------------------------------------------------------
# CSV writers (deterministic formatting; floats via repr, NaN as empty)


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    f = float(v)
    if np.isnan(f):
        return ""
    return repr(f)


def write_csv(path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\r\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\r\n")


def write_values_csv(path, values: np.ndarray) -> None:
    S, A = values.shape
    write_csv(
        path,
        ["state", "action", "value"],
        ((s, a, values[s, a]) for s in range(S) for a in range(A)),
    )


def read_values_csv(path, shape: tuple[int, int] | None = None) -> np.ndarray:
    rows = _read_csv(path)
    S = max(int(r[0]) for r in rows) + 1
    A = max(int(r[1]) for r in rows) + 1
    if shape is not None:
        S, A = shape
    out = np.zeros((S, A))
    for s, a, v in rows:
        out[int(s), int(a)] = float(v)
    return out


def write_policy_csv(path, policy: np.ndarray) -> None:
    write_csv(
        path,
        ["state", "greedy_action"],
        ((s, int(a)) for s, a in enumerate(policy)),
    )


def read_policy_csv(path) -> np.ndarray:
    rows = _read_csv(path)
    out = np.zeros(len(rows), dtype=np.int64)
    for s, a in rows:
        out[int(s)] = int(a)
    return out


def write_series_csv(path, series: np.ndarray) -> None:
    write_csv(path, ["window", "value"], ((k, v) for k, v in enumerate(series)))


def write_epochs_csv(path, log: EpochLog) -> None:
    from .metrics import CODE_OUTCOMES

    with open(path, "w", newline="") as fh:
        fh.write("epoch,state,action,outcome,spikes\r\n")
        for k in range(len(log)):
            fh.write(
                f"{k},{log.state[k]},{log.action[k]},"
                f"{CODE_OUTCOMES[int(log.outcome[k])]},{log.spikes[k]}\r\n"
            )


def read_epochs_csv(path) -> EpochLog:
    from .metrics import OUTCOME_CODES

    rows = _read_csv(path)
    n = len(rows)
    state = np.zeros(n, dtype=np.int64)
    action = np.zeros(n, dtype=np.int64)
    outcome = np.zeros(n, dtype=np.int64)
    spikes = np.zeros(n, dtype=np.int64)
    for i, (e, s, a, o, sp) in enumerate(rows):
        state[i], action[i] = int(s), int(a)
        outcome[i] = OUTCOME_CODES[o]
        spikes[i] = int(sp)
    return EpochLog(state, action, outcome, spikes)


def _read_csv(path) -> list[list[str]]:
    import csv

    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        return [row for row in reader if row]


# ---------------------------------------------------------------------------
# the epoch loops


@dataclass
class RunResult:
    config: ExperimentConfig
    log: EpochLog
    values: np.ndarray
    policy: np.ndarray
    phase_ranges: list[tuple[int, int]] | None = None
    phase_values: list[np.ndarray] = field(default_factory=list)
    phase_policies: list[np.ndarray] = field(default_factory=list)
    checkpoints: list[tuple[int, np.ndarray]] = field(default_factory=list)
    energy: list[tuple[int, int, int]] | None = None  # epoch, current, total


def _run_bandit_spiking(cfg: ExperimentConfig) -> RunResult:
    env = Bandit(cfg.bandit, substream(cfg.seed, STREAM_ENV))
    agent = Agent(
        AgentConfig(1, env.n_actions, vc=cfg.vc, window=cfg.window,
                    epsilon=cfg.epsilon),
        rng=substream(cfg.seed, STREAM_AGENT),
    )
    log = EpochLogBuilder()
    before = agent.total_spike_count()
    for _ in range(cfg.epochs):
        s = env.reset()
        agent.observe(s)
        a = agent.choose_action()
        agent.record(s, a)
        res = env.step(a)
        agent.finish_episode(res.outcome)
        after = agent.total_spike_count()
        log.add(s, a, res.outcome, after - before)
        before = after
    return RunResult(cfg, log.build(), agent.snapshot_values(), agent.greedy_policy())


def _run_bandit_cpu(cfg: ExperimentConfig) -> RunResult:
    from .baseline import EpochRecord

    env = Bandit(cfg.bandit, substream(cfg.seed, STREAM_ENV))
    records: list[EpochRecord] = []
    table = mc_control(
        env, episodes=cfg.epochs, epsilon=cfg.epsilon,
        rng=substream(cfg.seed, STREAM_AGENT), log=records,
    )
    log = EpochLogBuilder()
    for r in records:
        log.add(r.state, r.action, r.outcome, 0)
    return RunResult(cfg, log.build(), table.values.copy(), table.greedy())


def _maze_specs(cfg: ExperimentConfig) -> list[MazeSpec]:
    return [
        replace(cfg.maze, walls=p.walls, goal=p.goal) for p in cfg.maze_phases
    ]


def _run_maze_spiking(cfg: ExperimentConfig) -> RunResult:
    env = Maze(_maze_specs(cfg)[0], substream(cfg.seed, STREAM_ENV))
    agent = Agent(
        AgentConfig(env.n_states, 4, vc=cfg.vc, window=cfg.window,
                    epsilon=cfg.epsilon),
        rng=substream(cfg.seed, STREAM_AGENT),
    )
    log = EpochLogBuilder()
    phase_ranges = []
    phase_values = []
    phase_policies = []
    epoch = 0
    before = agent.total_spike_count()
    for phase, spec in zip(cfg.maze_phases, _maze_specs(cfg)):
        env.reconfigure(spec.walls, spec.goal)
        start = epoch
        while epoch - start < phase.epochs:
            s = env.reset()
            while True:
                agent.observe(s)
                a = agent.choose_action()
                agent.record(s, a)
                res = env.step(a)
                after = agent.total_spike_count()
                log.add(s, a, res.outcome, after - before)
                before = after
                epoch += 1
                if res.terminal:
                    agent.finish_episode(res.outcome)
                    before = agent.total_spike_count()
                    break
                s = res.next_state
        phase_ranges.append((start, epoch))
        phase_values.append(agent.snapshot_values())
        phase_policies.append(agent.greedy_policy())
    return RunResult(
        cfg, log.build(), agent.snapshot_values(), agent.greedy_policy(),
        phase_ranges=phase_ranges, phase_values=phase_values,
        phase_policies=phase_policies,
    )


def _run_maze_cpu(cfg: ExperimentConfig) -> RunResult:
    from .baseline import EpochRecord

    env = Maze(_maze_specs(cfg)[0], substream(cfg.seed, STREAM_ENV))
    agent_rng = substream(cfg.seed, STREAM_AGENT)
    records: list[EpochRecord] = []
    table: ValueTable | None = None
    phase_ranges = []
    phase_values = []
    phase_policies = []
    for phase, spec in zip(cfg.maze_phases, _maze_specs(cfg)):
        env.reconfigure(spec.walls, spec.goal)
        start = len(records)
        table = mc_control(
            env, episodes=2**62, epsilon=cfg.epsilon, rng=agent_rng,
            log=records, max_epochs=phase.epochs, table=table,
        )
        phase_ranges.append((start, len(records)))
        phase_values.append(table.values.copy())
        phase_policies.append(table.greedy())
    log = EpochLogBuilder()
    for r in records:
        log.add(r.state, r.action, r.outcome, 0)
    return RunResult(
        cfg, log.build(), table.values.copy(), table.greedy(),
        phase_ranges=phase_ranges, phase_values=phase_values,
        phase_policies=phase_policies,
    )


def _run_blackjack_spiking(cfg: ExperimentConfig) -> RunResult:
    env = Blackjack(substream(cfg.seed, STREAM_ENV))
    explore = substream(cfg.seed, STREAM_EXPLORE)
    agent = Agent(
        AgentConfig(env.n_states, 2, vc=cfg.vc, window=cfg.window,
                    epsilon=cfg.epsilon),
        rng=substream(cfg.seed, STREAM_AGENT),
    )
    log = EpochLogBuilder()
    checkpoints = []
    energy = []
    epoch = 0
    before = agent.total_spike_count()
    vc_before = agent.ltm_vc_counts()
    for ep in range(cfg.epochs):
        s = env.reset()
        first = True
        while True:
            agent.observe(s)
            if first:  # exploring starts: uniform random first action
                a = int(explore.integers(env.n_actions))
                first = False
            else:
                a = agent.choose_action()
            agent.record(s, a)
            res = env.step(a)
            after = agent.total_spike_count()
            vc_after = agent.ltm_vc_counts()
            delta = vc_after - vc_before
            energy.append((epoch, int(delta[s].sum()), int(delta.sum())))
            log.add(s, a, res.outcome, after - before)
            before = after
            vc_before = vc_after
            epoch += 1
            if res.terminal:
                agent.finish_episode(res.outcome)
                before = agent.total_spike_count()
                vc_before = agent.ltm_vc_counts()
                break
            s = res.next_state
        if cfg.checkpoint_every and (ep + 1) % cfg.checkpoint_every == 0:
            checkpoints.append((ep + 1, agent.snapshot_values()))
    return RunResult(
        cfg, log.build(), agent.snapshot_values(), agent.greedy_policy(),
        checkpoints=checkpoints, energy=energy,
    )


def _run_blackjack_cpu(cfg: ExperimentConfig) -> RunResult:
    from .baseline import EpochRecord

    env = Blackjack(substream(cfg.seed, STREAM_ENV))
    explore = substream(cfg.seed, STREAM_EXPLORE)
    agent_rng = substream(cfg.seed, STREAM_AGENT)
    records: list[EpochRecord] = []
    checkpoints = []
    table: ValueTable | None = None
    chunk = cfg.checkpoint_every or cfg.epochs
    done = 0
    while done < cfg.epochs:
        n = min(chunk, cfg.epochs - done)
        table = mc_control(
            env, episodes=n, epsilon=cfg.epsilon, rng=agent_rng,
            exploring_start_actions=True, explore_rng=explore,
            log=records, table=table,
        )
        done += n
        if cfg.checkpoint_every:
            checkpoints.append((done, table.values.copy()))
    log = EpochLogBuilder()
    for r in records:
        log.add(r.state, r.action, r.outcome, 0)
    return RunResult(
        cfg, log.build(), table.values.copy(), table.greedy(),
        checkpoints=checkpoints,
    )


_RUNNERS = {
    ("bandit", "spiking"): _run_bandit_spiking,
    ("bandit", "cpu"): _run_bandit_cpu,
    ("maze", "spiking"): _run_maze_spiking,
    ("maze", "cpu"): _run_maze_cpu,
    ("blackjack", "spiking"): _run_blackjack_spiking,
    ("blackjack", "cpu"): _run_blackjack_cpu,
}


def execute(cfg: ExperimentConfig) -> RunResult:
    """Run the epoch loop in memory (no files)."""
    return _RUNNERS[(cfg.task, cfg.backend)](cfg)


# ---------------------------------------------------------------------------
# artifact-producing entry points


def final_moa(log: EpochLog, optimal_action: int, tail: int = 1000) -> float:
    tail = min(tail, len(log))
    return float((log.action[-tail:] == optimal_action).mean())


def run(cfg: ExperimentConfig, out_dir, force: bool = False) -> dict:
    """Execute one experiment and write its artifact directory.

    Refuses to disturb an existing non-empty directory unless ``force``.
    Returns the manifest dictionary (also written as ``manifest.json``).
    """
    out = Path(out_dir)
    if out.exists() and any(out.iterdir()) and not force:
        raise FileExistsError(
            f"output directory {out} is not empty (use force to overwrite)"
        )
    out.mkdir(parents=True, exist_ok=True)

    result = execute(cfg)
    files: dict[str, str] = {}

    def emit(name, writer, *args):
        writer(out / name, *args)
        files[name] = name

    emit("epochs.csv", write_epochs_csv, result.log)
    emit("values.csv", write_values_csv, result.values)
    emit("policy.csv", write_policy_csv, result.policy)

    summary: dict = {"epochs": len(result.log)}
    if cfg.task == "bandit":
        opt = cfg.bandit.optimal_action
        emit("moa.csv", write_series_csv, moa(result.log, opt))
        emit("returns.csv", write_series_csv, average_return(result.log))
        summary["final_moa"] = final_moa(result.log, opt)
        summary["cumulative_reward"] = int((result.log.outcome == 1).sum())
    elif cfg.task == "maze":
        emit("returns.csv", write_series_csv, average_return(result.log))
        summary["phase_final_return"] = []
        for k, (a, b) in enumerate(result.phase_ranges):
            sub = EpochLog(
                result.log.state[a:b], result.log.action[a:b],
                result.log.outcome[a:b], result.log.spikes[a:b],
            )
            emit(f"returns_phase{k}.csv", write_series_csv, average_return(sub))
            tail = sub.outcome[-min(500, len(sub.outcome)):]
            counted = tail >= 0
            summary["phase_final_return"].append(
                float(tail[counted].mean()) if counted.any() else None
            )
        for k, spec in enumerate(_maze_specs(cfg)):
            cert = maze_value_iteration(spec)
            oracle_policy = np.array(
                [min(acts) if acts else 0 for acts in cert.optimal_actions]
            )
            emit(f"maze_phase{k}.json",
                 lambda p, s=spec: Path(p).write_text(s.to_json()))
            emit(f"oracle_policy_phase{k}.csv", write_policy_csv, oracle_policy)
            emit(
                f"oracle_distance_phase{k}.csv",
                write_csv,
                ["state", "distance"],
                ((s, int(d)) for s, d in enumerate(cert.distance)),
            )
        for k, (vals, pol) in enumerate(zip(result.phase_values, result.phase_policies)):
            emit(f"values_phase{k}.csv", write_values_csv, vals)
            emit(f"policy_phase{k}.csv", write_policy_csv, pol)
    elif cfg.task == "blackjack":
        emit("returns.csv", write_series_csv, average_return(result.log, 1000))
        tail = result.log.outcome[-max(len(result.log) // 10, 1):]
        counted = tail >= 0
        summary["final_return"] = float(tail[counted].mean()) if counted.any() else None

    if result.energy is not None:
        emit(
            "energy.csv",
            write_csv,
            ["epoch", "current_vc_spikes", "total_vc_spikes"],
            result.energy,
        )
        cur = sum(e[1] for e in result.energy)
        tot = sum(e[2] for e in result.energy)
        summary["ltm_current_fraction"] = cur / tot if tot else None
    if result.checkpoints:
        rows = []
        for episode, values in result.checkpoints:
            S, A = values.shape
            rows.extend(
                (episode, s, a, values[s, a]) for s in range(S) for a in range(A)
            )
        emit("checkpoints.csv", write_csv,
             ["episode", "state", "action", "value"], rows)
    if cfg.backend == "spiking":
        summary["spikes_per_epoch"] = spikes_per_epoch(result.log)

    manifest = {
        "config": cfg.to_dict(),
        "version": __version__,
        "phases": result.phase_ranges,
        "files": files,
        "summary": summary,
    }
    (out / "manifest.json").write_text(
        json.dumps(manifest, indent=1, sort_keys=True) + "\n"
    )
    for name in files.values():
        p = out / name
        if not p.exists() or p.stat().st_size == 0:
            raise IOError(f"artifact {name} missing or empty")
    return manifest


SWEEP_PARAMS = {"T": "window", "epsilon": "epsilon", "theta": "theta"}


def _sweep_entry(args):
    cfg_dict, out_dir, force = args
    cfg = ExperimentConfig.from_dict(cfg_dict)
    return run(cfg, out_dir, force=force)


def sweep(
    base: ExperimentConfig,
    param: str,
    values: list,
    out_dir,
    seeds: int = 5,
    workers: int = 1,
    force: bool = False,
) -> dict:
    """Run value x seed replicates of ``base`` and summarize.

    Each entry derives its own master seed from the base seed and the
    (value, replicate) position, writes a normal run directory, and the
    summary CSV reports the per-value mean and standard deviation of the
    headline metric (final mean-optimal-action for the bandit, final
    return otherwise).
    """
    if param not in SWEEP_PARAMS:
        raise ConfigError(f"sweep parameter must be one of {sorted(SWEEP_PARAMS)}")
    if len(values) < 1:
        raise ConfigError("sweep needs at least one value")
    if seeds < 1:
        raise ConfigError("sweep needs at least one seed")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    fieldname = SWEEP_PARAMS[param]
    entries = []
    for vi, v in enumerate(values):
        for si in range(seeds):
            cfg = replace(
                base,
                **{
                    fieldname: type(getattr(base, fieldname))(v),
                    "seed": derive_seed(base.seed, STREAM_SWEEP, vi, si),
                },
            )
            entries.append((vi, v, si, cfg, out / f"{param}_{v}" / f"seed{si}"))

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            manifests = list(
                pool.map(
                    _sweep_entry,
                    [(c.to_dict(), str(d), force) for _, _, _, c, d in entries],
                )
            )
    else:
        manifests = [run(c, d, force=force) for _, _, _, c, d in entries]

    metric = "final_moa" if base.task == "bandit" else (
        "final_return" if base.task == "blackjack" else "phase_final_return"
    )
    rows = []
    cumrows = []
    per_value: dict = {}
    for (vi, v, si, _, _), man in zip(entries, manifests):
        s = man["summary"]
        val = s.get("final_moa", s.get("final_return"))
        if val is None and s.get("phase_final_return"):
            val = s["phase_final_return"][-1]
        per_value.setdefault(v, {"metric": [], "cum": []})
        per_value[v]["metric"].append(val)
        if "cumulative_reward" in s:
            per_value[v]["cum"].append(s["cumulative_reward"])
    for v in values:
        m = np.array(per_value[v]["metric"], dtype=float)
        rows.append((v, float(m.mean()), float(m.std())))
        if per_value[v]["cum"]:
            c = np.array(per_value[v]["cum"], dtype=float)
            cumrows.append((v, float(c.mean()), float(c.std())))
    write_csv(out / "summary.csv", ["value", "mean", "std"], rows)
    files = {"summary.csv": "summary.csv"}
    if cumrows:
        write_csv(out / "summary_cumulative_reward.csv", ["value", "mean", "std"], cumrows)
        files["summary_cumulative_reward.csv"] = "summary_cumulative_reward.csv"

    manifest = {
        "param": param,
        "values": list(values),
        "seeds": seeds,
        "metric": metric,
        "base_config": base.to_dict(),
        "entries": [
            str(Path(f"{param}_{v}") / f"seed{si}")
            for _, v, si, _, _ in entries
        ],
        "files": files,
        "version": __version__,
    }
    (out / "sweep_manifest.json").write_text(
        json.dumps(manifest, indent=1, sort_keys=True) + "\n"
    )
    return manifest


def compare(dir_a, dir_b, out_dir=None, force: bool = False) -> dict:
    """Compare two run directories (typically spiking vs cpu).

    Emits divergence and policy-difference measures plus headline metric
    deltas; when run A carries value checkpoints, a divergence-vs-episode
    curve against run B's final values is included.
    """
    dir_a, dir_b = Path(dir_a), Path(dir_b)
    man_a = json.loads((dir_a / "manifest.json").read_text())
    man_b = json.loads((dir_b / "manifest.json").read_text())
    if man_a["config"]["task"] != man_b["config"]["task"]:
        raise ConfigError("compared runs must share a task")
    values_a = read_values_csv(dir_a / "values.csv")
    values_b = read_values_csv(dir_b / "values.csv")
    policy_a = read_policy_csv(dir_a / "policy.csv")
    policy_b = read_policy_csv(dir_b / "policy.csv")

    states, frac = policy_diff(policy_a, policy_b)
    report = {
        "task": man_a["config"]["task"],
        "jsd_bits": js_divergence(values_a, values_b),
        "policy_disagreement_fraction": frac,
        "policy_disagreement_states": sorted(states),
        "summary_a": man_a["summary"],
        "summary_b": man_b["summary"],
    }
    for key in ("final_moa", "final_return"):
        if key in man_a["summary"] and key in man_b["summary"]:
            report[f"{key}_delta"] = man_a["summary"][key] - man_b["summary"][key]
    if "spikes_per_epoch" in man_a["summary"]:
        report["spikes_per_epoch"] = man_a["summary"]["spikes_per_epoch"]

    jsd_curve = []
    if "checkpoints.csv" in man_a["files"]:
        rows = _read_csv(dir_a / "checkpoints.csv")
        by_ep: dict[int, np.ndarray] = {}
        shape = values_a.shape
        for ep, s, a, v in rows:
            t = by_ep.setdefault(int(ep), np.zeros(shape))
            t[int(s), int(a)] = float(v)
        jsd_curve = [(ep, js_divergence(t, values_b)) for ep, t in sorted(by_ep.items())]
        report["jsd_curve"] = jsd_curve

    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "comparison.json").write_text(
            json.dumps(report, indent=1, sort_keys=True) + "\n"
        )
        write_csv(
            out / "comparison.csv",
            ["metric", "value"],
            [
                ("jsd_bits", report["jsd_bits"]),
                ("policy_disagreement_fraction", frac),
            ]
            + ([("spikes_per_epoch", report["spikes_per_epoch"])]
               if "spikes_per_epoch" in report else []),
        )
        if jsd_curve:
            write_csv(out / "jsd_curve.csv", ["episode", "jsd_bits"], jsd_curve)
    return report
