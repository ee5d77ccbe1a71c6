"""Experiment harness: episode execution, metrics, sweeps, latency bench.

Episodes are deterministic functions of (agent kind, configs, mode, seed).
Sweeps assign every cell a disjoint seed block and aggregate with an ordered
reduction, so results are identical for any worker count.
"""

from __future__ import annotations

import csv
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .agents import AgentConfig, BeliefPlannerAgent
from .baselines import ReactiveAgent, RuleBasedAgent, RuleConfig
from .world import ALL_MODES, BodyState, CrossingEnv, EnvConfig, EpisodeStatus, PedMode

AGENT_KINDS = ("ours", "reactive", "rule")

WORKERS_ENV_VAR = "OCCLUSIM_WORKERS"


def make_agent(kind: str, env_cfg: EnvConfig, agent_cfg: AgentConfig, rule_cfg: RuleConfig | None = None):
    if kind == "ours":
        return BeliefPlannerAgent(agent_cfg, env_cfg)
    if kind == "reactive":
        return ReactiveAgent(agent_cfg.planner, env_cfg)
    if kind == "rule":
        return RuleBasedAgent(agent_cfg.planner, env_cfg, rule_cfg)
    raise ValueError(f"unknown agent kind {kind!r}; expected one of {AGENT_KINDS}")


def _body_dict(b: BodyState | None) -> dict | None:
    if b is None:
        return None
    return {
        "pos": [float(b.pos[0]), float(b.pos[1])],
        "vel": [float(b.vel[0]), float(b.vel[1])],
        "acc": [float(b.acc[0]), float(b.acc[1])],
    }


def _obs_dict(obs) -> dict:
    return {
        "visible": bool(obs.ped_visible),
        "pos": None if obs.ped_pos is None else [float(obs.ped_pos[0]), float(obs.ped_pos[1])],
        "collision": bool(obs.collision),
    }


@dataclass
class EpisodeResult:
    agent: str
    mode: str
    seed: int
    status: EpisodeStatus
    n_steps: int
    records: list = field(default_factory=list)

    def write_jsonl(self, path: str | Path):
        with open(path, "w") as fh:
            for rec in self.records:
                fh.write(json.dumps(rec, separators=(",", ":")) + "\n")

    @staticmethod
    def read_records(path: str | Path) -> list:
        with open(path) as fh:
            return [json.loads(line) for line in fh]


def run_episode(
    kind: str,
    mode: PedMode,
    seed: int,
    env_cfg: EnvConfig,
    agent_cfg: AgentConfig,
    rule_cfg: RuleConfig | None = None,
    scenario=None,
    log_diagnostics: bool = False,
) -> EpisodeResult:
    """Run one closed-loop episode: observe, update, plan, step, repeat."""
    env = CrossingEnv(env_cfg)
    obs = env.reset(mode, seed, scenario=scenario)
    agent = make_agent(kind, env_cfg, agent_cfg, rule_cfg)
    agent.reset(np.random.SeedSequence(entropy=(int(seed), 1)))

    records = []
    status = env.status
    while status is EpisodeStatus.RUNNING:
        action, info = agent.act(obs, env.ego)
        rec = {
            "t": env.t,
            "ego": _body_dict(env.ego),
            "ped": _body_dict(env.ped),
            "obs": _obs_dict(obs),
            "action": [float(action[0]), float(action[1])],
            "belief_zp": info["belief"]["exist_prob"],
            "belief": info["belief"],
            "status": status.value,
        }
        if log_diagnostics and "plan" in info:
            d = info["plan"]
            rec["plan"] = {
                "g_min": d.g_min,
                "g_mean": d.g_mean,
                "injected": d.injected,
                "p_vis": d.p_vis,
            }
        records.append(rec)
        obs, status = env.step(action)

    records.append(
        {
            "t": env.t,
            "ego": _body_dict(env.ego),
            "ped": _body_dict(env.ped),
            "obs": _obs_dict(obs),
            "action": None,
            "belief_zp": None,
            "belief": None,
            "status": status.value,
        }
    )
    return EpisodeResult(
        agent=kind, mode=mode.value, seed=seed, status=status, n_steps=env.t, records=records
    )


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------

TTC_CAP = 10.0


def step_ttc(rel_pos: np.ndarray, rel_vel: np.ndarray, radius: float) -> float | None:
    """Time to collision for one step, None when the pair is not closing."""
    dist = float(np.hypot(rel_pos[0], rel_pos[1]))
    if dist <= 0.0:
        return 0.0
    closing = -float(np.dot(rel_pos, rel_vel)) / dist
    if closing <= 0.0:
        return None
    return min(max(dist - radius, 0.0) / closing, TTC_CAP)


def episode_min_distance(records: list) -> float | None:
    dists = [
        float(np.hypot(r["ped"]["pos"][0] - r["ego"]["pos"][0], r["ped"]["pos"][1] - r["ego"]["pos"][1]))
        for r in records
        if r["ped"] is not None
    ]
    return min(dists) if dists else None


def episode_min_ttc(records: list, radius: float) -> float | None:
    ttcs = []
    for r in records:
        if r["ped"] is None:
            continue
        rel_pos = np.array(r["ped"]["pos"]) - np.array(r["ego"]["pos"])
        rel_vel = np.array(r["ped"]["vel"]) - np.array(r["ego"]["vel"])
        ttc = step_ttc(rel_pos, rel_vel, radius)
        if ttc is not None:
            ttcs.append(ttc)
    if not any(r["ped"] is not None for r in records):
        return None
    return min(ttcs) if ttcs else TTC_CAP  # never closing: report the cap


def _mean_se(values: list[float]) -> tuple[float | None, float | None, bool]:
    """Mean and standard error; SE reported as 0 with a flag when n < 2."""
    n = len(values)
    if n == 0:
        return None, None, True
    arr = np.asarray(values, dtype=float)
    if n == 1:
        return float(arr[0]), 0.0, True
    return float(arr.mean()), float(arr.std(ddof=1) / np.sqrt(n)), False


@dataclass
class MetricsSummary:
    n: int
    collision_rate: float
    collision_rate_se: float
    pass_rate: float
    pass_rate_se: float
    timeout_rate: float
    pass_time: float | None
    pass_time_se: float | None
    min_distance: float | None
    min_distance_se: float | None
    min_ttc: float | None
    min_ttc_se: float | None
    n_success: int
    se_underpowered: bool = False

    def as_row(self) -> dict:
        def fmt(v):
            return "-" if v is None else float(v)

        return {
            "n": self.n,
            "collision_rate": self.collision_rate,
            "cr_se": self.collision_rate_se,
            "pass_rate": self.pass_rate,
            "pr_se": self.pass_rate_se,
            "timeout_rate": self.timeout_rate,
            "pass_time": fmt(self.pass_time),
            "pt_se": fmt(self.pass_time_se),
            "min_distance": fmt(self.min_distance),
            "md_se": fmt(self.min_distance_se),
            "min_ttc": fmt(self.min_ttc),
            "ttc_se": fmt(self.min_ttc_se),
        }


def compute_metrics(results: list[EpisodeResult], env_cfg: EnvConfig) -> MetricsSummary:
    """Aggregate episode outcomes.

    Collision/pass/timeout rates cover all episodes; pass time, min distance
    and min TTC are conditional on successful (goal-reached) episodes.
    """
    if not results:
        raise ValueError("compute_metrics needs at least one episode")
    n = len(results)
    coll = [1.0 if r.status is EpisodeStatus.COLLISION else 0.0 for r in results]
    goal = [1.0 if r.status is EpisodeStatus.GOAL_REACHED else 0.0 for r in results]
    tout = [1.0 if r.status is EpisodeStatus.TIMEOUT else 0.0 for r in results]
    cr, cr_se, _ = _mean_se(coll)
    pr, pr_se, _ = _mean_se(goal)

    pt, md, ttc = [], [], []
    for r in results:
        if r.status is not EpisodeStatus.GOAL_REACHED:
            continue
        pt.append(r.n_steps * env_cfg.dt)
        d = episode_min_distance(r.records)
        if d is not None:
            md.append(d)
        t = episode_min_ttc(r.records, env_cfg.collision_radius)
        if t is not None:
            ttc.append(t)
    pt_m, pt_se, flag1 = _mean_se(pt)
    md_m, md_se, flag2 = _mean_se(md)
    ttc_m, ttc_se, flag3 = _mean_se(ttc)
    return MetricsSummary(
        n=n,
        collision_rate=cr,
        collision_rate_se=cr_se,
        pass_rate=pr,
        pass_rate_se=pr_se,
        timeout_rate=float(np.mean(tout)),
        pass_time=pt_m,
        pass_time_se=pt_se,
        min_distance=md_m,
        min_distance_se=md_se,
        min_ttc=ttc_m,
        min_ttc_se=ttc_se,
        n_success=len(pt),
        se_underpowered=flag1 or flag2 or flag3,
    )


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------

def default_workers() -> int:
    raw = os.environ.get(WORKERS_ENV_VAR, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _episode_task(args) -> EpisodeResult:
    kind, mode, seed, env_cfg, agent_cfg, rule_cfg = args
    return run_episode(kind, mode, seed, env_cfg, agent_cfg, rule_cfg)


def run_episodes(tasks: list[tuple], workers: int | None = None) -> list[EpisodeResult]:
    """Execute episode task tuples, optionally across processes.

    Output order always matches input order regardless of worker count.
    """
    workers = default_workers() if workers is None else max(1, workers)
    if workers == 1 or len(tasks) <= 1:
        return [_episode_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_episode_task, tasks, chunksize=1))


def apply_axis(agent_cfg: AgentConfig, axis: str, value: float) -> AgentConfig:
    """Return a copy of the config with one swept knob changed."""
    if axis == "rho":
        return AgentConfig(
            belief=agent_cfg.belief, planner=replace(agent_cfg.planner, rho_inject=float(value))
        )
    if axis == "prior":
        return AgentConfig(
            belief=replace(agent_cfg.belief, prior_exist=float(value)), planner=agent_cfg.planner
        )
    raise ValueError(f"unknown sweep axis {axis!r}; expected 'rho' or 'prior'")


@dataclass
class SweepCell:
    label: str
    mode: str
    results: list[EpisodeResult]
    metrics: MetricsSummary


def _grid_tasks(kinds_and_cfgs, modes, episodes_per_mode, base_seed, env_cfg, rule_cfg):
    """Disjoint seed blocks: cell index striding guarantees no seed reuse."""
    tasks = []
    index = []
    cell = 0
    for label, kind, cfg in kinds_and_cfgs:
        for mode in modes:
            start = base_seed + cell * episodes_per_mode
            for i in range(episodes_per_mode):
                tasks.append((kind, mode, start + i, env_cfg, cfg, rule_cfg))
                index.append((label, mode.value))
            cell += 1
    return tasks, index


def _collect_cells(tasks, index, env_cfg, workers) -> list[SweepCell]:
    results = run_episodes(tasks, workers)
    cells: dict[tuple, list[EpisodeResult]] = {}
    for key, res in zip(index, results):
        cells.setdefault(key, []).append(res)
    out = []
    for (label, mode), res in cells.items():
        out.append(SweepCell(label, mode, res, compute_metrics(res, env_cfg)))
    return out


def pooled_metrics(cells: list[SweepCell], label: str, env_cfg: EnvConfig) -> MetricsSummary:
    pooled = [r for c in cells if c.label == label for r in c.results]
    return compute_metrics(pooled, env_cfg)


def ablation_sweep(
    axis: str,
    values: list[float],
    episodes_per_mode: int,
    env_cfg: EnvConfig,
    agent_cfg: AgentConfig,
    base_seed: int = 0,
    modes=ALL_MODES,
    workers: int | None = None,
) -> list[SweepCell]:
    """Sweep one agent knob over the mode grid with disjoint seed blocks."""
    spec = [(f"{axis}={v:g}", "ours", apply_axis(agent_cfg, axis, v)) for v in values]
    tasks, index = _grid_tasks(spec, modes, episodes_per_mode, base_seed, env_cfg, None)
    return _collect_cells(tasks, index, env_cfg, workers)


def compare_agents(
    kinds: list[str],
    episodes_per_mode: int,
    env_cfg: EnvConfig,
    agent_cfg: AgentConfig,
    rule_cfg: RuleConfig | None = None,
    base_seed: int = 0,
    modes=ALL_MODES,
    workers: int | None = None,
) -> list[SweepCell]:
    """Run the baseline comparison grid (same seeds for every agent)."""
    cells = []
    for kind in kinds:
        spec = [(kind, kind, agent_cfg)]
        tasks, index = _grid_tasks(spec, modes, episodes_per_mode, base_seed, env_cfg, rule_cfg)
        cells.extend(_collect_cells(tasks, index, env_cfg, workers))
    return cells


def write_sweep_csv(path: str | Path, cells: list[SweepCell], env_cfg: EnvConfig):
    """One row per (label, mode) plus a pooled row per label."""
    fieldnames = ["label", "mode"] + list(cells[0].metrics.as_row().keys())
    labels = []
    for c in cells:
        if c.label not in labels:
            labels.append(c.label)
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fieldnames)
        w.writeheader()
        for c in cells:
            w.writerow({"label": c.label, "mode": c.mode, **c.metrics.as_row()})
        for label in labels:
            pooled = pooled_metrics(cells, label, env_cfg)
            w.writerow({"label": label, "mode": "pooled", **pooled.as_row()})


# ---------------------------------------------------------------------------
# latency bench
# ---------------------------------------------------------------------------

def bench_latency(
    n_values: list[int],
    m_values: list[int],
    env_cfg: EnvConfig,
    agent_cfg: AgentConfig,
    repeats: int = 10,
    loops: int = 100,
    seed: int = 0,
) -> list[dict]:
    """Median wall time of one full agent step (filter update + plan).

    Grid over particle count N and candidate count M with everything else
    fixed. Timing is single-threaded by construction.
    """
    rows = []
    for n in n_values:
        for m in m_values:
            cfg = AgentConfig(
                belief=replace(agent_cfg.belief, n_particles=int(n)),
                planner=replace(agent_cfg.planner, n_samples=int(m)),
            )
            env = CrossingEnv(env_cfg)
            obs = env.reset(PedMode.SUDDEN_APPEARANCE, seed)
            agent = BeliefPlannerAgent(cfg, env_cfg)
            agent.reset(np.random.SeedSequence(entropy=(seed, 1)))
            for _ in range(3):  # warm caches before timing
                agent.act(obs, env.ego)
            samples = []
            for _ in range(repeats):
                t0 = time.perf_counter()
                for _ in range(loops):
                    agent.act(obs, env.ego)
                samples.append((time.perf_counter() - t0) / loops)
            rows.append(
                {
                    "n_particles": int(n),
                    "n_samples": int(m),
                    "ms_per_step": float(np.median(samples) * 1e3),
                }
            )
    return rows


def write_bench_csv(path: str | Path, rows: list[dict]):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=["n_particles", "n_samples", "ms_per_step"])
        w.writeheader()
        for r in rows:
            w.writerow(r)
