"""Occluded-crossing simulator with belief tracking and risk-aware planning."""

from .agents import AgentConfig, BeliefPlannerAgent
from .baselines import ReactiveAgent, RuleBasedAgent, RuleConfig
from .belief import Belief, BeliefConfig, init_belief, update
from .harness import (
    EpisodeResult,
    MetricsSummary,
    ablation_sweep,
    bench_latency,
    compare_agents,
    compute_metrics,
    run_episode,
)
from .planner import EfePlanner, PlannerConfig
from .world import (
    ALL_MODES,
    CrossingEnv,
    EnvConfig,
    EpisodeStatus,
    Observation,
    PedMode,
    Rect,
    ScenarioParams,
)

__version__ = "0.1.0"

__all__ = [
    "AgentConfig",
    "BeliefPlannerAgent",
    "ReactiveAgent",
    "RuleBasedAgent",
    "RuleConfig",
    "Belief",
    "BeliefConfig",
    "init_belief",
    "update",
    "EpisodeResult",
    "MetricsSummary",
    "ablation_sweep",
    "bench_latency",
    "compare_agents",
    "compute_metrics",
    "run_episode",
    "EfePlanner",
    "PlannerConfig",
    "ALL_MODES",
    "CrossingEnv",
    "EnvConfig",
    "EpisodeStatus",
    "Observation",
    "PedMode",
    "Rect",
    "ScenarioParams",
    "__version__",
]
