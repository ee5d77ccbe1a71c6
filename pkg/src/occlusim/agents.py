"""Closed-loop agent built from the particle belief and the sampling planner."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .belief import Belief, BeliefConfig, init_belief, update
from .planner import EfePlanner, PlannerConfig
from .world import BodyState, EnvConfig, Observation


@dataclass
class AgentConfig:
    belief: BeliefConfig = field(default_factory=BeliefConfig)
    planner: PlannerConfig = field(default_factory=PlannerConfig)


class BeliefPlannerAgent:
    """Tracks a pedestrian-existence belief and plans against it each step."""

    name = "ours"

    def __init__(self, cfg: AgentConfig, wcfg: EnvConfig):
        self.cfg = cfg
        self.wcfg = wcfg
        self.belief: Belief | None = None
        self.planner: EfePlanner | None = None
        self._filter_rng: np.random.Generator | None = None

    def reset(self, seed_seq: np.random.SeedSequence):
        init_ss, filter_ss, plan_ss = seed_seq.spawn(3)
        self.belief = init_belief(
            self.cfg.belief, self.wcfg, np.random.Generator(np.random.Philox(init_ss))
        )
        self._filter_rng = np.random.Generator(np.random.Philox(filter_ss))
        self.planner = EfePlanner(
            self.cfg.planner, self.wcfg, np.random.Generator(np.random.Philox(plan_ss))
        )

    def act(self, obs: Observation, ego: BodyState) -> tuple[np.ndarray, dict]:
        self.belief = update(
            self.belief, obs, ego, self.cfg.belief, self.wcfg, self._filter_rng
        )
        action, diag = self.planner.plan(self.belief, ego)
        return action, {"belief": self.belief.summary(), "plan": diag}
