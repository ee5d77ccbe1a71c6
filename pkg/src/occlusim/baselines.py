"""Baseline agents: purely reactive planning, and a rule-based caution zone.

Both reuse the sampling planner so the comparison isolates what the belief
machinery adds. The reactive agent plans only against what it can currently
see; the rule-based agent additionally caps its speed near the occluder.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .belief import Belief
from .planner import EfePlanner, PlannerConfig
from .world import BodyState, EnvConfig, Observation


def _degenerate_belief(obs: Observation, vel_est: np.ndarray) -> Belief:
    """Single-particle belief pinned to the observed pedestrian state.

    With a_cap = 0 the rollout extrapolates at constant velocity, so the
    activation hypothesis is irrelevant. When nothing is visible the particle
    simply does not exist and rollouts see an empty world.
    """
    visible = obs.ped_visible
    if visible:
        mean = np.array([obs.ped_pos[0], obs.ped_pos[1], vel_est[0], vel_est[1]])
    else:
        mean = np.zeros(4)
    cov = np.eye(4) * 1e-4
    return Belief(
        weights=np.array([1.0]),
        exists=np.array([visible]),
        mean=mean[None, :],
        cov=cov[None, :, :],
        anchor_mean=mean[None, :].copy(),
        anchor_cov=cov[None, :, :].copy(),
        d_act=np.array([0.0]),
        v_target=np.array([0.0]),
        a_cap=np.array([0.0]),
        maneuver=np.zeros(1, dtype=np.int8),
    )


class ReactiveAgent:
    """Plans with the same objective but only against visible pedestrians.

    No existence prior, no hypothesis injection, no epistemic term: when the
    road looks empty the plan is exactly the pedestrian-free optimum.
    """

    name = "reactive"

    def __init__(self, planner_cfg: PlannerConfig, wcfg: EnvConfig):
        self.cfg = replace(planner_cfg, rho_inject=0.0, w_epistemic=0.0)
        self.wcfg = wcfg
        self.planner: EfePlanner | None = None
        self._last_pos: np.ndarray | None = None

    def reset(self, seed_seq: np.random.SeedSequence):
        (plan_ss,) = seed_seq.spawn(1)
        self.planner = EfePlanner(self.cfg, self.wcfg, np.random.Generator(np.random.Philox(plan_ss)))
        self._last_pos = None

    def act(self, obs: Observation, ego: BodyState) -> tuple[np.ndarray, dict]:
        vel = np.zeros(2)
        if obs.ped_visible:
            if self._last_pos is not None:
                vel = (obs.ped_pos - self._last_pos) / self.wcfg.dt
            self._last_pos = obs.ped_pos.copy()
        else:
            self._last_pos = None
        belief = _degenerate_belief(obs, vel)
        action, diag = self.planner.plan(belief, ego)
        return action, {"belief": belief.summary(), "plan": diag}


@dataclass
class RuleConfig:
    zone_before: float = 15.0  # zone start, meters before the occluder leading edge
    zone_after: float = 10.0   # zone end, meters past the leading edge
    v_caution: float = 3.0
    k_p: float = 2.0           # proportional speed controller gain


class RuleBasedAgent:
    """Reactive planning plus a fixed caution-speed zone around the occluder."""

    name = "rule"

    def __init__(self, planner_cfg: PlannerConfig, wcfg: EnvConfig, rule_cfg: RuleConfig | None = None):
        self.rule = rule_cfg if rule_cfg is not None else RuleConfig()
        self.wcfg = wcfg
        self._inner = ReactiveAgent(planner_cfg, wcfg)

    def reset(self, seed_seq: np.random.SeedSequence):
        self._inner.reset(seed_seq)

    def in_zone(self, ego_x: float) -> bool:
        edge = self.wcfg.occluder.x_min
        return edge - self.rule.zone_before <= ego_x <= edge + self.rule.zone_after

    def act(self, obs: Observation, ego: BodyState) -> tuple[np.ndarray, dict]:
        action, info = self._inner.act(obs, ego)
        if self.in_zone(float(ego.pos[0])):
            lo, hi = self.wcfg.accel_bounds_long
            a_long = self.rule.k_p * (self.rule.v_caution - float(ego.vel[0]))
            action = action.copy()
            action[0] = min(action[0], float(np.clip(a_long, lo, hi)))
        return action, info
