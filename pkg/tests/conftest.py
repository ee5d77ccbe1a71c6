"""Shared fixtures. Desk-scale agent settings keep episode sweeps tractable
on one core while preserving every qualitative behavior of the defaults."""

import numpy as np
import pytest

from occlusim.agents import AgentConfig
from occlusim.belief import BeliefConfig
from occlusim.planner import PlannerConfig
from occlusim.world import EnvConfig


def desk_agent_cfg(rho: float = 0.3, prior: float = 0.8) -> AgentConfig:
    return AgentConfig(
        belief=BeliefConfig(n_particles=40, prior_exist=prior),
        planner=PlannerConfig(n_samples=28, horizon=28, cem_iters=3, rho_inject=rho),
    )


@pytest.fixture
def env_cfg() -> EnvConfig:
    return EnvConfig()


@pytest.fixture
def agent_cfg() -> AgentConfig:
    return desk_agent_cfg()


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.Generator(np.random.Philox(1234))
