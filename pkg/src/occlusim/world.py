"""Occluded-crossing world: geometry, kinematics, pedestrian behavior, environment.

Coordinate frame: x runs along the ego lane (ego drives toward +x), y is
lateral. The lane center is y = 0. A rectangular occluder sits on the near
sidewalk side (y < 0) and hides a pedestrian who may cross toward +y.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np

STATE_DIM = 4  # kinematic state layout: (x, y, vx, vy)


class PedMode(enum.Enum):
    HESITANT = "hesitant"
    DECEPTIVE = "deceptive"
    TURNING_BACK = "turning_back"
    SUDDEN_STOP = "sudden_stop"
    SUDDEN_APPEARANCE = "sudden_appearance"


ALL_MODES = tuple(PedMode)


class EpisodeStatus(enum.Enum):
    RUNNING = "running"
    COLLISION = "collision"
    GOAL_REACHED = "goal_reached"
    TIMEOUT = "timeout"


@dataclass
class Rect:
    """Axis-aligned rectangle given by center, x extent (length), y extent (width)."""

    cx: float
    cy: float
    length: float
    width: float

    @property
    def x_min(self) -> float:
        return self.cx - 0.5 * self.length

    @property
    def x_max(self) -> float:
        return self.cx + 0.5 * self.length

    @property
    def y_min(self) -> float:
        return self.cy - 0.5 * self.width

    @property
    def y_max(self) -> float:
        return self.cy + 0.5 * self.width

    def bounds(self) -> tuple[float, float, float, float]:
        return (self.x_min, self.x_max, self.y_min, self.y_max)

    def contains(self, x, y, strict: bool = False):
        x0, x1, y0, y1 = self.bounds()
        if strict:
            return (x > x0) & (x < x1) & (y > y0) & (y < y1)
        return (x >= x0) & (x <= x1) & (y >= y0) & (y <= y1)


@dataclass
class BodyState:
    """Point-body kinematic state."""

    pos: np.ndarray
    vel: np.ndarray
    acc: np.ndarray

    @classmethod
    def make(cls, px=0.0, py=0.0, vx=0.0, vy=0.0, ax=0.0, ay=0.0) -> "BodyState":
        return cls(
            pos=np.array([px, py], dtype=float),
            vel=np.array([vx, vy], dtype=float),
            acc=np.array([ax, ay], dtype=float),
        )

    def copy(self) -> "BodyState":
        return BodyState(self.pos.copy(), self.vel.copy(), self.acc.copy())

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.pos, self.vel])


@dataclass
class Observation:
    ped_visible: bool
    ped_pos: np.ndarray | None
    collision: bool


@dataclass
class ScenarioParams:
    """Per-episode pedestrian draw. Mode-specific fields are None when unused."""

    mode: PedMode
    ped_xy0: np.ndarray = field(default_factory=lambda: np.array([10.0, -4.0]))
    v_max: float = 6.0
    a_max: float = 6.0
    d_act: float = 20.0
    # hesitant
    t_hesitate: float | None = None
    t_move: float | None = None
    # deceptive
    v_slow: float | None = None
    d_trig_accel: float | None = None
    # turning back
    d_trig_return: float | None = None
    y_turn: float | None = None
    # sudden stop
    y_stop: float | None = None


@dataclass
class EnvConfig:
    dt: float = 0.1
    max_steps: int = 150
    # Collision is a center-to-center disc test. The default radius is the
    # circumradius of a 4.5 x 2.0 vehicle footprint, so the disc circumscribes
    # the ego body against a point pedestrian.
    collision_radius: float = 2.5
    ego_init: tuple[float, float, float, float] = (-25.0, 0.0, 10.0, 0.0)
    goal_x: float = 30.0
    occluder: Rect = field(default_factory=lambda: Rect(5.0, -4.0, 10.0, 4.0))
    accel_bounds_long: tuple[float, float] = (-6.0, 4.0)
    accel_bounds_lat: tuple[float, float] = (-3.0, 3.0)
    obs_noise_std: tuple[float, float] = (0.0, 0.0)
    pedestrian_present: bool = True
    # hesitant pause behavior: lateral reverse speed as a fraction of v_max
    hesitant_reverse_frac: float = 0.5
    # pedestrian spawn prior: clipped 2-D normal
    ped_spawn_mean: tuple[float, float] = (12.0, -4.0)
    ped_spawn_std: tuple[float, float] = (2.0 / 3.0, 2.0 / 3.0)

    @property
    def road_edge_y(self) -> float:
        # lateral datum for crossing thresholds: the occluder's lane-side edge
        return self.occluder.y_max

    def action_low(self) -> np.ndarray:
        return np.array([self.accel_bounds_long[0], self.accel_bounds_lat[0]])

    def action_high(self) -> np.ndarray:
        return np.array([self.accel_bounds_long[1], self.accel_bounds_lat[1]])


# ---------------------------------------------------------------------------
# visibility geometry
# ---------------------------------------------------------------------------

def segment_clear(p0x, p0y, p1x, p1y, rect: Rect):
    """Vectorized line-of-sight test from p0 toward target p1 against ``rect``.

    Returns True where the target at p1 is visible from p0. The target is
    hidden when the open segment (p0, p1) intersects the closed rectangle or
    when p1 lies strictly inside the rectangle. A target sitting exactly on
    the rectangle boundary, viewed from open space, counts as visible.
    Broadcasts over any leading shape.
    """
    x0, x1, y0, y1 = rect.bounds()
    p0x, p0y, p1x, p1y = np.broadcast_arrays(
        np.asarray(p0x, dtype=float),
        np.asarray(p0y, dtype=float),
        np.asarray(p1x, dtype=float),
        np.asarray(p1y, dtype=float),
    )
    dx = p1x - p0x
    dy = p1y - p0y

    with np.errstate(divide="ignore", invalid="ignore"):
        tx_a = (x0 - p0x) / dx
        tx_b = (x1 - p0x) / dx
        ty_a = (y0 - p0y) / dy
        ty_b = (y1 - p0y) / dy

    t_min_x = np.minimum(tx_a, tx_b)
    t_max_x = np.maximum(tx_a, tx_b)
    t_min_y = np.minimum(ty_a, ty_b)
    t_max_y = np.maximum(ty_a, ty_b)

    # zero direction along an axis: the slab interval is everything or nothing
    in_x = (p0x >= x0) & (p0x <= x1)
    zero_x = dx == 0.0
    t_min_x = np.where(zero_x, np.where(in_x, -np.inf, np.inf), t_min_x)
    t_max_x = np.where(zero_x, np.where(in_x, np.inf, -np.inf), t_max_x)
    in_y = (p0y >= y0) & (p0y <= y1)
    zero_y = dy == 0.0
    t_min_y = np.where(zero_y, np.where(in_y, -np.inf, np.inf), t_min_y)
    t_max_y = np.where(zero_y, np.where(in_y, np.inf, -np.inf), t_max_y)

    t_enter = np.maximum(t_min_x, t_min_y)
    t_exit = np.minimum(t_max_x, t_max_y)
    blocked = (t_enter < t_exit) & (t_exit > 0.0) & (t_enter < 1.0)

    inside = (p1x > x0) & (p1x < x1) & (p1y > y0) & (p1y < y1)
    return ~(blocked | inside)


def is_visible(ego_pos, target_pos, rect: Rect) -> bool:
    """Scalar line-of-sight query (see segment_clear)."""
    out = segment_clear(ego_pos[0], ego_pos[1], target_pos[0], target_pos[1], rect)
    return bool(out)


# ---------------------------------------------------------------------------
# kinematics
# ---------------------------------------------------------------------------

def step_ego(state: BodyState, action: np.ndarray, cfg: EnvConfig) -> BodyState:
    """Advance the ego one step with semi-implicit Euler.

    Acceleration is clamped to the configured bounds and longitudinal
    velocity never drops below zero (no reversing).
    """
    a = np.clip(np.asarray(action, dtype=float), cfg.action_low(), cfg.action_high())
    vel = state.vel + a * cfg.dt
    if vel[0] < 0.0:
        vel = vel.copy()
        vel[0] = 0.0
    pos = state.pos + vel * cfg.dt
    return BodyState(pos=pos, vel=vel, acc=a)


def _accel_toward(v: float, target: float, a_cap: float, dt: float) -> float:
    """One velocity step toward ``target`` with acceleration magnitude <= a_cap."""
    dv = np.clip(target - v, -a_cap * dt, a_cap * dt)
    return v + dv


@dataclass
class ModeMemory:
    """Per-episode pedestrian automaton state (opaque to agents)."""

    activated: bool = False
    start_y: float = 0.0
    # hesitant
    phase_moving: bool = True
    phase_time: float = 0.0
    pause_reverse: bool = False
    # deceptive
    surging: bool = False
    # turning back
    turned: bool = False
    returning_v: float = 0.0
    # sudden stop
    halted: bool = False


def init_mode_memory(ped: BodyState) -> ModeMemory:
    return ModeMemory(start_y=float(ped.pos[1]))


def step_pedestrian(
    ped: BodyState,
    params: ScenarioParams,
    memory: ModeMemory,
    ego_x: float,
    cfg: EnvConfig,
    rng: np.random.Generator,
) -> tuple[BodyState, ModeMemory]:
    """Advance the pedestrian one step under its behavioral mode.

    The pedestrian is inert until the longitudinal gap to the ego drops below
    d_act, then moves laterally only (vx stays 0). Every velocity change is
    rate-limited by a_max and speed never exceeds v_max.
    """
    dt = cfg.dt
    gap = float(ped.pos[0] - ego_x)
    if not memory.activated:
        if gap < params.d_act:
            memory = replace(memory, activated=True)
        else:
            return BodyState(ped.pos.copy(), ped.vel.copy(), np.zeros(2)), memory

    vy = float(ped.vel[1])
    y = float(ped.pos[1])
    mode = params.mode
    mem = replace(memory)

    if mode is PedMode.HESITANT:
        mem.phase_time += dt
        if mem.phase_moving and mem.phase_time >= params.t_move:
            mem.phase_moving = False
            mem.phase_time = 0.0
            mem.pause_reverse = bool(rng.random() < 0.5)
        elif not mem.phase_moving and mem.phase_time >= params.t_hesitate:
            mem.phase_moving = True
            mem.phase_time = 0.0
        if mem.phase_moving:
            target = params.v_max
        else:
            target = -cfg.hesitant_reverse_frac * params.v_max if mem.pause_reverse else 0.0
        vy_new = _accel_toward(vy, target, params.a_max, dt)

    elif mode is PedMode.DECEPTIVE:
        if not mem.surging and gap < params.d_trig_accel:
            mem.surging = True
        target = params.v_max if mem.surging else params.v_slow
        vy_new = _accel_toward(vy, target, params.a_max, dt)

    elif mode is PedMode.TURNING_BACK:
        if not mem.turned and (y >= params.y_turn or gap < params.d_trig_return):
            mem.turned = True
            # retreat at the speed the crossing had, rate-limited on the way down
            mem.returning_v = -abs(vy) if vy != 0.0 else -params.v_max
        if mem.turned:
            target = 0.0 if y <= mem.start_y else mem.returning_v
        else:
            target = params.v_max
        vy_new = _accel_toward(vy, target, params.a_max, dt)

    elif mode is PedMode.SUDDEN_STOP:
        if not mem.halted and y >= params.y_stop:
            mem.halted = True
        target = 0.0 if mem.halted else params.v_max
        vy_new = _accel_toward(vy, target, params.a_max, dt)

    elif mode is PedMode.SUDDEN_APPEARANCE:
        # rushes out: full acceleration toward the crossing speed from the start
        vy_new = _accel_toward(vy, params.v_max, params.a_max, dt)

    else:  # pragma: no cover
        raise ValueError(f"unknown mode {mode}")

    vy_new = float(np.clip(vy_new, -params.v_max, params.v_max))
    ay = (vy_new - vy) / dt
    new = BodyState(
        pos=np.array([ped.pos[0], y + vy_new * dt]),
        vel=np.array([0.0, vy_new]),
        acc=np.array([0.0, ay]),
    )
    return new, mem


# ---------------------------------------------------------------------------
# scenario sampling
# ---------------------------------------------------------------------------

_D_ACT_RANGE = {
    PedMode.HESITANT: (15.0, 25.0),
    PedMode.DECEPTIVE: (15.0, 25.0),
    PedMode.TURNING_BACK: (15.0, 25.0),
    PedMode.SUDDEN_STOP: (15.0, 20.0),
    PedMode.SUDDEN_APPEARANCE: (10.0, 15.0),
}


def sample_scenario(mode: PedMode, rng: np.random.Generator, cfg: EnvConfig) -> ScenarioParams:
    """Draw per-episode pedestrian parameters for ``mode``."""
    mean = np.asarray(cfg.ped_spawn_mean, dtype=float)
    std = np.asarray(cfg.ped_spawn_std, dtype=float)
    xy0 = mean + std * rng.standard_normal(2)
    occ = cfg.occluder
    xy0[0] = np.clip(xy0[0], occ.x_min, occ.x_max)
    xy0[1] = np.clip(xy0[1], occ.y_min, occ.y_max)

    lo, hi = _D_ACT_RANGE[mode]
    p = ScenarioParams(
        mode=mode,
        ped_xy0=xy0,
        v_max=rng.uniform(4.0, 8.0),
        a_max=rng.uniform(4.0, 8.0),
        d_act=rng.uniform(lo, hi),
    )
    edge = cfg.road_edge_y
    if mode is PedMode.HESITANT:
        p.t_hesitate = rng.uniform(0.0, 1.0)
        p.t_move = rng.uniform(1.5, 2.5)
    elif mode is PedMode.DECEPTIVE:
        p.v_slow = rng.uniform(1.5, 4.0)
        p.d_trig_accel = rng.uniform(4.0, 8.0)
    elif mode is PedMode.TURNING_BACK:
        p.d_trig_return = rng.uniform(4.0, 8.0)
        # lateral intrusion into the road, measured from the road edge
        p.y_turn = edge + rng.uniform(2.0, 6.0)
    elif mode is PedMode.SUDDEN_STOP:
        p.y_stop = edge + rng.uniform(0.0, 4.0)
    return p


# ---------------------------------------------------------------------------
# observation and collision
# ---------------------------------------------------------------------------

def check_collision(ego_pos, ped_pos, radius: float) -> bool:
    """Center-to-center disc overlap, boundary exclusive."""
    d = np.asarray(ped_pos, dtype=float) - np.asarray(ego_pos, dtype=float)
    return bool(d[0] * d[0] + d[1] * d[1] < radius * radius)


def observe(
    ego: BodyState,
    ped: BodyState | None,
    cfg: EnvConfig,
    rng: np.random.Generator,
) -> Observation:
    """Build the agent-facing observation for the current state.

    The pedestrian position is reported only when present and line-of-sight
    is clear; optional Gaussian position noise is controlled by config.
    """
    if ped is None:
        return Observation(ped_visible=False, ped_pos=None, collision=False)
    visible = is_visible(ego.pos, ped.pos, cfg.occluder)
    collision = check_collision(ego.pos, ped.pos, cfg.collision_radius)
    pos = None
    if visible:
        pos = ped.pos.copy()
        std = np.asarray(cfg.obs_noise_std, dtype=float)
        if np.any(std > 0.0):
            pos = pos + std * rng.standard_normal(2)
    return Observation(ped_visible=visible, ped_pos=pos, collision=collision)


# ---------------------------------------------------------------------------
# environment
# ---------------------------------------------------------------------------

class CrossingEnv:
    """Single-episode occluded-crossing environment.

    Step order: ego advances under the commanded acceleration, then the
    pedestrian advances, then termination is checked (collision, goal,
    timeout). Fully deterministic given (mode, seed, config).
    """

    def __init__(self, cfg: EnvConfig | None = None):
        self.cfg = cfg if cfg is not None else EnvConfig()
        self.status = EpisodeStatus.RUNNING
        self.t = 0
        self.ego: BodyState | None = None
        self.ped: BodyState | None = None
        self.scenario: ScenarioParams | None = None
        self._memory: ModeMemory | None = None
        self._ped_rng: np.random.Generator | None = None
        self._noise_rng: np.random.Generator | None = None

    def reset(
        self,
        mode: PedMode,
        seed: int,
        scenario: ScenarioParams | None = None,
    ) -> Observation:
        root = np.random.SeedSequence(entropy=(int(seed), 0))
        scen_ss, ped_ss, noise_ss = root.spawn(3)
        scen_rng = np.random.Generator(np.random.Philox(scen_ss))
        self._ped_rng = np.random.Generator(np.random.Philox(ped_ss))
        self._noise_rng = np.random.Generator(np.random.Philox(noise_ss))

        cfg = self.cfg
        self.scenario = scenario if scenario is not None else sample_scenario(mode, scen_rng, cfg)
        ex, ey, evx, evy = cfg.ego_init
        self.ego = BodyState.make(ex, ey, evx, evy)
        if cfg.pedestrian_present:
            x0, y0 = self.scenario.ped_xy0
            self.ped = BodyState.make(float(x0), float(y0))
            self._memory = init_mode_memory(self.ped)
        else:
            self.ped = None
            self._memory = None
        self.t = 0
        self.status = EpisodeStatus.RUNNING
        return observe(self.ego, self.ped, cfg, self._noise_rng)

    def step(self, action) -> tuple[Observation, EpisodeStatus]:
        if self.status is not EpisodeStatus.RUNNING:
            raise RuntimeError("step() called on a terminated episode; call reset()")
        cfg = self.cfg
        self.ego = step_ego(self.ego, action, cfg)
        if self.ped is not None:
            self.ped, self._memory = step_pedestrian(
                self.ped, self.scenario, self._memory, float(self.ego.pos[0]), cfg, self._ped_rng
            )
        self.t += 1

        obs = observe(self.ego, self.ped, cfg, self._noise_rng)
        if obs.collision:
            self.status = EpisodeStatus.COLLISION
        elif self.ego.pos[0] >= cfg.goal_x:
            self.status = EpisodeStatus.GOAL_REACHED
        elif self.t >= cfg.max_steps:
            self.status = EpisodeStatus.TIMEOUT
        return obs, self.status
