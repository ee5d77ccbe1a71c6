"""World model tests: geometry, visibility, ego/pedestrian dynamics, and the
episode loop. Expected values are either hand arithmetic or an independent
dense-sampling reference for line-of-sight."""

import numpy as np
import pytest

from occlusim.world import (
    ALL_MODES,
    BodyState,
    CrossingEnv,
    EnvConfig,
    EpisodeStatus,
    PedMode,
    Rect,
    ScenarioParams,
    check_collision,
    init_mode_memory,
    is_visible,
    observe,
    sample_scenario,
    segment_clear,
    step_ego,
    step_pedestrian,
)

RECT = Rect(5.0, -4.0, 10.0, 4.0)


# ---------------------------------------------------------------- geometry

def test_rect_bounds():
    assert RECT.bounds() == (0.0, 10.0, -6.0, -2.0)
    assert RECT.x_min == 0.0 and RECT.x_max == 10.0
    assert RECT.y_min == -6.0 and RECT.y_max == -2.0


def test_rect_contains_strictness():
    assert RECT.contains(5.0, -4.0)
    assert RECT.contains(0.0, -4.0, strict=False)
    assert not RECT.contains(0.0, -4.0, strict=True)
    assert not RECT.contains(11.0, -4.0)


def _oracle_visible(p0, p1, rect, samples=4001):
    """Independent reference: densely sample the open segment and test
    closed-rect membership pointwise."""
    x0, x1, y0, y1 = rect.bounds()
    t = np.linspace(0.0, 1.0, samples)[1:-1]
    px = p0[0] + t * (p1[0] - p0[0])
    py = p0[1] + t * (p1[1] - p0[1])
    blocked = bool(np.any((px >= x0) & (px <= x1) & (py >= y0) & (py <= y1)))
    inside = (x0 < p1[0] < x1) and (y0 < p1[1] < y1)
    return not (blocked or inside)


def test_visibility_hand_cases():
    # approach: target behind the box
    assert not is_visible((-25.0, 0.0), (10.0, -4.0), RECT)
    # past the box: same boundary target now seen from open space
    assert is_visible((15.0, 0.0), (10.0, -4.0), RECT)
    # abreast of the box, target beyond the far edge: sight line clips the
    # closed corner, still hidden
    assert not is_visible((5.0, 0.0), (12.0, -4.0), RECT)
    # target above the road edge is never blocked from the lane
    assert is_visible((-25.0, 0.0), (12.0, -1.0), RECT)
    # strictly interior target is invisible from everywhere outside
    assert not is_visible((20.0, 0.0), (5.0, -4.0), RECT)
    assert not is_visible((-20.0, 5.0), (5.0, -4.0), RECT)


def test_visibility_matches_dense_sampling_reference():
    rng = np.random.Generator(np.random.Philox(12345))
    for _ in range(1500):
        p0 = rng.uniform([-30.0, -8.0], [30.0, 8.0])
        if RECT.contains(p0[0], p0[1]):
            continue
        p1 = rng.uniform([-30.0, -10.0], [30.0, 10.0])
        got = is_visible(tuple(p0), tuple(p1), RECT)
        assert got == _oracle_visible(p0, p1, RECT), (p0, p1)


def test_segment_clear_vectorized_matches_scalar():
    rng = np.random.Generator(np.random.Philox(99))
    tx = rng.uniform(-20.0, 25.0, size=64)
    ty = rng.uniform(-9.0, 4.0, size=64)
    vec = segment_clear(-25.0, 0.0, tx, ty, RECT)
    for i in range(64):
        assert vec[i] == is_visible((-25.0, 0.0), (tx[i], ty[i]), RECT)


# ---------------------------------------------------------------- ego model

def test_step_ego_integration_and_clipping():
    cfg = EnvConfig()
    s = BodyState.make(0.0, 0.0, 10.0, 0.0)
    s1 = step_ego(s, np.array([2.0, 1.0]), cfg)
    assert s1.vel[0] == pytest.approx(10.2)
    assert s1.vel[1] == pytest.approx(0.1)
    assert s1.pos[0] == pytest.approx(10.2 * 0.1)
    assert s1.pos[1] == pytest.approx(0.01)
    # out-of-range commands clip to the actuator bounds
    s2 = step_ego(s, np.array([50.0, -50.0]), cfg)
    assert s2.acc[0] == pytest.approx(cfg.accel_bounds_long[1])
    assert s2.acc[1] == pytest.approx(cfg.accel_bounds_lat[0])


def test_step_ego_never_reverses():
    cfg = EnvConfig()
    s = BodyState.make(0.0, 0.0, 0.3, 0.0)
    for _ in range(10):
        s = step_ego(s, np.array([-6.0, 0.0]), cfg)
    assert s.vel[0] == 0.0


# ---------------------------------------------------------- pedestrian model

def _scripted_rollout(mode, seed, ego_speed=6.0, steps=150):
    """Drive the ego at constant speed, return the pedestrian trace."""
    cfg = EnvConfig()
    rng = np.random.Generator(np.random.Philox(seed))
    params = sample_scenario(mode, rng, cfg)
    ped = BodyState.make(params.ped_xy0[0], params.ped_xy0[1])
    mem = init_mode_memory(ped)
    ego_x = float(cfg.ego_init[0])
    trace = []
    for _ in range(steps):
        ped, mem = step_pedestrian(ped, params, mem, ego_x, cfg, rng)
        trace.append((ego_x, ped.pos[1], ped.vel[1], ped.acc[1]))
        ego_x += ego_speed * cfg.dt
    return params, np.array(trace)


@pytest.mark.parametrize("mode", ALL_MODES)
def test_pedestrian_actuation_limits(mode):
    for seed in range(8):
        params, trace = _scripted_rollout(mode, seed)
        assert np.all(np.abs(trace[:, 2]) <= params.v_max + 1e-9)
        assert np.all(np.abs(trace[:, 3]) <= params.a_max + 1e-9)


@pytest.mark.parametrize("mode", ALL_MODES)
def test_pedestrian_inert_until_activation(mode):
    for seed in range(8):
        params, trace = _scripted_rollout(mode, seed)
        gap = params.ped_xy0[0] - trace[:, 0]
        before = gap >= params.d_act
        assert np.all(trace[before, 2] == 0.0)
        assert np.all(trace[before, 1] == params.ped_xy0[1])


@pytest.mark.parametrize("mode", ALL_MODES)
def test_pedestrian_x_never_changes(mode):
    cfg = EnvConfig()
    rng = np.random.Generator(np.random.Philox(3))
    params = sample_scenario(mode, rng, cfg)
    ped = BodyState.make(params.ped_xy0[0], params.ped_xy0[1])
    mem = init_mode_memory(ped)
    for k in range(150):
        ped, mem = step_pedestrian(ped, params, mem, -25.0 + 0.8 * k, cfg, rng)
        assert ped.pos[0] == params.ped_xy0[0]
        assert ped.vel[0] == 0.0


def test_sudden_stop_halts_forever():
    for seed in range(10):
        params, trace = _scripted_rollout(PedMode.SUDDEN_STOP, seed)
        above = np.flatnonzero(trace[:, 1] >= params.y_stop)
        if len(above) == 0:
            continue
        # once halted, vy must ramp to zero and stay there
        tail = trace[above[0] + 5 :, 2]
        settled = np.flatnonzero(np.abs(tail) < 1e-9)
        assert len(settled) > 0
        assert np.all(np.abs(tail[settled[0] :]) < 1e-9)


def test_turning_back_returns_to_start():
    returned = 0
    for seed in range(12):
        params, trace = _scripted_rollout(PedMode.TURNING_BACK, seed, ego_speed=4.0)
        if trace[:, 1].max() <= params.ped_xy0[1]:
            continue
        # after the turn latch the trace must come back down to the start row
        if trace[-1, 1] <= params.ped_xy0[1] + 0.3:
            returned += 1
    assert returned >= 8


def test_sudden_appearance_ramps_from_rest():
    params, trace = _scripted_rollout(PedMode.SUDDEN_APPEARANCE, 0)
    moving = np.flatnonzero(trace[:, 2] > 0.0)
    assert len(moving) > 0
    k0 = moving[0]
    dt = EnvConfig().dt
    # first few steps follow the acceleration ramp exactly
    for j in range(3):
        want = min(params.v_max, (j + 1) * params.a_max * dt)
        assert trace[k0 + j, 2] == pytest.approx(want, abs=1e-9)


def test_deceptive_surges_when_close():
    surged = 0
    for seed in range(12):
        params, trace = _scripted_rollout(PedMode.DECEPTIVE, seed)
        gap = params.ped_xy0[0] - trace[:, 0]
        slow = trace[(gap < params.d_act) & (gap > params.d_trig_accel), 2]
        fast = trace[gap < params.d_trig_accel - 1.0, 2]
        if len(slow) > 2 and len(fast) > 3:
            assert np.all(slow <= params.v_slow + 1e-9)
            if fast.max() > params.v_slow + 0.5:
                surged += 1
    assert surged >= 8


# ------------------------------------------------------- sampling priors

@pytest.mark.parametrize(
    "mode,d_lo,d_hi",
    [
        (PedMode.HESITANT, 15.0, 25.0),
        (PedMode.DECEPTIVE, 15.0, 25.0),
        (PedMode.TURNING_BACK, 15.0, 25.0),
        (PedMode.SUDDEN_STOP, 15.0, 20.0),
        (PedMode.SUDDEN_APPEARANCE, 10.0, 15.0),
    ],
)
def test_scenario_sampling_ranges(mode, d_lo, d_hi):
    cfg = EnvConfig()
    rng = np.random.Generator(np.random.Philox(7))
    for _ in range(300):
        p = sample_scenario(mode, rng, cfg)
        assert d_lo <= p.d_act <= d_hi
        assert 4.0 <= p.v_max <= 8.0
        assert 4.0 <= p.a_max <= 8.0
        # spawn clipped into the occluder footprint
        assert cfg.occluder.x_min <= p.ped_xy0[0] <= cfg.occluder.x_max
        assert cfg.occluder.y_min <= p.ped_xy0[1] <= cfg.occluder.y_max
        if mode is PedMode.TURNING_BACK:
            assert cfg.road_edge_y + 2.0 <= p.y_turn <= cfg.road_edge_y + 6.0
        if mode is PedMode.SUDDEN_STOP:
            assert cfg.road_edge_y <= p.y_stop <= cfg.road_edge_y + 4.0
        if mode is PedMode.DECEPTIVE:
            assert 1.5 <= p.v_slow <= 4.0
            assert 4.0 <= p.d_trig_accel <= 8.0


# ------------------------------------------------------------- observation

def test_collision_boundary_is_strict():
    cfg = EnvConfig()
    r = cfg.collision_radius
    assert not check_collision([0.0, 0.0], [r, 0.0], r)
    assert check_collision([0.0, 0.0], [r - 1e-9, 0.0], r)
    assert check_collision([0.0, 0.0], [0.0, 0.0], r)


def test_observe_hidden_and_noise_free():
    cfg = EnvConfig()
    rng = np.random.Generator(np.random.Philox(11))
    ego = BodyState.make(-25.0, 0.0)
    ped = BodyState.make(10.0, -4.0)
    obs = observe(ego, ped, cfg, rng)
    assert not obs.ped_visible and obs.ped_pos is None
    ego2 = BodyState.make(15.0, 0.0)
    obs2 = observe(ego2, ped, cfg, rng)
    assert obs2.ped_visible
    assert obs2.ped_pos == pytest.approx([10.0, -4.0])


def test_observe_collision_while_hidden():
    cfg = EnvConfig()
    rng = np.random.Generator(np.random.Philox(11))
    ego = BodyState.make(9.0, 0.0)
    ped = BodyState.make(10.0, -2.2)   # inside the radius but occluded
    obs = observe(ego, ped, cfg, rng)
    assert obs.collision
    assert not obs.ped_visible


def test_observe_no_pedestrian():
    cfg = EnvConfig()
    rng = np.random.Generator(np.random.Philox(11))
    obs = observe(BodyState.make(0.0, 0.0), None, cfg, rng)
    assert not obs.ped_visible and obs.ped_pos is None and not obs.collision


# ------------------------------------------------------------ episode loop

def test_env_reset_is_deterministic():
    env_a, env_b = CrossingEnv(EnvConfig()), CrossingEnv(EnvConfig())
    env_a.reset(PedMode.HESITANT, seed=42)
    env_b.reset(PedMode.HESITANT, seed=42)
    assert env_a.scenario.ped_xy0 == pytest.approx(env_b.scenario.ped_xy0)
    assert env_a.scenario.d_act == env_b.scenario.d_act
    for _ in range(60):
        oa, sa = env_a.step(np.zeros(2))
        ob, sb = env_b.step(np.zeros(2))
        assert sa == sb
        assert np.array_equal(env_a.ego.as_vector(), env_b.ego.as_vector())
        assert np.array_equal(env_a.ped.as_vector(), env_b.ped.as_vector())
        if sa is not EpisodeStatus.RUNNING:
            break


def test_env_goal_and_timeout():
    env = CrossingEnv(EnvConfig(pedestrian_present=False))
    env.reset(PedMode.HESITANT, seed=0)
    status = EpisodeStatus.RUNNING
    while status is EpisodeStatus.RUNNING:
        _, status = env.step(np.array([4.0, 0.0]))
    assert status is EpisodeStatus.GOAL_REACHED
    assert env.ego.pos[0] >= env.cfg.goal_x

    env.reset(PedMode.HESITANT, seed=0)
    status = EpisodeStatus.RUNNING
    while status is EpisodeStatus.RUNNING:
        _, status = env.step(np.array([-6.0, 0.0]))
    assert status is EpisodeStatus.TIMEOUT
    assert env.t == env.cfg.max_steps


def test_env_step_after_termination_raises():
    env = CrossingEnv(EnvConfig(pedestrian_present=False))
    env.reset(PedMode.HESITANT, seed=0)
    status = EpisodeStatus.RUNNING
    while status is EpisodeStatus.RUNNING:
        _, status = env.step(np.array([4.0, 0.0]))
    with pytest.raises(RuntimeError):
        env.step(np.zeros(2))


def test_env_without_pedestrian_never_sees_one():
    env = CrossingEnv(EnvConfig(pedestrian_present=False))
    obs = env.reset(PedMode.DECEPTIVE, seed=5)
    status = EpisodeStatus.RUNNING
    while status is EpisodeStatus.RUNNING:
        assert not obs.ped_visible and not obs.collision
        obs, status = env.step(np.array([2.0, 0.0]))
    assert env.ped is None
    assert status is EpisodeStatus.GOAL_REACHED
