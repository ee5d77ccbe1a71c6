"""Sampling-based risk-aware planner over the particle belief.

Candidate acceleration sequences are scored by an expected-free-energy style
objective: a pragmatic part (expected collision penalty, speed tracking,
lane keeping) plus an epistemic bonus for steps whose predicted pedestrian
visibility is uncertain. Because the observation model is deterministic
given a state, the epistemic term reduces to the entropy of the predicted
visibility bit under the particle mixture; richer information measures are
deliberately out of scope.

The search is CEM-style iterative refitting with an MPPI-weighted average
over the final candidate set. Before scoring, a planning-only copy of the
belief gets a configurable fraction of particles stamped with adversarial
maneuvers (surge, reverse, freeze) so plans stay feasible against behavior
changes the nominal hypothesis set would not propose.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .belief import Belief, Maneuver
from .world import BodyState, EnvConfig

log = logging.getLogger(__name__)

BLOCK_DTYPE = np.float32  # rollout blocks are (M, K, T); keep them light


@dataclass
class PlannerConfig:
    n_samples: int = 100          # candidate policies per iteration
    horizon: int = 40             # planning steps
    cem_iters: int = 8
    elite_frac: float = 0.2
    mppi_lambda: float = 1.0
    gamma: float = 0.99
    rho_inject: float = 0.3       # fraction of particles given adversarial maneuvers
    kappa_collision: float = 3000.0
    v_desired: float = 10.0
    sigma_speed: float = 2.0
    sigma_lane: float = 1.5
    w_epistemic: float = 1.0
    init_std: tuple[float, float] = (1.5, 0.75)
    std_floor: float = 0.05


@dataclass
class PlanDiagnostics:
    g_min: float = np.nan
    g_mean: float = np.nan
    best_g_per_iter: list = field(default_factory=list)
    p_vis: list = field(default_factory=list)
    injected: int = 0
    error: str | None = None


def mppi_weights(costs: np.ndarray, lam: float) -> np.ndarray:
    """Exponential cost weighting, shifted by the minimum for stability.

    Non-finite costs get zero weight. All-non-finite input raises.
    """
    costs = np.asarray(costs, dtype=float)
    finite = np.isfinite(costs)
    if not np.any(finite):
        raise ValueError("no finite costs to weight")
    c_min = np.min(costs[finite])
    w = np.zeros_like(costs)
    w[finite] = np.exp(-(costs[finite] - c_min) / lam)
    return w / w.sum()


def mppi_average(actions: np.ndarray, costs: np.ndarray, lam: float) -> np.ndarray:
    """Weighted average of candidate action sequences (M, T, 2) -> (T, 2)."""
    w = mppi_weights(costs, lam)
    return np.einsum("m,mtc->tc", w, actions)


def bernoulli_entropy(p: np.ndarray) -> np.ndarray:
    """Natural-log entropy of Bernoulli(p), elementwise, 0 at p in {0, 1}."""
    p = np.asarray(p)
    q = 1.0 - p
    with np.errstate(divide="ignore", invalid="ignore"):
        out = -(np.where(p > 0, p * np.log(p), 0.0) + np.where(q > 0, q * np.log(q), 0.0))
    return np.maximum(out, 0.0)


def inject_hypotheses(belief: Belief, rho: float, rng: np.random.Generator) -> Belief:
    """Stamp adversarial maneuvers on round(rho * N) existing particles.

    Operates on a copy; the persistent belief is never touched. Maneuvers are
    drawn uniformly from {SURGE, REVERSE, FREEZE}. When fewer existing
    particles are available than requested, all of them are stamped.
    """
    out = belief.copy()
    k = int(np.floor(rho * belief.n + 0.5))
    if k <= 0:
        return out
    candidates = np.flatnonzero(out.exists)
    k = min(k, candidates.size)
    if k == 0:
        return out
    chosen = rng.choice(candidates, size=k, replace=False)
    out.maneuver[chosen] = rng.integers(Maneuver.SURGE, Maneuver.FREEZE + 1, size=k)
    return out


# ---------------------------------------------------------------------------
# rollout machinery
# ---------------------------------------------------------------------------

@dataclass
class _ParticleTables:
    """Ego-independent per-particle rollout precomputation (existing only)."""

    n: int
    weights: np.ndarray       # (K,)
    x: np.ndarray             # (K,) pedestrian x never changes
    y0: np.ndarray            # (K,)
    vy0: np.ndarray           # (K,)
    thr: np.ndarray           # (K,) ego x beyond which a nominal particle activates
    ramp_disp: np.ndarray     # (K, T+1) displacement ramping toward +v_target
    ramp_rev: np.ndarray      # (K, T+1) displacement ramping toward -v_target
    maneuver: np.ndarray      # (K,)


def _build_tables(belief: Belief, horizon: int, dt: float) -> _ParticleTables | None:
    ex = belief.exists
    if not np.any(ex):
        return None
    # resampling clones particles bit-for-bit; collapsing exact duplicates and
    # summing their weights shrinks every (M, K, T) block without changing
    # any weighted sum
    rows = np.column_stack(
        [
            belief.mean[ex],
            belief.d_act[ex],
            belief.v_target[ex],
            belief.a_cap[ex],
            belief.maneuver[ex].astype(np.float64),
        ]
    )
    uniq, inverse = np.unique(rows, axis=0, return_inverse=True)
    w = np.bincount(inverse.ravel(), weights=belief.weights[ex]).astype(BLOCK_DTYPE)
    k = uniq.shape[0]
    mean = uniq[:, :4]
    d_act = uniq[:, 4]
    vt = uniq[:, 5]
    ac = uniq[:, 6] * dt
    man = uniq[:, 7].astype(np.int8)
    vy = mean[:, 3].copy()
    vy_r = mean[:, 3].copy()
    ramp = np.zeros((k, horizon + 1), dtype=BLOCK_DTYPE)
    ramp_rev = np.zeros((k, horizon + 1), dtype=BLOCK_DTYPE)
    disp = np.zeros(k)
    disp_r = np.zeros(k)
    for j in range(1, horizon + 1):
        vy = vy + np.clip(vt - vy, -ac, ac)
        disp = disp + vy * dt
        ramp[:, j] = disp
        vy_r = vy_r + np.clip(-vt - vy_r, -ac, ac)
        disp_r = disp_r + vy_r * dt
        ramp_rev[:, j] = disp_r
    return _ParticleTables(
        n=k,
        weights=w,
        x=mean[:, 0].astype(BLOCK_DTYPE),
        y0=mean[:, 1].astype(BLOCK_DTYPE),
        vy0=mean[:, 3].astype(BLOCK_DTYPE),
        thr=mean[:, 0] - d_act,
        ramp_disp=ramp,
        ramp_rev=ramp_rev,
        maneuver=man,
    )


def rollout_ego(actions: np.ndarray, ego: BodyState, wcfg: EnvConfig):
    """Integrate M candidate action sequences (M, T, 2) through the ego model.

    Returns x, y, vx arrays of shape (M, T). Mirrors world.step_ego exactly:
    clamped accelerations, semi-implicit Euler, longitudinal velocity >= 0.
    """
    m, t, _ = actions.shape
    lo = wcfg.action_low()
    hi = wcfg.action_high()
    a = np.clip(actions, lo, hi)
    dt = wcfg.dt
    x = np.empty((m, t))
    y = np.empty((m, t))
    vx = np.empty((m, t))
    cx, cy = float(ego.pos[0]), float(ego.pos[1])
    cvx, cvy = float(ego.vel[0]), float(ego.vel[1])
    px = np.full(m, cx)
    py = np.full(m, cy)
    pvx = np.full(m, cvx)
    pvy = np.full(m, cvy)
    for k in range(t):
        pvx = np.maximum(pvx + a[:, k, 0] * dt, 0.0)
        pvy = pvy + a[:, k, 1] * dt
        px = px + pvx * dt
        py = py + pvy * dt
        x[:, k] = px
        y[:, k] = py
        vx[:, k] = pvx
    return x, y, vx


def _ped_lateral_block(tables: _ParticleTables, ego_x: np.ndarray, dt: float) -> np.ndarray:
    """Predicted pedestrian lateral positions, shape (M, K, T).

    NOMINAL particles drift at their current lateral velocity until the ego
    crosses their activation threshold, then follow the acceleration ramp.
    SURGE ramps from step one, REVERSE ramps toward the negated hypothesis
    speed (an aborted crossing returns about as fast as it advanced), FREEZE
    stays put.
    """
    m, t = ego_x.shape
    k = tables.n
    steps = np.arange(1, t + 1, dtype=np.int32)

    man = tables.maneuver
    out = np.empty((m, k, t), dtype=BLOCK_DTYPE)

    nom = man == Maneuver.NOMINAL
    if np.any(nom):
        thr = tables.thr[nom]
        # number of rollout steps with ego_x <= thr = first active step index
        t_act = (ego_x[:, :, None] <= thr[None, None, :]).sum(axis=1, dtype=np.int32)
        j = steps[None, None, :] - t_act[:, :, None]
        np.clip(j, 0, t, out=j)
        active_disp = np.take_along_axis(
            np.broadcast_to(tables.ramp_disp[nom][None], (m, int(nom.sum()), t + 1)), j, axis=2
        )
        drift = (steps[None, None, :] - j) * (tables.vy0[nom][None, :, None] * dt)
        out[:, nom, :] = tables.y0[nom][None, :, None] + drift + active_disp

    srg = man == Maneuver.SURGE
    if np.any(srg):
        out[:, srg, :] = tables.y0[srg][None, :, None] + tables.ramp_disp[srg][None, :, 1:]
    rev = man == Maneuver.REVERSE
    if np.any(rev):
        out[:, rev, :] = tables.y0[rev][None, :, None] + tables.ramp_rev[rev][None, :, 1:]
    frz = man == Maneuver.FREEZE
    if np.any(frz):
        out[:, frz, :] = np.broadcast_to(tables.y0[frz][None, :, None], (m, int(frz.sum()), t))
    return out


def _visibility_block(ego_x, ego_y, ped_x, ped_y, occ) -> np.ndarray:
    """segment_clear specialized for (M, K, T) blocks in the rollout dtype.

    Zero direction components are clamped to a tiny magnitude instead of the
    exact slab handling in world.segment_clear; the resulting parameters land
    far outside (0, 1) so the blocked test still resolves correctly except at
    exact-boundary-with-zero-slope configurations, which carry no probability
    mass in sampled rollouts.
    """
    x0, x1, y0, y1 = (BLOCK_DTYPE(v) for v in occ.bounds())
    tiny = BLOCK_DTYPE(1e-12)
    p0x = np.asarray(ego_x, dtype=BLOCK_DTYPE)[:, None, :]
    p0y = np.asarray(ego_y, dtype=BLOCK_DTYPE)[:, None, :]
    ped_x = np.asarray(ped_x, dtype=BLOCK_DTYPE)
    ped_y = np.asarray(ped_y, dtype=BLOCK_DTYPE)

    d = ped_x[None, :, None] - p0x
    np.copysign(np.maximum(np.abs(d), tiny), d, out=d)
    np.reciprocal(d, out=d)
    ta = (x0 - p0x) * d
    tb = (x1 - p0x) * d
    t_enter = np.minimum(ta, tb)
    t_exit = np.maximum(ta, tb, out=tb)

    d = ped_y - p0y
    np.copysign(np.maximum(np.abs(d), tiny), d, out=d)
    np.reciprocal(d, out=d)
    np.subtract(y0, p0y, out=ta)
    ta *= d
    d *= y1 - p0y
    np.maximum(t_enter, np.minimum(ta, d), out=t_enter)
    np.minimum(t_exit, np.maximum(ta, d), out=t_exit)

    blocked = (t_enter < t_exit) & (t_exit > 0.0) & (t_enter < 1.0)
    in_x = (ped_x > x0) & (ped_x < x1)
    inside = in_x[None, :, None] & (ped_y > y0) & (ped_y < y1)
    return ~(blocked | inside)


class EfePlanner:
    """Receding-horizon planner: inject, sample, score, refit, average."""

    def __init__(self, cfg: PlannerConfig, wcfg: EnvConfig, rng: np.random.Generator):
        self.cfg = cfg
        self.wcfg = wcfg
        self.rng = rng
        t = cfg.horizon
        self._mean = np.zeros((t, 2))
        self._init_std = np.broadcast_to(np.asarray(cfg.init_std, dtype=float), (t, 2)).copy()
        self._discount = cfg.gamma ** np.arange(t)
        self._lo = wcfg.action_low()
        self._hi = wcfg.action_high()

    def reset(self):
        self._mean = np.zeros_like(self._mean)

    def plan(self, belief: Belief, ego: BodyState) -> tuple[np.ndarray, PlanDiagnostics]:
        """Return the first action of the refined policy and diagnostics.

        The persistent belief is read-only here; injection happens on a copy.
        """
        cfg = self.cfg
        diag = PlanDiagnostics()
        planning_belief = inject_hypotheses(belief, cfg.rho_inject, self.rng)
        diag.injected = int(np.count_nonzero(planning_belief.maneuver))
        tables = _build_tables(planning_belief, cfg.horizon, self.wcfg.dt)

        mean = self._mean
        std = self._init_std.copy()
        m = cfg.n_samples
        n_elite = max(1, int(round(cfg.elite_frac * m)))
        actions = None
        g = None
        p_vis = None
        for _ in range(cfg.cem_iters):
            noise = self.rng.standard_normal((m, cfg.horizon, 2))
            actions = np.clip(mean[None] + std[None] * noise, self._lo, self._hi)
            g, p_vis = self._score(actions, tables, ego)
            finite = np.isfinite(g)
            if not np.any(finite):
                log.error("planner: every candidate scored non-finite; emitting zero action")
                diag.error = "all candidates non-finite"
                return np.zeros(2), diag
            order = np.argsort(np.where(finite, g, np.inf))
            elite = actions[order[:n_elite]]
            mean = elite.mean(axis=0)
            std = np.maximum(elite.std(axis=0), cfg.std_floor)
            diag.best_g_per_iter.append(float(g[order[0]]))

        policy = mppi_average(actions, g, cfg.mppi_lambda)
        # warm start: shift the executed policy forward, pad with zero accel
        self._mean = np.vstack([policy[1:], np.zeros((1, 2))])

        best = int(np.nanargmin(np.where(np.isfinite(g), g, np.inf)))
        diag.g_min = float(np.nanmin(g[np.isfinite(g)]))
        diag.g_mean = float(np.mean(g[np.isfinite(g)]))
        diag.p_vis = [float(v) for v in p_vis[best]] if p_vis is not None else []
        return policy[0].copy(), diag

    # -- scoring ------------------------------------------------------------

    def _score(self, actions: np.ndarray, tables: _ParticleTables | None, ego: BodyState):
        """Expected free energy per candidate, shape (M,). Lower is better."""
        cfg = self.cfg
        ego_x, ego_y, ego_vx = rollout_ego(actions, ego, self.wcfg)

        dv = ego_vx - cfg.v_desired
        g_k = dv * dv * (0.5 / (cfg.sigma_speed**2))
        g_k += ego_y * ego_y * (0.5 / (cfg.sigma_lane**2))

        p_vis = None
        if tables is not None:
            ped_y = _ped_lateral_block(tables, ego_x, self.wcfg.dt)
            ex = ego_x.astype(BLOCK_DTYPE)
            ey = ego_y.astype(BLOCK_DTYPE)
            dx = tables.x[None, :, None] - ex[:, None, :]
            dy = ped_y - ey[:, None, :]
            np.square(dx, out=dx)
            np.square(dy, out=dy)
            dx += dy
            r = BLOCK_DTYPE(self.wcfg.collision_radius)
            coll = dx < r * r
            coll_mass = np.einsum("k,mkt->mt", tables.weights, coll, dtype=np.float64)
            g_k += cfg.kappa_collision * coll_mass
            if cfg.w_epistemic != 0.0:
                vis = _visibility_block(ex, ey, tables.x, ped_y, self.wcfg.occluder)
                p_vis = np.einsum("k,mkt->mt", tables.weights, vis, dtype=np.float64)
                np.clip(p_vis, 0.0, 1.0, out=p_vis)
                g_k -= cfg.w_epistemic * bernoulli_entropy(p_vis)
        if p_vis is None:
            p_vis = np.zeros_like(ego_x)
        return g_k @ self._discount, p_vis
