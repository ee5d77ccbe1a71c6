"""Particle belief over a possibly-absent, possibly-hidden pedestrian.

Each particle carries a discrete existence flag plus a small Kalman filter
over the pedestrian kinematic state (x, y, vx, vy), conditioned on a
per-particle behavior hypothesis (activation distance, target crossing
speed, acceleration cap). Weights are shared across both parts.

The filter's distinctive piece is the conditional reset: while neither the
pedestrian nor the particle's hypothesized hiding spot is observable, the
particle's kinematics revert to their immutable spawn anchor instead of
drifting through unverifiable predictions. Belief about existence therefore
stays put under persistent occlusion and only moves when the world actually
confirms or refutes something.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field

import numpy as np

from .world import BodyState, EnvConfig, Observation, Rect, segment_clear

log = logging.getLogger(__name__)

H_POS = np.array([[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0]])


class Maneuver(enum.IntEnum):
    """Rollout-time behavior label. Persistent beliefs are all NOMINAL; the
    planner stamps the others onto its private copy."""

    NOMINAL = 0
    SURGE = 1
    REVERSE = 2
    FREEZE = 3


@dataclass
class BeliefConfig:
    n_particles: int = 100
    prior_exist: float = 0.8
    eps_fn: float = 0.01  # miss probability of the detector given visibility
    eps_fp: float = 0.01  # phantom probability once the hiding spot is cleared
    eps_c: float = 0.01   # collision flag disagreement probability
    ess_frac: float = 0.5
    conditional_reset: bool = True
    process_noise_diag: tuple[float, float, float, float] = (0.01, 0.01, 0.25, 0.25)
    meas_noise_std: tuple[float, float] = (0.05, 0.05)
    # spawn-time kinematic uncertainty; lateral terms are wide because a
    # hidden pedestrian may have moved before first detection
    init_cov_diag: tuple[float, float, float, float] = (0.25, 4.0, 0.25, 6.25)
    d_act_range: tuple[float, float] = (10.0, 25.0)
    v_target_range: tuple[float, float] = (4.0, 8.0)
    a_cap_range: tuple[float, float] = (4.0, 8.0)

    def meas_cov(self) -> np.ndarray:
        s = np.asarray(self.meas_noise_std, dtype=float)
        return np.diag(s * s)


@dataclass
class Belief:
    """Struct-of-arrays particle set. All arrays share leading dim N."""

    weights: np.ndarray        # (N,)
    exists: np.ndarray         # (N,) bool
    mean: np.ndarray           # (N, 4)
    cov: np.ndarray            # (N, 4, 4)
    anchor_mean: np.ndarray    # (N, 4) immutable spawn hypothesis
    anchor_cov: np.ndarray     # (N, 4, 4)
    d_act: np.ndarray          # (N,)
    v_target: np.ndarray       # (N,)
    a_cap: np.ndarray          # (N,)
    maneuver: np.ndarray       # (N,) int8
    step: int = 0

    @property
    def n(self) -> int:
        return self.weights.shape[0]

    def copy(self) -> "Belief":
        return Belief(
            weights=self.weights.copy(),
            exists=self.exists.copy(),
            mean=self.mean.copy(),
            cov=self.cov.copy(),
            anchor_mean=self.anchor_mean.copy(),
            anchor_cov=self.anchor_cov.copy(),
            d_act=self.d_act.copy(),
            v_target=self.v_target.copy(),
            a_cap=self.a_cap.copy(),
            maneuver=self.maneuver.copy(),
            step=self.step,
        )

    def exist_prob(self) -> float:
        return float(self.weights @ self.exists)

    def n_eff(self) -> float:
        return float(1.0 / np.sum(self.weights * self.weights))

    def equal_bits(self, other: "Belief") -> bool:
        return (
            np.array_equal(self.weights, other.weights)
            and np.array_equal(self.exists, other.exists)
            and np.array_equal(self.mean, other.mean)
            and np.array_equal(self.cov, other.cov)
            and np.array_equal(self.anchor_mean, other.anchor_mean)
            and np.array_equal(self.anchor_cov, other.anchor_cov)
            and np.array_equal(self.d_act, other.d_act)
            and np.array_equal(self.v_target, other.v_target)
            and np.array_equal(self.a_cap, other.a_cap)
            and np.array_equal(self.maneuver, other.maneuver)
        )

    def summary(self) -> dict:
        """Compact per-step serialization: existence mass, where that mass
        thinks the pedestrian is, total positional spread, and ESS."""
        p_exist = self.exist_prob()
        if p_exist > 0.0:
            w = self.weights * self.exists
            mean_pos = (w @ self.mean[:, :2]) / p_exist
            mean_pos = [float(mean_pos[0]), float(mean_pos[1])]
        else:
            mean_pos = None
        cov_trace = float(self.weights @ np.trace(self.cov, axis1=1, axis2=2))
        return {
            "exist_prob": p_exist,
            "mean_pos": mean_pos,
            "cov_trace": cov_trace,
            "n_eff": self.n_eff(),
        }


def init_belief(cfg: BeliefConfig, wcfg: EnvConfig, rng: np.random.Generator) -> Belief:
    """Spawn N particles from the pedestrian spawn prior and hypothesis priors."""
    n = cfg.n_particles
    mean = np.asarray(wcfg.ped_spawn_mean, dtype=float)
    std = np.asarray(wcfg.ped_spawn_std, dtype=float)
    pos = mean + std * rng.standard_normal((n, 2))
    occ = wcfg.occluder
    pos[:, 0] = np.clip(pos[:, 0], occ.x_min, occ.x_max)
    pos[:, 1] = np.clip(pos[:, 1], occ.y_min, occ.y_max)

    anchor_mean = np.zeros((n, 4))
    anchor_mean[:, :2] = pos
    anchor_cov = np.broadcast_to(np.diag(cfg.init_cov_diag), (n, 4, 4)).copy()

    return Belief(
        weights=np.full(n, 1.0 / n),
        exists=rng.random(n) < cfg.prior_exist,
        mean=anchor_mean.copy(),
        cov=anchor_cov.copy(),
        anchor_mean=anchor_mean,
        anchor_cov=anchor_cov,
        d_act=rng.uniform(*cfg.d_act_range, size=n),
        v_target=rng.uniform(*cfg.v_target_range, size=n),
        a_cap=rng.uniform(*cfg.a_cap_range, size=n),
        maneuver=np.zeros(n, dtype=np.int8),
    )


# ---------------------------------------------------------------------------
# prediction
# ---------------------------------------------------------------------------

def transition_matrix(dt: float) -> np.ndarray:
    f = np.eye(4)
    f[0, 2] = dt
    f[1, 3] = dt
    return f


def predicted_flags(belief: Belief, ego_pos: np.ndarray, occ: Rect) -> tuple[np.ndarray, np.ndarray]:
    """Per-particle predicted visibility of the hypothesized pedestrian and of
    its spawn anchor. The OR of the two is the occlusion-resolution flag."""
    vis_mean = segment_clear(ego_pos[0], ego_pos[1], belief.mean[:, 0], belief.mean[:, 1], occ)
    vis_anchor = segment_clear(
        ego_pos[0], ego_pos[1], belief.anchor_mean[:, 0], belief.anchor_mean[:, 1], occ
    )
    return vis_mean, vis_mean | vis_anchor


def predict(
    belief: Belief,
    ego_pos: np.ndarray,
    cfg: BeliefConfig,
    wcfg: EnvConfig,
) -> tuple[Belief, np.ndarray, np.ndarray]:
    """One prediction step: hypothesis automaton as control input, constant
    velocity otherwise. Weights carry over. Returns (belief, o_p_bar, o_r_bar)."""
    out = belief.copy()
    dt = wcfg.dt
    ex = out.exists
    if np.any(ex):
        mean = out.mean[ex]
        active = (mean[:, 0] - ego_pos[0]) < out.d_act[ex]
        dv = np.clip(out.v_target[ex] - mean[:, 3], -out.a_cap[ex] * dt, out.a_cap[ex] * dt)
        dv = np.where(active, dv, 0.0)
        vy = mean[:, 3] + dv
        new_mean = mean.copy()
        new_mean[:, 3] = vy
        new_mean[:, 0] = mean[:, 0] + mean[:, 2] * dt
        new_mean[:, 1] = mean[:, 1] + vy * dt
        out.mean[ex] = new_mean

        f = transition_matrix(dt)
        q = np.diag(np.asarray(cfg.process_noise_diag) * dt)
        cov = np.einsum("ij,njk,lk->nil", f, out.cov[ex], f) + q
        out.cov[ex] = 0.5 * (cov + np.swapaxes(cov, 1, 2))

    out.step = belief.step + 1
    o_p_bar, o_r_bar = predicted_flags(out, ego_pos, wcfg.occluder)
    return out, o_p_bar, o_r_bar


# ---------------------------------------------------------------------------
# conditional reset
# ---------------------------------------------------------------------------

def conditional_reset(
    belief: Belief,
    ped_observed: bool,
    o_r_bar: np.ndarray,
    ego_pos: np.ndarray,
    occ: Rect,
) -> tuple[Belief, np.ndarray, np.ndarray]:
    """Revert unverifiable predictions to the spawn anchor.

    A particle resets (mean and covariance) when the pedestrian is unobserved
    and the particle's occlusion is unresolved. Flags are then recomputed
    from the modified state so the weighting step sees consistent values.
    """
    out = belief.copy()
    if not ped_observed:
        mask = ~np.asarray(o_r_bar, dtype=bool)
        if np.any(mask):
            out.mean[mask] = out.anchor_mean[mask]
            out.cov[mask] = out.anchor_cov[mask]
    o_p_bar, o_r_bar = predicted_flags(out, ego_pos, occ)
    return out, o_p_bar, o_r_bar


# ---------------------------------------------------------------------------
# weighting
# ---------------------------------------------------------------------------

def _innovation_terms(belief: Belief, idx: np.ndarray, r: np.ndarray):
    """Innovation covariance pieces for the position measurement, per particle."""
    p = belief.cov[idx]
    s = p[:, :2, :2] + r
    det = s[:, 0, 0] * s[:, 1, 1] - s[:, 0, 1] * s[:, 1, 0]
    inv = np.empty_like(s)
    inv[:, 0, 0] = s[:, 1, 1]
    inv[:, 1, 1] = s[:, 0, 0]
    inv[:, 0, 1] = -s[:, 0, 1]
    inv[:, 1, 0] = -s[:, 1, 0]
    inv /= det[:, None, None]
    return s, det, inv


def reweight(
    belief: Belief,
    obs: Observation,
    ego_pos: np.ndarray,
    o_r_bar: np.ndarray,
    cfg: BeliefConfig,
    collision_radius: float,
) -> tuple[Belief, bool]:
    """Multiply weights by the observation likelihood and renormalize.

    Likelihood factors: existence consistency with the detection flag, and,
    only when the pedestrian is detected, the Gaussian innovation density of
    the measured position plus agreement of the collision flag. Particles
    with exists=False never consult their kinematics.

    Returns (belief, informative) where informative is False when the update
    could not change any weight (all factors identical), in which case the
    weight array is returned bit-identical.
    """
    out = belief.copy()
    n = out.n
    like = np.ones(n)
    ex = out.exists

    if obs.ped_visible:
        like[~ex] = cfg.eps_fn
        like[ex] = 1.0 - cfg.eps_fn
        idx = np.flatnonzero(ex)
        if idx.size:
            z = np.asarray(obs.ped_pos, dtype=float)
            _, det, inv = _innovation_terms(out, idx, cfg.meas_cov())
            innov = z[None, :] - out.mean[idx, :2]
            maha = np.einsum("ni,nij,nj->n", innov, inv, innov)
            dens = np.exp(-0.5 * maha) / (2.0 * np.pi * np.sqrt(det))
            like[idx] *= dens
            # collision flag agreement against the particle's predicted overlap
            d = out.mean[idx, :2] - ego_pos[None, :]
            pred_c = np.einsum("ni,ni->n", d, d) < collision_radius * collision_radius
            agree = pred_c == bool(obs.collision)
            like[idx] *= np.where(agree, 1.0 - cfg.eps_c, cfg.eps_c)
    else:
        resolved = np.asarray(o_r_bar, dtype=bool)
        like[resolved & ex] = cfg.eps_fp
        like[resolved & ~ex] = 1.0 - cfg.eps_fp
        # unresolved occlusion is uninformative: factor stays 1

    if np.all(like == 1.0):
        return out, False

    w = out.weights * like
    total = w.sum()
    if total <= 0.0 or not np.isfinite(total):
        log.warning("degenerate likelihood (total=%g); weights reset to uniform", total)
        out.weights = np.full(n, 1.0 / n)
        return out, True
    out.weights = w / total
    return out, True


# ---------------------------------------------------------------------------
# Kalman correction
# ---------------------------------------------------------------------------

def kalman_update(
    mean: np.ndarray,
    cov: np.ndarray,
    z: np.ndarray,
    h: np.ndarray,
    r: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Generic Kalman measurement update (Joseph stabilized form).

    Accepts a single (mean, cov) pair or leading batch dimensions.
    """
    mean = np.asarray(mean, dtype=float)
    cov = np.asarray(cov, dtype=float)
    z = np.asarray(z, dtype=float)
    squeeze = mean.ndim == 1
    if squeeze:
        mean = mean[None, :]
        cov = cov[None, :, :]
        z = z[None, :]
    s = h @ cov @ h.T + r
    s_inv = np.linalg.inv(s)
    k = cov @ h.T @ s_inv
    innov = z - mean @ h.T
    new_mean = mean + np.einsum("nij,nj->ni", k, innov)
    ikh = np.eye(h.shape[1]) - k @ h
    new_cov = ikh @ cov @ np.swapaxes(ikh, -1, -2) + k @ r @ np.swapaxes(k, -1, -2)
    new_cov = 0.5 * (new_cov + np.swapaxes(new_cov, -1, -2))
    if squeeze:
        return new_mean[0], new_cov[0]
    return new_mean, new_cov


def _repair_psd(cov: np.ndarray) -> np.ndarray:
    """Clamp eigenvalues from below; only called when a covariance went bad."""
    vals, vecs = np.linalg.eigh(cov)
    vals = np.maximum(vals, 1e-10)
    return vecs @ (vals[..., :, None] * np.swapaxes(vecs, -1, -2))


def kf_correct(belief: Belief, z: np.ndarray, cfg: BeliefConfig) -> Belief:
    """Position-measurement correction for every existing particle."""
    out = belief.copy()
    idx = np.flatnonzero(out.exists)
    if idx.size == 0:
        return out
    new_mean, new_cov = kalman_update(
        out.mean[idx], out.cov[idx], np.broadcast_to(z, (idx.size, 2)), H_POS, cfg.meas_cov()
    )
    try:
        np.linalg.cholesky(new_cov)
    except np.linalg.LinAlgError:
        log.warning("non-PSD covariance after correction; repairing by eigenvalue floor")
        new_cov = _repair_psd(new_cov)
    out.mean[idx] = new_mean
    out.cov[idx] = new_cov
    return out


# ---------------------------------------------------------------------------
# resampling
# ---------------------------------------------------------------------------

def systematic_resample_indices(weights: np.ndarray, n_out: int, rng: np.random.Generator) -> np.ndarray:
    """Systematic resampling: one uniform offset, stratified positions."""
    positions = (rng.random() + np.arange(n_out)) / n_out
    cumulative = np.cumsum(weights)
    cumulative[-1] = 1.0  # guard against float shortfall
    return np.searchsorted(cumulative, positions)


def resample(belief: Belief, rng: np.random.Generator) -> Belief:
    """Unconditional systematic resample to uniform weights."""
    idx = systematic_resample_indices(belief.weights, belief.n, rng)
    out = belief.copy()
    out.weights = np.full(belief.n, 1.0 / belief.n)
    out.exists = belief.exists[idx]
    out.mean = belief.mean[idx]
    out.cov = belief.cov[idx]
    out.anchor_mean = belief.anchor_mean[idx]
    out.anchor_cov = belief.anchor_cov[idx]
    out.d_act = belief.d_act[idx]
    out.v_target = belief.v_target[idx]
    out.a_cap = belief.a_cap[idx]
    out.maneuver = belief.maneuver[idx]
    return out


# ---------------------------------------------------------------------------
# full update
# ---------------------------------------------------------------------------

def update(
    belief: Belief,
    obs: Observation,
    ego: BodyState,
    cfg: BeliefConfig,
    wcfg: EnvConfig,
    rng: np.random.Generator,
) -> Belief:
    """One filter step: predict, conditionally reset, reweight, correct,
    and resample when the effective sample size collapsed.

    Resampling is skipped after an uninformative update so that persistent
    occlusion leaves the belief exactly unchanged.
    """
    ego_pos = ego.pos
    occ = wcfg.occluder
    b, o_p_bar, o_r_bar = predict(belief, ego_pos, cfg, wcfg)
    if cfg.conditional_reset:
        b, o_p_bar, o_r_bar = conditional_reset(b, obs.ped_visible, o_r_bar, ego_pos, occ)
    b, informative = reweight(b, obs, ego_pos, o_r_bar, cfg, wcfg.collision_radius)
    if obs.ped_visible:
        b = kf_correct(b, np.asarray(obs.ped_pos, dtype=float), cfg)
    if informative and b.n_eff() < cfg.ess_frac * b.n:
        b = resample(b, rng)
    return b
