"""Multimodal candidate generation and adversarial trajectory selection.

Each candidate gets a multiplicative score: prior x collision term x jerk
smoothness. The collision term decays geometrically with the first collision
step against the recorded ego trajectory, so earlier collisions win; when a
candidate never collides, a near-miss term keeps the ordering dense instead
of collapsing every score to the same value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .dynamics import (
    SIM_DT,
    KinematicLimits,
    Trajectory,
    VehicleState,
    clamp_kinematics,
    footprint,
    integrate_profile,
    midpoint_state,
    obb_distance,
    obb_overlap,
    wrap_angle,
)
from .scenario import Scenario


@dataclass(frozen=True)
class AdversaryConfig:
    gamma: float = 0.9          # collision-step decay
    w_c: float = 1.0            # collision weight
    w_j: float = 0.5            # jerk weight
    horizon_steps: int = 50     # candidate length (10 Hz steps)
    near_miss_d0: float = 2.0   # near-miss distance scale, meters
    k_candidates: int = 32
    prior_lambda: float = 0.5   # softmax sharpness of log-deviation priors
    adversary_id: Optional[str] = None  # overrides nearest-approach selection

    def __post_init__(self):
        if not (0.0 < self.gamma < 1.0):
            raise ValueError("gamma must lie in (0, 1)")
        if self.w_c < 0.0 or self.w_j < 0.0:
            raise ValueError("weights must be non-negative")
        if self.horizon_steps < 1:
            raise ValueError("horizon_steps must be >= 1")
        if self.near_miss_d0 <= 0.0:
            raise ValueError("near_miss_d0 must be positive")


@dataclass(frozen=True)
class Candidate:
    trajectory: Trajectory
    prior: float


@dataclass(frozen=True)
class ScoredCandidate:
    index: int
    prior: float
    score: float
    c: float
    t_c: Optional[int]   # first collision step (1-based), None when clear
    jerk: float
    min_distance: float

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "prior": self.prior,
            "score": self.score,
            "c": self.c,
            "t_c": self.t_c,
            "jerk": self.jerk,
            "min_distance": self.min_distance,
        }


class CandidateSet:
    """K candidate trajectories with prior probabilities summing to one."""

    def __init__(self, candidates: Sequence[Candidate]):
        candidates = list(candidates)
        if not candidates:
            raise ValueError("candidate set must be non-empty")
        total = 0.0
        for cand in candidates:
            if not (0.0 < cand.prior <= 1.0):
                raise ValueError(f"prior {cand.prior} outside (0, 1]")
            total += cand.prior
        if abs(total - 1.0) > 1e-6:
            raise ValueError(f"priors sum to {total}, expected 1")
        dt = candidates[0].trajectory.dt
        horizon = len(candidates[0].trajectory)
        for cand in candidates:
            if cand.trajectory.dt != dt or len(cand.trajectory) != horizon:
                raise ValueError("all candidates must share dt and horizon")
        self.candidates = candidates

    def __len__(self) -> int:
        return len(self.candidates)

    def __iter__(self):
        return iter(self.candidates)


def first_collision_step(
    tau: Trajectory,
    ego: Trajectory,
    tau_extent,
    ego_extent,
    max_steps: Optional[int] = None,
) -> Optional[int]:
    """Earliest 1-based step where the candidate's footprint meets the ego's.

    Both trajectories are aligned at index 0 and must share dt. Each step is
    checked at its endpoint and at the 20 Hz midpoint so fast closings do not
    tunnel through.
    """
    if abs(tau.dt - ego.dt) > 1e-9:
        raise ValueError(f"dt mismatch: {tau.dt} vs {ego.dt}")
    last = min(len(tau), len(ego)) - 1
    if max_steps is not None:
        last = min(last, max_steps)
    for i in range(1, last + 1):
        fp_tau = footprint(tau.states[i], tau_extent)
        fp_ego = footprint(ego.states[i], ego_extent)
        if obb_overlap(fp_tau, fp_ego):
            return i
        mid_tau = footprint(midpoint_state(tau.states[i - 1], tau.states[i]), tau_extent)
        mid_ego = footprint(midpoint_state(ego.states[i - 1], ego.states[i]), ego_extent)
        if obb_overlap(mid_tau, mid_ego):
            return i
    return None


def jerk_penalty(tau: Trajectory, limits: KinematicLimits = KinematicLimits()) -> float:
    """Mean magnitude of the third position difference, normalized to [0, 1]."""
    pos = tau.positions
    if len(pos) < 4:
        raise ValueError("jerk needs at least 4 states")
    third = pos[3:] - 3.0 * pos[2:-1] + 3.0 * pos[1:-2] - pos[:-3]
    jerk_mag = np.hypot(third[:, 0], third[:, 1]) / tau.dt**3
    return float(min(1.0, float(np.mean(jerk_mag)) / limits.j_max))


def _min_footprint_distance(tau, ego, tau_extent, ego_extent, last) -> float:
    best = math.inf
    for i in range(1, last + 1):
        d = obb_distance(footprint(tau.states[i], tau_extent), footprint(ego.states[i], ego_extent))
        if d < best:
            best = d
    return 0.0 if not math.isfinite(best) else best


def collision_term(t_c: Optional[int], min_distance: float, cfg: AdversaryConfig) -> float:
    """gamma^(t_c - 1) on collision; otherwise a near-miss shaped tail.

    The clear-candidate value gamma^H * d0 / (d0 + d_min) stays strictly
    below every colliding candidate's term, while still ranking closer
    misses higher.
    """
    if t_c is not None:
        return cfg.gamma ** (t_c - 1)
    return cfg.gamma**cfg.horizon_steps * cfg.near_miss_d0 / (cfg.near_miss_d0 + min_distance)


def score_value(prior: float, c: float, jerk: float, cfg: AdversaryConfig) -> float:
    return prior * c**cfg.w_c * math.exp(-cfg.w_j * jerk)


def adversarial_score(
    candidate: Candidate,
    ego_log: Trajectory,
    cfg: AdversaryConfig,
    extents,
    limits: KinematicLimits = KinematicLimits(),
    index: int = 0,
) -> ScoredCandidate:
    """Score one candidate against the recorded ego trajectory.

    extents is (candidate_extent, ego_extent).
    """
    tau_extent, ego_extent = extents
    tau = candidate.trajectory
    last = min(len(tau), len(ego_log)) - 1
    last = min(last, cfg.horizon_steps)
    t_c = first_collision_step(tau, ego_log, tau_extent, ego_extent, max_steps=cfg.horizon_steps)
    d_min = 0.0 if t_c is not None else _min_footprint_distance(tau, ego_log, tau_extent, ego_extent, last)
    c = collision_term(t_c, d_min, cfg)
    jerk = jerk_penalty(tau, limits)
    return ScoredCandidate(
        index=index,
        prior=candidate.prior,
        score=score_value(candidate.prior, c, jerk, cfg),
        c=c,
        t_c=t_c,
        jerk=jerk,
        min_distance=d_min,
    )


def select_adversarial(
    cset: CandidateSet,
    ego_log: Trajectory,
    cfg: AdversaryConfig,
    extents,
    limits: KinematicLimits = KinematicLimits(),
):
    """Pick the maximum-score candidate; returns (trajectory, scored list).

    Ties break toward earlier collisions, then larger priors, then the lower
    index, so selection is deterministic.
    """
    scored = [
        adversarial_score(cand, ego_log, cfg, extents, limits, index=i)
        for i, cand in enumerate(cset)
    ]

    def rank(sc: ScoredCandidate):
        t_c = sc.t_c if sc.t_c is not None else math.inf
        return (-sc.score, t_c, -sc.prior, sc.index)

    best = min(scored, key=rank)
    return cset.candidates[best.index].trajectory, scored


# ---------------------------------------------------------------------------
# candidate generation


def _log_segment(scenario: Scenario, agent_id: str, horizon: int) -> Trajectory:
    """The agent's logged states over [0, horizon], constant-velocity padded."""
    track = scenario.agent(agent_id)
    states = []
    last = None
    for step in range(horizon + 1):
        st = track.state_at(step)
        if st is None:
            if last is None:
                raise ValueError(f"adversary {agent_id!r} absent at episode start")
            st = last.advanced(SIM_DT * (step - last.step), step=step)
        states.append(st)
        last = st
    return Trajectory(SIM_DT, states)


def _profile_of(traj: Trajectory):
    return list(traj.headings[1:]), list(traj.speeds[1:])


def _brake_profile(log: Trajectory, decel: float):
    headings, speeds = _profile_of(log)
    v = log.states[0].speed
    out = []
    for _ in speeds:
        v = max(0.0, v - decel * SIM_DT)
        out.append(v)
    return headings, out


def _speed_scale_profile(log: Trajectory, factor: float):
    headings, speeds = _profile_of(log)
    return headings, [v * factor for v in speeds]


def _offset_profile(log: Trajectory, offset: float, horizon: int):
    """Steer onto a laterally shifted copy of the logged path."""
    pos = log.positions
    headings = log.headings
    shifted = pos + offset * np.stack([-np.sin(headings), np.cos(headings)], axis=1)
    return _pursuit_profile(log.states[0], shifted[1:], list(log.speeds[1:]), horizon)


def _pursuit_profile(start: VehicleState, targets: np.ndarray, speeds, horizon: int):
    """Point-at-the-next-target heading profile (speed given per step)."""
    headings = []
    x, y = start.x, start.y
    h = start.heading
    for i in range(horizon):
        tx, ty = targets[min(i, len(targets) - 1)]
        dx, dy = tx - x, ty - y
        if dx * dx + dy * dy > 1e-6:
            h = math.atan2(dy, dx)
        headings.append(h)
        v = speeds[min(i, len(speeds) - 1)]
        x += v * SIM_DT * math.cos(h)
        y += v * SIM_DT * math.sin(h)
    return headings, [speeds[min(i, len(speeds) - 1)] for i in range(horizon)]


def _intercept_profile(
    start: VehicleState,
    ego_log: Trajectory,
    hit_step: int,
    aim_lateral: float,
    horizon: int,
    limits: KinematicLimits,
):
    """Chase the recorded ego position at hit_step, arriving on time.

    Speed tracks distance-to-go over time-to-go each step, so the candidate
    reaches the aim point roughly when the ego does; afterwards it keeps its
    heading and speed.
    """
    hit_step = min(hit_step, len(ego_log) - 1)
    ego_state = ego_log.states[hit_step]
    normal = np.array([-math.sin(ego_state.heading), math.cos(ego_state.heading)])
    aim = np.array([ego_state.x, ego_state.y]) + aim_lateral * normal

    headings, speeds = [], []
    x, y, h, v = start.x, start.y, start.heading, start.speed
    dh_max = limits.yaw_rate_max * SIM_DT
    dv_hi = limits.a_max * SIM_DT
    dv_lo = limits.a_min * SIM_DT
    v_cap = max(start.speed * 1.6, start.speed + 8.0)
    for i in range(horizon):
        t_go = (hit_step - i) * SIM_DT
        dx, dy = aim[0] - x, aim[1] - y
        dist = math.hypot(dx, dy)
        if t_go > SIM_DT / 2 and dist > 0.3:
            h_des = math.atan2(dy, dx)
            v_des = min(dist / t_go, v_cap)
        else:
            # past the rendezvous: hold course and roll to a stop
            h_des = h
            v_des = max(0.0, v - 3.0 * SIM_DT)
        h = wrap_angle(h + min(max(wrap_angle(h_des - h), -dh_max), dh_max))
        v = max(0.0, v + min(max(v_des - v, dv_lo), dv_hi))
        headings.append(h)
        speeds.append(v)
        x += v * SIM_DT * math.cos(h)
        y += v * SIM_DT * math.sin(h)
    return headings, speeds


def generate_candidates(
    scenario: Scenario,
    adv_id: str,
    ego_log: Trajectory,
    k: int = 32,
    seed: int = 0,
    cfg: AdversaryConfig = AdversaryConfig(),
    limits: KinematicLimits = KinematicLimits(),
) -> CandidateSet:
    """Maneuver-template lattice with softmax priors over log deviation.

    Templates span log replay, braking, speed scaling, lateral offsets and
    ego-intercept chases; every candidate is clamped to the kinematic limits.
    Priors are softmax(-lambda * mean distance to the logged trajectory), so
    the replay candidate carries the largest prior.
    """
    if k < 2:
        raise ValueError("need at least 2 candidates")
    horizon = cfg.horizon_steps
    log = _log_segment(scenario, adv_id, horizon)
    start = log.states[0]
    rng = np.random.default_rng(seed)

    templates = [("replay", _profile_of(log))]
    for decel in (3.0, 5.0, 8.0):
        templates.append((f"brake{decel:g}", _brake_profile(log, decel)))
    for factor in (0.7, 0.85, 1.15, 1.3):
        templates.append((f"scale{factor:g}", _speed_scale_profile(log, factor)))
    for offset in (-1.5, 1.5):
        templates.append((f"offset{offset:g}", _offset_profile(log, offset, horizon)))
    hit_steps = [int(round(t / SIM_DT)) for t in (0.8, 1.2, 1.6, 2.0, 2.5, 3.0, 3.5, 4.0, 4.5)]
    for hit in hit_steps:
        for lat in (-0.6, 0.0, 0.6):
            jitter = float(rng.uniform(-0.15, 0.15))
            templates.append(
                (
                    f"intercept{hit}@{lat:g}",
                    _intercept_profile(start, ego_log, hit, lat + jitter, horizon, limits),
                )
            )
    while len(templates) < k:
        hit = int(rng.integers(6, max(7, min(horizon, len(ego_log) - 1))))
        lat = float(rng.uniform(-1.0, 1.0))
        templates.append(
            (f"intercept{hit}@{lat:.2f}", _intercept_profile(start, ego_log, hit, lat, horizon, limits))
        )

    log_pos = log.positions
    # deviation is measured relative to the logged path span so priors keep
    # multimodal-predictor-like ratios instead of annihilating bold maneuvers
    span = max(1.0, float(np.sum(np.hypot(*np.diff(log_pos, axis=0).T))))
    candidates = []
    deviations = []
    for _, (headings, speeds) in templates[:k]:
        traj = clamp_kinematics(integrate_profile(start, headings, speeds, SIM_DT), limits)
        dev = float(np.mean(np.hypot(*(traj.positions - log_pos).T))) / span
        candidates.append(traj)
        deviations.append(dev)

    logits = -cfg.prior_lambda * np.asarray(deviations)
    logits -= logits.max()
    # floor keeps every prior strictly positive even when lambda is extreme
    priors = np.maximum(np.exp(logits), 1e-30)
    priors /= priors.sum()
    return CandidateSet([Candidate(t, float(p)) for t, p in zip(candidates, priors)])


def pick_adversary(scenario: Scenario, ego_log: Trajectory, cfg: AdversaryConfig) -> Optional[str]:
    """Choose the surrounding vehicle whose log passes nearest the ego run."""
    if cfg.adversary_id is not None:
        scenario.agent(cfg.adversary_id)  # raises KeyError if unknown
        return cfg.adversary_id
    best_id, best_d = None, math.inf
    ego_pos = ego_log.positions
    for track in scenario.others:
        d_min = math.inf
        for i in range(min(len(track.states), len(ego_pos))):
            st = track.states[i]
            if st is None:
                continue
            d = math.hypot(st.x - ego_pos[i, 0], st.y - ego_pos[i, 1])
            if d < d_min:
                d_min = d
        if d_min < best_d:
            best_d, best_id = d_min, track.agent_id
    return best_id
