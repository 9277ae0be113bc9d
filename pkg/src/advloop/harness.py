"""Two-episode epoch orchestration: 2 Hz planning over 10 Hz simulation.

Episode 1 replays all surrounding vehicles from the log while the planner
drives the ego, and the executed ego trajectory is recorded. The adversary
then picks its highest-scoring candidate against that recording and executes
it in episode 2 (resuming log replay once the candidate ends). Reports carry
per-frame metrics, aggregates, and the scored candidate list.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

from .adversary import generate_candidates, pick_adversary, select_adversarial
from .config import HarnessConfig
from .dynamics import (
    SIM_DT,
    Trajectory,
    VehicleState,
    clamp_kinematics,
    resample_trajectory,
)
from .metrics import (
    AgentFrame,
    SliceReport,
    aggregate_slice,
    frame_metrics,
)
from .planners import make_planner
from .protocol import (
    ExternalPlanner,
    PlannerTimeoutError,
    ProtocolError,
    external_planner_tick,
)
from .scenario import RoutePath, Scenario

PLANNER_KINDS = ("log_replay", "constant_velocity", "idm", "external")
SIM_RATE_HZ = 10
LANE_VISIBILITY_M = 60.0


@dataclass(frozen=True)
class PlannerBinding:
    kind: str
    endpoint: Optional[str] = None  # command line or host:port, external only
    horizon: float = 3.0
    rate_hz: int = 2

    def __post_init__(self):
        if self.kind not in PLANNER_KINDS:
            raise ValueError(f"unknown planner kind {self.kind!r}")
        if self.kind == "external" and not self.endpoint:
            raise ValueError("external planner needs an endpoint")
        if self.rate_hz <= 0 or SIM_RATE_HZ % self.rate_hz != 0:
            raise ValueError(f"planner rate {self.rate_hz} Hz must divide {SIM_RATE_HZ} Hz")
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")

    @property
    def substeps(self) -> int:
        return SIM_RATE_HZ // self.rate_hz


@dataclass(frozen=True)
class Observation:
    """Self-contained per-tick planner input (stateless protocol)."""

    step: int
    ego: VehicleState
    ego_extent: tuple
    agents: tuple   # (agent_id, extent, VehicleState)
    lanes: tuple    # polylines within LANE_VISIBILITY_M of the ego
    drivable: tuple
    route: tuple    # remaining route waypoints, starting at the ego projection
    sensor: None = None


@dataclass
class EpochResult:
    scenario_id: str
    seed: int
    episode1: SliceReport
    episode2: Optional[SliceReport]
    adversary_id: Optional[str]
    no_adversary: bool
    failed: bool
    scored: list = field(default_factory=list)  # ScoredCandidate dicts
    deltas: Optional[dict] = None
    config: Optional[dict] = None

    def to_dict(self) -> dict:
        return {
            "scenario_id": self.scenario_id,
            "seed": self.seed,
            "episode1": self.episode1.to_dict(),
            "episode2": self.episode2.to_dict() if self.episode2 is not None else None,
            "adversary_id": self.adversary_id,
            "no_adversary": self.no_adversary,
            "failed": self.failed,
            "scored": self.scored,
            "deltas": self.deltas,
            "config": self.config,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "EpochResult":
        return cls(
            scenario_id=data["scenario_id"],
            seed=int(data["seed"]),
            episode1=SliceReport.from_dict(data["episode1"]),
            episode2=SliceReport.from_dict(data["episode2"]) if data.get("episode2") else None,
            adversary_id=data.get("adversary_id"),
            no_adversary=bool(data.get("no_adversary", False)),
            failed=bool(data.get("failed", False)),
            scored=data.get("scored", []),
            deltas=data.get("deltas"),
            config=data.get("config"),
        )


def _build_observation(
    scenario: Scenario,
    route: RoutePath,
    step: int,
    ego: VehicleState,
    agent_state: Callable,
) -> Observation:
    agents = []
    for track in scenario.others:
        state = agent_state(track, step)
        if state is not None:
            agents.append((track.agent_id, track.extent, state))
    lanes = tuple(
        lane
        for lane in scenario.map.lanes
        if any(math.hypot(p[0] - ego.x, p[1] - ego.y) <= LANE_VISIBILITY_M for p in lane)
    )
    s_now = route.project((ego.x, ego.y))
    start = route.point_at(s_now)
    remainder = [(float(start[0]), float(start[1]))]
    for waypoint, s_wp in zip(route.points, route.cum):
        if s_wp > s_now + 1e-9:
            remainder.append((float(waypoint[0]), float(waypoint[1])))
    if len(remainder) < 2:
        remainder.append((float(route.points[-1][0]), float(route.points[-1][1])))
    return Observation(
        step=step,
        ego=ego,
        ego_extent=scenario.ego.extent,
        agents=tuple(agents),
        lanes=lanes,
        drivable=scenario.map.drivable_area,
        route=tuple(remainder),
    )


def _plan_to_execution(
    plan: Trajectory,
    current: VehicleState,
    binding: PlannerBinding,
    cfg: HarnessConfig,
) -> list:
    """Resample a plan to the sim rate, pin it to the true ego state, clamp."""
    if plan.duration < binding.horizon - 1e-9:
        raise ProtocolError(
            f"plan covers {plan.duration:.2f} s, below the {binding.horizon} s horizon"
        )
    fine = resample_trajectory(plan, SIM_DT)
    states = list(fine.states)
    states[0] = current
    executed = clamp_kinematics(Trajectory(SIM_DT, states), cfg.limits)
    return list(executed.states[1 : binding.substeps + 1])


def run_episode(
    scenario: Scenario,
    binding: PlannerBinding,
    cfg: HarnessConfig = HarnessConfig(),
    adversary_override: Optional[tuple] = None,
    seed: int = 0,
):
    """Run one closed-loop episode; returns (SliceReport, executed ego Trajectory).

    adversary_override is (agent_id, Trajectory starting at step 0); that agent
    executes the override (clamped) and then resumes log replay from its
    nearest log state. All other agents replay the log.
    """
    ego_track = scenario.ego
    if ego_track.states[0] is None:
        raise ValueError("ego must be present at step 0")
    route = RoutePath(scenario.ego_route)

    adv_id: Optional[str] = None
    adv_traj: Optional[Trajectory] = None
    adv_resume_index: Optional[int] = None
    if adversary_override is not None:
        adv_id, raw = adversary_override
        track = scenario.agent(adv_id)
        adv_traj = clamp_kinematics(raw, cfg.limits)
        adv_resume_index = _nearest_log_index(track, adv_traj.states[-1])

    def agent_state(track, step: int) -> Optional[VehicleState]:
        if track.agent_id == adv_id:
            if step < len(adv_traj):
                return adv_traj.states[step]
            if adv_resume_index is not None:
                return track.state_at(adv_resume_index + step - (len(adv_traj) - 1))
            return None
        return track.state_at(step)

    logged_s = [
        route.project((st.x, st.y)) if st is not None else None for st in ego_track.states
    ]

    external: Optional[ExternalPlanner] = None
    planner = None
    if binding.kind != "external":
        planner = make_planner(binding.kind, scenario, binding.horizon)

    ego_states = [ego_track.states[0]]
    frames = []
    exec_queue: list = []
    terminated: Optional[str] = None
    aborted = False
    abort_reason: Optional[str] = None

    try:
        if binding.kind == "external":
            external = ExternalPlanner(
                binding.endpoint,
                timeout_s=cfg.protocol.timeout_s,
                connect_timeout_s=cfg.protocol.connect_timeout_s,
            )
        for t in range(scenario.duration_steps - 1):
            if t % binding.substeps == 0:
                obs = _build_observation(scenario, route, t, ego_states[-1], agent_state)
                if external is not None:
                    plan = external_planner_tick(external, obs, binding.horizon)
                else:
                    plan = planner(obs)
                exec_queue = _plan_to_execution(plan, ego_states[-1], binding, cfg)
            ego_states.append(exec_queue.pop(0))

            agents = []
            for track in scenario.others:
                state = agent_state(track, t + 1)
                if state is not None:
                    agents.append(AgentFrame(track.extent, state, prev=agent_state(track, t)))
            prev_s, cur_s = logged_s[t], logged_s[t + 1]
            logged_progress = (cur_s - prev_s) if (prev_s is not None and cur_s is not None) else 0.0
            frame = frame_metrics(
                ego_tail=ego_states[-3:],
                ego_extent=ego_track.extent,
                agents=agents,
                map_data=scenario.map,
                route=route,
                logged_progress=max(0.0, logged_progress),
                weights=cfg.weights,
                limits=cfg.limits,
                dt=SIM_DT,
                ttc_horizon=cfg.ttc_horizon,
            )
            frames.append(frame)

            ego = ego_states[-1]
            if frame.nc == 0:
                terminated = "ego_collision"
                break
            if route.project((ego.x, ego.y)) / route.length >= cfg.rc_complete:
                terminated = "completed"
                break
            if route.lateral((ego.x, ego.y)) > cfg.off_route_m:
                terminated = "off_route"
                break
        if terminated is None:
            terminated = "timeout"  # log exhausted before route completion
    except PlannerTimeoutError as exc:
        terminated = "timeout"
        aborted = True
        abort_reason = f"planner_timeout: {exc}"
    except ProtocolError as exc:
        terminated = "timeout"
        aborted = True
        abort_reason = f"protocol_violation: {exc}"
    finally:
        if external is not None:
            external.end(terminated or "error")
            external.close()

    final_ego = ego_states[-1]
    final_arc = route.project((final_ego.x, final_ego.y))
    snapshot = cfg.snapshot()
    if frames:
        report = aggregate_slice(
            frames,
            route,
            final_arc,
            terminated,
            config=snapshot,
            seed=seed,
            aborted=aborted,
            abort_reason=abort_reason,
        )
    else:
        report = SliceReport(
            frames=[],
            pdms_avg=0.0,
            rc=float(min(1.0, max(0.0, final_arc / route.length))),
            ds=0.0,
            terminated=terminated,
            final_arclength=final_arc,
            aborted=aborted,
            abort_reason=abort_reason,
            config=snapshot,
            seed=seed,
        )
    return report, Trajectory(SIM_DT, ego_states)


def _nearest_log_index(track, state: VehicleState) -> Optional[int]:
    best, best_d = None, math.inf
    for i, logged in enumerate(track.states):
        if logged is None:
            continue
        d = math.hypot(logged.x - state.x, logged.y - state.y)
        if d < best_d:
            best, best_d = i, d
    return best


def binding_dict(binding: PlannerBinding) -> dict:
    """Report entry for the planner; external runs fall outside the
    byte-determinism guarantee and are marked as such."""
    return {
        "kind": binding.kind,
        "endpoint": binding.endpoint,
        "horizon": binding.horizon,
        "rate_hz": binding.rate_hz,
        "deterministic": binding.kind != "external",
    }


def _epoch_config(binding: PlannerBinding, cfg: HarnessConfig) -> dict:
    snapshot = cfg.snapshot()
    snapshot["planner"] = binding_dict(binding)
    return snapshot


def run_epoch(
    scenario: Scenario,
    binding: PlannerBinding,
    cfg: HarnessConfig = HarnessConfig(),
    seed: int = 0,
    adversary_override: Optional[tuple] = None,
) -> EpochResult:
    """Episode 1 (log traffic), adversary selection, episode 2 (adversarial)."""
    episode1, ego_log = run_episode(scenario, binding, cfg, None, seed)
    base = dict(
        scenario_id=scenario.id,
        seed=seed,
        episode1=episode1,
        config=_epoch_config(binding, cfg),
    )
    if episode1.aborted:
        return EpochResult(
            episode2=None, adversary_id=None, no_adversary=False, failed=True, **base
        )

    scored_dicts = []
    if adversary_override is not None:
        adv_id, tau_star = adversary_override
    else:
        adv_id = pick_adversary(scenario, ego_log, cfg.adversary)
        if adv_id is None:
            episode2, _ = run_episode(scenario, binding, cfg, None, seed)
            return EpochResult(
                episode2=episode2,
                adversary_id=None,
                no_adversary=True,
                failed=False,
                deltas=_deltas(episode1, episode2),
                **base,
            )
        candidates = generate_candidates(
            scenario,
            adv_id,
            ego_log,
            k=cfg.adversary.k_candidates,
            seed=seed,
            cfg=cfg.adversary,
            limits=cfg.limits,
        )
        extents = (scenario.agent(adv_id).extent, scenario.ego.extent)
        tau_star, scored = select_adversarial(candidates, ego_log, cfg.adversary, extents, cfg.limits)
        scored_dicts = [sc.to_dict() for sc in scored]

    episode2, _ = run_episode(scenario, binding, cfg, (adv_id, tau_star), seed)
    return EpochResult(
        episode2=episode2,
        adversary_id=adv_id,
        no_adversary=False,
        failed=episode2.aborted,
        scored=scored_dicts,
        deltas=_deltas(episode1, episode2),
        **base,
    )


def _deltas(ep1: SliceReport, ep2: SliceReport) -> dict:
    return {
        "pdms": ep1.pdms_avg - ep2.pdms_avg,
        "rc": ep1.rc - ep2.rc,
        "ds": ep1.ds - ep2.ds,
    }


def run_batch(
    scenarios: Sequence[Scenario],
    binding: PlannerBinding,
    cfg: HarnessConfig = HarnessConfig(),
    seeds: Sequence[int] = (0,),
    adversarial: bool = True,
    progress: Optional[Callable[[str], None]] = None,
):
    """Epochs over scenarios x seeds; failures are recorded, not raised.

    Returns (results, failures). With adversarial=False only episode 1 runs.
    """
    if not scenarios:
        raise ValueError("run_batch needs at least one scenario")
    results = []
    failures = []
    for scenario in scenarios:
        for seed in seeds:
            label = f"{scenario.id} seed={seed}"
            try:
                if adversarial:
                    result = run_epoch(scenario, binding, cfg, seed)
                else:
                    episode1, _ = run_episode(scenario, binding, cfg, None, seed)
                    result = EpochResult(
                        scenario_id=scenario.id,
                        seed=seed,
                        episode1=episode1,
                        episode2=None,
                        adversary_id=None,
                        no_adversary=True,
                        failed=episode1.aborted,
                        config=_epoch_config(binding, cfg),
                    )
            except Exception as exc:  # structured failure record, batch continues
                failures.append({"scenario_id": scenario.id, "seed": seed, "error": str(exc)})
                if progress:
                    progress(f"{label}: FAILED ({exc})")
                continue
            if result.failed:
                failures.append(
                    {
                        "scenario_id": scenario.id,
                        "seed": seed,
                        "error": result.episode1.abort_reason
                        or (result.episode2.abort_reason if result.episode2 else "unknown"),
                    }
                )
            results.append(result)
            if progress:
                progress(f"{label}: ok")
    return results, failures
