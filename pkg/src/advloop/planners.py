"""Built-in planners: log replay, constant velocity, and an IDM follower.

A planner is a callable taking an Observation and returning a plan
Trajectory at the 2 Hz planner rate whose first state sits on the current
ego pose. Fresh instances are created per episode, so stateful planners
stay deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from .dynamics import SIM_DT, Trajectory, VehicleState
from .scenario import RoutePath, Scenario

PLAN_DT = 0.5  # 2 Hz planner rate
_PLAN_STRIDE = round(PLAN_DT / SIM_DT)


def plan_points(horizon: float) -> int:
    """Waypoint count covering the horizon at the planner rate."""
    return int(math.ceil(horizon / PLAN_DT - 1e-9)) + 1


class LogReplayPlanner:
    """Replays the scenario's logged ego trajectory."""

    def __init__(self, scenario: Scenario, horizon: float = 3.0):
        self._track = scenario.ego
        self._n = plan_points(horizon)

    def __call__(self, obs) -> Trajectory:
        states = []
        hold: Optional[VehicleState] = None
        for i in range(self._n):
            step = obs.step + i * _PLAN_STRIDE
            logged = self._track.state_at(step)
            if logged is None:
                # log exhausted (or gap): hold the last pose, standing still
                base = hold if hold is not None else obs.ego
                logged = VehicleState(base.x, base.y, base.heading, 0.0, step)
            else:
                logged = VehicleState(logged.x, logged.y, logged.heading, logged.speed, step)
            states.append(logged)
            hold = logged
        return Trajectory(PLAN_DT, states)


class ConstantVelocityPlanner:
    """Continues straight at the current speed and heading."""

    def __init__(self, scenario: Scenario, horizon: float = 3.0):
        self._n = plan_points(horizon)

    def __call__(self, obs) -> Trajectory:
        states = [
            obs.ego.advanced(i * PLAN_DT, step=obs.step + i * _PLAN_STRIDE)
            for i in range(self._n)
        ]
        return Trajectory(PLAN_DT, states)


@dataclass
class IdmParams:
    accel: float = 2.0          # comfortable acceleration, m/s^2
    brake: float = 3.0          # comfortable deceleration, m/s^2
    brake_max: float = 9.0      # emergency deceleration cap, m/s^2
    headway: float = 1.5        # desired time gap, s
    min_gap: float = 2.0        # standstill gap, m
    delta: float = 4.0
    leader_lateral: float = 2.0  # corridor half-width for leader detection, m
    leader_range: float = 60.0


class IdmPlanner:
    """Follows the ego route, speed-controlled by IDM against the nearest leader.

    The desired speed locks to the ego's speed at the first tick. Leaders are
    agents projected onto the remaining route within a lateral corridor; the
    nearest one ahead governs the gap term.
    """

    def __init__(self, scenario: Scenario, horizon: float = 3.0, params: IdmParams = IdmParams()):
        self._n = plan_points(horizon)
        self._params = params
        self._v0: Optional[float] = None

    def _leader(self, obs, path: RoutePath):
        p = self._params
        best = None
        for agent_id, extent, state in obs.agents:
            lat = path.lateral((state.x, state.y))
            if lat > p.leader_lateral:
                continue
            ds = path.project((state.x, state.y))
            if ds <= 0.0 or ds > p.leader_range:
                continue
            # longitudinal closing speed along the route direction
            v_along = state.speed * math.cos(state.heading - path.heading_at(ds))
            gap = ds - 0.5 * extent[0]
            if best is None or gap < best[0]:
                best = (gap, v_along)
        return best

    def __call__(self, obs) -> Trajectory:
        p = self._params
        if self._v0 is None:
            self._v0 = max(obs.ego.speed, 1.0)
        path = RoutePath(obs.route) if len(obs.route) >= 2 else None
        if path is None:
            states = [
                obs.ego.advanced(i * PLAN_DT, step=obs.step + i * _PLAN_STRIDE)
                for i in range(self._n)
            ]
            return Trajectory(PLAN_DT, states)

        leader = self._leader(obs, path)
        half_ego = 2.3  # half vehicle length fallback for the gap term
        v = obs.ego.speed
        s = 0.0
        states = [VehicleState(obs.ego.x, obs.ego.y, obs.ego.heading, v, obs.step)]
        for i in range(1, self._n):
            t = i * PLAN_DT
            if leader is not None:
                gap0, v_lead = leader
                gap = gap0 + v_lead * t - s - half_ego
                dv = v - v_lead
                s_star = p.min_gap + max(0.0, v * p.headway + v * dv / (2.0 * math.sqrt(p.accel * p.brake)))
                accel = p.accel * (1.0 - (v / self._v0) ** p.delta - (s_star / max(gap, 0.1)) ** 2)
            else:
                accel = p.accel * (1.0 - (v / self._v0) ** p.delta)
            accel = min(max(accel, -p.brake_max), p.accel)
            v = max(0.0, v + accel * PLAN_DT)
            s += v * PLAN_DT
            point = path.point_at(min(s, path.length))
            heading = path.heading_at(min(s, path.length))
            states.append(VehicleState(float(point[0]), float(point[1]), heading, v, obs.step + i * _PLAN_STRIDE))
        return Trajectory(PLAN_DT, states)


BUILTIN_PLANNERS = {
    "log_replay": LogReplayPlanner,
    "constant_velocity": ConstantVelocityPlanner,
    "idm": IdmPlanner,
}


def make_planner(kind: str, scenario: Scenario, horizon: float = 3.0):
    try:
        cls = BUILTIN_PLANNERS[kind]
    except KeyError:
        raise ValueError(f"unknown built-in planner {kind!r}") from None
    return cls(scenario, horizon)
