"""Vehicle states, trajectory resampling/clamping, and oriented-box collision tests.

All trajectories live on the 10 Hz simulation grid: a state's ``step`` field is
an integer timestamp in units of :data:`SIM_DT` seconds, and a trajectory's
``dt`` must be a positive integer multiple of :data:`SIM_DT`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

SIM_DT = 0.1  # simulation tick (10 Hz), seconds

_GRID_TOL = 1e-9


def wrap_angle(theta: float) -> float:
    """Normalize an angle to (-pi, pi]."""
    wrapped = math.remainder(theta, math.tau)
    if wrapped <= -math.pi:
        wrapped += math.tau
    return wrapped


@dataclass(frozen=True)
class VehicleState:
    """Planar pose + speed at one time step.

    ``heading`` is radians, counterclockwise, 0 along +x, stored in (-pi, pi].
    ``step`` is the timestamp in SIM_DT units.
    """

    x: float
    y: float
    heading: float
    speed: float
    step: int = 0

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y) and math.isfinite(self.heading)):
            raise ValueError("non-finite state")
        if not math.isfinite(self.speed) or self.speed < 0.0:
            raise ValueError(f"speed must be >= 0, got {self.speed}")
        object.__setattr__(self, "heading", wrap_angle(self.heading))

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y])

    def advanced(self, dt: float, step: Optional[int] = None) -> "VehicleState":
        """Constant-velocity projection of this state by dt seconds."""
        return VehicleState(
            self.x + self.speed * dt * math.cos(self.heading),
            self.y + self.speed * dt * math.sin(self.heading),
            self.heading,
            self.speed,
            self.step if step is None else step,
        )


@dataclass(frozen=True)
class KinematicLimits:
    """Feasibility envelope; j_max doubles as the jerk normalizer."""

    a_max: float = 8.0       # m/s^2
    a_min: float = -9.0      # m/s^2
    yaw_rate_max: float = 1.2  # rad/s
    j_max: float = 15.0      # m/s^3

    def __post_init__(self):
        if not (self.a_min < 0.0 < self.a_max):
            raise ValueError("need a_min < 0 < a_max")
        if self.yaw_rate_max <= 0.0 or self.j_max <= 0.0:
            raise ValueError("yaw_rate_max and j_max must be positive")


class Trajectory:
    """Uniformly sampled sequence of vehicle states."""

    def __init__(self, dt: float, states: Sequence[VehicleState]):
        states = list(states)
        if dt <= 0.0:
            raise ValueError("dt must be positive")
        stride = round(dt / SIM_DT)
        if stride < 1 or abs(dt - stride * SIM_DT) > _GRID_TOL:
            raise ValueError(f"dt={dt} is not a positive multiple of SIM_DT={SIM_DT}")
        steps = [s.step for s in states]
        for a, b in zip(steps, steps[1:]):
            if b - a != stride:
                raise ValueError("timestamps must increase uniformly by dt")
        self.dt = stride * SIM_DT
        self.states = states

    def __len__(self) -> int:
        return len(self.states)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Trajectory)
            and self.dt == other.dt
            and self.states == other.states
        )

    def __repr__(self) -> str:
        return f"Trajectory(dt={self.dt}, n={len(self.states)})"

    @property
    def positions(self) -> np.ndarray:
        return np.array([[s.x, s.y] for s in self.states])

    @property
    def headings(self) -> np.ndarray:
        return np.array([s.heading for s in self.states])

    @property
    def speeds(self) -> np.ndarray:
        return np.array([s.speed for s in self.states])

    @property
    def duration(self) -> float:
        return (len(self.states) - 1) * self.dt

    @property
    def start_step(self) -> int:
        return self.states[0].step


def integrate_profile(
    start: VehicleState,
    headings: Sequence[float],
    speeds: Sequence[float],
    dt: float,
) -> Trajectory:
    """Forward-integrate a heading/speed profile from a start state.

    Step i moves by speeds[i] * dt along headings[i]; this is the single
    integration convention shared by clamping, candidate generation, and the
    synthetic scenario logs, so profiles within limits round-trip exactly.
    """
    if len(headings) != len(speeds):
        raise ValueError("headings and speeds must have equal length")
    stride = round(dt / SIM_DT)
    states = [start]
    x, y = start.x, start.y
    for i, (h, v) in enumerate(zip(headings, speeds)):
        x += v * dt * math.cos(h)
        y += v * dt * math.sin(h)
        states.append(VehicleState(x, y, h, v, start.step + (i + 1) * stride))
    return Trajectory(dt, states)


def resample_trajectory(traj: Trajectory, dt_out: float) -> Trajectory:
    """Resample to a new uniform spacing.

    Positions interpolate linearly, headings along the shortest arc, and
    speeds are recomputed from consecutive output positions. dt_out must
    divide or be divided by traj.dt. dt_out == traj.dt returns a copy.
    """
    if len(traj) < 2:
        raise ValueError("resampling needs at least 2 states")
    stride_out = round(dt_out / SIM_DT)
    if stride_out < 1 or abs(dt_out - stride_out * SIM_DT) > _GRID_TOL:
        raise ValueError(f"dt_out={dt_out} is not a positive multiple of SIM_DT={SIM_DT}")
    stride_in = round(traj.dt / SIM_DT)
    if stride_out % stride_in != 0 and stride_in % stride_out != 0:
        raise ValueError(f"dt_out={dt_out} must divide or be divided by dt={traj.dt}")
    if stride_out == stride_in:
        return Trajectory(traj.dt, list(traj.states))

    s0 = traj.start_step
    total = (len(traj) - 1) * stride_in
    n_out = total // stride_out + 1
    xs = np.empty(n_out)
    ys = np.empty(n_out)
    hs = np.empty(n_out)
    for j in range(n_out):
        r = j * stride_out
        i, rem = divmod(r, stride_in)
        if rem == 0:
            s = traj.states[i]
            xs[j], ys[j], hs[j] = s.x, s.y, s.heading
        else:
            u = rem / stride_in
            a, b = traj.states[i], traj.states[i + 1]
            xs[j] = a.x + u * (b.x - a.x)
            ys[j] = a.y + u * (b.y - a.y)
            hs[j] = wrap_angle(a.heading + u * wrap_angle(b.heading - a.heading))
    dt_new = stride_out * SIM_DT
    dist = np.hypot(np.diff(xs), np.diff(ys))
    speeds = np.append(dist, dist[-1]) / dt_new
    states = [
        VehicleState(xs[j], ys[j], hs[j], speeds[j], s0 + j * stride_out)
        for j in range(n_out)
    ]
    return Trajectory(dt_new, states)


def clamp_kinematics(traj: Trajectory, limits: KinematicLimits = KinematicLimits()) -> Trajectory:
    """Rewrite a trajectory so per-step acceleration and yaw rate stay in bounds.

    Forward pass: each step's desired speed/heading change is clipped to the
    limits, then positions are re-integrated from the clipped profile. The
    output starts at the same initial state and the pass is idempotent.
    """
    n = len(traj)
    if n < 2:
        return Trajectory(traj.dt, list(traj.states))
    dt = traj.dt
    dv_lo, dv_hi = limits.a_min * dt, limits.a_max * dt
    dh_max = limits.yaw_rate_max * dt
    headings = []
    speeds = []
    v, h = traj.states[0].speed, traj.states[0].heading
    for s in traj.states[1:]:
        dv = min(max(s.speed - v, dv_lo), dv_hi)
        v = max(0.0, v + dv)
        dh = min(max(wrap_angle(s.heading - h), -dh_max), dh_max)
        h = wrap_angle(h + dh)
        headings.append(h)
        speeds.append(v)
    return integrate_profile(traj.states[0], headings, speeds, dt)


def midpoint_state(a: VehicleState, b: VehicleState) -> VehicleState:
    """Interpolated state halfway between two consecutive samples."""
    return VehicleState(
        0.5 * (a.x + b.x),
        0.5 * (a.y + b.y),
        wrap_angle(a.heading + 0.5 * wrap_angle(b.heading - a.heading)),
        0.5 * (a.speed + b.speed),
        a.step,
    )


def footprint(state: VehicleState, extent: Sequence[float]) -> np.ndarray:
    """Corners of the oriented rectangle for a vehicle pose, (4, 2) array.

    Order: front-left, rear-left, rear-right, front-right (counterclockwise),
    long axis along the heading.
    """
    length, width = extent
    if length <= 0.0 or width <= 0.0:
        raise ValueError("extent must be positive")
    c, s = math.cos(state.heading), math.sin(state.heading)
    hl, hw = 0.5 * length, 0.5 * width
    local = np.array([[hl, hw], [-hl, hw], [-hl, -hw], [hl, -hw]])
    rot = np.array([[c, -s], [s, c]])
    return local @ rot.T + np.array([state.x, state.y])


def _interval(corners: np.ndarray, axis: np.ndarray) -> tuple:
    proj = corners @ axis
    return proj.min(), proj.max()


def obb_overlap(a: np.ndarray, b: np.ndarray) -> bool:
    """Separating-axis test for two oriented rectangles (touching counts)."""
    for rect in (a, b):
        for edge in (rect[1] - rect[0], rect[3] - rect[0]):
            axis = np.array([-edge[1], edge[0]])
            lo_a, hi_a = _interval(a, axis)
            lo_b, hi_b = _interval(b, axis)
            if hi_a < lo_b or hi_b < lo_a:
                return False
    return True


def _point_segment_distance(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    ab = b - a
    denom = float(ab @ ab)
    if denom == 0.0:
        return float(np.hypot(*(p - a)))
    t = min(1.0, max(0.0, float((p - a) @ ab) / denom))
    closest = a + t * ab
    return float(np.hypot(*(p - closest)))


def obb_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Minimum distance between two oriented rectangles; 0 when they overlap."""
    if obb_overlap(a, b):
        return 0.0
    best = math.inf
    for rect, other in ((a, b), (b, a)):
        for i in range(4):
            p = rect[i]
            for j in range(4):
                d = _point_segment_distance(p, other[j], other[(j + 1) % 4])
                if d < best:
                    best = d
    return best


def states_overlap(
    a: VehicleState,
    b: VehicleState,
    extent_a: Sequence[float],
    extent_b: Sequence[float],
) -> bool:
    return obb_overlap(footprint(a, extent_a), footprint(b, extent_b))


def swept_overlap(
    a_prev: Optional[VehicleState],
    a: VehicleState,
    b_prev: Optional[VehicleState],
    b: VehicleState,
    extent_a: Sequence[float],
    extent_b: Sequence[float],
) -> bool:
    """Collision test at a step, with a midpoint substep against tunneling."""
    if states_overlap(a, b, extent_a, extent_b):
        return True
    if a_prev is not None and b_prev is not None:
        return states_overlap(
            midpoint_state(a_prev, a), midpoint_state(b_prev, b), extent_a, extent_b
        )
    return False
