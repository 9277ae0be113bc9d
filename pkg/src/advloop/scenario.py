"""Scenario schema: loading, validation, synthesis, and map geometry queries.

A scenario file is UTF-8 JSON with top-level keys ``id``, ``dt_sim``,
``agents``, ``map``, ``ego_id``, ``ego_route`` and ``duration_steps``.
Coordinates are meters in a shared local frame; headings are radians,
counterclockwise, 0 along +x. Agent states are ``null`` while an agent is
not spawned (or after it despawns); absent agents are skipped by collision
and metric checks.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .dynamics import SIM_DT, VehicleState, integrate_profile, wrap_angle

SCENARIO_KINDS = ("straight", "cut_in", "intersection", "merge")


class ScenarioFormatError(ValueError):
    """Raised when a scenario file cannot be parsed against the schema."""


class ScenarioValidationError(ValueError):
    """Raised when a parsed scenario violates an invariant; names the field."""

    def __init__(self, invariant: str, detail: str):
        self.invariant = invariant
        super().__init__(f"{invariant}: {detail}")


@dataclass(frozen=True)
class AgentTrack:
    agent_id: str
    extent: tuple  # (length, width) meters
    states: tuple  # per sim step: VehicleState or None

    def state_at(self, step: int) -> Optional[VehicleState]:
        if 0 <= step < len(self.states):
            return self.states[step]
        return None

    def first_present(self) -> Optional[int]:
        for i, s in enumerate(self.states):
            if s is not None:
                return i
        return None


@dataclass(frozen=True)
class MapData:
    lanes: tuple      # tuple of centerline polylines, each a tuple of (x, y)
    drivable_area: tuple  # union of simple polygons, each a tuple of (x, y)


@dataclass(frozen=True)
class Scenario:
    id: str
    dt_sim: float
    agents: tuple  # of AgentTrack
    map: MapData
    ego_id: str
    ego_route: tuple  # of (x, y)
    duration_steps: int

    def agent(self, agent_id: str) -> AgentTrack:
        for a in self.agents:
            if a.agent_id == agent_id:
                return a
        raise KeyError(agent_id)

    @property
    def ego(self) -> AgentTrack:
        return self.agent(self.ego_id)

    @property
    def others(self) -> tuple:
        return tuple(a for a in self.agents if a.agent_id != self.ego_id)


# ---------------------------------------------------------------------------
# geometry


def _segments_properly_intersect(p1, p2, p3, p4) -> bool:
    """True when open segments p1p2 and p3p4 cross at an interior point."""

    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1 = orient(p3, p4, p1)
    d2 = orient(p3, p4, p2)
    d3 = orient(p1, p2, p3)
    d4 = orient(p1, p2, p4)
    return ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0)) and d1 != 0 and d2 != 0


def polygon_self_intersects(polygon: Sequence) -> bool:
    n = len(polygon)
    edges = [(polygon[i], polygon[(i + 1) % n]) for i in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            if j == i or (j + 1) % n == i or (i + 1) % n == j:
                continue  # shared endpoint
            if _segments_properly_intersect(*edges[i], *edges[j]):
                return True
    return False


def _point_in_polygon(poly: np.ndarray, x: float, y: float, boundary_tol: float) -> bool:
    """Even-odd crossing test; points within boundary_tol of an edge count inside."""
    ax, ay = poly[:, 0], poly[:, 1]
    bx, by = np.roll(ax, -1), np.roll(ay, -1)
    # distance to each edge
    ex, ey = bx - ax, by - ay
    seg_len2 = ex * ex + ey * ey
    t = np.where(seg_len2 > 0.0, ((x - ax) * ex + (y - ay) * ey) / np.where(seg_len2 == 0, 1, seg_len2), 0.0)
    t = np.clip(t, 0.0, 1.0)
    dx, dy = x - (ax + t * ex), y - (ay + t * ey)
    if np.min(dx * dx + dy * dy) <= boundary_tol * boundary_tol:
        return True
    # crossing count for a ray toward +x
    cond = (ay > y) != (by > y)
    with np.errstate(divide="ignore", invalid="ignore"):
        x_cross = ax + (y - ay) * ex / np.where(ey == 0, 1, ey)
    crossings = np.count_nonzero(cond & (x < x_cross))
    return crossings % 2 == 1


def point_in_drivable(map_data: MapData, p: Sequence[float], boundary_tol: float = 1e-9) -> bool:
    """True iff p lies inside or on the boundary of the drivable area union."""
    x, y = float(p[0]), float(p[1])
    for poly in map_data.drivable_area:
        if _point_in_polygon(np.asarray(poly, dtype=float), x, y, boundary_tol):
            return True
    return False


class RoutePath:
    """Arc-length parameterization of a route polyline."""

    def __init__(self, waypoints: Sequence):
        pts = np.asarray(waypoints, dtype=float)
        if pts.ndim != 2 or pts.shape[0] < 2 or pts.shape[1] != 2:
            raise ValueError("route needs >= 2 waypoints of (x, y)")
        seg = np.diff(pts, axis=0)
        seg_len = np.hypot(seg[:, 0], seg[:, 1])
        self.points = pts
        self._seg = seg
        self._seg_len = seg_len
        self.cum = np.concatenate([[0.0], np.cumsum(seg_len)])
        self.length = float(self.cum[-1])
        if self.length <= 0.0:
            raise ValueError("route must have positive arc length")

    def project(self, p: Sequence[float]) -> float:
        """Arc length of the closest point on the route to p."""
        s, _ = self._project(p)
        return s

    def lateral(self, p: Sequence[float]) -> float:
        """Distance from p to the route polyline."""
        _, d = self._project(p)
        return d

    def _project(self, p):
        p = np.asarray(p, dtype=float)
        rel = p - self.points[:-1]
        len2 = self._seg_len**2
        t = np.divide(
            rel[:, 0] * self._seg[:, 0] + rel[:, 1] * self._seg[:, 1],
            np.where(len2 == 0.0, 1.0, len2),
            out=np.zeros(len(len2)),
            where=len2 > 0.0,
        )
        t = np.clip(t, 0.0, 1.0)
        closest = self.points[:-1] + t[:, None] * self._seg
        d2 = np.sum((closest - p) ** 2, axis=1)
        i = int(np.argmin(d2))
        s = float(self.cum[i] + t[i] * self._seg_len[i])
        return s, float(math.sqrt(d2[i]))

    def point_at(self, s: float) -> np.ndarray:
        s = min(max(s, 0.0), self.length)
        i = int(np.searchsorted(self.cum, s, side="right")) - 1
        i = min(max(i, 0), len(self._seg) - 1)
        u = (s - self.cum[i]) / self._seg_len[i] if self._seg_len[i] > 0 else 0.0
        return self.points[i] + u * self._seg[i]

    def heading_at(self, s: float) -> float:
        s = min(max(s, 0.0), self.length)
        i = int(np.searchsorted(self.cum, s, side="right")) - 1
        i = min(max(i, 0), len(self._seg) - 1)
        return math.atan2(self._seg[i, 1], self._seg[i, 0])


# ---------------------------------------------------------------------------
# validation


def validate_scenario(s: Scenario) -> None:
    """Raise ScenarioValidationError naming the first violated invariant."""
    if s.dt_sim != SIM_DT:
        raise ScenarioValidationError("dt_sim", f"must be exactly {SIM_DT}, got {s.dt_sim}")
    if not isinstance(s.duration_steps, int) or s.duration_steps < 1:
        raise ScenarioValidationError("duration_steps", f"must be a positive integer, got {s.duration_steps}")
    if not s.agents:
        raise ScenarioValidationError("agents", "at least one agent required")
    seen = set()
    for track in s.agents:
        if track.agent_id in seen:
            raise ScenarioValidationError("agent_id", f"duplicate id {track.agent_id!r}")
        seen.add(track.agent_id)
        length, width = track.extent
        if length <= 0.0 or width <= 0.0:
            raise ScenarioValidationError("extent", f"agent {track.agent_id!r} extent must be positive, got {track.extent}")
        if len(track.states) != s.duration_steps:
            raise ScenarioValidationError(
                "states",
                f"agent {track.agent_id!r} has {len(track.states)} states, expected {s.duration_steps}",
            )
        prev = None
        for i, st in enumerate(track.states):
            if st is None:
                prev = None
                continue
            if prev is not None and abs(wrap_angle(st.heading - prev.heading)) > math.pi / 2:
                raise ScenarioValidationError(
                    "heading continuity",
                    f"agent {track.agent_id!r} jumps more than pi/2 at step {i}",
                )
            prev = st
    ego_matches = [a for a in s.agents if a.agent_id == s.ego_id]
    if len(ego_matches) != 1:
        raise ScenarioValidationError("ego_id", f"{s.ego_id!r} matches {len(ego_matches)} agents, expected 1")
    if len(s.ego_route) < 2:
        raise ScenarioValidationError("ego_route", "needs at least 2 waypoints")
    route = np.asarray(s.ego_route, dtype=float)
    arc = float(np.sum(np.hypot(*np.diff(route, axis=0).T)))
    if arc <= 0.0:
        raise ScenarioValidationError("ego_route", "cumulative arc length must be positive")
    for lane in s.map.lanes:
        if len(lane) < 2:
            raise ScenarioValidationError("lanes", "every lane polyline needs >= 2 points")
    if not s.map.drivable_area:
        raise ScenarioValidationError("drivable_area", "at least one polygon required")
    for poly in s.map.drivable_area:
        if len(poly) < 3:
            raise ScenarioValidationError("drivable_area", "polygon needs >= 3 vertices")
        if polygon_self_intersects(poly):
            raise ScenarioValidationError("drivable_area", "polygon is self-intersecting")


# ---------------------------------------------------------------------------
# serialization


def _state_to_json(st: Optional[VehicleState]):
    if st is None:
        return None
    return [st.x, st.y, st.heading, st.speed]


def scenario_to_dict(s: Scenario) -> dict:
    return {
        "id": s.id,
        "dt_sim": s.dt_sim,
        "duration_steps": s.duration_steps,
        "ego_id": s.ego_id,
        "ego_route": [list(p) for p in s.ego_route],
        "agents": [
            {
                "agent_id": a.agent_id,
                "extent": list(a.extent),
                "states": [_state_to_json(st) for st in a.states],
            }
            for a in s.agents
        ],
        "map": {
            "lanes": [[list(p) for p in lane] for lane in s.map.lanes],
            "drivable_area": [[list(p) for p in poly] for poly in s.map.drivable_area],
        },
    }


def scenario_from_dict(data: dict) -> Scenario:
    try:
        agents = []
        for a in data["agents"]:
            states = []
            for i, raw in enumerate(a["states"]):
                if raw is None:
                    states.append(None)
                    continue
                x, y, heading, speed = raw
                try:
                    states.append(VehicleState(float(x), float(y), float(heading), float(speed), step=i))
                except ValueError as exc:
                    raise ScenarioValidationError("states", f"agent {a['agent_id']!r} step {i}: {exc}")
            agents.append(
                AgentTrack(
                    agent_id=str(a["agent_id"]),
                    extent=(float(a["extent"][0]), float(a["extent"][1])),
                    states=tuple(states),
                )
            )
        map_data = MapData(
            lanes=tuple(tuple((float(p[0]), float(p[1])) for p in lane) for lane in data["map"]["lanes"]),
            drivable_area=tuple(
                tuple((float(p[0]), float(p[1])) for p in poly) for poly in data["map"]["drivable_area"]
            ),
        )
        scenario = Scenario(
            id=str(data["id"]),
            dt_sim=float(data["dt_sim"]),
            agents=tuple(agents),
            map=map_data,
            ego_id=str(data["ego_id"]),
            ego_route=tuple((float(p[0]), float(p[1])) for p in data["ego_route"]),
            duration_steps=int(data["duration_steps"]),
        )
    except ScenarioValidationError:
        raise
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise ScenarioFormatError(f"malformed scenario: {exc}") from exc
    validate_scenario(scenario)
    return scenario


def load_scenario(path: Union[str, Path]) -> Scenario:
    """Load and validate a scenario file."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioFormatError(f"invalid JSON in {path}: {exc}") from exc
    return scenario_from_dict(data)


def save_scenario(s: Scenario, path: Union[str, Path]) -> None:
    """Write a scenario in the canonical (deterministic) file form."""
    Path(path).write_text(scenario_json(s), encoding="utf-8")


def scenario_json(s: Scenario) -> str:
    return json.dumps(scenario_to_dict(s), sort_keys=True, indent=2) + "\n"


# ---------------------------------------------------------------------------
# synthesis

_PARAM_RANGES = {
    "duration_steps": (20, 2000),
    "ego_speed": (2.0, 30.0),
    "lane_width": (2.5, 6.0),
    "gap": (5.0, 200.0),
    "lead_speed": (0.0, 40.0),
    "other_speed": (0.0, 40.0),
    "route_frac": (0.3, 1.2),
    "lead_brake_step": (-1, 100000),
    "lead_brake_decel": (0.0, 9.0),
    "cross_x": (20.0, 200.0),
    "cross_lead_time": (0.0, 10.0),
    "merge_end": (10.0, 300.0),
}


def _resolve_params(kind: str, params: Optional[dict], defaults: dict) -> dict:
    merged = dict(defaults)
    for key, value in (params or {}).items():
        if key not in defaults:
            raise ValueError(f"unknown parameter {key!r} for kind {kind!r}")
        lo, hi = _PARAM_RANGES[key]
        if not (lo <= value <= hi):
            raise ValueError(f"parameter {key}={value} outside [{lo}, {hi}]")
        merged[key] = value
    return merged


def _cruise_track(agent_id, extent, start: VehicleState, heading, speed_fn, n_steps) -> AgentTrack:
    headings = [heading] * (n_steps - 1)
    speeds = [speed_fn(i) for i in range(1, n_steps)]
    traj = integrate_profile(start, headings, speeds, SIM_DT)
    return AgentTrack(agent_id=agent_id, extent=extent, states=tuple(traj.states))


def _rect(x0, y0, x1, y1) -> tuple:
    return ((x0, y0), (x1, y0), (x1, y1), (x0, y1))


def synth_scenario(kind: str, seed: int, params: Optional[dict] = None) -> Scenario:
    """Deterministically generate a test scenario of the given kind."""
    if kind not in SCENARIO_KINDS:
        raise ValueError(f"unknown scenario kind {kind!r}; choose from {SCENARIO_KINDS}")
    rng = np.random.default_rng(seed)
    builder = {
        "straight": _synth_straight,
        "cut_in": _synth_cut_in,
        "intersection": _synth_intersection,
        "merge": _synth_merge,
    }[kind]
    scenario = builder(seed, rng, params)
    validate_scenario(scenario)
    return scenario


def _route_along_x(v_ego: float, n_steps: int, frac: float) -> tuple:
    end = v_ego * n_steps * SIM_DT * frac
    return ((0.0, 0.0), (end / 2, 0.0), (end, 0.0))


def _synth_straight(seed, rng, params) -> Scenario:
    p = _resolve_params(
        "straight",
        params,
        {
            "duration_steps": 80,
            "ego_speed": 10.0,
            "lead_speed": 12.0,
            "gap": 30.0,
            "lane_width": 3.5,
            "route_frac": 0.75,
            "lead_brake_step": -1,
            "lead_brake_decel": 5.0,
        },
    )
    n = int(p["duration_steps"])
    lw = p["lane_width"]
    v_e = p["ego_speed"] * float(rng.uniform(0.97, 1.03))
    v_l = p["lead_speed"] * float(rng.uniform(0.97, 1.03))
    gap = p["gap"] * float(rng.uniform(0.9, 1.1))
    brake_step = int(p["lead_brake_step"])
    decel = p["lead_brake_decel"]

    ego = _cruise_track("ego", (4.6, 2.0), VehicleState(0.0, 0.0, 0.0, v_e, 0), 0.0, lambda i: v_e, n)

    def lead_speed(i):
        if brake_step < 0 or i < brake_step:
            return v_l
        return max(0.0, v_l - decel * (i - brake_step) * SIM_DT)

    lead = _cruise_track("lead", (4.6, 2.0), VehicleState(gap, 0.0, 0.0, v_l, 0), 0.0, lead_speed, n)

    x_max = max(v_e, v_l) * n * SIM_DT + gap + 40.0
    return Scenario(
        id=f"straight-{seed}",
        dt_sim=SIM_DT,
        agents=(ego, lead),
        map=MapData(
            lanes=(((-20.0, 0.0), (x_max, 0.0)), ((-20.0, lw), (x_max, lw))),
            drivable_area=(_rect(-20.0, -lw / 2 - 1.5, x_max, lw * 1.5 + 1.5),),
        ),
        ego_id="ego",
        ego_route=_route_along_x(v_e, n, p["route_frac"]),
        duration_steps=n,
    )


def _synth_cut_in(seed, rng, params) -> Scenario:
    p = _resolve_params(
        "cut_in",
        params,
        {
            "duration_steps": 180,
            "ego_speed": 10.0,
            "other_speed": 11.0,
            "gap": 12.0,
            "lane_width": 3.5,
            "route_frac": 0.6,
        },
    )
    n = int(p["duration_steps"])
    lw = p["lane_width"]
    v_e = p["ego_speed"] * float(rng.uniform(0.97, 1.03))
    v_o = p["other_speed"] * float(rng.uniform(0.97, 1.03))
    gap = p["gap"] * float(rng.uniform(0.9, 1.1))

    ego = _cruise_track("ego", (4.6, 2.0), VehicleState(0.0, 0.0, 0.0, v_e, 0), 0.0, lambda i: v_e, n)
    # neighbour cruises in the adjacent lane for the whole log (benign)
    neighbour = _cruise_track(
        "neighbour", (4.6, 2.0), VehicleState(gap, lw, 0.0, v_o, 0), 0.0, lambda i: v_o, n
    )
    lead = _cruise_track(
        "lead", (4.6, 2.0), VehicleState(60.0, 0.0, 0.0, v_e + 2.0, 0), 0.0, lambda i: v_e + 2.0, n
    )

    x_max = max(v_e, v_o) * n * SIM_DT + 100.0
    return Scenario(
        id=f"cut_in-{seed}",
        dt_sim=SIM_DT,
        agents=(ego, neighbour, lead),
        map=MapData(
            lanes=(((-20.0, 0.0), (x_max, 0.0)), ((-20.0, lw), (x_max, lw))),
            drivable_area=(_rect(-20.0, -lw / 2 - 1.5, x_max, lw * 1.5 + 1.5),),
        ),
        ego_id="ego",
        ego_route=_route_along_x(v_e, n, p["route_frac"]),
        duration_steps=n,
    )


def _synth_intersection(seed, rng, params) -> Scenario:
    p = _resolve_params(
        "intersection",
        params,
        {
            "duration_steps": 140,
            "ego_speed": 10.0,
            "other_speed": 9.0,
            "lane_width": 3.5,
            "route_frac": 0.7,
            "cross_x": 45.0,
            "cross_lead_time": 1.6,
        },
    )
    n = int(p["duration_steps"])
    lw = p["lane_width"]
    v_e = p["ego_speed"] * float(rng.uniform(0.97, 1.03))
    v_c = p["other_speed"] * float(rng.uniform(0.95, 1.05))
    x_c = p["cross_x"]

    ego = _cruise_track("ego", (4.6, 2.0), VehicleState(0.0, 0.0, 0.0, v_e, 0), 0.0, lambda i: v_e, n)
    # crossing vehicle clears the conflict point cross_lead_time seconds before the ego arrives
    t_ego = x_c / v_e
    t_cross = max(0.5, t_ego - p["cross_lead_time"])
    y_start = v_c * t_cross
    crosser = _cruise_track(
        "crosser", (4.6, 2.0), VehicleState(x_c, y_start, -math.pi / 2, v_c, 0), -math.pi / 2, lambda i: v_c, n
    )

    x_max = v_e * n * SIM_DT + 60.0
    y_span = max(y_start, v_c * n * SIM_DT) + 30.0
    return Scenario(
        id=f"intersection-{seed}",
        dt_sim=SIM_DT,
        agents=(ego, crosser),
        map=MapData(
            lanes=(
                ((-20.0, 0.0), (x_max, 0.0)),
                ((x_c, y_span), (x_c, -y_span)),
            ),
            drivable_area=(
                _rect(-20.0, -lw - 1.5, x_max, lw + 1.5),
                _rect(x_c - lw - 1.5, -y_span, x_c + lw + 1.5, y_span),
            ),
        ),
        ego_id="ego",
        ego_route=_route_along_x(v_e, n, p["route_frac"]),
        duration_steps=n,
    )


def _synth_merge(seed, rng, params) -> Scenario:
    p = _resolve_params(
        "merge",
        params,
        {
            "duration_steps": 160,
            "ego_speed": 10.0,
            "other_speed": 11.5,
            "lane_width": 3.5,
            "route_frac": 0.65,
            "merge_end": 55.0,
        },
    )
    n = int(p["duration_steps"])
    lw = p["lane_width"]
    v_e = p["ego_speed"] * float(rng.uniform(0.97, 1.03))
    v_m = p["other_speed"] * float(rng.uniform(0.97, 1.03))
    merge_end = p["merge_end"]

    ego = _cruise_track("ego", (4.6, 2.0), VehicleState(0.0, 0.0, 0.0, v_e, 0), 0.0, lambda i: v_e, n)

    # merging vehicle: starts ahead on the ramp lane (y=-lw), drifts onto y=0
    # over merge_window seconds with a smooth heading profile
    x0 = 18.0 * float(rng.uniform(0.9, 1.1))
    merge_t0 = 0.6
    merge_t1 = min(merge_t0 + max(1.5, (merge_end - x0) / max(v_m, 1.0) * 0.6), n * SIM_DT - 0.5)
    headings = []
    speeds = []
    y = -lw
    for i in range(1, n):
        t = i * SIM_DT
        if merge_t0 <= t <= merge_t1:
            u = (t - merge_t0) / (merge_t1 - merge_t0)
            rate = lw * (6 * u - 6 * u * u) / (merge_t1 - merge_t0)  # d/dt of smoothstep
            h = math.atan2(rate, v_m)
        else:
            h = 0.0
        headings.append(h)
        speeds.append(v_m)
    merger = AgentTrack(
        agent_id="merger",
        extent=(4.6, 2.0),
        states=tuple(integrate_profile(VehicleState(x0, y, 0.0, v_m, 0), headings, speeds, SIM_DT).states),
    )

    x_max = max(v_e, v_m) * n * SIM_DT + 60.0
    return Scenario(
        id=f"merge-{seed}",
        dt_sim=SIM_DT,
        agents=(ego, merger),
        map=MapData(
            lanes=(((-20.0, 0.0), (x_max, 0.0)), ((-20.0, -lw), (merge_end, -lw))),
            drivable_area=(
                _rect(-20.0, -lw / 2 - 1.0, x_max, lw / 2 + 1.0 + lw),
                _rect(-20.0, -lw - lw / 2 - 1.0, merge_end + 10.0, 0.0),
            ),
        ),
        ego_id="ego",
        ego_route=_route_along_x(v_e, n, p["route_frac"]),
        duration_steps=n,
    )
