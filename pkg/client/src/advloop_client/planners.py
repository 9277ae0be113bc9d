"""Example planners: a constant-speed lane follower and a brake-on-TTC variant.

Both are pure functions of the observation dict, so runs are reproducible.
"""

from __future__ import annotations

import math

PLAN_DT = 0.5


def _walk_route(route, s):
    """Point and heading at arc length s along a route polyline."""
    remaining = s
    for (x0, y0), (x1, y1) in zip(route, route[1:]):
        seg = math.hypot(x1 - x0, y1 - y0)
        if seg <= 0.0:
            continue
        if remaining <= seg:
            u = remaining / seg
            return (x0 + u * (x1 - x0), y0 + u * (y1 - y0)), math.atan2(y1 - y0, x1 - x0)
        remaining -= seg
    (x0, y0), (x1, y1) = route[-2], route[-1]
    return (x1, y1), math.atan2(y1 - y0, x1 - x0)


def _plan_along_route(obs, speeds, horizon):
    ego = obs["ego"]
    route = obs["route"]
    n = int(round(horizon / PLAN_DT)) + 1
    waypoints = [[ego["x"], ego["y"], ego["heading"], ego["speed"]]]
    s = 0.0
    for i in range(1, n):
        v = speeds[min(i - 1, len(speeds) - 1)]
        s += v * PLAN_DT
        (x, y), heading = _walk_route(route, s)
        waypoints.append([x, y, heading, v])
    return {"type": "plan", "dt": PLAN_DT, "waypoints": waypoints}


def lane_follow(obs, speed=None, horizon=3.0):
    """Follow the remaining route at a constant speed (current speed if None)."""
    v = obs["ego"]["speed"] if speed is None else speed
    n = int(round(horizon / PLAN_DT)) + 1
    return _plan_along_route(obs, [v] * n, horizon)


def _min_projected_ttc(obs, window=3.0, dt=0.1):
    """Constant-velocity closing time against all agents, circle footprints."""
    ego = obs["ego"]
    r_ego = 0.5 * math.hypot(*ego["extent"])
    vx_e = ego["speed"] * math.cos(ego["heading"])
    vy_e = ego["speed"] * math.sin(ego["heading"])
    best = math.inf
    for agent in obs["agents"]:
        r = r_ego + 0.5 * math.hypot(*agent["extent"])
        vx_a = agent["speed"] * math.cos(agent["heading"])
        vy_a = agent["speed"] * math.sin(agent["heading"])
        k = dt
        while k <= window:
            dx = (agent["x"] + vx_a * k) - (ego["x"] + vx_e * k)
            dy = (agent["y"] + vy_a * k) - (ego["y"] + vy_e * k)
            if math.hypot(dx, dy) <= r:
                best = min(best, k)
                break
            k += dt
    return best


def brake_on_ttc(obs, speed=None, horizon=3.0, ttc_threshold=2.5, decel=4.0):
    """Lane follower that sheds speed whenever projected TTC drops too low."""
    v = obs["ego"]["speed"] if speed is None else speed
    n = int(round(horizon / PLAN_DT)) + 1
    if _min_projected_ttc(obs) < ttc_threshold:
        speeds = []
        cur = obs["ego"]["speed"]
        for _ in range(n):
            cur = max(0.0, cur - decel * PLAN_DT)
            speeds.append(cur)
    else:
        speeds = [v] * n
    return _plan_along_route(obs, speeds, horizon)


PLANNERS = {"lane_follow": lane_follow, "brake_ttc": brake_on_ttc}
