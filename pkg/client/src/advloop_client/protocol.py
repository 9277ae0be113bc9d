"""Message helpers for wire protocol v1 (newline-delimited JSON).

The harness speaks first: a hello handshake, then one observation per
planner tick, then an end message. The client answers every observation
with exactly one plan.
"""

from __future__ import annotations

import math

VERSION = 1


class ProtocolMismatch(RuntimeError):
    """Handshake failed: wrong first message or unsupported version."""


def hello() -> dict:
    return {"type": "hello", "version": VERSION}


def error_message(text: str) -> dict:
    return {"type": "error", "message": text}


def plan_message(dt: float, waypoints: list, step=None) -> dict:
    msg = {"type": "plan", "dt": dt, "waypoints": waypoints}
    if step is not None:
        msg["step"] = step
    return msg


def validate_plan(msg: dict) -> None:
    """Local sanity check before a plan goes on the wire."""
    waypoints = msg.get("waypoints")
    if not isinstance(waypoints, list) or len(waypoints) < 2:
        raise ValueError("plan needs at least 2 waypoints")
    for wp in waypoints:
        if len(wp) != 4 or not all(math.isfinite(float(v)) for v in wp):
            raise ValueError(f"bad waypoint {wp!r}")
    if not (isinstance(msg.get("dt"), (int, float)) and msg["dt"] > 0):
        raise ValueError("plan dt must be positive")
