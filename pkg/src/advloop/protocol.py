"""Wire protocol v1 for external planners (newline-delimited JSON).

Handshake: the harness sends {"type": "hello", "version": 1} and expects the
same message back. Per tick it sends an observation and expects a plan:

    -> {"type": "obs", "step": n, "ego": {...}, "agents": [...],
        "lanes": [...], "drivable": [...], "route": [...], "sensor": null}
    <- {"type": "plan", "dt": 0.5, "waypoints": [[x, y, heading, speed], ...]}

The session closes with {"type": "end", "reason": ...}. The "sensor" field is
reserved for an image-generator attachment and is always null here.

Transports: a child process speaking over its standard streams, or a TCP
connection to a listening planner service.
"""

from __future__ import annotations

import json
import math
import os
import select
import shlex
import socket
import subprocess
import time
from typing import Optional

from .dynamics import SIM_DT, Trajectory, VehicleState

PROTOCOL_VERSION = 1


class ProtocolError(RuntimeError):
    """Malformed message, version mismatch, or contract violation."""


class PlannerTimeoutError(RuntimeError):
    """The external planner did not answer within the tick budget."""


def hello_message() -> dict:
    return {"type": "hello", "version": PROTOCOL_VERSION}


def end_message(reason: str) -> dict:
    return {"type": "end", "reason": reason}


def observation_message(obs) -> dict:
    return {
        "type": "obs",
        "step": obs.step,
        "ego": {
            "x": obs.ego.x,
            "y": obs.ego.y,
            "heading": obs.ego.heading,
            "speed": obs.ego.speed,
            "extent": list(obs.ego_extent),
        },
        "agents": [
            {
                "id": agent_id,
                "extent": list(extent),
                "x": state.x,
                "y": state.y,
                "heading": state.heading,
                "speed": state.speed,
            }
            for agent_id, extent, state in obs.agents
        ],
        "lanes": [[list(p) for p in lane] for lane in obs.lanes],
        "drivable": [[list(p) for p in poly] for poly in obs.drivable],
        "route": [list(p) for p in obs.route],
        "sensor": None,
    }


def parse_plan(message: dict, step: int, ego: VehicleState, horizon: float) -> Trajectory:
    """Validate a plan message and lift it onto the simulation grid.

    Checks: type, >= 2 finite waypoints, first waypoint within 0.5 m of the
    ego, and duration covering the horizon.
    """
    if not isinstance(message, dict) or message.get("type") != "plan":
        if isinstance(message, dict) and message.get("type") == "error":
            raise ProtocolError(f"planner error: {message.get('message')!r}")
        raise ProtocolError(f"expected plan message, got {message!r}")
    dt = message.get("dt")
    waypoints = message.get("waypoints")
    if not isinstance(dt, (int, float)) or not math.isfinite(dt) or dt <= 0:
        raise ProtocolError(f"bad plan dt: {dt!r}")
    stride = round(dt / SIM_DT)
    if stride < 1 or abs(dt - stride * SIM_DT) > 1e-9:
        raise ProtocolError(f"plan dt {dt} is not a multiple of the 0.1 s grid")
    if not isinstance(waypoints, list) or len(waypoints) < 2:
        raise ProtocolError("plan needs at least 2 waypoints")
    states = []
    for i, wp in enumerate(waypoints):
        if not isinstance(wp, (list, tuple)) or len(wp) != 4:
            raise ProtocolError(f"waypoint {i} must be [x, y, heading, speed]")
        if not all(isinstance(v, (int, float)) and math.isfinite(v) for v in wp):
            raise ProtocolError(f"waypoint {i} has non-finite values")
        try:
            states.append(
                VehicleState(float(wp[0]), float(wp[1]), float(wp[2]), float(wp[3]), step + i * stride)
            )
        except ValueError as exc:
            raise ProtocolError(f"waypoint {i}: {exc}") from exc
    start = states[0]
    if math.hypot(start.x - ego.x, start.y - ego.y) > 0.5:
        raise ProtocolError("plan must start within 0.5 m of the current ego position")
    duration = (len(states) - 1) * dt
    if duration < horizon - 1e-9:
        raise ProtocolError(f"plan covers {duration} s, below the {horizon} s horizon")
    return Trajectory(dt, states)


class _LineChannel:
    """Newline-JSON reader/writer over a raw file descriptor pair."""

    def __init__(self, read_fd: int, write_fd: int):
        self._read_fd = read_fd
        self._write_fd = write_fd
        self._buffer = b""

    def send(self, message: dict) -> None:
        payload = (json.dumps(message, sort_keys=True) + "\n").encode("utf-8")
        os.write(self._write_fd, payload)

    def recv(self, timeout: float) -> dict:
        deadline = time.monotonic() + timeout
        while b"\n" not in self._buffer:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise PlannerTimeoutError(f"no response within {timeout} s")
            ready, _, _ = select.select([self._read_fd], [], [], remaining)
            if not ready:
                raise PlannerTimeoutError(f"no response within {timeout} s")
            chunk = os.read(self._read_fd, 65536)
            if not chunk:
                raise ProtocolError("planner closed the stream")
            self._buffer += chunk
        line, self._buffer = self._buffer.split(b"\n", 1)
        try:
            return json.loads(line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ProtocolError(f"invalid JSON from planner: {exc}") from exc


class ExternalPlanner:
    """Harness-side session with an external planner process or service."""

    def __init__(self, endpoint: str, timeout_s: float = 10.0, connect_timeout_s: float = 5.0):
        self.timeout_s = timeout_s
        self._proc: Optional[subprocess.Popen] = None
        self._sock: Optional[socket.socket] = None
        host_port = _parse_host_port(endpoint)
        if host_port is not None:
            self._sock = _connect_with_retry(host_port, connect_timeout_s)
            self._channel = _LineChannel(self._sock.fileno(), self._sock.fileno())
        else:
            self._proc = subprocess.Popen(
                shlex.split(endpoint),
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                bufsize=0,
            )
            self._channel = _LineChannel(self._proc.stdout.fileno(), self._proc.stdin.fileno())
        self._handshake()

    def _handshake(self) -> None:
        self._channel.send(hello_message())
        reply = self._channel.recv(self.timeout_s)
        if not isinstance(reply, dict) or reply.get("type") != "hello":
            raise ProtocolError(f"expected hello ack, got {reply!r}")
        if reply.get("version") != PROTOCOL_VERSION:
            raise ProtocolError(
                f"protocol version mismatch: harness {PROTOCOL_VERSION}, planner {reply.get('version')!r}"
            )

    def tick(self, obs) -> dict:
        self._channel.send(observation_message(obs))
        return self._channel.recv(self.timeout_s)

    def end(self, reason: str) -> None:
        try:
            self._channel.send(end_message(reason))
        except OSError:
            pass

    def close(self) -> None:
        if self._sock is not None:
            try:
                self._sock.close()
            except OSError:
                pass
        if self._proc is not None:
            try:
                self._proc.stdin.close()
            except OSError:
                pass
            try:
                self._proc.wait(timeout=2.0)
            except subprocess.TimeoutExpired:
                self._proc.kill()
                self._proc.wait()


def external_planner_tick(session: ExternalPlanner, obs, horizon: float = 3.0) -> Trajectory:
    """One observation/plan round trip, validated."""
    reply = session.tick(obs)
    return parse_plan(reply, obs.step, obs.ego, horizon)


def _parse_host_port(endpoint: str):
    if " " in endpoint or ":" not in endpoint:
        return None
    host, _, port = endpoint.rpartition(":")
    if not host or not port.isdigit():
        return None
    return host, int(port)


def _connect_with_retry(host_port, connect_timeout_s: float) -> socket.socket:
    deadline = time.monotonic() + connect_timeout_s
    last_error = None
    while time.monotonic() < deadline:
        try:
            sock = socket.create_connection(host_port, timeout=connect_timeout_s)
            sock.setblocking(True)
            return sock
        except OSError as exc:
            last_error = exc
            time.sleep(0.05)
    raise ProtocolError(f"cannot connect to planner at {host_port[0]}:{host_port[1]}: {last_error}")
