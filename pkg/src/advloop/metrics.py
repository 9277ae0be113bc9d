"""Per-frame driving metrics, the PDMS composite, and slice-level aggregates.

A frame scores the ego after one executed simulation step. NC and DAC are
hard penalties (either zeroes the frame); EP, TTC and comfort enter a
weighted average. The slice driving score is the mean frame PDMS times the
route-completion fraction.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .dynamics import (
    KinematicLimits,
    VehicleState,
    footprint,
    obb_overlap,
    swept_overlap,
)
from .scenario import MapData, RoutePath, point_in_drivable

TERMINATION_REASONS = ("completed", "ego_collision", "off_route", "timeout")

_TOL = 1e-9


@dataclass(frozen=True)
class MetricWeights:
    ep: float = 5.0
    ttc: float = 5.0
    comfort: float = 2.0

    def __post_init__(self):
        if min(self.ep, self.ttc, self.comfort) < 0.0:
            raise ValueError("weights must be non-negative")
        if self.ep + self.ttc + self.comfort <= 0.0:
            raise ValueError("weights must not all be zero")


@dataclass(frozen=True)
class FrameMetrics:
    nc: int       # 1 = no collision this step
    dac: int      # 1 = all footprint corners on drivable area
    ttc: int      # 1 = no collision within the constant-velocity projection window
    comfort: int  # 1 = accel/jerk within limits
    ep: float     # progress vs. the logged ego, clipped to [0, 1]
    pdms: float

    def __post_init__(self):
        for name in ("nc", "dac", "ttc", "comfort"):
            if getattr(self, name) not in (0, 1):
                raise ValueError(f"{name} must be 0 or 1")
        if not (0.0 <= self.ep <= 1.0) or not (0.0 <= self.pdms <= 1.0):
            raise ValueError("ep and pdms must lie in [0, 1]")


@dataclass(frozen=True)
class AgentFrame:
    """One surrounding vehicle at the scored step (prev state for sweep checks)."""

    extent: tuple
    state: VehicleState
    prev: Optional[VehicleState] = None


@dataclass
class SliceReport:
    frames: list
    pdms_avg: float
    rc: float
    ds: float
    terminated: str
    final_arclength: float = 0.0
    aborted: bool = False
    abort_reason: Optional[str] = None
    config: Optional[dict] = None
    seed: Optional[int] = None

    def to_dict(self) -> dict:
        return {
            "frames": [
                {
                    "nc": f.nc,
                    "dac": f.dac,
                    "ttc": f.ttc,
                    "comfort": f.comfort,
                    "ep": f.ep,
                    "pdms": f.pdms,
                }
                for f in self.frames
            ],
            "pdms_avg": self.pdms_avg,
            "rc": self.rc,
            "ds": self.ds,
            "terminated": self.terminated,
            "final_arclength": self.final_arclength,
            "aborted": self.aborted,
            "abort_reason": self.abort_reason,
            "config": self.config,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SliceReport":
        frames = [
            FrameMetrics(
                nc=int(f["nc"]),
                dac=int(f["dac"]),
                ttc=int(f["ttc"]),
                comfort=int(f["comfort"]),
                ep=float(f["ep"]),
                pdms=float(f["pdms"]),
            )
            for f in data["frames"]
        ]
        return cls(
            frames=frames,
            pdms_avg=float(data["pdms_avg"]),
            rc=float(data["rc"]),
            ds=float(data["ds"]),
            terminated=str(data["terminated"]),
            final_arclength=float(data.get("final_arclength", 0.0)),
            aborted=bool(data.get("aborted", False)),
            abort_reason=data.get("abort_reason"),
            config=data.get("config"),
            seed=data.get("seed"),
        )


def compute_pdms(nc: int, dac: int, ep: float, ttc: int, comfort: int,
                 weights: MetricWeights = MetricWeights()) -> float:
    """Penalty product times the weighted submetric average."""
    total = weights.ep + weights.ttc + weights.comfort
    weighted = (weights.ep * ep + weights.ttc * ttc + weights.comfort * comfort) / total
    return float(nc * dac) * weighted


def _comfort_ok(speed_tail: Sequence[float], dt: float, limits: KinematicLimits) -> bool:
    """Accel/jerk bounds on the most recent executed speeds; short history passes."""
    if len(speed_tail) >= 2:
        accel = (speed_tail[-1] - speed_tail[-2]) / dt
        if accel > limits.a_max + _TOL or accel < limits.a_min - _TOL:
            return False
    if len(speed_tail) >= 3:
        jerk = (speed_tail[-1] - 2.0 * speed_tail[-2] + speed_tail[-3]) / dt**2
        if abs(jerk) > limits.j_max + _TOL:
            return False
    return True


def _ttc_clear(
    ego: VehicleState,
    ego_extent,
    agents: Sequence[AgentFrame],
    horizon: float,
    dt: float,
) -> bool:
    """Constant-velocity projection of everyone; True when no overlap occurs."""
    n_sub = int(round(horizon / dt))
    for k in range(1, n_sub + 1):
        tau = k * dt
        ego_fp = footprint(ego.advanced(tau), ego_extent)
        for agent in agents:
            if obb_overlap(ego_fp, footprint(agent.state.advanced(tau), agent.extent)):
                return False
    return True


def frame_metrics(
    ego_tail: Sequence[VehicleState],
    ego_extent,
    agents: Sequence[AgentFrame],
    map_data: MapData,
    route: RoutePath,
    logged_progress: float,
    weights: MetricWeights = MetricWeights(),
    limits: KinematicLimits = KinematicLimits(),
    dt: float = 0.1,
    ttc_horizon: float = 3.0,
) -> FrameMetrics:
    """Score one executed step.

    ego_tail is the executed ego history ending at the scored state (at least
    one state; the last up-to-three are used for comfort, the last two for
    progress). logged_progress is the arc-length the logged ego covered over
    the same step.
    """
    if not ego_tail:
        raise ValueError("ego_tail must contain the current state")
    ego = ego_tail[-1]
    ego_prev = ego_tail[-2] if len(ego_tail) >= 2 else None

    nc = 1
    for agent in agents:
        if swept_overlap(ego_prev, ego, agent.prev, agent.state, ego_extent, agent.extent):
            nc = 0
            break

    dac = 1
    for corner in footprint(ego, ego_extent):
        if not point_in_drivable(map_data, corner):
            dac = 0
            break

    ttc = 1 if _ttc_clear(ego, ego_extent, agents, ttc_horizon, dt) else 0

    comfort = 1 if _comfort_ok([s.speed for s in ego_tail[-3:]], dt, limits) else 0

    if logged_progress < 0.01:
        ep = 1.0
    elif ego_prev is None:
        ep = 1.0
    else:
        progress = route.project((ego.x, ego.y)) - route.project((ego_prev.x, ego_prev.y))
        ep = float(min(1.0, max(0.0, progress / logged_progress)))

    pdms = compute_pdms(nc, dac, ep, ttc, comfort, weights)
    return FrameMetrics(nc=nc, dac=dac, ttc=ttc, comfort=comfort, ep=ep, pdms=pdms)


def aggregate_slice(
    frames: Sequence[FrameMetrics],
    route: RoutePath,
    final_ego_arclength: float,
    terminated: str,
    config: Optional[dict] = None,
    seed: Optional[int] = None,
    aborted: bool = False,
    abort_reason: Optional[str] = None,
) -> SliceReport:
    """Fold per-frame metrics into the slice report (DS = mean PDMS x RC)."""
    if not frames:
        raise ValueError("aggregate_slice needs at least one frame")
    if terminated not in TERMINATION_REASONS:
        raise ValueError(f"unknown termination reason {terminated!r}")
    pdms_avg = float(np.mean([f.pdms for f in frames]))
    rc = float(min(1.0, max(0.0, final_ego_arclength / route.length)))
    return SliceReport(
        frames=list(frames),
        pdms_avg=pdms_avg,
        rc=rc,
        ds=pdms_avg * rc,
        terminated=terminated,
        final_arclength=float(final_ego_arclength),
        aborted=aborted,
        abort_reason=abort_reason,
        config=config,
        seed=seed,
    )


def slice_completion(reports: Sequence[SliceReport]) -> float:
    """Fraction of slices that ran to route completion."""
    if not reports:
        raise ValueError("slice_completion needs at least one report")
    done = sum(1 for r in reports if r.terminated == "completed")
    return done / len(reports)
