"""Trajectory plumbing: resampling, kinematic clamping, and OBB collision.

Run:  python demos/02_trajectories_and_collision.py
"""

import math

import numpy as np

from advloop import (
    KinematicLimits,
    Trajectory,
    VehicleState,
    clamp_kinematics,
    footprint,
    obb_distance,
    obb_overlap,
    resample_trajectory,
)

limits = KinematicLimits()
print("limits:", limits)

print("\n=== 2 Hz plan resampled to the 10 Hz grid ===")
plan = Trajectory(
    0.5,
    [VehicleState(10.0 * i * 0.5, 0.0, 0.0, 10.0, i * 5) for i in range(7)],
)
fine = resample_trajectory(plan, 0.1)
print(f"{len(plan)} waypoints at dt=0.5  ->  {len(fine)} states at dt=0.1")
print("positions stay on the line, speeds recomputed:",
      np.allclose(fine.positions[:, 1], 0), np.allclose(fine.speeds, 10.0))

print("\n=== clamping an infeasible emergency stop ===")
v0 = 20.0
panic = Trajectory(
    0.1,
    [VehicleState(0, 0, 0, v0, 0)] + [VehicleState(2.0, 0, 0, 0.0, i) for i in range(1, 40)],
)
stopped = clamp_kinematics(panic, limits)
accel = np.diff(stopped.speeds) / 0.1
steps_to_stop = int(np.argmax(stopped.speeds == 0.0))
print(f"requested: stop from {v0} m/s in one step")
print(f"clamped:   stop takes {steps_to_stop} steps "
      f"(>= ceil({v0}/{abs(limits.a_min) * 0.1:.2f}) = {math.ceil(v0 / (abs(limits.a_min) * 0.1))}), "
      f"min accel {accel.min():.2f} m/s^2")

print("\n=== oriented-box collision checks ===")
ego = footprint(VehicleState(0, 0, 0, 0), (4.6, 2.0))
cases = [
    ("10 m ahead, same lane", VehicleState(10, 0, 0, 0)),
    ("3.5 m beside (adjacent lane)", VehicleState(0, 3.5, 0, 0)),
    ("cutting in at 30 deg, 3 m ahead", VehicleState(3.0, 1.2, math.radians(30), 0)),
]
for label, state in cases:
    other = footprint(state, (4.6, 2.0))
    hit = obb_overlap(ego, other)
    print(f"{label:34s} overlap={hit!s:5s} distance={obb_distance(ego, other):5.2f} m")
