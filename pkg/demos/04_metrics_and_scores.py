"""Per-frame metrics and the composite score, on hand-built situations.

Run:  python demos/04_metrics_and_scores.py
"""

from advloop import MetricWeights, VehicleState, compute_pdms, frame_metrics
from advloop.metrics import AgentFrame
from advloop.scenario import MapData, RoutePath

road = MapData(
    lanes=(),
    drivable_area=(((-20.0, -5.0), (500.0, -5.0), (500.0, 5.0), (-20.0, 5.0)),),
)
route = RoutePath([(0.0, 0.0), (400.0, 0.0)])


def frame(label, **kw):
    args = dict(
        ego_tail=[VehicleState(0.0, 0.0, 0.0, 10.0, 0), VehicleState(1.0, 0.0, 0.0, 10.0, 1)],
        ego_extent=(4.6, 2.0),
        agents=[],
        map_data=road,
        route=route,
        logged_progress=1.0,
    )
    args.update(kw)
    f = frame_metrics(**args)
    print(f"{label:36s} nc={f.nc} dac={f.dac} ttc={f.ttc} c={f.comfort} "
          f"ep={f.ep:.2f}  pdms={f.pdms:.4f}")
    return f


print("=== single frames ===")
frame("clean cruise")
frame("stopped car 20 m ahead (TTC trips)",
      agents=[AgentFrame((4.6, 2.0), VehicleState(21.0, 0.0, 0.0, 0.0, 1))])
frame("overlapping car (collision)",
      agents=[AgentFrame((4.6, 2.0), VehicleState(3.0, 0.5, 0.0, 0.0, 1))])
frame("half the logged progress", logged_progress=2.0)
frame("panic braking (comfort trips)",
      ego_tail=[VehicleState(0.0, 0.0, 0.0, 10.0, 0), VehicleState(0.9, 0.0, 0.0, 9.0, 1)])

print("\n=== composite weighting ===")
w = MetricWeights()
print(f"defaults (ep={w.ep:g}, ttc={w.ttc:g}, comfort={w.comfort:g})")
print("ep=0.5, others perfect:", round(compute_pdms(1, 1, 0.5, 1, 1, w), 4))
print("collision zeroes everything:", compute_pdms(0, 1, 1.0, 1, 1, w))
print("equal weights instead:   ", round(compute_pdms(1, 1, 0.5, 1, 1, MetricWeights(1, 1, 1)), 4))
