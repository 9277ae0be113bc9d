"""Scenario synthesis, validation, and map queries.

Generates each scenario kind, shows the file round trip, and samples the
drivable area. Run from the repo root:  python demos/01_scenarios_and_maps.py
"""

import json
import tempfile
from pathlib import Path

import numpy as np

from advloop import load_scenario, point_in_drivable, save_scenario, synth_scenario

out_dir = Path(__file__).parent / "out"
out_dir.mkdir(exist_ok=True)

print("=== synthesizing one scenario per kind ===")
scenarios = {}
for kind in ("straight", "cut_in", "intersection", "merge"):
    s = synth_scenario(kind, seed=7)
    scenarios[kind] = s
    agents = ", ".join(a.agent_id for a in s.agents)
    print(f"{kind:12s} {s.duration_steps:4d} steps  agents: {agents}")

print("\n=== file round trip is byte-stable ===")
s = scenarios["cut_in"]
with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "cut_in.json"
    save_scenario(s, path)
    reloaded = load_scenario(path)
    save_scenario(reloaded, Path(tmp) / "again.json")
    same = path.read_bytes() == (Path(tmp) / "again.json").read_bytes()
    print(f"wrote {path.stat().st_size} bytes, reload+rewrite identical: {same}")
    print("top-level keys:", sorted(json.loads(path.read_text())))

print("\n=== drivable-area membership ===")
s = scenarios["intersection"]
probes = [(45.0, 0.0), (45.0, 40.0), (0.0, 30.0), (-50.0, 0.0)]
for p in probes:
    print(f"point {p}: {'drivable' if point_in_drivable(s.map, p) else 'off-road'}")

try:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, axes = plt.subplots(1, 4, figsize=(20, 4))
    for ax, (kind, s) in zip(axes, scenarios.items()):
        for poly in s.map.drivable_area:
            xs, ys = zip(*(list(poly) + [poly[0]]))
            ax.fill(xs, ys, color="0.9", zorder=0)
        for lane in s.map.lanes:
            xs, ys = zip(*lane)
            ax.plot(xs, ys, "k--", lw=0.8)
        for a in s.agents:
            pts = np.array([[st.x, st.y] for st in a.states if st is not None])
            ax.plot(pts[:, 0], pts[:, 1], lw=2, label=a.agent_id)
        rx, ry = zip(*s.ego_route)
        ax.plot(rx, ry, "g:", lw=2, label="route")
        ax.set_title(kind)
        ax.set_aspect("equal")
        ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(out_dir / "scenarios.png", dpi=110)
    print(f"\nsaved {out_dir / 'scenarios.png'}")
except ImportError:
    print("\n(matplotlib not available, skipping the figure)")
