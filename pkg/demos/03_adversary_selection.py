"""Candidate lattice and adversarial selection on a cut-in scene.

Episode 1 records the planner's trajectory; the candidate set is then scored
against that recording: prior x collision-step decay x jerk smoothness.
Run:  python demos/03_adversary_selection.py
"""

from advloop import generate_candidates, pick_adversary, select_adversarial, synth_scenario
from advloop.config import HarnessConfig
from advloop.harness import PlannerBinding, run_episode

cfg = HarnessConfig()
scenario = synth_scenario("cut_in", seed=11)

print("=== episode 1: record the ego under log traffic ===")
report, ego_log = run_episode(scenario, PlannerBinding("idm"), cfg, seed=0)
print(f"terminated={report.terminated}  rc={report.rc:.3f}  pdms={report.pdms_avg:.3f}")

adv_id = pick_adversary(scenario, ego_log, cfg.adversary)
print(f"\nadversary by nearest approach: {adv_id}")

cset = generate_candidates(
    scenario, adv_id, ego_log, k=cfg.adversary.k_candidates, seed=0,
    cfg=cfg.adversary, limits=cfg.limits,
)
extents = (scenario.agent(adv_id).extent, scenario.ego.extent)
tau_star, scored = select_adversarial(cset, ego_log, cfg.adversary, extents, cfg.limits)

print(f"\n=== {len(cset)} candidates, top 8 by score ===")
print(f"{'idx':>3} {'prior':>7} {'t_c':>5} {'d_min':>6} {'jerk':>6} {'score':>10}")
for sc in sorted(scored, key=lambda s: -s.score)[:8]:
    t_c = sc.t_c if sc.t_c is not None else "-"
    print(f"{sc.index:3d} {sc.prior:7.4f} {t_c!s:>5} {sc.min_distance:6.2f} "
          f"{sc.jerk:6.3f} {sc.score:10.2e}")

winner = max(scored, key=lambda s: s.score)
print(f"\nselected candidate {winner.index}: "
      + (f"first collision at step {winner.t_c} ({winner.t_c * 0.1:.1f} s)"
         if winner.t_c else f"near miss at {winner.min_distance:.2f} m"))

print("\n=== episode 2: execute the selected trajectory ===")
report2, _ = run_episode(
    scenario, PlannerBinding("idm"), cfg, adversary_override=(adv_id, tau_star), seed=0
)
print(f"terminated={report2.terminated}  rc={report2.rc:.3f}  pdms={report2.pdms_avg:.3f}")
print(f"driving score: {report.ds:.3f} -> {report2.ds:.3f}  (drop {report.ds - report2.ds:+.3f})")
