"""Full two-episode evaluation over a small batch, printed as the usual table.

This is the in-process equivalent of:
    advloop synth ... ; advloop run --scenario-dir ... --planner idm
Run:  python demos/05_closed_loop_batch.py
"""

import time
from collections import Counter

from advloop import synth_scenario
from advloop.config import HarnessConfig
from advloop.harness import PlannerBinding, run_batch
from advloop.reports import batch_summary, summary_table

cfg = HarnessConfig()
kinds = ("straight", "cut_in", "intersection", "merge")
scenarios = [synth_scenario(kinds[i % 4], seed=40 + i) for i in range(8)]

print(f"running {len(scenarios)} scenarios x 2 seeds with the IDM planner...")
t0 = time.time()
results, failures = run_batch(scenarios, PlannerBinding("idm"), cfg, seeds=[0, 1])
print(f"{len(results)} epochs in {time.time() - t0:.1f}s, {len(failures)} failures\n")

print(summary_table(batch_summary(results)))

print("\nepisode-2 outcomes:", dict(Counter(r.episode2.terminated for r in results)))
worst = min(results, key=lambda r: r.episode2.ds)
print(f"hardest epoch: {worst.scenario_id} seed={worst.seed} "
      f"ds {worst.episode1.ds:.3f} -> {worst.episode2.ds:.3f} "
      f"({worst.episode2.terminated})")
