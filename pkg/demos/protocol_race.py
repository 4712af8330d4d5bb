"""Race the two protocols on the same constellation and data.

Every satellite talking to the server directly spends most of its life
waiting for a pass. Letting each plane spread the model over neighbor links
and hand back one folded update turns dead time into compute time.
"""

from orbitfl import compare, desk_scenario

cfg = desk_scenario(seed=7, until_epochs=5)
outcome = compare(cfg)

base = outcome.baseline
treat = outcome.treatment

print(f"{'epoch':>5} {'direct':>10} {'ring':>10}")
for b, t in zip(base.records[1:], treat.records[1:]):
    print(f"{b.epoch:>5} {b.sim_time_s:>9.1f}s {t.sim_time_s:>9.1f}s")

print()
print(f"epoch time ratio   {outcome.epoch_time_ratio:.1f}x")
print(f"wall clock speedup {outcome.speedup:.1f}x")
print(f"server traffic     {outcome.traffic_ratio:.1f}x fewer model messages")

b, t = base.records[-1], treat.records[-1]
print(f"\nafter {b.epoch} epochs the server exchanged "
      f"{b.ps_down_msgs + b.ps_up_msgs} model messages under direct polling "
      f"vs {t.ps_down_msgs + t.ps_up_msgs} with in-plane aggregation")
