"""Run the ring protocol for three epochs and print what the server saw.

The desk preset shrinks nothing about the constellation, only the synthetic
workload, so a laptop finishes in a couple of seconds.
"""

from orbitfl import desk_scenario, run_scenario


def main():
    cfg = desk_scenario(seed=7, until_epochs=3)
    result = run_scenario(cfg, "fedisl")

    print(f"protocol {result.protocol}, stopped on {result.stop_reason}")
    print(f"{'epoch':>5} {'sim time':>10} {'accuracy':>9} {'loss':>7} "
          f"{'down':>5} {'up':>3} {'isl':>4}")
    for rec in result.records:
        print(f"{rec.epoch:>5} {rec.sim_time_s:>9.1f}s {rec.test_accuracy:>9.3f} "
              f"{rec.test_loss:>7.3f} {rec.ps_down_msgs:>5} {rec.ps_up_msgs:>3} "
              f"{rec.isl_msgs:>4}")

    last = result.records[-1]
    per_epoch = last.sim_time_s / last.epoch
    print(f"\naverage epoch: {per_epoch:.1f} s simulated")
    print(f"server handled {last.ps_down_msgs} model downlinks and "
          f"{last.ps_up_msgs} aggregate uplinks in total")


if __name__ == "__main__":
    main()
