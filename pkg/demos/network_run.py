"""Ten GIB devices sharing one edge server.

Loads ``scenarios/gib_demo.toml``, runs the slot simulator until the
virtual queues settle and then for a further 1000-slot window, and reports
per-device delay and NMSE against their targets together with the power
split between devices and server.

Run with ``python3 demos/network_run.py``.
"""

import time
from pathlib import Path

import numpy as np

from goedge import config, sim

SCENARIO = Path(__file__).resolve().parents[1] / "scenarios" / "gib_demo.toml"


def main():
    scenario, _ = config.load(SCENARIO)
    start = time.perf_counter()
    trace, summary = sim.run(scenario)
    elapsed = time.perf_counter() - start

    print(f"{scenario.k} devices, V = {scenario.v}, seed {scenario.seed}")
    print(f"queues settled at slot {summary.convergence_slot} ({elapsed:.1f} s); "
          f"summary window {summary.window}")
    d_ratio, g_ratio = summary.constraint_ratios
    print(f"\n{'dev':>3} {'dist m':>7} {'delay ms':>9} {'D/D_avg':>8} {'NMSE':>7} {'G/G_avg':>8}")
    for i, d in enumerate(scenario.devices):
        print(f"{d.id:3d} {d.distance_m:7.1f} {1e3 * summary.d_avg[i]:9.4f} {d_ratio[i]:8.4f} "
              f"{summary.g_avg[i]:7.4f} {g_ratio[i]:8.4f}")

    print(f"\npower: devices {1e3 * summary.p_ed:.4f} mW, server {1e3 * summary.p_es:.4f} mW, "
          f"total {1e3 * summary.p_total:.4f} mW")
    lo, hi = summary.window
    beta = trace["beta_or_ms"][lo:hi]
    print(f"mean encoder beta over the window: {np.mean(beta):.2f}; "
          f"blocked slots over the run: {summary.blocked_slots}")
    print("feasible:", summary.feasible)


if __name__ == "__main__":
    main()
