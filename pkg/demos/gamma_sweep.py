"""Effect of the device CPU-power weight Gamma.

Gamma scales device CPU power in the per-slot objective.  Raising it makes
devices clock down; the delay queues grow and push the server clock up,
so server power grows with Gamma.  In this scenario device power is
smallest at a moderate Gamma rather than at either end of the grid.

Loads ``scenarios/gamma_sweep.toml`` and sweeps its ``[sweep]`` grid.
Run with ``python3 demos/gamma_sweep.py``.
"""

from pathlib import Path

import numpy as np

from goedge import config, sim

SCENARIO = Path(__file__).resolve().parents[1] / "scenarios" / "gamma_sweep.toml"


def main():
    scenario, res = config.load(SCENARIO)
    rows = sim.sweep(scenario, config.sweep_grid(res))
    print(f"{'Gamma':>6} {'status':>8} {'settled':>8} {'P_ED mW':>9} {'P_ES mW':>9} {'max D/D_avg':>12}")
    for r in rows:
        print(f"{r['gamma']:6.1f} {r['status']:>8} {r['convergence_slot']!s:>8} {1e3 * r['p_ed']:9.5f} "
              f"{1e3 * r['p_es']:9.5f} {r['d_ratio_max']:12.4f}")
    p_ed = np.array([r["p_ed"] for r in rows])
    best = rows[int(np.argmin(p_ed))]["gamma"]
    print(f"\ndevice power is lowest at Gamma = {best}")


if __name__ == "__main__":
    main()
