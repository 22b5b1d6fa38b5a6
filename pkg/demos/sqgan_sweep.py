"""Semantic image coding with masked vector quantisation.

The device picks two masking fractions each slot: ``m_x`` for the image
latents and ``m_s`` for the semantic map.  Both set the bit count, the
quantiser work and a fitted perceptual distortion.  This script prints the
surrogate at a few masks, one per-slot decision, and then sweeps the
distortion target: a looser target lets devices drop more latents and
total power falls.

Loads ``scenarios/sqgan_demo.toml``.  Run with ``python3 demos/sqgan_sweep.py``.
"""

from pathlib import Path

from goedge import config, sim
from goedge import slotopt as so
from goedge import surrogate as sg
from goedge.channel import max_rate, pathloss_db

SCENARIO = Path(__file__).resolve().parents[1] / "scenarios" / "sqgan_demo.toml"


def main():
    print(f"{'m_x':>6} {'m_s':>6} {'bits':>6} {'Gops':>7} {'G':>7}")
    for mx, ms in [(1.0, 1.0), (0.5, 1.0), (0.5, 0.1), (0.1, 0.05), (0.04, 0.05)]:
        print(f"{mx:6.2f} {ms:6.2f} {sg.bits_count(mx, ms):6.0f} {sg.ops_count(mx, ms) / 1e9:7.4f} "
              f"{sg.g_approx(mx, ms):7.4f}")

    scenario, res = config.load(SCENARIO)
    d = scenario.devices[0]
    # mean path gain only, no shadowing or fading draw
    h = 10 ** (-pathloss_db(d.distance_m, d.radio.carrier_freq, scenario.channel) / 10)
    ed = so.EdParams.build(bandwidth=d.radio.bandwidth, noise_psd=d.radio.noise_psd,
                           max_tx_power=d.radio.max_tx_power, f_max=d.cpu.f_max, eta=d.cpu.eta,
                           rho=d.cpu.rho, gamma=1.0)
    dec = so.solve_ed_sqgan([0.01], [1.0], [h], [max_rate(h, d.radio)], scenario.v, ed)
    print(f"\ndevice 0 at {d.distance_m:.1f} m, queues (0.01, 1.0): m_x = {dec.m_x[0]:.4f}, "
          f"m_s = {dec.m_s[0]:.4f}, rate = {dec.rate[0] / 1e3:.1f} kbit/s, clock = {dec.freq[0] / 1e6:.1f} MHz")

    rows = sim.sweep(scenario, config.sweep_grid(res))
    print(f"\n{'G_avg':>6} {'status':>8} {'settled':>8} {'P_total W':>10} {'mean G':>8}")
    for r in rows:
        print(f"{r['g_avg']:6.2f} {r['status']:>8} {r['convergence_slot']!s:>8} {r['p_total']:10.4f} "
              f"{r['g_avg_mean']:8.4f}")


if __name__ == "__main__":
    main()
