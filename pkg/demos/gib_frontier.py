"""Rate/relevance trade-off of the Gaussian information bottleneck.

A scalar source first: below its single critical beta the encoder is
switched off, above it the kept information grows towards I(x;y).  Then a
20x4 synthetic source of the kind used by the network demos, where the
encoder rank steps up at each critical beta and the NMSE of the linear
reconstruction falls accordingly.

Run with ``python3 demos/gib_frontier.py``.
"""

import numpy as np

from goedge import gib


def show(points):
    print(f"{'beta':>10} {'rank':>4} {'I(x;z)':>9} {'I(z;y)':>9} {'NMSE':>8} {'H(z)':>9}")
    for p in points:
        print(f"{p.beta:10.3f} {p.n_beta:4d} {p.i_xz_bits:9.4f} {p.i_zy_bits:9.4f} "
              f"{p.nmse:8.4f} {p.entropy_bits:9.4f}")


def main():
    scalar = gib.GaussianSource.scalar(1.0, 1.0, 0.8)
    spec = gib.compute_spectrum(scalar)
    print("scalar source, var_x = var_y = 1, cov = 0.8")
    print(f"  eigenvalue {spec.eigenvalues[0]:.4f}, critical beta {spec.critical_betas[0]:.4f}")
    print(f"  ceiling I(x;y) = {gib.mutual_information_xy(scalar):.5f} bits")
    show(gib.frontier(scalar, [1.5, 2.7, 2.8, 4.0, 10.0, 100.0, 1e4]))

    src = gib.GaussianSource.synthetic(20, 4, seed=100, correlation=0.9)
    spec = gib.compute_spectrum(src)
    print("\nsynthetic 20x4 source (seed 100)")
    print("  critical betas:", np.array2string(spec.critical_betas[: spec.n_usable], precision=3))
    print(f"  ceiling I(x;y) = {gib.mutual_information_xy(src):.4f} bits")
    show(gib.frontier(src, np.geomspace(1.0, 1e3, 13)))

    # the per-device lookup table used by the network optimiser
    table = gib.rate_table(src)
    print(f"\nrate table: {len(table)} rows, NMSE from {table[0].nmse:.4f} down to {table[-1].nmse:.4f}")


if __name__ == "__main__":
    main()
