"""Closed-loop stability of the band-split controller versus filter order.

With 2nd-order filters every horizon pair tried here is stable. With
3rd-order filters the low-pass and band-pass add six poles close to
z = 1, and short horizons cannot see far enough ahead to stabilize them.
On this model the first stable 3rd-order pair in the scan below appears
only near Np = 1000, and stability is not monotone in Np.
"""
from bandmpc.composer import composed_for_control, default_lme
from bandmpc.filters import BandSplitSpec
from bandmpc.mpc import stability_search

FS = 20000.0


def scan(order, pairs, rho=1e-2):
    model = composed_for_control(default_lme(FS), BandSplitSpec(32.0, 26.0, 800.0, order, FS)).state_space
    print(f"\norder {order}, {model.n_states} model states, rho = {rho:g}")
    print(f"{'Np':>6} {'Nc':>6} {'radius':>10} {'bandwidth':>11}")
    for n_p, n_c in pairs:
        (row,) = stability_search(model, [n_c], [n_p], rho)
        bw = f"{row.bandwidth_hz:9.1f} Hz" if row.stable else "          -"
        print(f"{n_p:6d} {n_c:6d} {row.spectral_radius:10.5f} {bw}")


def main():
    scan(2, [(60, 50), (100, 10), (200, 50), (400, 100)])
    scan(3, [(100, 50), (200, 150), (400, 350), (600, 550), (800, 750), (1000, 950), (1200, 1150)])


if __name__ == "__main__":
    main()
