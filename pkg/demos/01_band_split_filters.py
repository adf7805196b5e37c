"""Design the band-split filter pair and look at how the bands meet.

The low-pass hands over to the band-pass between 26 and 32 Hz. Near the
crossover the two passbands are almost in antiphase, so their complex sum
dips even though each band on its own passes the signal. The composed
control model carries this dip exactly, so it costs nothing in control;
it only matters when reading the filters as a signal splitter.
"""
import numpy as np

from bandmpc.filters import BandSplitSpec, FilterSpec, band_coverage_db, design_band_split, design_butterworth
from bandmpc.linsys import frequency_response

FS = 20000.0


def db(h):
    return 20 * np.log10(np.abs(h))


def main():
    freqs = np.array([1, 10, 20, 26, 28.3, 32, 50, 100, 201, 500, 800, 2000], dtype=float)
    for order in (2, 3):
        split = BandSplitSpec(32.0, 26.0, 800.0, order, FS)
        lpf, bpf = design_band_split(split)
        hl = frequency_response(lpf, freqs).values
        hb = frequency_response(bpf, freqs).values
        cover = band_coverage_db(split, freqs)
        print(f"\norder {order}: LPF {lpf.n_states} states, BPF {bpf.n_states} states")
        print(f"{'f [Hz]':>8} {'LPF dB':>8} {'BPF dB':>8} {'sum dB':>8} {'max dB':>8}")
        for row in zip(freqs, db(hl), db(hb), db(hl + hb), cover):
            print("{:8.1f} {:8.2f} {:8.2f} {:8.2f} {:8.2f}".format(*row))

    # how much of a 201 Hz component leaks through the low band
    lpf = design_butterworth(FilterSpec("lowpass", 2, (32.0,), FS))
    leak = abs(frequency_response(lpf, [201.0]).values[0])
    print(f"\n32 Hz LPF at 201 Hz: {20 * np.log10(leak):.2f} dB ({100 * leak:.1f} % amplitude)")


if __name__ == "__main__":
    main()
