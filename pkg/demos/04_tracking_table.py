"""Tracking errors with and without the band-split composition.

Runs the simulated stand-in actuator (resonance, hysteresis, creep and
noise) behind the shipped inversion network for three sinusoids and the
five-tone trajectory. Absolute numbers describe the stand-in only; the
point is the comparison between the two controllers. At 11 Hz both sit
near the noise floor and the plain loop edges ahead; from 103 Hz up the
composed loop roughly halves the error.
"""
from bandmpc import config as cfgmod
from bandmpc.experiment import run_tracking

CASES = [
    ("11 Hz", ['reference.type="sine"', "reference.freq=11", "reference.duration=1.2"]),
    ("103 Hz", ['reference.type="sine"', "reference.freq=103"]),
    ("201 Hz", ['reference.type="sine"', "reference.freq=201"]),
    ("five-tone", ['reference.type="gamma"', "reference.duration=10.2"]),
]


def main():
    print(f"{'trajectory':>10} | {'GeG E_rms':>9} {'E_max':>7} | {'G E_rms':>8} {'E_max':>7}")
    for name, overrides in CASES:
        row = []
        for comp in ("true", "false"):
            m = run_tracking(cfgmod.load(None, overrides + [f"use_composition={comp}"])).metrics
            row += [m.e_rms, m.e_max]
        print(f"{name:>10} | {row[0]:8.3f}% {row[1]:6.3f}% | {row[2]:7.3f}% {row[3]:6.3f}%")


if __name__ == "__main__":
    main()
