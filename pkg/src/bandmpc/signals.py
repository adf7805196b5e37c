"""Reference trajectories and spectral tracking-error metrics."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Uniformly sampled scalar signal (position units, e.g. um)."""

    samples: np.ndarray
    fs: float
    # fundamental period in seconds when the signal is periodic
    period: Optional[float] = None

    @property
    def sample_rate(self) -> float:
        """Alias of ``fs`` in Hz."""
        return self.fs

    def __post_init__(self):
        s = np.array(self.samples, dtype=float).reshape(-1)
        if s.size == 0:
            raise ValueError("trajectory is empty")
        if not np.all(np.isfinite(s)):
            raise ValueError("trajectory has non-finite samples")
        if not self.fs > 0:
            raise ValueError(f"sample rate must be positive, got {self.fs}")
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)
        object.__setattr__(self, "fs", float(self.fs))

    def __len__(self) -> int:
        return self.samples.size

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.samples.size) / self.fs

    @property
    def duration(self) -> float:
        return self.samples.size / self.fs

    def with_samples(self, samples) -> "Trajectory":
        return Trajectory(samples, self.fs, self.period)


# amplitude, frequency (Hz), phase (rad) of the multi-tone test trajectory
GAMMA_TONES = (
    (0.35, 4.2, -4.2 * math.pi),
    (0.6, 10.2, -10.2 * math.pi),
    (-0.5, 62.1, -2.1 * math.pi),
    (0.21, 127.0, -1.2 * math.pi),
    (0.33, 183.0, -1.3 * math.pi),
)
GAMMA_SCALE = 1.4
GAMMA_OFFSET = 1.4
# common period of all tone frequencies (gcd of 4.2, 10.2, 62.1, 127, 183 is 0.1 Hz)
GAMMA_PERIOD = 10.0


def gamma_value(t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    total = np.zeros_like(t)
    for amp, freq, phase in GAMMA_TONES:
        total = total + amp * np.sin(2 * np.pi * freq * t + phase)
    return total / GAMMA_SCALE + GAMMA_OFFSET


def gamma_trajectory(duration: float, fs: float) -> Trajectory:
    """Five-tone trajectory sampled at ``t = k / fs`` for ``duration`` s."""
    if not duration > 0:
        raise ValueError(f"duration must be positive, got {duration}")
    n = int(round(duration * fs))
    return Trajectory(gamma_value(np.arange(n) / fs), fs, GAMMA_PERIOD)


def sine_trajectory(freq: float, amplitude: float, offset: float, duration: float, fs: float) -> Trajectory:
    """``offset + amplitude * sin(2 pi freq t)``."""
    if not 0 < freq < fs / 2:
        raise ValueError(f"frequency {freq} Hz must lie in (0, {fs / 2}) Hz")
    if not duration > 0:
        raise ValueError(f"duration must be positive, got {duration}")
    n = int(round(duration * fs))
    t = np.arange(n) / fs
    return Trajectory(offset + amplitude * np.sin(2 * np.pi * freq * t), fs, 1.0 / freq)


def constant_trajectory(value: float, duration: float, fs: float) -> Trajectory:
    return Trajectory(np.full(int(round(duration * fs)), float(value)), fs, None)


@dataclass(frozen=True)
class ErrorMetrics:
    """Relative spectral errors in percent."""

    e_rms: float
    e_max: float

    def to_dict(self) -> dict:
        return {"e_rms_percent": self.e_rms, "e_max_percent": self.e_max}


def tracking_errors(reference: Trajectory, output: Trajectory) -> ErrorMetrics:
    """Relative 2-norm and infinity-norm of ``DFT(r) - DFT(y)``.

    Both norms are taken over the full two-sided rectangular-window DFT.
    """
    if len(reference) != len(output):
        raise ValueError(f"length mismatch: {len(reference)} vs {len(output)}")
    if not math.isclose(reference.fs, output.fs):
        raise ValueError(f"rate mismatch: {reference.fs} vs {output.fs}")
    R = np.fft.fft(reference.samples)
    Y = np.fft.fft(output.samples)
    r2 = np.linalg.norm(R)
    rinf = np.max(np.abs(R))
    if r2 == 0:
        raise ValueError("reference has zero norm")
    D = R - Y
    return ErrorMetrics(100 * float(np.linalg.norm(D) / r2), 100 * float(np.max(np.abs(D)) / rinf))


def periodic_tail(traj: Trajectory, settle: float = 0.0) -> slice:
    """Index range covering a whole number of periods at the end of ``traj``.

    Skips at least ``settle`` seconds at the start. When a period is not a
    whole number of samples, the period count (at least half of those that
    fit) whose length is closest to an integer is used, which keeps spectral
    leakage small. Non-periodic signals get everything after ``settle``.
    """
    n = len(traj)
    start = int(math.ceil(settle * traj.fs))
    if start >= n:
        raise ValueError("settling window covers the whole trajectory")
    if traj.period is None:
        return slice(start, n)
    per = traj.period * traj.fs
    count = int((n - start + 1e-9) // per)
    if count < 1:
        raise ValueError("trajectory holds less than one period after settling")
    counts = np.arange(max(1, count // 2), count + 1)
    residue = np.abs(counts * per - np.round(counts * per))
    best = counts[residue <= residue.min() + 1e-9].max()
    length = int(round(best * per))
    return slice(n - length, n)


def write_csv(traj: Trajectory, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["time_s", "value"])
        for t, v in zip(traj.times, traj.samples):
            w.writerow([f"{t:.9g}", f"{v:.17g}"])


def read_csv(path) -> Trajectory:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[1] != 2 or data.shape[0] < 2:
        raise ValueError(f"{path}: expected two columns (time_s, value) and at least two rows")
    dt = np.diff(data[:, 0])
    fs = 1.0 / float(np.mean(dt))
    return Trajectory(data[:, 1], fs)
