"""Digital Butterworth filters realized as strictly proper state-space models.

Designs come from the analog Butterworth prototype discretized by the
bilinear transform with prewarping (``scipy.signal.butter``), returned as
second-order sections and realized as a biquad cascade. The band-pass is a
true LP-to-BP transformation of the prototype, not an LP/HP cascade.

Because :class:`~bandmpc.linsys.LinearStateSpace` has no feedthrough term,
each filter is realized with one extra output state, i.e. as
``z^-1 H(z)``. The magnitude response is exactly that of ``H``; the phase
carries one extra sample of delay. The undelayed output of ``H`` is still
available during simulation through :meth:`bandmpc.linsys.Runner.advance`.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import numpy as np
import scipy.signal

from .linsys import LinearStateSpace, frequency_response, from_proper, parallel

KINDS = ("lowpass", "highpass", "bandpass")


@dataclass(frozen=True)
class FilterSpec:
    kind: str
    order: int
    cutoffs: Tuple[float, ...]
    fs: float

    @property
    def sample_rate(self) -> float:
        """Alias of ``fs`` in Hz."""
        return self.fs

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown filter kind {self.kind!r}; expected one of {KINDS}")
        if int(self.order) != self.order or self.order < 1:
            raise ValueError(f"filter order must be a positive integer, got {self.order}")
        if not self.fs > 0:
            raise ValueError(f"sample rate must be positive, got {self.fs}")
        cut = tuple(float(c) for c in np.atleast_1d(self.cutoffs))
        need = 2 if self.kind == "bandpass" else 1
        if len(cut) != need:
            raise ValueError(f"{self.kind} needs {need} cutoff(s), got {len(cut)}")
        nyq = self.fs / 2
        for c in cut:
            if not 0 < c < nyq:
                raise ValueError(f"cutoff {c} Hz must lie strictly inside (0, {nyq}) Hz")
        if need == 2 and not cut[0] < cut[1]:
            raise ValueError(f"band-pass cutoffs must be increasing, got {cut}")
        object.__setattr__(self, "order", int(self.order))
        object.__setattr__(self, "cutoffs", cut)
        object.__setattr__(self, "fs", float(self.fs))

    def to_dict(self) -> dict:
        return {"kind": self.kind, "order": self.order, "cutoffs": list(self.cutoffs), "fs": self.fs}

    @classmethod
    def from_dict(cls, data: dict) -> "FilterSpec":
        return cls(data["kind"], data["order"], tuple(data["cutoffs"]), data["fs"])


@dataclass(frozen=True)
class BandSplitSpec:
    """Overlapping low/high band partition.

    The low band is ``[0, f_l]`` (low-pass), the high band ``[f_h, f_c1]``
    (band-pass). ``f_h <= f_l`` so that the two bands overlap.
    """

    f_l: float
    f_h: float
    f_c1: float
    order: int = 2
    fs: float = 20000.0

    def __post_init__(self):
        if self.f_h > self.f_l:
            raise ValueError(
                f"coverage gap: band-pass lower edge f_h={self.f_h} Hz is above "
                f"the low-pass cutoff f_l={self.f_l} Hz"
            )
        if not self.f_c1 > self.f_l:
            raise ValueError(f"f_c1={self.f_c1} Hz must exceed f_l={self.f_l} Hz")

    def lowpass_spec(self) -> FilterSpec:
        return FilterSpec("lowpass", self.order, (self.f_l,), self.fs)

    def bandpass_spec(self) -> FilterSpec:
        return FilterSpec("bandpass", self.order, (self.f_h, self.f_c1), self.fs)

    def to_dict(self) -> dict:
        return {"f_l": self.f_l, "f_h": self.f_h, "f_c1": self.f_c1, "order": self.order, "fs": self.fs}

    @classmethod
    def from_dict(cls, data: dict) -> "BandSplitSpec":
        return cls(data["f_l"], data["f_h"], data["f_c1"], data.get("order", 2), data.get("fs", 20000.0))


def butterworth_sos(spec: FilterSpec) -> np.ndarray:
    """Second-order sections of the discretized Butterworth design."""
    btype = {"lowpass": "lowpass", "highpass": "highpass", "bandpass": "bandpass"}[spec.kind]
    wn = spec.cutoffs[0] if len(spec.cutoffs) == 1 else list(spec.cutoffs)
    z, p, k = scipy.signal.butter(spec.order, wn, btype=btype, fs=spec.fs, output="zpk")
    # minimal pairing keeps odd orders free of a spurious pole at z = 0
    return scipy.signal.zpk2sos(z, p, k, pairing="minimal")


def _sos_to_abcd(sos: np.ndarray):
    """Series connection of biquads, keeping each section's feedthrough."""
    A = B = C = D = None
    for section in sos:
        num, den = section[:3], section[3:]
        if num[0] == 0.0 and den[0] == 0.0:
            # first-order section, padded to length 3 with a leading zero
            num, den = num[1:], den[1:]
        a2, b2, c2, d2 = scipy.signal.tf2ss(num, den)
        if A is None:
            A, B, C, D = a2, b2, c2, d2
            continue
        n1, n2 = A.shape[0], a2.shape[0]
        A = np.block([[A, np.zeros((n1, n2))], [b2 @ C, a2]])
        B = np.vstack([B, b2 @ D])
        C = np.hstack([d2 @ C, c2])
        D = d2 @ D
    return A, B, C, D


def design_butterworth(spec: FilterSpec) -> LinearStateSpace:
    """Strictly proper state-space realization of a Butterworth filter.

    State dimension is ``order + 1`` for low/high-pass and
    ``2 * order + 1`` for band-pass (the extra state is the output delay).
    """
    sos = butterworth_sos(spec)
    A, B, C, D = _sos_to_abcd(sos)
    return from_proper(A, B, C, D, spec.fs)


def design_band_split(spec: BandSplitSpec) -> Tuple[LinearStateSpace, LinearStateSpace]:
    """Return ``(lpf, bpf)`` for the band split."""
    return design_butterworth(spec.lowpass_spec()), design_butterworth(spec.bandpass_spec())


def band_coverage_db(spec: BandSplitSpec, frequencies) -> np.ndarray:
    """Gain in dB of the stronger of the two bands at each frequency.

    This is the per-frequency pass condition of an overlapping split. The
    complex sum :func:`band_split_sum` differs from it near the crossover,
    where the two passbands are close to antiphase.
    """
    lpf, bpf = design_band_split(spec)
    hl = np.abs(frequency_response(lpf, frequencies).values)
    hb = np.abs(frequency_response(bpf, frequencies).values)
    return 20 * np.log10(np.maximum(hl, hb))


def band_split_sum(spec: BandSplitSpec) -> LinearStateSpace:
    lpf, bpf = design_band_split(spec)
    return parallel(lpf, bpf)


def prototype_magnitude(spec: FilterSpec, frequencies) -> np.ndarray:
    """Analog Butterworth magnitude after bilinear prewarping.

    Digital frequency ``f`` maps to analog ``tan(pi f / fs)``; the result is
    what the discrete design should equal exactly.
    """
    f = np.asarray(frequencies, dtype=float)
    w = np.tan(np.pi * f / spec.fs)
    n = spec.order
    if spec.kind == "lowpass":
        x = w / np.tan(np.pi * spec.cutoffs[0] / spec.fs)
    elif spec.kind == "highpass":
        with np.errstate(divide="ignore"):
            x = np.tan(np.pi * spec.cutoffs[0] / spec.fs) / w
    else:
        w1, w2 = (np.tan(np.pi * c / spec.fs) for c in spec.cutoffs)
        with np.errstate(divide="ignore", invalid="ignore"):
            x = np.abs(w * w - w1 * w2) / (w * (w2 - w1))
    with np.errstate(over="ignore"):
        return 1.0 / np.sqrt(1.0 + x ** (2 * n))
