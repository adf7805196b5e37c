"""Discrete-time linear state-space models.

Everything else in the package is built on :class:`LinearStateSpace`, a
strictly proper model

    x[k+1] = A x[k] + B u[k] + delta[k]
    y[k]   = C x[k]

with an optional additive state disturbance ``delta`` supplied at simulation
time. There is no feedthrough term: a model's output never depends on the
input of the same sample.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg


class DimensionError(ValueError):
    """Raised when arrays do not have mutually consistent shapes."""


def _as_matrix(value, name: str) -> np.ndarray:
    arr = np.array(value, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be a 2-D matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class LinearStateSpace:
    """Discrete-time model ``(A, B, C)`` sampled at ``fs`` Hz.

    Arrays are copied on construction and made read-only, so instances can
    be shared freely between threads.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    fs: float

    def __post_init__(self):
        A = _as_matrix(self.A, "A")
        B = _as_matrix(self.B, "B")
        C = _as_matrix(self.C, "C")
        n = A.shape[0]
        if A.shape != (n, n):
            raise DimensionError(f"A must be square, got shape {A.shape}")
        if B.shape[0] != n:
            raise DimensionError(f"B has {B.shape[0]} rows but A is {n}x{n}")
        if C.shape[1] != n:
            raise DimensionError(f"C has {C.shape[1]} columns but A is {n}x{n}")
        if not (np.isfinite(self.fs) and self.fs > 0):
            raise ValueError(f"sample rate must be positive, got {self.fs}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "fs", float(self.fs))

    @property
    def sample_rate(self) -> float:
        """Alias of ``fs`` in Hz."""
        return self.fs

    @property
    def n_states(self) -> int:
        return self.A.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.B.shape[1]

    @property
    def n_outputs(self) -> int:
        return self.C.shape[0]

    @property
    def is_siso(self) -> bool:
        return self.n_inputs == 1 and self.n_outputs == 1

    def to_dict(self) -> dict:
        return {
            "a": self.A.tolist(),
            "b": self.B.tolist(),
            "c": self.C.tolist(),
            "fs": self.fs,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "LinearStateSpace":
        missing = {"a", "b", "c", "fs"} - set(data)
        if missing:
            raise ValueError(f"state-space record missing fields: {sorted(missing)}")
        return cls(data["a"], data["b"], data["c"], data["fs"])


@dataclass(frozen=True)
class FrequencyResponse:
    """Complex gains of a SISO model on a grid of frequencies in Hz."""

    frequencies: np.ndarray
    values: np.ndarray

    @property
    def magnitude(self) -> np.ndarray:
        return np.abs(self.values)

    @property
    def magnitude_db(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return 20.0 * np.log10(np.abs(self.values))

    @property
    def phase(self) -> np.ndarray:
        return np.angle(self.values)


def simulate(
    model: LinearStateSpace,
    inputs,
    x0=None,
    disturbances=None,
) -> np.ndarray:
    """Run the model over an input sequence.

    Parameters
    ----------
    model : LinearStateSpace
    inputs : array_like, shape (N,) or (N, m)
        One input vector per sample. A 1-D array is accepted for
        single-input models.
    x0 : array_like, shape (n,), optional
        Initial state, zero by default.
    disturbances : array_like, shape (N, n), optional
        State disturbance ``delta[k]`` added at each update.

    Returns
    -------
    ndarray, shape (N, p)
        ``y[k] = C x[k]``; the first row is ``C x0``.
    """
    u = np.asarray(inputs, dtype=float)
    if u.ndim == 1:
        u = u.reshape(-1, 1)
    if u.ndim != 2 or u.shape[1] != model.n_inputs:
        raise DimensionError(
            f"inputs must have {model.n_inputs} column(s), got shape {np.shape(inputs)}"
        )
    n = model.n_states
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float).reshape(-1)
    if x.shape != (n,):
        raise DimensionError(f"x0 must have length {n}, got {x.shape}")
    if disturbances is not None:
        d = np.asarray(disturbances, dtype=float)
        if d.shape != (u.shape[0], n):
            raise DimensionError(
                f"disturbances must have shape {(u.shape[0], n)}, got {d.shape}"
            )
    else:
        d = None

    A, C = model.A, model.C
    Bu = u @ model.B.T
    if d is not None:
        Bu = Bu + d
    states = np.empty((u.shape[0], n))
    for k in range(u.shape[0]):
        states[k] = x
        x = A @ x + Bu[k]
    return states @ C.T


def frequency_response(model: LinearStateSpace, frequencies) -> FrequencyResponse:
    """Evaluate ``C (zI - A)^{-1} B`` at ``z = exp(j 2 pi f / fs)``.

    A pole exactly on the evaluation point gives an infinite gain instead
    of an exception.
    """
    if not model.is_siso:
        raise DimensionError("frequency response is only defined for SISO models")
    f = np.atleast_1d(np.asarray(frequencies, dtype=float))
    nyq = model.fs / 2
    if np.any(f < 0) or np.any(f > nyq * (1 + 1e-12)):
        raise ValueError(f"frequencies must lie in [0, {nyq}] Hz")
    n = model.n_states
    eye = np.eye(n)
    b = model.B[:, 0].astype(complex)
    c = model.C[0]
    values = np.empty(f.shape, dtype=complex)
    for i, fi in enumerate(f):
        z = np.exp(2j * np.pi * fi / model.fs)
        try:
            values[i] = c @ np.linalg.solve(z * eye - model.A, b)
        except np.linalg.LinAlgError:
            values[i] = complex(np.inf, 0.0)
    return FrequencyResponse(f, values)


def dc_gain(model: LinearStateSpace) -> float:
    return float(frequency_response(model, [0.0]).values[0].real)


def eigenvalues(A) -> np.ndarray:
    """All eigenvalues of a real square matrix, with multiplicity.

    LAPACK's Hessenberg reduction followed by shifted QR iteration.
    """
    arr = np.asarray(A, dtype=float)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise DimensionError(f"eigenvalues need a square matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("matrix contains non-finite entries")
    return scipy.linalg.eigvals(arr, check_finite=False)


def spectral_radius(A) -> float:
    return float(np.max(np.abs(eigenvalues(A))))


def is_stable(model: LinearStateSpace) -> bool:
    return spectral_radius(model.A) < 1.0


def _check_rates(a: LinearStateSpace, b: LinearStateSpace) -> None:
    if not np.isclose(a.fs, b.fs, rtol=1e-12, atol=0.0):
        raise ValueError(f"sample rates differ: {a.fs} Hz vs {b.fs} Hz")


def series(first: LinearStateSpace, second: LinearStateSpace) -> LinearStateSpace:
    """``first`` followed by ``second``; transfer function ``second * first``.

    The stacked state is ``[x_first; x_second]``.
    """
    _check_rates(first, second)
    if first.n_outputs != second.n_inputs:
        raise DimensionError(
            f"cannot feed {first.n_outputs} output(s) into {second.n_inputs} input(s)"
        )
    n1, n2 = first.n_states, second.n_states
    A = np.block(
        [
            [first.A, np.zeros((n1, n2))],
            [second.B @ first.C, second.A],
        ]
    )
    B = np.vstack([first.B, np.zeros((n2, first.n_inputs))])
    C = np.hstack([np.zeros((second.n_outputs, n1)), second.C])
    return LinearStateSpace(A, B, C, first.fs)


def parallel(a: LinearStateSpace, b: LinearStateSpace) -> LinearStateSpace:
    """Shared input, summed outputs; transfer function ``a + b``."""
    _check_rates(a, b)
    if a.n_inputs != b.n_inputs or a.n_outputs != b.n_outputs:
        raise DimensionError("parallel connection needs identical I/O dimensions")
    A = scipy.linalg.block_diag(a.A, b.A)
    B = np.vstack([a.B, b.B])
    C = np.hstack([a.C, b.C])
    return LinearStateSpace(A, B, C, a.fs)


def scale(model: LinearStateSpace, gain: float) -> LinearStateSpace:
    return LinearStateSpace(model.A, model.B, gain * model.C, model.fs)


def delay(samples: int, fs: float) -> LinearStateSpace:
    """Pure SISO delay ``z^-samples`` (at least one sample)."""
    if samples < 1:
        raise ValueError("a strictly proper delay needs at least one sample")
    A = np.diag(np.ones(samples - 1), -1) if samples > 1 else np.zeros((1, 1))
    B = np.zeros((samples, 1))
    B[0, 0] = 1.0
    C = np.zeros((1, samples))
    C[0, -1] = 1.0
    return LinearStateSpace(A, B, C, fs)


def from_proper(A, B, C, D, fs: float) -> LinearStateSpace:
    """Strictly proper realization of ``z^-1 (C (zI-A)^-1 B + D)``.

    One extra state holds the proper output, so the result lags the
    original system by exactly one sample. Its magnitude response is
    unchanged.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.asarray(B, dtype=float).reshape(A.shape[0], -1)
    C = np.asarray(C, dtype=float).reshape(-1, A.shape[0])
    D = np.asarray(D, dtype=float).reshape(C.shape[0], B.shape[1])
    n, m, p = A.shape[0], B.shape[1], C.shape[0]
    Aa = np.block([[A, np.zeros((n, p))], [C, np.zeros((p, p))]])
    Ba = np.vstack([B, D])
    Ca = np.hstack([np.zeros((p, n)), np.eye(p)])
    return LinearStateSpace(Aa, Ba, Ca, fs)


class Runner:
    """Stateful single-sample stepping of a SISO model.

    ``output`` is the current ``C x``. ``advance(u)`` applies ``u`` and
    returns the new output, which is the response of the model with the
    trailing one-sample delay removed (for models built with
    :func:`from_proper`, exactly the proper system's output).
    """

    def __init__(self, model: LinearStateSpace, x0=None):
        self.model = model
        self.x = np.zeros(model.n_states) if x0 is None else np.array(x0, dtype=float)
        self._b = model.B[:, 0]
        self._c = model.C[0]

    @property
    def output(self) -> float:
        return float(self._c @ self.x)

    def advance(self, u: float) -> float:
        self.x = self.model.A @ self.x + self._b * u
        return float(self._c @ self.x)


def impulse_response(model: LinearStateSpace, length: int) -> np.ndarray:
    u = np.zeros((length, model.n_inputs))
    u[0] = 1.0
    return simulate(model, u)


def step_response(model: LinearStateSpace, length: int) -> np.ndarray:
    return simulate(model, np.ones((length, model.n_inputs)))


def settling_horizon(A, tol: float = 1e-6) -> int:
    """Samples until ``rho(A)^k`` drops below ``tol`` (for ``rho(A) < 1``)."""
    rho = spectral_radius(A)
    if rho >= 1.0:
        raise ValueError(f"matrix is not Schur stable (spectral radius {rho:.6g})")
    if rho == 0.0:
        return np.asarray(A).shape[0] + 1
    return int(np.ceil(np.log(tol) / np.log(rho))) + np.asarray(A).shape[0]


def stack_inputs(values: Sequence[float]) -> np.ndarray:
    return np.asarray(values, dtype=float).reshape(-1, 1)
