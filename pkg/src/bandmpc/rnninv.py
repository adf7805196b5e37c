"""Recurrent-network inversion model and its double-rate executor.

The network is the single-layer recurrent state space

    y[k]   = W2 x[k] + B3
    x[k+1] = tanh(W1 x[k] + B2 + B1 u[k])

The output uses the state *before* the update. A model trained at ``fs`` can
run at ``2 fs`` by keeping two hidden states and alternating between them
(:class:`DoubleRateExecutor`): even samples drive one lane, odd samples the
other, and the lanes never interact.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Tuple

import numpy as np


class WeightFileError(ValueError):
    """Raised for weight files that violate the schema."""


def _finite(name: str, arr: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(arr)):
        bad = np.argwhere(~np.isfinite(arr))[0].tolist()
        raise WeightFileError(f"field {name!r} has a non-finite entry at index {bad}")
    return arr


@dataclass(frozen=True, eq=False)
class RnnInversionModel:
    """Weights of the recurrent inversion model.

    Attributes
    ----------
    W1 : (N, N) recurrent weights
    B1 : (N,) input weights
    B2 : (N,) hidden bias
    W2 : (N,) read-out weights
    B3 : float, read-out bias
    train_rate : float
        Sample rate of the training data in Hz.
    """

    W1: np.ndarray
    B1: np.ndarray
    B2: np.ndarray
    W2: np.ndarray
    B3: float
    train_rate: float

    def __post_init__(self):
        W1 = _finite("w1", np.array(self.W1, dtype=float))
        if W1.ndim != 2 or W1.shape[0] != W1.shape[1]:
            raise WeightFileError(f"field 'w1' must be square, got shape {W1.shape}")
        n = W1.shape[0]
        vecs = {}
        for name in ("B1", "B2", "W2"):
            v = _finite(name.lower(), np.array(getattr(self, name), dtype=float).reshape(-1))
            if v.shape != (n,):
                raise WeightFileError(
                    f"field {name.lower()!r} has length {v.size}, expected N={n} from 'w1'"
                )
            v.setflags(write=False)
            vecs[name] = v
        b3 = float(self.B3)
        if not np.isfinite(b3):
            raise WeightFileError("field 'b3' is not finite")
        if not (np.isfinite(self.train_rate) and self.train_rate > 0):
            raise WeightFileError(f"field 'fs' must be a positive rate, got {self.train_rate}")
        W1.setflags(write=False)
        object.__setattr__(self, "W1", W1)
        for name, v in vecs.items():
            object.__setattr__(self, name, v)
        object.__setattr__(self, "B3", b3)
        object.__setattr__(self, "train_rate", float(self.train_rate))

    @property
    def n(self) -> int:
        return self.W1.shape[0]

    @property
    def double_rate(self) -> float:
        return 2.0 * self.train_rate

    def zero_state(self) -> np.ndarray:
        return np.zeros(self.n)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "w1": self.W1.tolist(),
            "b1": self.B1.tolist(),
            "b2": self.B2.tolist(),
            "w2": self.W2.tolist(),
            "b3": self.B3,
            "fs": self.train_rate,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RnnInversionModel":
        required = ("n", "w1", "b1", "b2", "w2", "b3", "fs")
        missing = [k for k in required if k not in data]
        if missing:
            raise WeightFileError(f"weight record missing fields: {missing}")
        model = cls(data["w1"], data["b1"], data["b2"], data["w2"], data["b3"], data["fs"])
        if int(data["n"]) != model.n:
            raise WeightFileError(f"field 'n'={data['n']} disagrees with 'w1' size {model.n}")
        return model


def step(model: RnnInversionModel, x: np.ndarray, u: float) -> Tuple[np.ndarray, float]:
    """Advance one sample; returns ``(new_state, y)``.

    ``y`` is read from ``x`` before the update.
    """
    if not np.isfinite(u):
        raise ValueError(f"non-finite input {u!r}")
    y = float(model.W2 @ x) + model.B3
    x_new = np.tanh(model.W1 @ x + model.B2 + model.B1 * u)
    return x_new, y


def run(model: RnnInversionModel, inputs: Iterable[float], x0: Optional[np.ndarray] = None) -> np.ndarray:
    """Single-rate run over a sequence, zero initial state by default."""
    x = model.zero_state() if x0 is None else np.array(x0, dtype=float)
    out = []
    for u in inputs:
        x, y = step(model, x, u)
        out.append(y)
    return np.asarray(out)


@dataclass
class DoubleRateState:
    """Two independent hidden states and the index of the next sample."""

    lanes: list = field(default_factory=list)
    count: int = 0

    @classmethod
    def zeros(cls, n: int) -> "DoubleRateState":
        return cls([np.zeros(n), np.zeros(n)], 0)


def step_double_rate(
    model: RnnInversionModel, state: DoubleRateState, u: float
) -> Tuple[DoubleRateState, float]:
    """Advance the interleaved executor by one sample at ``2 * train_rate``."""
    lane = state.count % 2
    new_x, y = step(model, state.lanes[lane], u)
    lanes = list(state.lanes)
    lanes[lane] = new_x
    return DoubleRateState(lanes, state.count + 1), y


def run_double_rate(model: RnnInversionModel, inputs: Iterable[float]) -> np.ndarray:
    state = DoubleRateState.zeros(model.n)
    out = []
    for u in inputs:
        state, y = step_double_rate(model, state, u)
        out.append(y)
    return np.asarray(out)


class DoubleRateExecutor:
    """Mutable convenience wrapper used inside control loops."""

    def __init__(self, model: RnnInversionModel):
        self.model = model
        self.state = DoubleRateState.zeros(model.n)

    @property
    def rate(self) -> float:
        return self.model.double_rate

    def reset(self) -> None:
        self.state = DoubleRateState.zeros(self.model.n)

    def __call__(self, u: float) -> float:
        self.state, y = step_double_rate(self.model, self.state, u)
        return y


class IdentityInverse:
    """Pass-through stand-in used when the plant is already linear."""

    rate = None

    def reset(self) -> None:
        pass

    def __call__(self, u: float) -> float:
        return float(u)


def save_weights(model: RnnInversionModel, path) -> None:
    Path(path).write_text(json.dumps(model.to_dict(), indent=1))


def load_weights(path) -> RnnInversionModel:
    """Read and validate a JSON weight file."""
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise WeightFileError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise WeightFileError(f"{path}: top level must be an object")
    return RnnInversionModel.from_dict(data)


def random_model(n: int, rng: np.random.Generator, train_rate: float = 10000.0, scale: float = 0.9) -> RnnInversionModel:
    """Random weights with ``||W1||_2 = scale``; useful for tests and demos."""
    W1 = rng.standard_normal((n, n))
    W1 *= scale / np.linalg.norm(W1, 2)
    return RnnInversionModel(
        W1,
        rng.standard_normal(n),
        0.1 * rng.standard_normal(n),
        rng.standard_normal(n),
        float(rng.standard_normal()),
        train_rate,
    )
