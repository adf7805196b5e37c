"""Simulated piezo-actuator stand-in.

The plant is a strictly proper resonant linear part driven by the input
minus a rate-independent hysteresis term, plus a slow creep term and
measurement noise added to the output:

    h[k+1] = h[k] + alpha du - beta |du| h[k] - gamma du |h[k]|
    y[k]   = C x[k] + c[k] + noise[k]
    x[k+1] = A x[k] + B (u[k] - h[k+1])
    c[k+1] = a_c c[k] + (1 - a_c) g_c u[k]

with ``du = u[k] - u[k-1]``. None of these numbers describe a real device.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np
import scipy.signal

from .linsys import LinearStateSpace, from_proper


@dataclass(frozen=True)
class HysteresisParams:
    """Single-state differential hysteresis; bounded when ``beta >= |gamma|``."""

    alpha: float
    beta: float
    gamma: float

    def __post_init__(self):
        if self.beta < abs(self.gamma):
            raise ValueError(
                f"hysteresis needs beta >= |gamma| to stay bounded (beta={self.beta}, gamma={self.gamma})"
            )

    @property
    def bound(self) -> float:
        """Saturation level ``alpha / (beta + gamma)`` of ``|h|``."""
        return self.alpha / (self.beta + self.gamma) if self.beta + self.gamma > 0 else math.inf


@dataclass(frozen=True)
class CreepParams:
    """First-order lag with time constant ``tau`` seconds and gain ``gain``."""

    tau: float
    gain: float


@dataclass(frozen=True, eq=False)
class PlantModel:
    linear_part: LinearStateSpace
    hysteresis: Optional[HysteresisParams] = None
    creep: Optional[CreepParams] = None
    noise_std: float = 0.0

    def __post_init__(self):
        if not self.linear_part.is_siso:
            raise ValueError("plant linear part must be SISO")
        if self.noise_std < 0:
            raise ValueError("noise standard deviation must be non-negative")

    @property
    def fs(self) -> float:
        return self.linear_part.fs

    def linear_only(self) -> "PlantModel":
        return PlantModel(self.linear_part)

    def to_dict(self) -> dict:
        return {
            "linear_part": self.linear_part.to_dict(),
            "hysteresis": None if self.hysteresis is None else vars(self.hysteresis).copy(),
            "creep": None if self.creep is None else vars(self.creep).copy(),
            "noise_std": self.noise_std,
        }

    @classmethod
    def from_dict(cls, data: dict, fs: Optional[float] = None) -> "PlantModel":
        """Accepts an explicit ``linear_part`` or ``resonance_hz``/``damping``.

        The parametric form needs ``fs``, either in the record or as argument.
        """
        hyst = data.get("hysteresis")
        creep = data.get("creep")
        if "linear_part" in data:
            lin = LinearStateSpace.from_dict(data["linear_part"])
        elif "resonance_hz" in data:
            rate = data.get("fs", fs)
            if rate is None:
                raise ValueError("parametric plant record needs a sample rate")
            lin = resonant_linear_part(float(data["resonance_hz"]), float(data["damping"]), float(rate))
        else:
            raise ValueError("plant record needs 'linear_part' or 'resonance_hz' and 'damping'")
        return cls(
            lin,
            None if hyst is None else HysteresisParams(**hyst),
            None if creep is None else CreepParams(**creep),
            float(data.get("noise_std", 0.0)),
        )


def resonant_linear_part(f_r: float, zeta: float, fs: float) -> LinearStateSpace:
    """Unit-DC-gain second-order resonance, Tustin-discretized, one-sample delay."""
    w = 2 * np.pi * f_r
    b, a = scipy.signal.bilinear([w * w], [1.0, 2 * zeta * w, w * w], fs)
    A, B, C, D = scipy.signal.tf2ss(b, a)
    return from_proper(A, B, C, D, fs)


def default_plant_record() -> dict:
    path = resources.files("bandmpc") / "data" / "plant_default.json"
    return json.loads(path.read_text())


def make_default_plant(fs: float = 20000.0, nonlinear: bool = True) -> PlantModel:
    """The shipped stand-in plant built at ``fs``.

    ``nonlinear=False`` keeps only the linear part (hysteresis, creep and
    noise off).
    """
    plant = PlantModel.from_dict(default_plant_record(), fs=fs)
    return plant if nonlinear else plant.linear_only()


class PlantSimulator:
    """Stateful plant instance; one per simulation thread."""

    def __init__(self, plant: PlantModel, seed: Optional[int] = 0):
        self.plant = plant
        self.seed = seed
        lin = plant.linear_part
        self._A = lin.A
        self._b = lin.B[:, 0]
        self._c = lin.C[0]
        cr = plant.creep
        self._ac = 0.0 if cr is None else math.exp(-1.0 / (cr.tau * lin.fs))
        self.reset()

    def reset(self) -> None:
        self.x = np.zeros(self.plant.linear_part.n_states)
        self.h = 0.0
        self.c = 0.0
        self.u_prev = 0.0
        self._rng = np.random.default_rng(self.seed)
        self._noise = self._draw()

    def _draw(self) -> float:
        if self.plant.noise_std == 0:
            return 0.0
        return float(self._rng.normal(0.0, self.plant.noise_std))

    @property
    def output(self) -> float:
        """Measured position at the current sample."""
        return float(self._c @ self.x) + self.c + self._noise

    def step(self, u: float) -> float:
        """Apply ``u``; returns the measured output at the next sample."""
        if not math.isfinite(u):
            raise ValueError(f"non-finite plant input {u!r}")
        hp = self.plant.hysteresis
        if hp is not None:
            du = u - self.u_prev
            self.h += hp.alpha * du - hp.beta * abs(du) * self.h - hp.gamma * du * abs(self.h)
        self.u_prev = u
        self.x = self._A @ self.x + self._b * (u - self.h)
        cr = self.plant.creep
        if cr is not None:
            self.c = self._ac * self.c + (1 - self._ac) * cr.gain * u
        self._noise = self._draw()
        return self.output

    def __call__(self, u: float) -> float:
        return self.step(u)


def plant_step(sim: PlantSimulator, u: float) -> float:
    return sim.step(u)


def simulate_plant(plant: PlantModel, inputs, seed: Optional[int] = 0) -> np.ndarray:
    """Outputs ``y_0 .. y_{N-1}`` for inputs ``u_0 .. u_{N-1}``."""
    sim = PlantSimulator(plant, seed)
    out = np.empty(len(inputs))
    for k, u in enumerate(inputs):
        out[k] = sim.output
        sim.step(float(u))
    return out


def save_plant(plant: PlantModel, path) -> None:
    Path(path).write_text(json.dumps(plant.to_dict(), indent=1))


def load_plant(path, fs: Optional[float] = None) -> PlantModel:
    return PlantModel.from_dict(json.loads(Path(path).read_text()), fs=fs)
