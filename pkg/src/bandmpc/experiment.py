"""Closed-loop tracking runs on the simulated plant.

Signal path per sample ``k``:

1. measure ``y_k``;
2. the controller updates its model error estimate and plans ``u_{k+1}``;
3. ``u_k`` goes through the input shaping filter, then through the
   inversion network, then into the plant. With composition the shaping
   filter is the band-split pair; without it, a low-pass at ``f_c1`` that
   keeps out content the network never saw in training.

The physical filters use their undelayed outputs; the one-sample delay of
their strictly proper realizations exists only inside the control model.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import config as cfgmod
from .composer import ComposedModel, composed_for_control, plain_for_control
from .filters import FilterSpec, design_band_split, design_butterworth
from .linsys import Runner
from .mpc import MpcController, UnstableDesignError, design, pad_reference
from .plantsim import PlantModel, PlantSimulator, load_plant, make_default_plant
from .rnninv import DoubleRateExecutor, IdentityInverse, load_weights
from .signals import (
    ErrorMetrics,
    Trajectory,
    constant_trajectory,
    gamma_trajectory,
    periodic_tail,
    sine_trajectory,
    tracking_errors,
)


@dataclass
class TrackingRun:
    reference: Trajectory
    output: np.ndarray
    control: np.ndarray
    metrics: ErrorMetrics
    window: slice
    spectral_radius: float

    def metrics_dict(self) -> dict:
        d = self.metrics.to_dict()
        d["spectral_radius"] = self.spectral_radius
        d["window_samples"] = [self.window.start, self.window.stop]
        return d


def prefilter(cfg: cfgmod.ExperimentConfig):
    """Low-pass at ``f_c1`` used in front of the network without composition."""
    split = cfg.band_split_spec()
    return design_butterworth(FilterSpec("lowpass", split.order, (split.f_c1,), split.fs))


def control_model(cfg: cfgmod.ExperimentConfig) -> ComposedModel:
    """Band-split model, or the pre-filtered LME when composition is off.

    Both carry ``model_delay`` samples of input delay and both include the
    shaping filters that sit in the physical signal path.
    """
    lme = cfg.lme_model()
    if cfg.use_composition:
        return composed_for_control(lme, cfg.band_split_spec(), input_delay=cfg.model_delay)
    return plain_for_control(lme, input_delay=cfg.model_delay, prefilter=prefilter(cfg))


def controller_design(cfg: cfgmod.ExperimentConfig):
    """``(model, gains, closed_loop)`` for the configured controller."""
    model = control_model(cfg)
    _, gains, cl = design(model.state_space, cfg.mpc_config())
    return model, gains, cl


def build_plant(cfg: cfgmod.ExperimentConfig) -> PlantModel:
    if cfg.plant == "default":
        return make_default_plant(cfg.fs)
    if cfg.plant == "linear":
        return make_default_plant(cfg.fs, nonlinear=False)
    return load_plant(cfg.resolve(cfg.plant), fs=cfg.fs)


def build_inverse(cfg: cfgmod.ExperimentConfig):
    if cfg.rnn == "identity":
        return IdentityInverse()
    path = cfgmod.default_weights_path() if cfg.rnn == "default" else cfg.resolve(cfg.rnn)
    model = load_weights(path)
    if not np.isclose(model.double_rate, cfg.fs):
        raise cfgmod.ConfigError(
            f"weights trained at {model.train_rate} Hz run at {model.double_rate} Hz, "
            f"but the loop runs at {cfg.fs} Hz"
        )
    return DoubleRateExecutor(model)


def build_reference(cfg: cfgmod.ExperimentConfig) -> Trajectory:
    r = cfg.reference
    if r.type == "sine":
        return sine_trajectory(r.freq, r.amplitude, r.offset, r.duration, cfg.fs)
    if r.type == "gamma":
        return gamma_trajectory(r.duration, cfg.fs)
    return constant_trajectory(r.offset, r.duration, cfg.fs)


class _Shaping:
    """Sum of the undelayed outputs of a set of filters."""

    def __init__(self, filters):
        self._runners = [Runner(f) for f in filters]

    def __call__(self, u: float) -> float:
        return sum(r.advance(u) for r in self._runners)


def input_shaping(cfg: cfgmod.ExperimentConfig) -> _Shaping:
    if cfg.use_composition:
        return _Shaping(design_band_split(cfg.band_split_spec()))
    return _Shaping([prefilter(cfg)])


def run_tracking(cfg: cfgmod.ExperimentConfig, require_stable: bool = True) -> TrackingRun:
    """Simulate the configured closed loop and score it."""
    model, gains, cl = controller_design(cfg)
    sr = cl.spectral_radius
    if require_stable and sr >= 1.0:
        raise UnstableDesignError(f"controller is unstable (spectral radius {sr:.6f})")
    ref = build_reference(cfg)
    plant = PlantSimulator(build_plant(cfg), seed=cfg.seed)
    inverse = build_inverse(cfg)
    shaping = input_shaping(cfg)
    ctrl = MpcController(model.state_space, gains, model.disturbance_map, cfg.estimate_delta)

    n_c = cfg.mpc.nc
    r = pad_reference(ref.samples, n_c)
    n = len(ref)
    y = np.empty(n)
    u = np.empty(n)
    for k in range(n):
        yk = plant.output
        y[k] = yk
        uk = ctrl.u
        u[k] = uk
        ctrl.update(yk, r[k + 1 : k + 1 + n_c])
        plant.step(inverse(shaping(uk)))
        if not np.isfinite(yk):
            raise FloatingPointError(f"non-finite plant output at sample {k}")

    window = periodic_tail(ref, cfg.reference.settle)
    metrics = tracking_errors(
        Trajectory(ref.samples[window], ref.fs), Trajectory(y[window], ref.fs)
    )
    return TrackingRun(ref, y, u, metrics, window, sr)


def write_trace(run: TrackingRun, path) -> None:
    t = run.reference.times
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t_s", "u_V", "y_um", "r_um"])
        for row in zip(t, run.control, run.output, run.reference.samples):
            w.writerow([f"{row[0]:.9g}"] + [f"{v:.17g}" for v in row[1:]])


def write_metrics(run: TrackingRun, path, extra: Optional[dict] = None) -> None:
    d = run.metrics_dict()
    if extra:
        d.update(extra)
    Path(path).write_text(json.dumps(d, indent=2, sort_keys=True) + "\n")
