"""Experiment configuration: one JSON document with dotted-path overrides."""
from __future__ import annotations

import copy
import json
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np

from .composer import DEFAULT_LME_A, DEFAULT_LME_B, DEFAULT_LME_C, DEFAULT_LME_ERROR_GAIN
from .filters import BandSplitSpec
from .linsys import LinearStateSpace
from .mpc import MpcConfig


class ConfigError(ValueError):
    """Invalid or unresolvable configuration."""


REFERENCE_TYPES = ("sine", "gamma", "constant")
EXPERIMENT_RHO = 3.0


@dataclass
class LmeSection:
    a: List[List[float]] = field(default_factory=lambda: [list(r) for r in DEFAULT_LME_A])
    b: List[float] = field(default_factory=lambda: list(DEFAULT_LME_B))
    error_gain: List[float] = field(default_factory=lambda: list(DEFAULT_LME_ERROR_GAIN))
    c: List[float] = field(default_factory=lambda: list(DEFAULT_LME_C))


@dataclass
class BandSplitSection:
    f_l: float = 32.0
    f_h: float = 26.0
    f_c1: float = 800.0
    order: int = 2


@dataclass
class MpcSection:
    np: int = 60
    nc: int = 50
    # larger than the library default: the estimator loop on the stand-in
    # plant diverges at small rho
    rho: float = EXPERIMENT_RHO


@dataclass
class ReferenceSection:
    type: str = "sine"
    freq: float = 103.0
    amplitude: float = 1.0
    offset: float = 1.4
    duration: float = 0.5
    # seconds discarded before the metrics window
    settle: float = 0.2


@dataclass
class StabilitySection:
    np_min: int = 50
    np_max: int = 400
    np_step: int = 50
    nc_list: List[int] = field(default_factory=lambda: [10, 50])
    nc_offsets: List[int] = field(default_factory=lambda: [50])


@dataclass
class FrequencySection:
    f_min: float = 1.0
    f_max: float = 10000.0
    points: int = 200


@dataclass
class ExperimentConfig:
    fs: float = 20000.0
    plant: str = "default"
    rnn: str = "default"
    lme: LmeSection = field(default_factory=LmeSection)
    band_split: BandSplitSection = field(default_factory=BandSplitSection)
    mpc: MpcSection = field(default_factory=MpcSection)
    reference: ReferenceSection = field(default_factory=ReferenceSection)
    stability: StabilitySection = field(default_factory=StabilitySection)
    frequency: FrequencySection = field(default_factory=FrequencySection)
    use_composition: bool = True
    # samples of input delay placed in front of the control model
    model_delay: int = 1
    estimate_delta: bool = True
    output_dir: str = "out"
    seed: int = 0
    # relative paths inside the config resolve against this directory
    base_dir: Optional[str] = None

    def to_dict(self) -> Dict[str, Any]:
        d = asdict(self)
        d.pop("base_dir")
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    # derived objects -------------------------------------------------

    def lme_model(self) -> LinearStateSpace:
        B = np.column_stack([self.lme.b, self.lme.error_gain])
        return LinearStateSpace(self.lme.a, B, [self.lme.c], self.fs)

    def band_split_spec(self) -> BandSplitSpec:
        s = self.band_split
        return BandSplitSpec(s.f_l, s.f_h, s.f_c1, s.order, self.fs)

    def mpc_config(self) -> MpcConfig:
        return MpcConfig(self.mpc.np, self.mpc.nc, self.mpc.rho)

    def resolve(self, ref: str) -> Path:
        p = Path(ref)
        if not p.is_absolute() and self.base_dir is not None:
            p = Path(self.base_dir) / p
        return p


_SECTIONS = {
    "lme": LmeSection,
    "band_split": BandSplitSection,
    "mpc": MpcSection,
    "reference": ReferenceSection,
    "stability": StabilitySection,
    "frequency": FrequencySection,
}


def _build_section(cls, data, name):
    if not isinstance(data, dict):
        raise ConfigError(f"section {name!r} must be an object")
    known = set(cls.__dataclass_fields__)
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown key(s) in {name!r}: {sorted(unknown)}")
    return cls(**data)


def from_dict(data: Dict[str, Any], base_dir: Optional[str] = None) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a JSON object")
    known = set(ExperimentConfig.__dataclass_fields__) - {"base_dir"}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown top-level key(s): {sorted(unknown)}")
    kwargs = {}
    for key, value in data.items():
        if key in _SECTIONS:
            kwargs[key] = _build_section(_SECTIONS[key], value, key)
        else:
            kwargs[key] = value
    cfg = ExperimentConfig(**kwargs, base_dir=base_dir)
    validate(cfg)
    return cfg


def _split_assignment(item: str):
    if "=" not in item:
        raise ConfigError(f"override {item!r} is not of the form key=value")
    key, raw = item.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip(), value


def apply_overrides(data: Dict[str, Any], overrides: List[str]) -> Dict[str, Any]:
    """Return a copy of ``data`` with ``a.b.c=value`` assignments applied.

    Values are parsed as JSON when possible, otherwise kept as strings.
    """
    out = copy.deepcopy(data)
    for item in overrides:
        key, value = _split_assignment(item)
        parts = key.split(".")
        node = out
        for p in parts[:-1]:
            if p not in node or not isinstance(node[p], dict):
                raise ConfigError(f"override {key!r}: no section {p!r}")
            node = node[p]
        if parts[-1] not in node:
            raise ConfigError(f"override {key!r}: unknown field {parts[-1]!r}")
        node[parts[-1]] = value
    return out


def load(path: Optional[str] = None, overrides: Optional[List[str]] = None) -> ExperimentConfig:
    """Defaults, then the file at ``path``, then the overrides."""
    data = ExperimentConfig().to_dict()
    base = None
    if path is not None:
        p = Path(path)
        try:
            user = json.loads(p.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(user, dict):
            raise ConfigError("configuration must be a JSON object")
        for key, value in user.items():
            if key in _SECTIONS and isinstance(value, dict) and isinstance(data.get(key), dict):
                data[key].update(value)
            else:
                data[key] = value
        base = str(p.resolve().parent)
    if overrides:
        data = apply_overrides(data, overrides)
    return from_dict(data, base)


def validate(cfg: ExperimentConfig) -> None:
    """Check ranges and cross-references before any computation."""
    try:
        if not cfg.fs > 0:
            raise ConfigError(f"fs must be positive, got {cfg.fs}")
        cfg.lme_model()
        cfg.band_split_spec().lowpass_spec()
        cfg.band_split_spec().bandpass_spec()
        cfg.mpc_config()
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc
    r = cfg.reference
    if r.type not in REFERENCE_TYPES:
        raise ConfigError(f"reference.type must be one of {REFERENCE_TYPES}, got {r.type!r}")
    if not r.duration > r.settle >= 0:
        raise ConfigError("reference.duration must exceed reference.settle >= 0")
    if r.type == "sine" and not 0 < r.freq < cfg.fs / 2:
        raise ConfigError(f"reference.freq must lie in (0, {cfg.fs / 2}) Hz")
    if not isinstance(cfg.use_composition, bool):
        raise ConfigError("use_composition must be true or false")
    if int(cfg.model_delay) != cfg.model_delay or cfg.model_delay < 0:
        raise ConfigError("model_delay must be a non-negative integer")
    if int(cfg.seed) != cfg.seed:
        raise ConfigError("seed must be an integer")
    if cfg.plant not in ("default", "linear") and not cfg.resolve(cfg.plant).is_file():
        raise ConfigError(f"plant config {cfg.plant!r} not found")
    if cfg.rnn not in ("default", "identity") and not cfg.resolve(cfg.rnn).is_file():
        raise ConfigError(f"weight file {cfg.rnn!r} not found")
    st = cfg.stability
    if st.np_min < 1 or st.np_max < st.np_min or st.np_step < 1:
        raise ConfigError("stability range must satisfy 1 <= np_min <= np_max and np_step >= 1")
    fr = cfg.frequency
    if not 0 < fr.f_min < fr.f_max <= cfg.fs / 2 or fr.points < 2:
        raise ConfigError("frequency grid must satisfy 0 < f_min < f_max <= fs/2 with points >= 2")


def default_weights_path() -> Path:
    return Path(str(resources.files("bandmpc") / "data" / "rnn_inverse.json"))


def default_plant_path() -> Path:
    return Path(str(resources.files("bandmpc") / "data" / "plant_default.json"))
