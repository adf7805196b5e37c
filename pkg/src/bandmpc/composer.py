"""Band-split model composition.

A plant ``G`` is preceded by a pair of filters in parallel, a band-pass
(``bpf``) and a low-pass (``lpf``). When ``G`` is linear the product
``(bpf + lpf) G`` equals ``bpf G1 + lpf G2`` with ``G1 = G2 = G``, and each
branch only needs to be accurate inside its own band. The control-oriented
case uses a unity high-band model and a low-order linear model with an error
input (the "LME") for the low band.

The stacked state of a composed model is ``[alpha; x_g1; beta; x_g2]``:
band-pass state, high-band model state, low-pass state, low-band model
state. The output is the sum of the two branch outputs.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .filters import BandSplitSpec, design_band_split
from .linsys import DimensionError, LinearStateSpace, Runner, delay, series

# Low-order model with an error channel identified on a piezo stage at 20 kHz.
DEFAULT_LME_A = ((0.3576, -0.3867), (0.0537, 1.0298))
DEFAULT_LME_B = (1.6718, -0.1404)
DEFAULT_LME_ERROR_GAIN = (1.0058, 1.1462)
DEFAULT_LME_C = (0.4257, 0.6411)


def default_lme(fs: float = 20000.0) -> LinearStateSpace:
    """The default LME with input columns ``[u_hat, e_hat]``."""
    B = np.column_stack([DEFAULT_LME_B, DEFAULT_LME_ERROR_GAIN])
    return LinearStateSpace(DEFAULT_LME_A, B, [DEFAULT_LME_C], fs)


def split_lme(lme: LinearStateSpace):
    """Separate a two-input LME into its control model and error gain."""
    if lme.n_inputs != 2 or lme.n_outputs != 1:
        raise DimensionError(
            f"LME must have inputs [u_hat, e_hat] and one output, got "
            f"{lme.n_inputs} input(s), {lme.n_outputs} output(s)"
        )
    g2 = LinearStateSpace(lme.A, lme.B[:, :1], lme.C, lme.fs)
    return g2, lme.B[:, 1].copy()


@dataclass(frozen=True)
class SubsystemPair:
    """High-band model ``g1`` and low-band model ``g2``; ``None`` means unity gain."""

    g1: Optional[LinearStateSpace]
    g2: Optional[LinearStateSpace]
    lme_error_gain: Optional[np.ndarray] = None

    def __post_init__(self):
        for name, sys in (("g1", self.g1), ("g2", self.g2)):
            if sys is not None and not sys.is_siso:
                raise DimensionError(f"{name} must be SISO")
        if self.g1 is not None and self.g2 is not None and not np.isclose(self.g1.fs, self.g2.fs):
            raise ValueError(f"g1 and g2 sample rates differ: {self.g1.fs} vs {self.g2.fs}")
        if self.lme_error_gain is not None:
            if self.g2 is None:
                raise ValueError("an error gain needs a low-band model g2")
            gain = np.asarray(self.lme_error_gain, dtype=float).reshape(-1)
            if gain.shape != (self.g2.n_states,):
                raise DimensionError(
                    f"error gain has length {gain.size}, g2 has {self.g2.n_states} states"
                )
            object.__setattr__(self, "lme_error_gain", gain)


@dataclass(frozen=True, eq=False)
class ComposedModel:
    """A control model plus the map from output error to state disturbance.

    ``disturbance_map`` is the vector ``g`` such that ``delta = g * e_hat``.
    ``band_split`` is ``None`` for a plain (uncomposed) model.
    """

    state_space: LinearStateSpace
    disturbance_map: np.ndarray
    band_split: Optional[BandSplitSpec] = None
    input_delay: int = 0

    def __post_init__(self):
        dm = np.asarray(self.disturbance_map, dtype=float).reshape(-1)
        if dm.shape != (self.state_space.n_states,):
            raise DimensionError(
                f"disturbance map has length {dm.size}, model has {self.state_space.n_states} states"
            )
        dm.setflags(write=False)
        object.__setattr__(self, "disturbance_map", dm)

    @property
    def n_states(self) -> int:
        return self.state_space.n_states

    def to_dict(self) -> dict:
        d = self.state_space.to_dict()
        d["disturbance_map"] = self.disturbance_map.tolist()
        if self.band_split is not None:
            d["band_split"] = self.band_split.to_dict()
        d["input_delay"] = self.input_delay
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "ComposedModel":
        ss = LinearStateSpace.from_dict(data)
        split = BandSplitSpec.from_dict(data["band_split"]) if "band_split" in data else None
        return cls(ss, data["disturbance_map"], split, int(data.get("input_delay", 0)))


def _check_filter(name: str, f: LinearStateSpace, fs: float) -> None:
    if not f.is_siso:
        raise DimensionError(f"{name} must be SISO")
    if not np.isclose(f.fs, fs):
        raise ValueError(f"{name} sample rate {f.fs} Hz differs from {fs} Hz")


def compose(
    bpf: LinearStateSpace,
    lpf: LinearStateSpace,
    subsystems: SubsystemPair,
    band_split: Optional[BandSplitSpec] = None,
) -> ComposedModel:
    """Stack ``bpf -> g1`` and ``lpf -> g2`` into one model.

    Both filters see the composed input; the output is
    ``y_g1 + y_g2``. With ``g1 = None`` the high branch output is the
    band-pass output itself, and likewise for ``g2 = None``. The
    disturbance map routes ``e_hat`` through ``lme_error_gain`` into the
    ``g2`` states only.
    """
    g1, g2 = subsystems.g1, subsystems.g2
    fs = bpf.fs
    _check_filter("bpf", bpf, fs)
    _check_filter("lpf", lpf, fs)
    for name, g in (("g1", g1), ("g2", g2)):
        if g is not None and not np.isclose(g.fs, fs):
            raise ValueError(f"{name} sample rate {g.fs} Hz differs from the filters' {fs} Hz")

    nb, nl = bpf.n_states, lpf.n_states
    n1 = 0 if g1 is None else g1.n_states
    n2 = 0 if g2 is None else g2.n_states
    n = nb + n1 + nl + n2
    ib, i1, il, i2 = 0, nb, nb + n1, nb + n1 + nl

    A = np.zeros((n, n))
    A[ib:i1, ib:i1] = bpf.A
    A[il:i2, il:i2] = lpf.A
    B = np.zeros((n, 1))
    B[ib:i1] = bpf.B
    B[il:i2] = lpf.B
    C = np.zeros((1, n))
    if g2 is None:
        C[:, il:i2] = lpf.C
    else:
        A[i2:, i2:] = g2.A
        A[i2:, il:i2] = g2.B @ lpf.C
        C[:, i2:] = g2.C
    if g1 is None:
        C[:, ib:i1] = bpf.C
    else:
        A[i1:il, i1:il] = g1.A
        A[i1:il, ib:i1] = g1.B @ bpf.C
        C[:, i1:il] = g1.C

    dmap = np.zeros(n)
    if subsystems.lme_error_gain is not None:
        dmap[i2:] = subsystems.lme_error_gain
    return ComposedModel(LinearStateSpace(A, B, C, fs), dmap, band_split)


def with_input_delay(model: ComposedModel, samples: int) -> ComposedModel:
    """Prepend ``samples`` of pure input delay (states go first)."""
    if samples == 0:
        return model
    ss = series(delay(samples, model.state_space.fs), model.state_space)
    dmap = np.concatenate([np.zeros(samples), model.disturbance_map])
    return ComposedModel(ss, dmap, model.band_split, model.input_delay + samples)


def composed_for_control(
    lme: LinearStateSpace,
    split: BandSplitSpec,
    order: Optional[int] = None,
    input_delay: int = 0,
) -> ComposedModel:
    """Band-split control model: band-pass to unity, low-pass to the LME.

    Parameters
    ----------
    lme : LinearStateSpace
        Two inputs ``[u_hat, e_hat]``; the second column is the error gain.
    split : BandSplitSpec
    order : int, optional
        Overrides ``split.order``.
    input_delay : int
        Samples of transport delay between the controller output and the
        plant, placed in front of the model.
    """
    if order is not None and order != split.order:
        split = BandSplitSpec(split.f_l, split.f_h, split.f_c1, order, split.fs)
    if not np.isclose(lme.fs, split.fs):
        raise ValueError(f"LME rate {lme.fs} Hz differs from band split rate {split.fs} Hz")
    g2, gain = split_lme(lme)
    lpf, bpf = design_band_split(split)
    model = compose(bpf, lpf, SubsystemPair(None, g2, gain), split)
    return with_input_delay(model, input_delay)


def plain_for_control(
    lme: LinearStateSpace,
    input_delay: int = 0,
    prefilter: Optional[LinearStateSpace] = None,
) -> ComposedModel:
    """The LME as the control model, without band split.

    ``prefilter`` is a filter in front of the plant that the model should
    account for; it is placed ahead of the LME and receives no disturbance.
    """
    g2, gain = split_lme(lme)
    model = ComposedModel(g2, gain, None)
    if prefilter is not None:
        _check_filter("prefilter", prefilter, lme.fs)
        ss = series(prefilter, g2)
        model = ComposedModel(ss, np.concatenate([np.zeros(prefilter.n_states), gain]), None)
    return with_input_delay(model, input_delay)


StepFn = Callable[[float], float]


def simulate_branches(bpf: LinearStateSpace, lpf: LinearStateSpace, g1: StepFn, g2: StepFn, inputs):
    """Run the split structure with arbitrary (possibly nonlinear) branches.

    ``g1`` and ``g2`` are callables taking the branch input sample and
    returning the branch output for that sample; they hold their own state.
    Filters are stepped through their strictly proper realizations, so the
    result of linear branches equals simulating :func:`compose`.

    Returns
    -------
    (total, high, low) : three arrays of the same length as ``inputs``
    """
    fb, fl = Runner(bpf), Runner(lpf)
    u = np.asarray(inputs, dtype=float).reshape(-1)
    hi = np.empty_like(u)
    lo = np.empty_like(u)
    for k, uk in enumerate(u):
        hi[k] = g1(fb.output)
        lo[k] = g2(fl.output)
        fb.advance(uk)
        fl.advance(uk)
    return hi + lo, hi, lo


def linear_step_fn(model: LinearStateSpace) -> StepFn:
    """Wrap a strictly proper SISO model as a step function ``v -> y``.

    The returned output for input ``v_k`` is ``C x_k`` (before ``v_k``
    is applied), which matches :func:`bandmpc.linsys.simulate`.
    """
    runner = Runner(model)

    def fn(v: float) -> float:
        y = runner.output
        runner.advance(v)
        return y

    return fn
