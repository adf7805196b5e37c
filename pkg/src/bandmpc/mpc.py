"""Unconstrained predictive control with closed-loop analysis.

For the model ``x[k+1] = A x[k] + B u[k] + delta[k]``, ``y = C x`` the
predicted outputs over ``Np`` steps are

    Y = G x + H1 V (S dU + 1 u) + H2 Delta + F u

where ``dU`` holds the ``Nc`` future input increments, ``V`` repeats the
last planned input up to the prediction horizon and ``S`` accumulates
increments. Minimizing ``|Y - V R|^2 + rho |dU|^2`` and keeping the first
move gives the explicit law

    u[k+1] = M1 x + M2 u + M3 R + M4 Delta.

Substituting the law into the model yields the closed-loop matrix
``K = [[A, B], [M1, M2]]``; its spectral radius decides stability. Adding
the reference shift register turns the loop into a single-input system from
the newest previewed reference sample to the tracking error, ``T(z)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, List, Optional, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.optimize

from .linsys import DimensionError, FrequencyResponse, LinearStateSpace, spectral_radius


class UnstableDesignError(RuntimeError):
    """The closed-loop matrix has spectral radius >= 1."""


class SweepConvergenceError(RuntimeError):
    """Sine-sweep estimation did not settle."""

    def __init__(self, frequency: float, message: str):
        super().__init__(f"sine sweep at {frequency:g} Hz: {message}")
        self.frequency = frequency


DEFAULT_RHO = 1e-2
DIRECT_DIMENSION_CAP = 4000


@dataclass(frozen=True)
class MpcConfig:
    """Horizons and weights.

    ``rho1`` weights ``U^T U`` in addition to the increments; it is off
    by default because it trades away zero steady-state error.
    """

    n_p: int
    n_c: int
    rho: float = DEFAULT_RHO
    rho1: float = 0.0

    def __post_init__(self):
        if int(self.n_p) != self.n_p or self.n_p < 1:
            raise ValueError(f"prediction horizon must be a positive integer, got {self.n_p}")
        if int(self.n_c) != self.n_c or not 1 <= self.n_c <= self.n_p:
            raise ValueError(f"control horizon must satisfy 1 <= nc <= np, got nc={self.n_c}, np={self.n_p}")
        if not (math.isfinite(self.rho) and self.rho > 0):
            raise ValueError(f"rho must be positive, got {self.rho}")
        if not (math.isfinite(self.rho1) and self.rho1 >= 0):
            raise ValueError(f"rho1 must be non-negative, got {self.rho1}")
        object.__setattr__(self, "n_p", int(self.n_p))
        object.__setattr__(self, "n_c", int(self.n_c))


@dataclass(frozen=True, eq=False)
class PredictionMatrices:
    g: np.ndarray
    h1: np.ndarray
    h2: Optional[np.ndarray]
    s: np.ndarray
    v: np.ndarray
    f: np.ndarray
    # sum over j of H2 blocks, i.e. H2 applied to a repeated delta
    h2_sum: np.ndarray


@dataclass(frozen=True, eq=False)
class ControlLawGains:
    """Explicit law coefficients.

    ``m_inv_factor`` is ``E1 M^-1 S^T V^T H1^T`` (length ``Np``), the only
    part of the optimizer that survives in the first move. ``m4`` is
    ``None`` when the prediction was built without ``H2``; ``m4_sum`` is
    ``M4`` applied to a disturbance held constant over the horizon.
    """

    m_inv_factor: np.ndarray
    m1: np.ndarray
    m2: float
    m3: np.ndarray
    m4: Optional[np.ndarray]
    m4_sum: np.ndarray


@dataclass(frozen=True, eq=False)
class ClosedLoopSystem:
    k: np.ndarray
    m3_bar: np.ndarray
    m4_bar: Optional[np.ndarray]
    m4_sum_bar: np.ndarray
    c_bar: np.ndarray
    fs: float

    @property
    def spectral_radius(self) -> float:
        return spectral_radius(self.k)

    @property
    def is_stable(self) -> bool:
        return self.spectral_radius < 1.0

    @property
    def n_c(self) -> int:
        return self.m3_bar.shape[1]


@dataclass(frozen=True, eq=False)
class ErrorDynamics:
    a_cl: np.ndarray
    b_cl: np.ndarray
    c_cl: np.ndarray
    fs: float

    def as_state_space(self) -> LinearStateSpace:
        return LinearStateSpace(self.a_cl, self.b_cl, self.c_cl, self.fs)


def _siso(model: LinearStateSpace) -> None:
    if not model.is_siso:
        raise DimensionError("predictive control needs a SISO model")


def markov_parameters(model: LinearStateSpace, count: int):
    """``C A^i B`` and ``C A^(i+1)`` for ``i = 0 .. count-1``."""
    A, b, c = model.A, model.B[:, 0], model.C[0]
    cab = np.empty(count)
    ca_next = np.empty((count, model.n_states))
    row = c.copy()
    for i in range(count):
        cab[i] = row @ b
        row = row @ A
        ca_next[i] = row
    return cab, ca_next


def build_prediction(model: LinearStateSpace, cfg: MpcConfig, include_h2: bool = True) -> PredictionMatrices:
    """Stack the prediction matrices for horizons ``cfg``.

    ``include_h2=False`` skips the ``Np x (n Np)`` disturbance matrix,
    which is large for long horizons; its row sums are always computed.
    """
    _siso(model)
    n_p, n_c, n = cfg.n_p, cfg.n_c, model.n_states
    cab, G = markov_parameters(model, n_p)
    H1 = np.zeros((n_p, n_p))
    for i in range(1, n_p):
        H1[i, :i] = cab[i - 1 :: -1]
    F = cab.reshape(-1, 1).copy()
    V = np.zeros((n_p, n_c))
    V[:n_c, :n_c] = np.eye(n_c)
    V[n_c:, n_c - 1] = 1.0
    S = np.tril(np.ones((n_c, n_c)))

    # powers C A^i, i = 0..Np-1; H2[i, j] block = C A^(i-j)
    c_pows = np.vstack([model.C[0], G[:-1]]) if n_p > 1 else model.C.copy()
    h2_sum = np.cumsum(c_pows, axis=0)
    H2 = None
    if include_h2:
        H2 = np.zeros((n_p, n * n_p))
        for i in range(n_p):
            for j in range(i + 1):
                H2[i, j * n : (j + 1) * n] = c_pows[i - j]
    return PredictionMatrices(G, H1, H2, S, V, F, h2_sum)


def cost_hessian(pred: PredictionMatrices, cfg: MpcConfig):
    """``W = H1 V S`` and ``M = W^T W + rho I (+ rho1 S^T S)``."""
    n_p, n_c = cfg.n_p, cfg.n_c
    if pred.h1.shape != (n_p, n_p) or pred.v.shape != (n_p, n_c):
        raise DimensionError("prediction matrices do not match the configuration")
    W = pred.h1 @ pred.v @ pred.s
    M = W.T @ W + cfg.rho * np.eye(n_c)
    if cfg.rho1 > 0:
        M += cfg.rho1 * pred.s.T @ pred.s
    return W, M


def control_gains(pred: PredictionMatrices, cfg: MpcConfig) -> ControlLawGains:
    """First-move gains of the unconstrained optimum.

    ``M`` is factored with Cholesky; no inverse is formed.
    """
    n_c = cfg.n_c
    W, M = cost_hessian(pred, cfg)
    if not np.all(np.isfinite(M)):
        raise FloatingPointError("non-finite entries in the cost Hessian")
    try:
        factor = scipy.linalg.cho_factor(M, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise FloatingPointError(f"cost Hessian factorization failed: {exc}") from exc
    e1 = np.zeros(n_c)
    e1[0] = 1.0
    g = scipy.linalg.cho_solve(factor, e1, check_finite=False)
    row = W @ g  # = (E1 M^-1 W^T)^T since M is symmetric

    ones = np.ones(n_c)
    m1 = -row @ pred.g
    m2 = 1.0 - row @ (pred.f[:, 0] + pred.h1 @ pred.v @ ones)
    if cfg.rho1 > 0:
        m2 -= cfg.rho1 * g @ (pred.s.T @ ones)
    m3 = row @ pred.v
    m4 = None if pred.h2 is None else -row @ pred.h2
    m4_sum = -row @ pred.h2_sum
    return ControlLawGains(row, m1, float(m2), m3, m4, m4_sum)


def closed_loop(model: LinearStateSpace, gains: ControlLawGains, cfg: MpcConfig) -> ClosedLoopSystem:
    """Assemble ``K`` and the input matrices of the augmented loop."""
    _siso(model)
    n = model.n_states
    if gains.m1.shape != (n,) or gains.m3.shape != (cfg.n_c,):
        raise DimensionError("gains do not match the model or configuration")
    K = np.zeros((n + 1, n + 1))
    K[:n, :n] = model.A
    K[:n, n] = model.B[:, 0]
    K[n, :n] = gains.m1
    K[n, n] = gains.m2
    m3_bar = np.zeros((n + 1, cfg.n_c))
    m3_bar[n] = gains.m3
    m4_bar = None
    if gains.m4 is not None:
        m4_bar = np.zeros((n + 1, gains.m4.size))
        m4_bar[n] = gains.m4
    m4_sum_bar = np.zeros((n + 1, n))
    m4_sum_bar[n] = gains.m4_sum
    c_bar = np.zeros((1, n + 1))
    c_bar[0, :n] = model.C[0]
    return ClosedLoopSystem(K, m3_bar, m4_bar, m4_sum_bar, c_bar, model.fs)


def design(model: LinearStateSpace, cfg: MpcConfig, include_h2: bool = False):
    """Prediction, gains and closed loop in one call."""
    pred = build_prediction(model, cfg, include_h2=include_h2)
    gains = control_gains(pred, cfg)
    return pred, gains, closed_loop(model, gains, cfg)


def _require_stable(cl: ClosedLoopSystem) -> float:
    rho = cl.spectral_radius
    if rho >= 1.0:
        raise UnstableDesignError(f"closed loop is unstable (spectral radius {rho:.6f})")
    return rho


def reference_gain(cl: ClosedLoopSystem) -> float:
    """``C_bar (I - K)^-1 M3_bar 1``; equals 1 for zero steady-state error."""
    _require_stable(cl)
    n1 = cl.k.shape[0]
    col = cl.m3_bar @ np.ones(cl.n_c)
    return float(cl.c_bar[0] @ np.linalg.solve(np.eye(n1) - cl.k, col))


def steady_state_error(cl: ClosedLoopSystem, r: float, delta=None) -> float:
    """Limit of ``e_k`` for constant reference ``r`` and disturbance.

    ``delta`` is either the full stacked vector (length ``n Np``) or a
    single ``n``-vector held over the horizon.
    """
    _require_stable(cl)
    n1 = cl.k.shape[0]
    rhs = cl.m3_bar @ np.ones(cl.n_c) * r
    if delta is not None:
        d = np.asarray(delta, dtype=float).reshape(-1)
        if d.size == n1 - 1:
            rhs = rhs + cl.m4_sum_bar @ d
        elif cl.m4_bar is not None and d.size == cl.m4_bar.shape[1]:
            rhs = rhs + cl.m4_bar @ d
        else:
            raise DimensionError(f"disturbance of length {d.size} does not fit the loop")
    return float(cl.c_bar[0] @ np.linalg.solve(np.eye(n1) - cl.k, rhs)) - r


def simulate_closed_loop(cl: ClosedLoopSystem, references, delta=None, eta0=None) -> np.ndarray:
    """Iterate ``eta <- K eta + M3_bar R_k (+ M4 Delta)``; returns ``e_k``.

    ``references`` is ``r_0 .. r_{N+Nc}``; the window ``R_k`` is
    ``r_{k+1} .. r_{k+Nc}``. ``delta`` is a held ``n``-vector.
    """
    r = np.asarray(references, dtype=float)
    n1, n_c = cl.k.shape[0], cl.n_c
    steps = r.size - n_c
    if steps < 1:
        raise ValueError("reference sequence shorter than the control horizon")
    eta = np.zeros(n1) if eta0 is None else np.array(eta0, dtype=float)
    dist = np.zeros(n1) if delta is None else cl.m4_sum_bar @ np.asarray(delta, dtype=float)
    m3 = cl.m3_bar[-1]
    K = cl.k
    c = cl.c_bar[0]
    e = np.empty(steps)
    for k in range(steps):
        e[k] = c @ eta - r[k]
        eta = K @ eta + dist
        eta[-1] += m3 @ r[k + 1 : k + 1 + n_c]
    return e


def error_dynamics(cl: ClosedLoopSystem, cfg: Optional[MpcConfig] = None) -> ErrorDynamics:
    """Reference-to-error system with state ``[eta; r_k .. r_{k+Nc}]``.

    The single input is ``r_{k+Nc+1}``, the newest previewed sample.
    """
    n1, n_c = cl.k.shape[0], cl.n_c
    if cfg is not None and cfg.n_c != n_c:
        raise DimensionError("configuration does not match the closed loop")
    d = n1 + n_c + 1
    A = np.zeros((d, d))
    A[:n1, :n1] = cl.k
    # M3_bar B_r: R_k is P_k without its first entry
    A[:n1, n1 + 1 :] = cl.m3_bar
    A[n1 : d - 1, n1 + 1 :] = np.eye(n_c)
    b = np.zeros((d, 1))
    b[-1, 0] = 1.0
    c = np.zeros((1, d))
    c[0, :n1] = cl.c_bar[0]
    c[0, n1] = -1.0
    return ErrorDynamics(A, b, c, cl.fs)


def _direct(ed: ErrorDynamics, f: np.ndarray) -> np.ndarray:
    d = ed.a_cl.shape[0]
    eye = np.eye(d)
    b = ed.b_cl[:, 0].astype(complex)
    out = np.empty(f.size, dtype=complex)
    for i, fi in enumerate(f):
        z = np.exp(2j * np.pi * fi / ed.fs)
        out[i] = ed.c_cl[0] @ np.linalg.solve(z * eye - ed.a_cl, b)
    return out


def _sweep(ed: ErrorDynamics, f: np.ndarray, tol: float, max_steps: int) -> np.ndarray:
    """Steady-state gain by simulating sine excitations.

    All frequencies run together. Each input ``exp(j w k)`` is the complex
    pair of a cosine and a sine sweep; after the transient has decayed by
    ``tol`` the output is ``T e^{j w k}`` and ``T`` is read off by
    demodulation. Two consecutive windows must agree.
    """
    rho = spectral_radius(ed.a_cl)
    if rho >= 1.0:
        raise SweepConvergenceError(float(f[0]), f"unstable dynamics (spectral radius {rho:.6f})")
    settle = ed.a_cl.shape[0] + (0 if rho == 0 else int(math.ceil(math.log(tol) / math.log(rho))))
    window = 64
    total = settle + 2 * window
    if total > max_steps:
        raise SweepConvergenceError(float(f[0]), f"needs {total} steps, limit is {max_steps}")
    w = 2 * np.pi * f / ed.fs
    # A_cl is mostly a shift register; sparse products keep long sweeps cheap
    A = scipy.sparse.csr_matrix(ed.a_cl)
    b = ed.b_cl[:, 0]
    c = ed.c_cl[0]
    X = np.zeros((A.shape[0], f.size), dtype=complex)
    rot = np.exp(1j * w)
    phasor = np.ones(f.size, dtype=complex)
    est = np.zeros((2, f.size), dtype=complex)
    for k in range(total):
        if k >= settle:
            slot = (k - settle) // window
            est[slot] += (c @ X) / phasor
        X = A @ X + np.outer(b, phasor)
        phasor = phasor * rot
        if (k & 1023) == 0:
            phasor /= np.abs(phasor)
    est /= window
    scale = np.maximum(np.abs(est[1]), 1e-10)
    gap = np.abs(est[0] - est[1]) / scale
    bad = np.flatnonzero(gap > 1e-3)
    if bad.size:
        raise SweepConvergenceError(float(f[bad[0]]), f"window estimates differ by {gap[bad[0]]:.2e}")
    return est[1]


def error_response(
    cl: ClosedLoopSystem,
    cfg: Optional[MpcConfig],
    frequencies,
    method: str = "direct",
    dimension_cap: int = DIRECT_DIMENSION_CAP,
    sweep_tol: float = 1e-13,
    max_steps: int = 2_000_000,
) -> FrequencyResponse:
    """Frequency response of ``T(z)``.

    ``method`` is ``"direct"`` (a linear solve per frequency),
    ``"simulated"`` (sine sweep) or ``"auto"`` (direct unless the state
    dimension exceeds ``dimension_cap``).
    """
    _require_stable(cl)
    ed = error_dynamics(cl, cfg)
    f = np.atleast_1d(np.asarray(frequencies, dtype=float))
    if np.any(f < 0) or np.any(f > cl.fs / 2):
        raise ValueError(f"frequencies must lie in [0, {cl.fs / 2}] Hz")
    dim = ed.a_cl.shape[0]
    if method == "auto":
        method = "direct" if dim <= dimension_cap else "simulated"
    if method == "direct":
        if dim > dimension_cap:
            raise ValueError(
                f"error dynamics have {dim} states, above the direct-solve cap of {dimension_cap}; "
                "use the simulated method"
            )
        values = _direct(ed, f)
    elif method == "simulated":
        values = _sweep(ed, f, sweep_tol, max_steps)
    else:
        raise ValueError(f"unknown method {method!r}")
    return FrequencyResponse(f, values)


def error_gain_fast(cl: ClosedLoopSystem, frequencies) -> np.ndarray:
    """``T`` using the shift-register structure, ``O(n^3)`` per frequency.

    The window ``R_k`` is the input delayed by ``Nc .. 1`` samples and
    ``r_k`` is the input delayed by ``Nc + 1`` samples.
    """
    f = np.atleast_1d(np.asarray(frequencies, dtype=float))
    n1, n_c = cl.k.shape[0], cl.n_c
    eye = np.eye(n1)
    m3 = cl.m3_bar[-1]
    out = np.empty(f.size, dtype=complex)
    lags = np.arange(n_c, 0, -1)
    for i, fi in enumerate(f):
        z = np.exp(2j * np.pi * fi / cl.fs)
        rk = m3 @ z ** (-lags.astype(float))
        col = np.zeros(n1, dtype=complex)
        col[-1] = rk
        eta = np.linalg.solve(z * eye - cl.k, col)
        out[i] = cl.c_bar[0] @ eta - z ** (-(n_c + 1))
    return out


def error_bandwidth(cl: ClosedLoopSystem, f_min: float = 0.1, points: int = 200) -> float:
    """Lowest frequency where ``|T|`` reaches ``-3 dB``; ``nan`` if never."""
    limit = 1 / math.sqrt(2)
    grid = np.geomspace(f_min, cl.fs / 2, points)
    mag = np.abs(error_gain_fast(cl, grid))
    above = np.flatnonzero(mag >= limit)
    if above.size == 0:
        return float("nan")
    i = above[0]
    if i == 0:
        return float(grid[0])

    def fn(logf):
        return abs(error_gain_fast(cl, [math.exp(logf)])[0]) - limit

    root = scipy.optimize.brentq(fn, math.log(grid[i - 1]), math.log(grid[i]), xtol=1e-10)
    return math.exp(root)


@dataclass(frozen=True)
class StabilityRow:
    n_p: int
    n_c: int
    rho: float
    spectral_radius: float
    bandwidth_hz: float

    @property
    def stable(self) -> bool:
        return self.spectral_radius < 1.0


def stability_search(
    model: LinearStateSpace,
    nc_list: Optional[Sequence[int]] = None,
    np_range: Iterable[int] = (),
    rho: float = DEFAULT_RHO,
    nc_offsets: Optional[Sequence[int]] = None,
    early_exit: bool = False,
    bandwidth: bool = True,
) -> List[StabilityRow]:
    """Scan horizon pairs for closed-loop stability.

    Pairs come from ``nc_list`` (fixed control horizons) and/or
    ``nc_offsets`` (``Nc = Np - offset``); pairs with ``Nc`` outside
    ``[1, Np]`` are skipped. With ``early_exit`` each control-horizon
    series stops at its first stable ``Np``, so the last row of a series
    is the minimal stabilizing prediction horizon.
    """
    nps = sorted(set(int(p) for p in np_range))
    if not nps:
        raise ValueError("empty prediction-horizon range")
    series_defs = []
    for nc in nc_list or ():
        series_defs.append(lambda p, nc=int(nc): nc)
    for off in nc_offsets or ():
        series_defs.append(lambda p, off=int(off): p - off)
    if not series_defs:
        raise ValueError("no control horizons given")
    rows: List[StabilityRow] = []
    for nc_of in series_defs:
        for n_p in nps:
            n_c = nc_of(n_p)
            if not 1 <= n_c <= n_p:
                continue
            cfg = MpcConfig(n_p, n_c, rho)
            _, _, cl = design(model, cfg)
            sr = cl.spectral_radius
            bw = error_bandwidth(cl) if (bandwidth and sr < 1.0) else float("nan")
            rows.append(StabilityRow(n_p, n_c, rho, sr, bw))
            if early_exit and sr < 1.0:
                break
    return rows


def minimal_stable_np(rows: Sequence[StabilityRow]) -> dict:
    """Smallest stable ``Np`` per control-horizon rule, from a scan."""
    best: dict = {}
    for row in rows:
        if row.stable:
            key = row.n_c
            best[key] = min(best.get(key, row.n_p), row.n_p)
    return best


class MpcController:
    """Online form of the explicit law with model-error estimation.

    Each call to :meth:`update` takes the measured output ``y_k`` and the
    preview ``r_{k+1} .. r_{k+Nc}``, returns ``u_{k+1}`` and advances the
    internal model with the input ``u_k`` that is being applied now. The
    model error ``e_hat = y_k - C x_k`` is mapped into a state disturbance
    ``delta = g e_hat`` that corrects the model and is assumed constant
    across the horizon.
    """

    def __init__(
        self,
        model: LinearStateSpace,
        gains: ControlLawGains,
        disturbance_map=None,
        estimate_delta: bool = True,
    ):
        _siso(model)
        self.model = model
        self.gains = gains
        self.n_c = gains.m3.size
        dm = np.zeros(model.n_states) if disturbance_map is None else np.asarray(disturbance_map, dtype=float)
        if dm.shape != (model.n_states,):
            raise DimensionError(f"disturbance map must have length {model.n_states}")
        self.dmap = dm
        self.estimate_delta = estimate_delta
        self._A = model.A
        self._b = model.B[:, 0]
        self._c = model.C[0]
        self.reset()

    def reset(self) -> None:
        self.x = np.zeros(self.model.n_states)
        self.u = 0.0

    @property
    def model_output(self) -> float:
        return float(self._c @ self.x)

    def update(self, y: float, preview) -> float:
        R = np.asarray(preview, dtype=float)
        if R.shape != (self.n_c,):
            raise ValueError(f"preview must hold {self.n_c} samples, got {R.size}")
        g = self.gains
        if self.estimate_delta:
            delta = self.dmap * (y - self._c @ self.x)
        else:
            delta = np.zeros_like(self.x)
        u_next = float(g.m1 @ self.x + g.m2 * self.u + g.m3 @ R + g.m4_sum @ delta)
        self.x = self._A @ self.x + self._b * self.u + delta
        self.u = u_next
        return u_next


@dataclass
class ControllerTrace:
    u: np.ndarray
    y: np.ndarray
    y_model: np.ndarray


def pad_reference(reference, n_c: int) -> np.ndarray:
    """Append ``Nc`` copies of the last sample so every step has a preview."""
    r = np.asarray(reference, dtype=float).reshape(-1)
    return np.concatenate([r, np.full(n_c, r[-1])])


def run_controller(
    controller: MpcController,
    reference,
    plant_step: Callable[[float], float],
    y0: float = 0.0,
) -> ControllerTrace:
    """Close the loop around ``plant_step``.

    ``reference`` must hold ``N + Nc`` samples for ``N`` steps (see
    :func:`pad_reference`). ``plant_step(u_k)`` applies ``u_k`` and
    returns ``y_{k+1}``.
    """
    r = np.asarray(reference, dtype=float).reshape(-1)
    n_c = controller.n_c
    steps = r.size - n_c
    if steps < 1:
        raise ValueError(f"reference preview shorter than the control horizon ({n_c})")
    u = np.empty(steps)
    y = np.empty(steps)
    ym = np.empty(steps)
    yk = float(y0)
    for k in range(steps):
        y[k] = yk
        ym[k] = controller.model_output
        u[k] = controller.u
        controller.update(yk, r[k + 1 : k + 1 + n_c])
        yk = float(plant_step(u[k]))
    return ControllerTrace(u, y, ym)


def cost(pred: PredictionMatrices, cfg: MpcConfig, du, x, u: float, R, delta_stack=None) -> float:
    """Quadratic cost of an increment plan ``du``; used to test optimality."""
    du = np.asarray(du, dtype=float)
    U = pred.s @ du + u
    Y = pred.g @ x + pred.h1 @ pred.v @ U + pred.f[:, 0] * u
    if delta_stack is not None:
        Y = Y + pred.h2 @ delta_stack
    err = Y - pred.v @ np.asarray(R, dtype=float)
    return float(err @ err + cfg.rho * du @ du + cfg.rho1 * U @ U)


def optimal_increments(pred: PredictionMatrices, cfg: MpcConfig, x, u: float, R, delta_stack=None) -> np.ndarray:
    """Full minimizing plan ``dU*`` (all ``Nc`` moves)."""
    W, M = cost_hessian(pred, cfg)
    E = pred.g @ x + (pred.f[:, 0] + pred.h1 @ pred.v @ np.ones(cfg.n_c)) * u - pred.v @ np.asarray(R, dtype=float)
    if delta_stack is not None:
        E = E + pred.h2 @ delta_stack
    rhs = W.T @ E + cfg.rho1 * pred.s.T @ np.ones(cfg.n_c) * u
    return -scipy.linalg.cho_solve(scipy.linalg.cho_factor(M), rhs)
