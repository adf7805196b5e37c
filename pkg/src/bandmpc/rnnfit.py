"""Synthetic weights for the inversion network.

No trained weights come with the method, so this module fits a small
network that inverts the stand-in plant's linear part: fed the plant output
``L`` samples ahead, it should reproduce the plant input. The cascade
network -> plant then behaves like a pure ``L``-sample delay.

Training data is generated at the control rate and split into its two
opposite-phase decimations; both share one set of weights, which is what
the double-rate executor needs. The loss is mean squared error with
gradients by backpropagation through time, minimized with L-BFGS on
normalized signals. The normalization is folded back into the weights.

This is a stand-in for a real training pipeline and is only meant to give
plausible weights at desk scale.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.optimize

from .linsys import LinearStateSpace, simulate
from .rnninv import RnnInversionModel


@dataclass(frozen=True)
class FitResult:
    model: RnnInversionModel
    initial_loss: float
    final_loss: float
    iterations: int


def excitation(n: int, fs: float, rng: np.random.Generator, f_lo=2.0, f_hi=1500.0, tones=40,
               mean=1.4, std=0.45) -> np.ndarray:
    """Multi-tone signal with amplitudes rolling off above ~20 Hz."""
    t = np.arange(n) / fs
    freqs = np.geomspace(f_lo, f_hi, tones)
    amps = rng.uniform(0.2, 1.0, tones) / np.sqrt(freqs / 20 + 1)
    phases = rng.uniform(0, 2 * np.pi, tones)
    w = (amps[:, None] * np.sin(2 * np.pi * freqs[:, None] * t + phases[:, None])).sum(0)
    return mean + w / w.std() * std


def _unpack(theta, n):
    i = n * n
    W1 = theta[:i].reshape(n, n)
    B1 = theta[i : i + n]
    B2 = theta[i + n : i + 2 * n]
    W2 = theta[i + 2 * n : i + 3 * n]
    return W1, B1, B2, W2, theta[i + 3 * n]


def _forward(W1, B1, B2, u):
    X = np.zeros((u.size + 1, W1.shape[0]))
    for k in range(u.size):
        X[k + 1] = np.tanh(W1 @ X[k] + B2 + B1 * u[k])
    return X


def loss_and_grad(theta, lanes, n):
    """Mean squared output error over all lanes and its gradient."""
    W1, B1, B2, W2, B3 = _unpack(theta, n)
    gW1 = np.zeros_like(W1)
    gB1 = np.zeros(n)
    gB2 = np.zeros(n)
    gW2 = np.zeros(n)
    gB3 = 0.0
    total = 0.0
    count = 0
    for u, target in lanes:
        X = _forward(W1, B1, B2, u)
        r = X[:-1] @ W2 + B3 - target
        total += r @ r
        count += r.size
        gW2 += 2 * X[:-1].T @ r
        gB3 += 2 * r.sum()
        lam = np.zeros(n)
        D = np.zeros((u.size, n))
        for k in range(u.size - 1, -1, -1):
            d = lam * (1 - X[k + 1] ** 2)
            D[k] = d
            lam = W1.T @ d + 2 * r[k] * W2
        gW1 += D.T @ X[:-1]
        gB2 += D.sum(0)
        gB1 += D.T @ u
    grad = np.concatenate([gW1.ravel(), gB1, gB2, gW2, [gB3]])
    return total / count, grad / count


def fit_inverse(
    linear_part: LinearStateSpace,
    n_hidden: int = 4,
    lead: int = 3,
    samples: int = 20000,
    iterations: int = 400,
    seed: int = 1,
) -> FitResult:
    """Fit inversion weights for a strictly proper SISO plant.

    Parameters
    ----------
    linear_part : plant model at the control rate
    n_hidden : hidden-state size
    lead : samples by which the network input leads its target
    samples : length of the control-rate training record
    iterations : L-BFGS iteration limit
    seed : seeds the excitation and the initial weights
    """
    rng = np.random.default_rng(seed)
    fs = linear_part.fs
    w = excitation(samples, fs, rng)
    y = simulate(linear_part, w)[:, 0]
    m = samples - lead - 2
    inp = y[1 + lead : 1 + lead + m]
    tgt = w[1 : 1 + m]
    mi, si = inp.mean(), inp.std()
    mo, so = tgt.mean(), tgt.std()
    lanes = [((inp[p::2] - mi) / si, (tgt[p::2] - mo) / so) for p in (0, 1)]

    n = n_hidden
    W1 = rng.standard_normal((n, n))
    W1 *= 0.7 / np.max(np.abs(np.linalg.eigvals(W1)))
    B1 = 0.3 * rng.standard_normal(n)
    theta = np.concatenate([W1.ravel(), B1, np.zeros(n), np.zeros(n), [0.0]])
    # least-squares read-out as the starting point
    X = np.vstack([_forward(W1, B1, np.zeros(n), u)[:-1] for u, _ in lanes])
    t_all = np.concatenate([t for _, t in lanes])
    sol = np.linalg.lstsq(np.hstack([X, np.ones((X.shape[0], 1))]), t_all, rcond=None)[0]
    theta[-n - 1 : -1] = sol[:n]
    theta[-1] = sol[n]

    initial = loss_and_grad(theta, lanes, n)[0]
    res = scipy.optimize.minimize(
        loss_and_grad, theta, args=(lanes, n), jac=True, method="L-BFGS-B",
        options={"maxiter": iterations},
    )
    W1, B1, B2, W2, B3 = _unpack(res.x, n)
    model = RnnInversionModel(
        W1,
        B1 / si,
        B2 - B1 * mi / si,
        W2 * so,
        B3 * so + mo,
        fs / 2,
    )
    return FitResult(model, float(initial), float(res.fun), int(res.nit))
