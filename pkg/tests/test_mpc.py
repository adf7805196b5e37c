import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bandmpc.composer import composed_for_control, default_lme, split_lme
from bandmpc.filters import BandSplitSpec
from bandmpc.linsys import LinearStateSpace, Runner, eigenvalues, settling_horizon
from bandmpc.mpc import (
    ControlLawGains,
    MpcConfig,
    MpcController,
    SweepConvergenceError,
    UnstableDesignError,
    build_prediction,
    closed_loop,
    control_gains,
    cost,
    cost_hessian,
    design,
    error_bandwidth,
    error_dynamics,
    error_gain_fast,
    error_response,
    minimal_stable_np,
    optimal_increments,
    pad_reference,
    reference_gain,
    run_controller,
    simulate_closed_loop,
    stability_search,
    steady_state_error,
)

from conftest import random_stable

FS = 20000.0
SCALAR_CFG = MpcConfig(2, 1, 1.0)


@pytest.fixture(scope="module")
def lme_design():
    g2, _ = split_lme(default_lme())
    cfg = MpcConfig(30, 10, 1e-2)
    pred, gains, cl = design(g2, cfg, include_h2=True)
    assert cl.is_stable
    return g2, cfg, pred, gains, cl


@pytest.fixture(scope="module")
def composed_design():
    m = composed_for_control(default_lme(), BandSplitSpec(32.0, 26.0, 800.0, 2, FS))
    cfg = MpcConfig(60, 50, 1e-2)
    return (m, cfg) + design(m.state_space, cfg)


# prediction matrices ------------------------------------------------------

def test_scalar_prediction_matrices(scalar_model):
    p = build_prediction(scalar_model, SCALAR_CFG)
    np.testing.assert_array_equal(p.g, [[1.0], [1.0]])
    np.testing.assert_array_equal(p.h1, [[0.0, 0.0], [1.0, 0.0]])
    np.testing.assert_array_equal(p.f, [[1.0], [1.0]])
    np.testing.assert_array_equal(p.v, [[1.0], [1.0]])
    np.testing.assert_array_equal(p.s, [[1.0]])
    np.testing.assert_array_equal(p.h1 @ p.v @ p.s, [[0.0], [1.0]])
    np.testing.assert_array_equal(p.f[:, 0] + p.h1 @ p.v @ np.ones(1), [1.0, 2.0])


def test_structure_for_random_model(rng):
    g = random_stable(rng, 3)
    p = build_prediction(g, MpcConfig(12, 12))
    np.testing.assert_array_equal(p.v, np.eye(12))
    assert np.all(p.h1[0] == 0)
    assert np.all(np.triu(p.h1) == 0)
    p = build_prediction(g, MpcConfig(12, 5))
    assert np.all(p.v[5:, 4] == 1) and np.all(p.v[5:, :4] == 0)
    np.testing.assert_array_equal(p.s, np.tril(np.ones((5, 5))))


def test_h2_blocks_are_disturbance_propagation(rng):
    g = random_stable(rng, 2)
    cfg = MpcConfig(6, 3)
    p = build_prediction(g, cfg)
    # apply a single disturbance at step j and propagate by hand
    for j in range(cfg.n_p):
        d = rng.standard_normal(2)
        stack = np.zeros(2 * cfg.n_p)
        stack[2 * j : 2 * j + 2] = d
        x = np.zeros(2)
        ys = []
        for i in range(cfg.n_p):
            x = g.A @ x + (d if i == j else 0.0)
            ys.append(g.C[0] @ x)
        np.testing.assert_allclose(p.h2 @ stack, ys, atol=1e-14)
    d = rng.standard_normal(2)
    np.testing.assert_allclose(p.h2 @ np.tile(d, cfg.n_p), p.h2_sum @ d, rtol=1e-12)


def test_config_validation():
    with pytest.raises(ValueError):
        MpcConfig(0, 1)
    with pytest.raises(ValueError):
        MpcConfig(5, 6)
    with pytest.raises(ValueError):
        MpcConfig(5, 2, rho=0.0)


# gains and closed loop ----------------------------------------------------

def test_scalar_gains(scalar_model):
    p = build_prediction(scalar_model, SCALAR_CFG)
    _, M = cost_hessian(p, SCALAR_CFG)
    g = control_gains(p, SCALAR_CFG)
    assert M[0, 0] == pytest.approx(2.0, abs=1e-15)
    assert g.m1[0] == pytest.approx(-0.5, abs=1e-15)
    assert g.m2 == pytest.approx(0.0, abs=1e-15)
    assert g.m3[0] == pytest.approx(0.5, abs=1e-15)


def test_large_rho_freezes_controller(rng):
    g = random_stable(rng, 3)
    cfg = MpcConfig(10, 4, rho=1e12)
    gains = control_gains(build_prediction(g, cfg), cfg)
    assert np.abs(gains.m1).max() < 1e-9
    assert gains.m2 == pytest.approx(1.0, abs=1e-9)
    assert np.abs(gains.m3).max() < 1e-9


def test_uncontrollable_output_gives_identity_law():
    m = LinearStateSpace([[0.5, 0.0], [0.0, 0.7]], [[1.0], [0.0]], [[0.0, 1.0]], FS)
    for rho in (1e-3, 1.0, 10.0):
        cfg = MpcConfig(8, 3, rho)
        gains = control_gains(build_prediction(m, cfg), cfg)
        np.testing.assert_array_equal(gains.m1, 0.0)
        assert gains.m2 == 1.0


def test_scalar_closed_loop(scalar_model):
    _, _, cl = design(scalar_model, SCALAR_CFG)
    np.testing.assert_allclose(cl.k, [[1.0, 1.0], [-0.5, 0.0]], atol=1e-15)
    lam = sorted(eigenvalues(cl.k), key=lambda z: z.imag)
    np.testing.assert_allclose(lam, [0.5 - 0.5j, 0.5 + 0.5j], atol=1e-15)
    assert cl.is_stable


def _constant_law(n, n_c, m2):
    return ControlLawGains(np.zeros(1), np.zeros(n), m2, np.zeros(n_c), None, np.zeros(n))


def test_frozen_controller_is_marginal(rng):
    g = random_stable(rng, 3, radius=0.8)
    cfg = MpcConfig(5, 2)
    cl = closed_loop(g, _constant_law(3, 2, 1.0), cfg)
    lam = np.sort_complex(eigenvalues(cl.k))
    expected = np.sort_complex(np.append(eigenvalues(g.A), 1.0))
    np.testing.assert_allclose(lam, expected, atol=1e-12)
    assert not cl.is_stable
    with pytest.raises(UnstableDesignError):
        steady_state_error(cl, 1.0)


def test_k_block_structure(lme_design):
    g2, _, _, gains, cl = lme_design
    np.testing.assert_array_equal(cl.k[:2, :2], g2.A)
    np.testing.assert_array_equal(cl.k[:2, 2], g2.B[:, 0])
    np.testing.assert_array_equal(cl.k[2, :2], gains.m1)
    assert cl.k[2, 2] == gains.m2


@pytest.mark.parametrize("rho", [1e-2, 3.0])
def test_composed_200_50_is_stable(rho):
    m = composed_for_control(default_lme(), BandSplitSpec(32.0, 26.0, 800.0, 2, FS))
    _, _, cl = design(m.state_space, MpcConfig(200, 50, rho))
    assert cl.is_stable


def test_m4_full_matches_held_disturbance(lme_design):
    _, cfg, _, gains, _ = lme_design
    d = np.array([0.3, -1.2])
    assert gains.m4 @ np.tile(d, cfg.n_p) == pytest.approx(gains.m4_sum @ d, rel=1e-12)


# steady state ---------------------------------------------------------------

def test_scalar_steady_state(scalar_model):
    _, _, cl = design(scalar_model, SCALAR_CFG)
    assert reference_gain(cl) == pytest.approx(1.0, abs=1e-12)
    for r in (-2.0, 0.0, 3.5):
        assert steady_state_error(cl, r) == pytest.approx(0.0, abs=1e-12)


def test_steady_state_formula_matches_long_simulation(lme_design):
    _, cfg, _, gains, cl = lme_design
    r, d = 1.7, np.array([0.01, -0.02])
    e_formula = steady_state_error(cl, r, d)
    stack = steady_state_error(cl, r, np.tile(d, cfg.n_p))
    assert stack == pytest.approx(e_formula, abs=1e-12)
    steps = 10 * settling_horizon(cl.k, 1e-6)
    e_sim = simulate_closed_loop(cl, np.full(steps + cfg.n_c, r), d)
    assert e_sim[-1] == pytest.approx(e_formula, abs=1e-8)
    assert abs(e_formula) > 1e-6  # held disturbance leaves a visible offset


def test_steady_state_rejects_bad_disturbance(lme_design):
    *_, cl = lme_design
    with pytest.raises(ValueError):
        steady_state_error(cl, 1.0, np.ones(7))


def test_rho1_term_breaks_zero_steady_state(lme_design):
    g2 = lme_design[0]
    cfg = MpcConfig(30, 10, 1e-2, rho1=1.0)
    _, _, cl = design(g2, cfg)
    assert cl.is_stable
    assert abs(steady_state_error(cl, 1.0)) > 1e-3


# error dynamics ---------------------------------------------------------------

def test_error_dynamics_dimensions(lme_design):
    _, cfg, _, _, cl = lme_design
    ed = error_dynamics(cl, cfg)
    d = 2 + 1 + cfg.n_c + 1
    assert ed.a_cl.shape == (d, d) and ed.b_cl.shape == (d, 1) and ed.c_cl.shape == (1, d)
    np.testing.assert_array_equal(ed.a_cl[:3, :3], cl.k)
    assert np.all(ed.a_cl[3:, :3] == 0)
    assert ed.c_cl[0, 3] == -1.0


def test_zero_controller_dc_error_is_open_loop(rng):
    g = random_stable(rng, 2, radius=0.5)
    cfg = MpcConfig(4, 2)
    cl = closed_loop(g, _constant_law(2, 2, 0.0), cfg)
    T = error_response(cl, cfg, [0.0]).values[0]
    # input never moves, so the output stays at zero and e = -r
    assert T == pytest.approx(-1.0, abs=1e-12)


def test_scalar_error_response_zero_at_dc(scalar_model):
    _, _, cl = design(scalar_model, SCALAR_CFG)
    assert abs(error_response(cl, SCALAR_CFG, [0.0]).values[0]) < 1e-8


def test_direct_and_simulated_agree_on_scalar_example(scalar_model):
    _, _, cl = design(scalar_model, SCALAR_CFG)
    f = np.linspace(10.0, 490.0, 10)
    a = error_response(cl, SCALAR_CFG, f, method="direct").values
    b = error_response(cl, SCALAR_CFG, f, method="simulated").values
    assert np.max(np.abs(a - b) / np.abs(a)) < 0.01


def test_fast_route_matches_state_space_route(composed_design):
    *_, cl = composed_design
    f = np.geomspace(1.0, FS / 2, 40)
    direct = error_response(cl, None, f, method="direct").values
    np.testing.assert_allclose(error_gain_fast(cl, f), direct, rtol=1e-7, atol=1e-14)


def test_composed_error_is_low_pass_complementary(composed_design):
    *_, cl = composed_design
    f = np.array([1.0, 10.0, 103.0, 500.0, 2000.0])
    mag = np.abs(error_response(cl, None, f).values)
    assert np.all(np.diff(mag) > 0)
    assert error_bandwidth(cl) > 500.0


def test_dimension_cap_switches_to_sweep():
    m = composed_for_control(default_lme(), BandSplitSpec(32.0, 26.0, 800.0, 2, FS))
    cfg = MpcConfig(1200, 1150, 1e-2)
    _, _, cl = design(m.state_space, cfg)
    f = np.array([100.0, 1000.0, 5000.0])
    with pytest.raises(ValueError, match="cap"):
        error_response(cl, cfg, f, method="direct", dimension_cap=1000)
    auto = error_response(cl, cfg, f, method="auto", dimension_cap=1000, sweep_tol=1e-8)
    np.testing.assert_allclose(auto.values, error_gain_fast(cl, f), rtol=1e-6)


def test_sweep_step_limit_is_reported(lme_design):
    _, cfg, _, _, cl = lme_design
    with pytest.raises(SweepConvergenceError) as info:
        error_response(cl, cfg, [50.0, 60.0], method="simulated", max_steps=10)
    assert info.value.frequency == 50.0


def test_unknown_method(lme_design):
    _, cfg, _, _, cl = lme_design
    with pytest.raises(ValueError):
        error_response(cl, cfg, [1.0], method="bode")


# stability search -----------------------------------------------------------

def test_minimal_np_for_unstable_scalar_plant():
    m = LinearStateSpace([[1.1]], [[1.0]], [[1.0]], 1000.0)
    rows = stability_search(m, [1], range(1, 41), rho=1.0, bandwidth=False)
    stable = [r.n_p for r in rows if r.stable]
    assert stable, "no stabilizing Np found"
    np_min = min(stable)
    assert minimal_stable_np(rows) == {1: np_min}
    # exhaustive confirmation below the minimum
    for n_p in range(1, np_min):
        _, _, cl = design(m, MpcConfig(n_p, 1, 1.0))
        assert not cl.is_stable
    early = stability_search(m, [1], range(1, 41), rho=1.0, early_exit=True, bandwidth=False)
    assert early[-1].n_p == np_min and early[-1].stable


def test_search_below_minimum_reports_all_unstable():
    m = LinearStateSpace([[1.1]], [[1.0]], [[1.0]], 1000.0)
    rows = stability_search(m, [1], [1], rho=100.0, bandwidth=False)
    assert len(rows) == 1 and not rows[0].stable
    assert np.isnan(rows[0].bandwidth_hz)


def test_search_rejects_empty_ranges(scalar_model):
    with pytest.raises(ValueError):
        stability_search(scalar_model, [1], [])
    with pytest.raises(ValueError):
        stability_search(scalar_model, [], [5])


def test_offset_series_skips_invalid_pairs(scalar_model):
    rows = stability_search(scalar_model, None, [3, 5, 8], rho=1.0, nc_offsets=[4], bandwidth=False)
    assert [(r.n_p, r.n_c) for r in rows] == [(5, 1), (8, 4)]


# online control ---------------------------------------------------------------

def _nominal_loop(model, gains, reference, estimate=True, dmap=None):
    ctrl = MpcController(model, gains, dmap, estimate)
    plant = Runner(model)
    return run_controller(ctrl, reference, plant.advance, plant.output)


def test_perfect_model_constant_reference(lme_design):
    g2, cfg, _, gains, cl = lme_design
    n = 10 * settling_horizon(cl.k, 1e-6)
    tr = _nominal_loop(g2, gains, pad_reference(np.full(n, 2.0), cfg.n_c))
    assert abs(tr.y[-1] - 2.0) < 1e-6


def test_zero_reference_gives_zero_input(lme_design):
    g2, cfg, _, gains, _ = lme_design
    tr = _nominal_loop(g2, gains, np.zeros(200 + cfg.n_c))
    assert np.all(tr.u == 0)


def test_short_preview_rejected(lme_design):
    g2, cfg, _, gains, _ = lme_design
    ctrl = MpcController(g2, gains)
    with pytest.raises(ValueError):
        ctrl.update(0.0, np.zeros(cfg.n_c - 1))
    with pytest.raises(ValueError):
        run_controller(ctrl, np.zeros(cfg.n_c), lambda u: 0.0)


def test_disturbance_estimation_reduces_bias(lme_design):
    g2, cfg, _, gains, cl = lme_design
    _, gain = split_lme(default_lme())
    n = 4000
    ref = pad_reference(np.full(n, 1.0), cfg.n_c)
    errors = {}
    for estimate in (True, False):
        ctrl = MpcController(g2, gains, gain, estimate)
        plant = Runner(g2)
        bias = 0.05
        tr = run_controller(ctrl, ref, lambda u: plant.advance(u) + bias, plant.output + bias)
        errors[estimate] = abs(tr.y[-1] - 1.0)
    assert errors[True] < errors[False]
    assert errors[False] == pytest.approx(0.05, rel=1e-3)


def test_augmented_system_matches_explicit_law(lme_design):
    g2, cfg, _, gains, cl = lme_design
    rng = np.random.default_rng(7)
    r = rng.standard_normal(300 + cfg.n_c)
    e_aug = simulate_closed_loop(cl, r)
    tr = _nominal_loop(g2, gains, r, estimate=False)
    np.testing.assert_allclose(tr.y - r[: tr.y.size], e_aug, atol=1e-12)


@pytest.mark.parametrize("freq", [20.0, 300.0, 1500.0])
def test_error_gain_predicts_sinusoid_tracking(lme_design, freq):
    g2, cfg, _, gains, cl = lme_design
    n = 6000
    k = np.arange(n + cfg.n_c)
    r = np.sin(2 * np.pi * freq * k / FS)
    tr = _nominal_loop(g2, gains, r, estimate=False)
    e = tr.y - r[:n]
    tail = slice(n // 2, n)
    measured = np.sqrt(2 * np.mean(e[tail] ** 2))
    predicted = abs(error_response(cl, cfg, [freq]).values[0])
    assert measured == pytest.approx(predicted, rel=0.02)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31), rho=st.floats(1e-4, 1e3), n_c=st.integers(1, 8))
def test_hessian_is_positive_definite(seed, rho, n_c):
    rng = np.random.default_rng(seed)
    g = random_stable(rng, 3)
    cfg = MpcConfig(n_c + 6, n_c, rho)
    _, M = cost_hessian(build_prediction(g, cfg), cfg)
    np.testing.assert_allclose(M, M.T, rtol=0, atol=1e-12 * np.abs(M).max())
    assert np.linalg.eigvalsh(M).min() >= rho * (1 - 1e-9)


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_unconstrained_optimum(seed):
    rng = np.random.default_rng(seed)
    g = random_stable(rng, 3)
    cfg = MpcConfig(10, 4, 0.1)
    pred = build_prediction(g, cfg)
    gains = control_gains(pred, cfg)
    x, u = rng.standard_normal(3), float(rng.standard_normal())
    R = rng.standard_normal(4)
    delta = np.tile(rng.standard_normal(3) * 0.1, cfg.n_p)
    du = optimal_increments(pred, cfg, x, u, R, delta)
    j0 = cost(pred, cfg, du, x, u, R, delta)
    for _ in range(100):
        d = rng.standard_normal(4)
        assert j0 <= cost(pred, cfg, du + 1e-3 * d, x, u, R, delta)
    # the explicit law is the first optimal move
    u_next = gains.m1 @ x + gains.m2 * u + gains.m3 @ R + gains.m4_sum @ delta[:3]
    assert u_next == pytest.approx(u + du[0], rel=1e-9, abs=1e-12)
