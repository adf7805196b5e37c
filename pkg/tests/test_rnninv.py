import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bandmpc.config import default_weights_path
from bandmpc.rnninv import (
    DoubleRateExecutor,
    DoubleRateState,
    IdentityInverse,
    RnnInversionModel,
    WeightFileError,
    load_weights,
    random_model,
    run,
    run_double_rate,
    save_weights,
    step,
    step_double_rate,
)


def zero_weights(n, b3):
    return RnnInversionModel(np.zeros((n, n)), np.zeros(n), np.zeros(n), np.ones(n), b3, 10000.0)


def test_zero_weights_give_constant_output():
    m = zero_weights(3, 0.7)
    x = m.zero_state()
    for u in [1.0, -2.0, 5.0]:
        x, y = step(m, x, u)
        assert y == 0.7
        assert np.all(x == 0)


def test_scalar_hand_recursion():
    m = RnnInversionModel([[0.5]], [1.0], [0.0], [1.0], 0.0, 10000.0)
    y = run(m, [1.0, 1.0])
    np.testing.assert_allclose(y, [0.0, np.tanh(1.0)], rtol=0, atol=0)


def test_state_in_open_unit_interval_after_one_step(rng):
    m = random_model(6, rng, scale=3.0)
    x, _ = step(m, rng.uniform(-1, 1, 6), rng.standard_normal())
    assert np.all(np.abs(x) < 1)
    # tanh rounds to exactly +-1 in floating point for large arguments
    x, _ = step(m, x, 1e3)
    assert np.all(np.abs(x) <= 1)


def test_non_finite_input_rejected(rng):
    m = random_model(2, rng)
    with pytest.raises(ValueError):
        step(m, m.zero_state(), float("nan"))


def test_double_rate_interleaving(rng):
    m = random_model(5, rng)
    u = rng.standard_normal(4)
    y = run_double_rate(m, u)
    np.testing.assert_array_equal(y[0::2], run(m, u[0::2]))
    np.testing.assert_array_equal(y[1::2], run(m, u[1::2]))


def test_double_rate_constant_input_lanes_agree(rng):
    m = random_model(4, rng)
    y = run_double_rate(m, np.full(40, 0.3))
    np.testing.assert_array_equal(y[0::2], y[1::2])


def test_interleaved_accuracy_bound(rng):
    # each lane within eps of its target keeps the merged error within eps
    m = random_model(4, rng)
    u = rng.standard_normal(200)
    target = run_double_rate(m, u)
    perturbed = RnnInversionModel(m.W1, m.B1, m.B2, m.W2, m.B3 + 1e-3, m.train_rate)
    y = run_double_rate(perturbed, u)
    eps = max(np.abs(y[0::2] - target[0::2]).max(), np.abs(y[1::2] - target[1::2]).max())
    assert np.abs(y - target).max() <= eps


def test_double_rate_state_is_not_mutated(rng):
    m = random_model(3, rng)
    s0 = DoubleRateState.zeros(3)
    s1, _ = step_double_rate(m, s0, 1.0)
    assert s0.count == 0 and np.all(s0.lanes[0] == 0)
    assert s1.count == 1 and not np.all(s1.lanes[0] == 0) and np.all(s1.lanes[1] == 0)


def test_executor_reset_and_rate(rng):
    m = random_model(3, rng, train_rate=10000.0)
    ex = DoubleRateExecutor(m)
    assert ex.rate == 20000.0
    first = [ex(v) for v in (0.2, 0.4, 0.1)]
    ex.reset()
    assert [ex(v) for v in (0.2, 0.4, 0.1)] == first


def test_identity_inverse():
    assert IdentityInverse()(1.25) == 1.25


def test_weight_round_trip(tmp_path, rng):
    m = random_model(5, rng)
    path = tmp_path / "w.json"
    save_weights(m, path)
    again = load_weights(path)
    for name in ("W1", "B1", "B2", "W2"):
        np.testing.assert_array_equal(getattr(again, name), getattr(m, name))
    assert again.B3 == m.B3 and again.train_rate == m.train_rate


def test_train_rate_10k_runs_at_20k(tmp_path, rng):
    rec = random_model(2, rng, train_rate=10000.0).to_dict()
    path = tmp_path / "w.json"
    path.write_text(json.dumps(rec))
    assert load_weights(path).double_rate == 20000.0


@pytest.mark.parametrize(
    "field, value, message",
    [
        ("n", 3, "'n'"),
        ("w2", [1.0, 2.0, 3.0], "'w2'"),
        ("b1", [1.0], "'b1'"),
        ("b2", [0.0, float("nan")], "'b2'"),
        ("w1", [[1.0, 0.0]], "'w1'"),
        ("fs", -5.0, "'fs'"),
    ],
)
def test_schema_errors_name_the_field(field, value, message, rng):
    rec = random_model(2, rng).to_dict()
    rec[field] = value
    with pytest.raises(WeightFileError, match=message):
        RnnInversionModel.from_dict(rec)


def test_missing_field_and_bad_json(tmp_path, rng):
    rec = random_model(2, rng).to_dict()
    del rec["b3"]
    with pytest.raises(WeightFileError, match="b3"):
        RnnInversionModel.from_dict(rec)
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(WeightFileError):
        load_weights(bad)


def test_shipped_weights_load():
    m = load_weights(default_weights_path())
    assert m.n == 4
    assert m.double_rate == 20000.0


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31), n=st.integers(1, 8))
def test_double_rate_equals_two_single_rate_runs(seed, n):
    rng = np.random.default_rng(seed)
    m = random_model(n, rng)
    u = rng.standard_normal(int(rng.integers(1, 300)))
    y = run_double_rate(m, u)
    np.testing.assert_array_equal(y[0::2], run(m, u[0::2]))
    np.testing.assert_array_equal(y[1::2], run(m, u[1::2]))


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_step_is_pure(seed):
    rng = np.random.default_rng(seed)
    m = random_model(4, rng)
    x = rng.uniform(-1, 1, 4)
    x_copy = x.copy()
    a = step(m, x, 0.5)
    b = step(m, x, 0.5)
    np.testing.assert_array_equal(a[0], b[0])
    assert a[1] == b[1]
    np.testing.assert_array_equal(x, x_copy)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_contraction_from_different_initial_states(seed):
    rng = np.random.default_rng(seed)
    m = random_model(5, rng, scale=0.8)
    u = rng.uniform(-2, 2, 100)
    xa, xb = rng.uniform(-1, 1, 5), rng.uniform(-1, 1, 5)
    dist = [np.linalg.norm(xa - xb)]
    for v in u:
        xa, _ = step(m, xa, v)
        xb, _ = step(m, xb, v)
        dist.append(np.linalg.norm(xa - xb))
    dist = np.array(dist)
    assert np.all(np.diff(dist) <= 1e-15)
    assert dist[-1] < 0.8**100 * dist[0] + 1e-12
