import numpy as np
import pytest

from topohedge.errors import ConfigurationError, NumericError, ShapeError
from topohedge.network import (
    PolicyParams,
    PolicyState,
    backward,
    forward,
    init_params,
    policy_step,
    unroll_episode,
)

from gradcheck import max_relative_error, numeric_grads


def small_params(seed, feature_dim=3, width=4, n_cells=2, scale=1.0):
    p = init_params(feature_dim, seed, width=width, n_cells=n_cells, allow_any_dim=True)
    rng = np.random.default_rng(seed + 1000)
    for arr in p.tensors.values():
        arr += scale * rng.normal(0, 0.3, size=arr.shape)
    return p


def zero_params(feature_dim=3):
    p = init_params(feature_dim, 0)
    for arr in p.tensors.values():
        arr[...] = 0.0
    return p


def test_init_is_deterministic_and_shaped():
    a, b = init_params(5, 42), init_params(5, 42)
    assert a.names() == b.names()
    for k in a.names():
        np.testing.assert_array_equal(a[k], b[k])
    assert a["feat_W"].shape == (5, 32)
    assert a["lstm3_W"].shape == (64, 128)
    assert a["head_W"].shape == (32, 1)
    assert init_params(3, 0)["feat_W"].shape == (3, 32)
    c = init_params(5, 43)
    assert not np.array_equal(a["feat_W"], c["feat_W"])


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_init_within_glorot_bounds(seed):
    p = init_params(5, seed)
    for name, arr in p.tensors.items():
        if arr.ndim == 2:
            bound = np.sqrt(6.0 / (arr.shape[0] + arr.shape[1]))
            assert np.all(np.abs(arr) <= bound)
            assert np.abs(arr).max() > 0.5 * bound
    for k in range(4):
        b = p[f"lstm{k}_b"]
        np.testing.assert_array_equal(b[32:64], 1.0)
        assert np.all(b[:32] == 0) and np.all(b[64:] == 0)


def test_unsupported_feature_dim():
    with pytest.raises(ConfigurationError):
        init_params(4, 0)


def test_zero_network_outputs_zero():
    p = zero_params()
    a, _ = policy_step(p, [1.0, 0.02, 0.1], 0.7, PolicyState.zeros(4, 32))
    assert a == 0.0
    assert np.all(unroll_episode(p, np.random.default_rng(0).normal(size=(50, 3))) == 0.0)


def test_blocked_action_path():
    p = init_params(3, 5)
    p.tensors["act_W"][...] = 0.0
    st = PolicyState.zeros(4, 32)
    a1, _ = policy_step(p, [1.0, 0.02, 0.1], -3.0, st)
    a2, _ = policy_step(p, [1.0, 0.02, 0.1], 8.0, st)
    assert a1 == a2


def test_single_step_unroll_equals_policy_step():
    p = init_params(5, 3)
    x = np.array([[1.01, 0.03, 0.0, 0.2, 0.1]])
    a, _ = policy_step(p, x[0], 0.0, PolicyState.zeros(4, 32))
    assert unroll_episode(p, x)[0] == a


def test_unroll_matches_sequential_steps():
    p = init_params(5, 3)
    x = np.random.default_rng(2).normal(size=(30, 5))
    st = PolicyState.zeros(4, 32)
    prev = 0.25
    seq = []
    for t in range(30):
        prev, st = policy_step(p, x[t], prev, st)
        seq.append(prev)
    # batched and single-row matmuls may round differently in the last bit
    np.testing.assert_allclose(unroll_episode(p, x, initial_action=0.25), seq, rtol=1e-13, atol=1e-15)


def test_time_order_matters():
    p = init_params(3, 9)
    x = np.random.default_rng(3).normal(size=(12, 3))
    y = x.copy()
    y[[2, 7]] = y[[7, 2]]
    assert not np.allclose(unroll_episode(p, x), unroll_episode(p, y))


def test_state_isolation_and_determinism():
    p = init_params(3, 1)
    rng = np.random.default_rng(5)
    e1, e2 = rng.normal(size=(2, 20, 3))
    first = [unroll_episode(p, e1), unroll_episode(p, e2)]
    second = [unroll_episode(p, e2), unroll_episode(p, e1)]
    np.testing.assert_array_equal(first[0], second[1])
    np.testing.assert_array_equal(first[1], second[0])
    both, _ = forward(p, np.stack([e1, e2]))
    swapped, _ = forward(p, np.stack([e2, e1]))
    np.testing.assert_array_equal(both, swapped[::-1])
    np.testing.assert_allclose(both[0], first[0], rtol=1e-13, atol=1e-15)
    np.testing.assert_array_equal(forward(p, np.stack([e1, e2]))[0], both)


def test_bounded_internals():
    p = small_params(0, width=8, n_cells=4, scale=1.0)
    x = np.random.default_rng(0).normal(0, 1, size=(6, 25, 3))
    _, cache = forward(p, x, keep_cache=True)
    for step in cache["steps"]:
        for sig, tc in zip(step["sig"], step["tc"]):
            assert np.all((sig > 0) & (sig < 1))
            assert np.all(np.abs(tc) < 1)
        assert np.all(np.abs(step["h_top"]) < 1)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_action_jacobian_matches_finite_differences(seed):
    p = small_params(seed, feature_dim=5, width=4, n_cells=4, scale=0.3)
    x = np.random.default_rng(seed).normal(size=(1, 1, 5))
    _, cache = forward(p, x, keep_cache=True, initial_action=0.4)
    analytic = backward(p, cache, np.ones((1, 1)))
    numeric = numeric_grads(lambda q: forward(q, x, initial_action=0.4)[0][0, 0], p)
    assert max_relative_error(analytic, numeric) < 1e-5


@pytest.mark.parametrize("seed", range(3))
def test_episode_gradient_matches_finite_differences(seed):
    p = small_params(seed, feature_dim=3, width=4, n_cells=4, scale=0.5)
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(3, 10, 3))
    w = rng.normal(size=(3, 10))
    _, cache = forward(p, x, keep_cache=True)
    analytic = backward(p, cache, w)
    numeric = numeric_grads(lambda q: float(np.sum(forward(q, x)[0] * w)), p)
    assert max_relative_error(analytic, numeric) < 1e-5


def test_checkpoint_round_trip_is_bit_identical(tmp_path):
    p = init_params(5, 11)
    p.tensors["feat_W"] *= np.pi  # awkward mantissas
    f = tmp_path / "model.json"
    p.save(f)
    q = PolicyParams.load(f)
    assert (q.feature_dim, q.width, q.n_cells) == (5, 32, 4)
    x = np.random.default_rng(0).normal(size=(40, 5))
    np.testing.assert_array_equal(unroll_episode(p, x), unroll_episode(q, x))
    for k in p.names():
        np.testing.assert_array_equal(p[k], q[k])


def test_input_errors():
    p = init_params(3, 0)
    with pytest.raises(ShapeError):
        unroll_episode(p, np.ones((5, 4)))
    with pytest.raises(NumericError):
        unroll_episode(p, np.array([[1.0, np.nan, 0.0]]))
    with pytest.raises(ShapeError):
        policy_step(p, [1.0, 2.0], 0.0, PolicyState.zeros(4, 32))
    with pytest.raises(NumericError):
        policy_step(p, [1.0, 2.0, 3.0], np.inf, PolicyState.zeros(4, 32))
