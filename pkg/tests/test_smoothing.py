import numpy as np
import pytest

from dbandit.errors import CapabilityError, UsageError
from dbandit.losses import Custom, StaticLoss, TargetTracking
from dbandit.smoothing import (EstimatorKind, QueryCounter, ResidualMemory, estimate_batch,
                               estimate_gradient, query_count, sample_estimates,
                               smoothed_value, smoothed_value_with_error)

C = np.array([1.0, -2.0])
linear = StaticLoss(lambda x: x @ C, 2, grad=lambda x: np.broadcast_to(C, x.shape))
square = StaticLoss(lambda x: (x * x).sum(-1), 2, grad=lambda x: 2 * x)


def test_smoothing_linear_is_exact(rng):
    x = np.array([0.3, 0.9])
    mean, se = smoothed_value_with_error(linear, 1, 1, x, 0.5, 100_000, rng)
    assert abs(mean - x @ C) <= 4 * se


def test_smoothing_quadratic_adds_mu_squared_d(rng):
    x = np.array([0.3, 0.9])
    mean, se = smoothed_value_with_error(square, 1, 1, x, 0.5, 100_000, rng)
    assert abs(mean - (x @ x + 0.5)) <= 4 * se
    assert smoothed_value(square, 1, 1, x, 0.5, 10, rng) == pytest.approx(x @ x + 0.5, abs=2.0)


def test_smoothing_error_within_lipschitz_bound(rng):
    d = 2
    l1 = StaticLoss(lambda x: np.abs(x).sum(-1) / np.sqrt(d), d)  # L0 = 1
    for mu in (0.5, 0.1):
        x = rng.uniform(-1, 1, size=d)
        mean, se = smoothed_value_with_error(l1, 1, 1, x, mu, 50_000, rng)
        assert abs(mean - l1.evaluate(1, 1, x)) <= mu * np.sqrt(d) + 3 * se


def test_smoothing_rejects_bad_args(rng):
    with pytest.raises(UsageError):
        smoothed_value(square, 1, 1, [0.0, 0.0], 0.0, 10, rng)
    with pytest.raises(UsageError):
        smoothed_value(square, 1, 1, [0.0, 0.0], 0.1, 0, rng)


def test_query_counts():
    assert [query_count(k) for k in ("full", "one_point", "two_point", "residual")] == [0, 1, 2, 1]
    assert query_count(EstimatorKind.RESIDUAL) == 1


@pytest.mark.parametrize("kind, expected", [("one_point", 1), ("two_point", 2), ("residual", 1)])
def test_batch_queries_match_declared(kind, expected, rng):
    oracle = QueryCounter(lambda P: (P * P).sum(-1))
    X = rng.normal(size=(10, 2))
    mem = ResidualMemory()
    for _ in range(3):
        oracle.calls = 0
        _, mem = estimate_batch(kind, oracle, X, 0.1, rng.standard_normal((10, 2)), mem)
        assert oracle.calls == expected * 10


def test_full_gradient_no_function_queries():
    oracle = QueryCounter(lambda P: P.sum(-1))
    G, _ = estimate_batch("full", oracle, np.ones((3, 2)), 0.1, None, ResidualMemory(),
                          gradient_oracle=lambda P: 2 * P)
    assert oracle.calls == 0
    np.testing.assert_array_equal(G, 2 * np.ones((3, 2)))


def test_residual_first_call_is_zero(rng):
    x = np.array([0.5, 0.5])
    g, mem = estimate_gradient("residual", square, 1, 1, x, 0.1, ResidualMemory(), rng)
    np.testing.assert_array_equal(g, [0.0, 0.0])
    assert mem.initialized and mem.previous_mu == 0.1
    # the cached value is the perturbed query just made
    u = mem.previous_direction
    assert mem.previous_value == pytest.approx(square.evaluate(1, 1, x + 0.1 * u))


def test_residual_second_call_uses_cache(rng):
    x = np.array([0.5, 0.5])
    _, mem = estimate_gradient("residual", square, 1, 1, x, 0.1, ResidualMemory(), rng)
    state = rng.bit_generator.state
    g, mem2 = estimate_gradient("residual", square, 1, 2, x, 0.05, mem, rng)
    rng.bit_generator.state = state
    u = rng.standard_normal((1, 2))[0]
    expected = u / 0.05 * (square.evaluate(1, 2, x + 0.05 * u) - mem.previous_value)
    np.testing.assert_allclose(g, expected, rtol=1e-14)
    np.testing.assert_array_equal(mem2.previous_direction, u)


def test_one_and_two_point_formulas(rng):
    x = np.array([0.2, -0.4])
    state = rng.bit_generator.state
    g1, _ = estimate_gradient("one_point", square, 1, 1, x, 0.1, ResidualMemory(), rng)
    rng.bit_generator.state = state
    g2, _ = estimate_gradient("two_point", linear, 1, 1, x, 0.1, ResidualMemory(), rng)
    rng.bit_generator.state = state
    u = rng.standard_normal((1, 2))[0]
    np.testing.assert_allclose(g1, u / 0.1 * square.evaluate(1, 1, x + 0.1 * u), rtol=1e-14)
    np.testing.assert_allclose(g2, u * (u @ C), rtol=1e-10)


def test_full_gradient_single_agent(rng):
    losses = TargetTracking(5, noise_seed=0)
    x = np.array([0.1, 0.2])
    g, mem = estimate_gradient("full", losses, 3, 2, x, 0.1, ResidualMemory(), rng)
    np.testing.assert_array_equal(g, losses.gradient(3, 2, x))
    assert not mem.initialized


def test_full_gradient_capability_error(rng):
    c = Custom(1, 2, value=lambda i, k, x: x.sum())
    with pytest.raises(CapabilityError):
        estimate_gradient("full", c, 1, 1, np.zeros(2), 0.1, ResidualMemory(), rng)
    with pytest.raises(CapabilityError):
        estimate_batch("full", None, np.zeros((1, 2)), 0.1, None, ResidualMemory())


def test_bandit_needs_positive_mu(rng):
    with pytest.raises(UsageError):
        estimate_gradient("one_point", square, 1, 1, np.zeros(2), 0.0, ResidualMemory(), rng)
    with pytest.raises(ValueError):
        query_count("three_point")


@pytest.mark.parametrize("kind", ["residual", "two_point", "one_point"])
def test_unbiased_on_linear(kind, rng):
    N = 100_000
    fn = lambda P: P @ C
    G = sample_estimates(kind, fn, [0.4, 0.1], 0.1, N, rng)
    z = (G.mean(0) - C) / (G.std(0, ddof=1) / np.sqrt(N))
    assert np.abs(z).max() <= 4


def test_residual_unbiased_on_quadratic_with_moved_point(rng):
    N = 100_000
    A = np.array([[2.0, 0.5], [0.5, 1.0]])
    fn = lambda P: 0.5 * np.einsum("...i,ij,...j->...", P, A, P)
    x = np.array([0.4, -0.7])
    G = sample_estimates("residual", fn, x, 0.1, N, rng, x_prev=x + 0.02, mu_prev=0.2)
    z = (G.mean(0) - A @ x) / (G.std(0, ddof=1) / np.sqrt(N))
    assert np.abs(z).max() <= 4


def test_residual_beats_one_point_variance(rng):
    fn = lambda P: np.abs(P).sum(-1)
    x = np.array([0.5, 0.3])
    one = sample_estimates("one_point", fn, x, 0.01, 20_000, rng)
    res = sample_estimates("residual", fn, x, 0.01, 20_000, rng, x_prev=x - 1e-4, mu_prev=0.01)
    assert one.var(0).sum() > 10 * res.var(0).sum()
