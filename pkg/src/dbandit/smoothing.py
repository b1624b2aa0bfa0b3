"""Gaussian smoothing and the four gradient-feedback oracles.

All bandit estimators perturb with standard normal directions ``u`` and use
the same smoothing radius ``mu``:

* ``one_point``:  ``u/mu * f_k(x + mu u)``
* ``two_point``:  ``u/mu * (f_k(x + mu u) - f_k(x))``
* ``residual``:   ``u/mu * (f_k(x + mu u) - f_{k-1}(x' + mu' u'))`` where the
  second value is cached from the previous round; the very first call
  returns zero and only fills the cache.
* ``full``:       the exact gradient (no function queries).

Perturbed points are not projected back onto the feasible set and
estimates are not clipped.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import CapabilityError, UsageError

__all__ = [
    "EstimatorKind",
    "ResidualMemory",
    "QueryCounter",
    "query_count",
    "smoothed_value",
    "smoothed_value_with_error",
    "estimate_gradient",
    "estimate_batch",
    "sample_estimates",
]


class EstimatorKind(str, Enum):
    FULL = "full"
    ONE_POINT = "one_point"
    TWO_POINT = "two_point"
    RESIDUAL = "residual"

    @property
    def is_bandit(self):
        return self is not EstimatorKind.FULL


_QUERIES = {
    EstimatorKind.FULL: 0,
    EstimatorKind.ONE_POINT: 1,
    EstimatorKind.TWO_POINT: 2,
    EstimatorKind.RESIDUAL: 1,
}


def query_count(kind):
    """Function queries per agent per round."""
    return _QUERIES[EstimatorKind(kind)]


@dataclass(frozen=True)
class ResidualMemory:
    """Cached perturbed value from the previous round.

    Fields hold a scalar/``(d,)`` vector for one agent, or ``(n,)``/``(n, d)``
    arrays for a batch.
    """

    previous_value: object = None
    previous_direction: object = None
    previous_mu: float = None
    initialized: bool = False


class QueryCounter:
    """Wraps a batch oracle and counts rows queried."""

    def __init__(self, fn):
        self._fn = fn
        self.calls = 0

    def __call__(self, points):
        points = np.asarray(points)
        self.calls += int(np.prod(points.shape[:-1], dtype=int))
        return self._fn(points)


def smoothed_value_with_error(process, i, k, x, mu, samples, rng):
    """Monte-Carlo estimate of ``E[f_{i,k}(x + mu u)]`` and its standard error."""
    if mu <= 0:
        raise UsageError("mu must be positive")
    if samples < 1:
        raise UsageError("need at least one sample")
    x = np.asarray(x, dtype=float)
    u = rng.standard_normal((int(samples), x.size))
    vals = np.asarray(process.evaluate(i, k, x + mu * u), dtype=float).reshape(-1)
    se = float(vals.std(ddof=1) / np.sqrt(vals.size)) if vals.size > 1 else float("inf")
    return float(vals.mean()), se


def smoothed_value(process, i, k, x, mu, samples, rng):
    return smoothed_value_with_error(process, i, k, x, mu, samples, rng)[0]


def estimate_batch(kind, oracle, X, mu, U, memory, gradient_oracle=None):
    """Gradient estimates for a stack of points.

    Parameters
    ----------
    kind : EstimatorKind
    oracle : callable
        Maps an ``(m, d)`` array to ``(m,)`` loss values, row ``r`` evaluated
        with the loss belonging to row ``r``.
    X : ndarray, shape (m, d)
        Current decisions.
    mu : float
        Smoothing radius for this round.
    U : ndarray, shape (m, d)
        Fresh standard normal directions (ignored for ``full``).
    memory : ResidualMemory
        Batch memory; only read and replaced by ``residual``.
    gradient_oracle : callable, optional
        Maps ``(m, d)`` to ``(m, d)`` exact gradients; required for ``full``.

    Returns
    -------
    G : ndarray, shape (m, d)
    memory : ResidualMemory
    """
    kind = EstimatorKind(kind)
    if kind is EstimatorKind.FULL:
        if gradient_oracle is None:
            raise CapabilityError("full-gradient feedback needs an analytic gradient")
        return np.asarray(gradient_oracle(X), dtype=float), memory
    if not mu > 0:
        raise UsageError(f"bandit estimators need mu > 0, got {mu}")
    value = np.asarray(oracle(X + mu * U), dtype=float)
    if kind is EstimatorKind.ONE_POINT:
        return U * (value / mu)[:, None], memory
    if kind is EstimatorKind.TWO_POINT:
        base = np.asarray(oracle(X), dtype=float)
        return U * ((value - base) / mu)[:, None], memory
    if memory.initialized:
        G = U * ((value - memory.previous_value) / mu)[:, None]
    else:
        G = np.zeros_like(X)
    return G, ResidualMemory(value, U, float(mu), True)


def estimate_gradient(kind, process, i, k, x, mu, memory, rng):
    """One agent's gradient estimate at round ``k``.

    Returns ``(g, memory)``; ``memory`` is the updated cache for
    ``residual`` and the input unchanged otherwise.
    """
    kind = EstimatorKind(kind)
    x = np.asarray(x, dtype=float)[None]
    d = x.shape[1]
    if kind is EstimatorKind.FULL:
        process._require_gradient()
        g, _ = estimate_batch(kind, None, x, mu, None, memory,
                              gradient_oracle=lambda p: process.gradient(i, k, p))
        return g[0], memory
    u = rng.standard_normal((1, d))
    batch = memory
    if kind is EstimatorKind.RESIDUAL and memory.initialized:
        batch = ResidualMemory(np.atleast_1d(memory.previous_value),
                               np.atleast_2d(memory.previous_direction),
                               memory.previous_mu, True)
    g, new = estimate_batch(kind, lambda p: process.evaluate(i, k, p), x, mu, u, batch)
    if kind is EstimatorKind.RESIDUAL:
        new = ResidualMemory(float(new.previous_value[0]), new.previous_direction[0],
                             new.previous_mu, True)
    return g[0], new


def sample_estimates(kind, fn, x, mu, trials, rng, x_prev=None, mu_prev=None, fn_prev=None):
    """Many independent one-round draws of an estimator at a fixed point.

    For ``residual`` the cached value is ``fn_prev(x_prev + mu_prev u')``
    with its own fresh direction ``u'`` per trial (``fn_prev`` defaults to
    ``fn``, i.e. a static loss).  ``fn`` maps ``(m, d)`` to ``(m,)``.

    Returns an array of shape ``(trials, d)``.
    """
    kind = EstimatorKind(kind)
    x = np.asarray(x, dtype=float)
    d = x.size
    X = np.broadcast_to(x, (trials, d))
    memory = ResidualMemory()
    if kind is EstimatorKind.RESIDUAL:
        x_prev = x if x_prev is None else np.asarray(x_prev, dtype=float)
        mu_prev = mu if mu_prev is None else mu_prev
        fn_prev = fn if fn_prev is None else fn_prev
        u_prev = rng.standard_normal((trials, d))
        memory = ResidualMemory(np.asarray(fn_prev(x_prev + mu_prev * u_prev), dtype=float),
                                u_prev, mu_prev, True)
    U = rng.standard_normal((trials, d))
    G, _ = estimate_batch(kind, fn, X, mu, U, memory)
    return G
