"""Time-varying per-agent losses and their variation functionals.

Agents are numbered ``1..n`` and rounds start at ``1`` in the public API.
Each round's loss is a fixed function: any randomness (target coin flips,
additive noise) is drawn from streams keyed by the round, so repeated
queries within a round see the same function.

All families evaluate on stacks of points: ``evaluate(i, k, x)`` accepts
``x`` of shape ``(d,)`` or ``(m, d)``, and ``evaluate_all(k, X)`` evaluates
agent ``r + 1`` at row ``r`` of an ``(n, d)`` array.
"""

import numpy as np

from .errors import CapabilityError, UsageError
from .geometry import feasible_grid
from .streams import Purpose, stream

__all__ = [
    "LossProcess",
    "TargetTracking",
    "NonconvexCubicCosine",
    "Custom",
    "StaticLoss",
    "BENCHMARK_SENSORS",
    "advance_target",
    "theta",
    "theta_path",
    "big_theta",
    "path_length",
    "lipschitz_estimate",
    "loss_from_config",
]

BENCHMARK_SENSORS = np.array(
    [[1, 3], [2, 5], [5, 1], [2, 4], [3, 1], [2, 3], [2, 6], [4, 2], [1, 2], [1, 1]],
    dtype=float,
)
BENCHMARK_TARGET_START = (0.8, 0.95)


class LossProcess:
    """Base class.  Subclasses implement ``_values`` and optionally ``_grads``.

    ``_values(k, idx, x)`` takes 0-based agent indices ``idx`` broadcastable
    against ``x.shape[:-1]`` and returns loss values of that shape.
    """

    kind = "custom"
    n: int
    d: int
    last_round = None  # None: unbounded
    has_gradient = True

    # -- checks --------------------------------------------------------
    def _check_round(self, k):
        if k < 1 or (self.last_round is not None and k > self.last_round):
            raise UsageError(f"round {k} outside [1, {self.last_round or 'inf'}]")

    def _check_agent(self, i):
        if not 1 <= i <= self.n:
            raise UsageError(f"agent {i} outside [1, {self.n}]")

    def _points(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[-1:] != (self.d,):
            raise UsageError(f"point shape {x.shape} does not end in {self.d}")
        return x

    # -- per-agent -----------------------------------------------------
    def evaluate(self, i, k, x):
        self._check_agent(i)
        self._check_round(k)
        out = self._values(k, np.asarray(i - 1), self._points(x))
        return float(out) if np.ndim(out) == 0 else out

    def gradient(self, i, k, x):
        self._require_gradient()
        self._check_agent(i)
        self._check_round(k)
        return self._grads(k, np.asarray(i - 1), self._points(x))

    # -- whole swarm ---------------------------------------------------
    def evaluate_all(self, k, X):
        self._check_round(k)
        X = self._points(X)
        return self._values(k, np.arange(self.n), X)

    def gradient_all(self, k, X):
        self._require_gradient()
        self._check_round(k)
        return self._grads(k, np.arange(self.n), self._points(X))

    def global_value(self, k, x):
        """``f_k(x) = sum_i f_{i,k}(x)``."""
        self._check_round(k)
        x = self._points(x)
        idx = np.arange(self.n).reshape((self.n,) + (1,) * (x.ndim - 1))
        return self._values(k, idx, x[None]).sum(axis=0)

    def global_gradient(self, k, x):
        self._require_gradient()
        self._check_round(k)
        x = self._points(x)
        idx = np.arange(self.n).reshape((self.n,) + (1,) * (x.ndim - 1))
        return self._grads(k, idx, x[None]).sum(axis=0)

    def minimizer(self, k):
        """Known global minimiser of ``f_k``; families without one raise."""
        raise CapabilityError(f"{self.kind} has no analytic minimiser")

    def _require_gradient(self):
        if not self.has_gradient:
            raise CapabilityError(f"{self.kind} process has no analytic gradient")

    def _grads(self, k, idx, x):
        raise CapabilityError(f"{self.kind} process has no analytic gradient")

    def describe(self):
        return {"kind": self.kind, "n": self.n, "d": self.d}


def advance_target(position, k, q=None, rng=None):
    """One step of the slowly moving target.

    ``q`` is the Bernoulli(1/2) coin; it is drawn from ``rng`` when omitted.
    """
    if k < 1:
        raise UsageError("target recursion divides by k; need k >= 1")
    if q is None:
        if rng is None:
            raise UsageError("pass either the coin q or an rng to draw it")
        q = int(rng.integers(0, 2))
    x1, x2 = position
    return np.array(
        [
            x1 + (-1) ** q * np.sin(k / 50) / (10 * k),
            x2 - q * np.cos(k / 70) / (40 * k),
        ]
    )


class TargetTracking(LossProcess):
    """Sensors measure squared range to a moving target.

    ``f_{i,k}(x) = 1/4 (||x - s_i||^2 - z_{i,k})^2`` with
    ``z_{i,k} = ||x_k^* - s_i||^2``, so every local loss vanishes at the
    current target.

    Parameters
    ----------
    rounds : int
        Last round needed.  The target path is precomputed through round
        ``rounds + 1`` so successive differences over the horizon exist.
    noise_seed : int
        Seeds the coin flips of the target motion.
    sensors : array_like, optional
        ``(n, 2)`` sensor positions; defaults to the ten benchmark sensors.
    coins : array_like, optional
        Explicit coin sequence ``q_1, q_2, ...`` (overrides the seed).
    """

    kind = "target_tracking"

    def __init__(self, rounds, noise_seed=0, sensors=None, start=BENCHMARK_TARGET_START, coins=None):
        if rounds < 1:
            raise UsageError("rounds must be >= 1")
        self.sensors = np.array(BENCHMARK_SENSORS if sensors is None else sensors, dtype=float)
        self.n, self.d = self.sensors.shape
        self.noise_seed = int(noise_seed)
        self.last_round = int(rounds) + 1
        if coins is None:
            coins = stream(self.noise_seed, Purpose.TARGET_COIN).integers(0, 2, size=rounds)
        coins = np.asarray(coins, dtype=int)
        if coins.size < rounds:
            raise UsageError(f"need {rounds} coins, got {coins.size}")
        self.coins = coins[:rounds]
        path = [np.asarray(start, dtype=float)]
        for k in range(1, rounds + 1):
            path.append(advance_target(path[-1], k, self.coins[k - 1]))
        self.target_path = np.array(path)
        self.target_path.setflags(write=False)
        diff = self.target_path[:, None, :] - self.sensors[None]
        self._z = np.einsum("kij,kij->ki", diff, diff)

    def target(self, k):
        self._check_round(k)
        return self.target_path[k - 1].copy()

    def minimizer(self, k):
        return self.target(k)

    def _values(self, k, idx, x):
        r = x - self.sensors[idx]
        res = np.einsum("...j,...j->...", r, r) - self._z[k - 1][idx]
        return 0.25 * res * res

    def _grads(self, k, idx, x):
        r = x - self.sensors[idx]
        res = np.einsum("...j,...j->...", r, r) - self._z[k - 1][idx]
        return res[..., None] * r

    def describe(self):
        return {"kind": self.kind, "n": self.n, "d": self.d, "noise_seed": self.noise_seed}


class NonconvexCubicCosine(LossProcess):
    """Cubic-plus-cosine benchmark in two dimensions.

    ``f_{i,k}(x) = i/63 x1^3 + (i-1)/15 (x1^2 + x2^2) - 2(i-3)/3 r_{i,k} cos(x2)``
    with ``r_{i,k} = atan(k)/2 + noise_std * xi_{i,k} / 2`` and
    ``xi_{i,k}`` standard normal, drawn once per ``(i, k)``.
    """

    kind = "nonconvex_cubic_cosine"

    def __init__(self, n=10, noise_std=1.0, noise_seed=0, rounds=None):
        self.n = int(n)
        self.d = 2
        self.noise_std = float(noise_std)
        self.noise_seed = int(noise_seed)
        self.last_round = None if rounds is None else int(rounds) + 1
        self._r_cache = {}
        agents = np.arange(1, self.n + 1, dtype=float)
        self._cubic = agents / 63
        self._quad = (agents - 1) / 15
        self._cos = 2 * (agents - 3) / 3

    def r_tilde(self, k):
        """Per-agent ``r_{i,k}`` for round ``k`` as an ``(n,)`` array."""
        r = self._r_cache.get(k)
        if r is None:
            r = np.full(self.n, 0.5 * np.arctan(k))
            if self.noise_std:
                xi = stream(self.noise_seed, Purpose.LOSS_NOISE, k).standard_normal(self.n)
                r = r + 0.5 * self.noise_std * xi
            r.setflags(write=False)
            self._r_cache[k] = r
        return r

    def _values(self, k, idx, x):
        x1, x2 = x[..., 0], x[..., 1]
        c = self._cos[idx] * self.r_tilde(k)[idx]
        return self._cubic[idx] * x1**3 + self._quad[idx] * (x1 * x1 + x2 * x2) - c * np.cos(x2)

    def _grads(self, k, idx, x):
        x1, x2 = x[..., 0], x[..., 1]
        c = self._cos[idx] * self.r_tilde(k)[idx]
        g1 = 3 * self._cubic[idx] * x1 * x1 + 2 * self._quad[idx] * x1
        g2 = 2 * self._quad[idx] * x2 + c * np.sin(x2)
        return np.stack(np.broadcast_arrays(g1, g2), axis=-1)

    def describe(self):
        return {
            "kind": self.kind,
            "n": self.n,
            "d": self.d,
            "noise_std": self.noise_std,
            "noise_seed": self.noise_seed,
        }


class Custom(LossProcess):
    """Loss built from user callables.

    Parameters
    ----------
    n, d : int
    value : callable
        ``value(i, k, x) -> float`` with 1-based ``i`` and ``x`` of shape ``(d,)``.
    gradient : callable, optional
        ``gradient(i, k, x) -> (d,)`` array.
    minimizer : callable, optional
        ``minimizer(k) -> (d,)`` global minimiser of ``f_k``.
    """

    kind = "custom"

    def __init__(self, n, d, value, gradient=None, minimizer=None, rounds=None):
        self.n, self.d = int(n), int(d)
        self._value, self._gradient, self._minimizer = value, gradient, minimizer
        self.has_gradient = gradient is not None
        self.last_round = None if rounds is None else int(rounds)

    def _pointwise(self, idx, x):
        shape = np.broadcast_shapes(np.shape(idx), x.shape[:-1])
        return np.broadcast_to(idx, shape), np.broadcast_to(x, shape + x.shape[-1:]), shape

    def _values(self, k, idx, x):
        idx, x, shape = self._pointwise(idx, x)
        out = np.empty(shape)
        for pos in np.ndindex(shape):
            out[pos] = self._value(int(idx[pos]) + 1, k, x[pos])
        return out

    def _grads(self, k, idx, x):
        self._require_gradient()
        idx, x, shape = self._pointwise(idx, x)
        out = np.empty(x.shape)
        for pos in np.ndindex(shape):
            out[pos] = self._gradient(int(idx[pos]) + 1, k, x[pos])
        return out

    def minimizer(self, k):
        if self._minimizer is None:
            return super().minimizer(k)
        return np.asarray(self._minimizer(k), dtype=float)


def theta_path(process, i, k_max, grid):
    """Running ``theta_{i,k}`` for ``k = 1..k_max`` as an array.

    The supremum over the feasible set is replaced by a maximum over
    ``grid``, so each entry is a lower bound on the true value.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise UsageError("theta needs a non-empty grid")
    gaps = np.empty(k_max)
    prev = process.evaluate(i, 1, grid)
    for tau in range(1, k_max + 1):
        cur = process.evaluate(i, tau + 1, grid)
        gaps[tau - 1] = np.max(np.abs(cur - prev))
        prev = cur
    return np.maximum.accumulate(gaps)


def theta(process, i, k, grid):
    """Largest successive-loss gap of agent ``i`` over rounds ``1..k`` on ``grid``."""
    return float(theta_path(process, i, k, grid)[-1])


def big_theta(process, T, grid):
    """``T * sum_i theta_{i,T}``."""
    return T * sum(theta(process, i, T, grid) for i in range(1, process.n + 1))


def path_length(minimizers):
    """Total movement of a minimiser sequence.

    ``minimizers`` has shape ``(K, d)`` (one shared minimiser per round) or
    ``(K, n, d)`` (one per agent); the result sums consecutive Euclidean
    distances over rounds and agents.
    """
    m = np.asarray(minimizers, dtype=float)
    if m.shape[0] < 2:
        raise UsageError("path length needs at least two rounds")
    return float(np.linalg.norm(np.diff(m, axis=0), axis=-1).sum())


def lipschitz_estimate(process, set, rounds, pairs=2000, rng=None):
    """Empirical Lipschitz constant over random feasible pairs.

    Maximum of ``|f_{i,k}(x) - f_{i,k}(y)| / ||x - y||`` over all agents,
    the given rounds, and ``pairs`` random pairs drawn from a feasible grid.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    grid = feasible_grid(set, 4096)
    a = grid[rng.integers(0, len(grid), size=pairs)]
    b = grid[rng.integers(0, len(grid), size=pairs)]
    dist = np.linalg.norm(a - b, axis=1)
    keep = dist > 1e-9
    a, b, dist = a[keep], b[keep], dist[keep]
    best = 0.0
    for k in rounds:
        for i in range(1, process.n + 1):
            ratio = np.abs(process.evaluate(i, k, a) - process.evaluate(i, k, b)) / dist
            best = max(best, float(ratio.max()))
    return best


def loss_from_config(cfg, rounds, noise_seed):
    """Build a benchmark family from ``{"kind": ..., params...}``."""
    cfg = dict(cfg)
    kind = cfg.pop("kind", None)
    if kind == "target_tracking":
        return TargetTracking(rounds, noise_seed=noise_seed, sensors=cfg.get("sensors"),
                              start=cfg.get("start", BENCHMARK_TARGET_START))
    if kind == "nonconvex_cubic_cosine":
        return NonconvexCubicCosine(n=cfg.get("n", 10), noise_std=cfg.get("noise_std", 1.0),
                                    noise_seed=noise_seed, rounds=rounds)
    raise UsageError(f"unknown loss kind {kind!r} (custom losses are library-only)")


class StaticLoss(LossProcess):
    """Time-invariant loss shared by all agents, from a vectorised callable.

    ``fn`` maps an array of shape ``(..., d)`` to ``(...)``; ``grad`` (optional)
    maps it to ``(..., d)``.  Handy for test functions and Monte-Carlo checks.
    """

    kind = "static"

    def __init__(self, fn, d, grad=None, n=1, minimizer=None):
        self.n, self.d = int(n), int(d)
        self._fn, self._grad, self._min = fn, grad, minimizer
        self.has_gradient = grad is not None

    def _values(self, k, idx, x):
        return np.broadcast_to(self._fn(x), np.broadcast_shapes(np.shape(idx), x.shape[:-1]))

    def _grads(self, k, idx, x):
        self._require_gradient()
        shape = np.broadcast_shapes(np.shape(idx), x.shape[:-1]) + (self.d,)
        return np.broadcast_to(self._grad(x), shape)

    def minimizer(self, k):
        if self._min is None:
            return super().minimizer(k)
        return np.asarray(self._min, dtype=float)
