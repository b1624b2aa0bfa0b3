"""Distributed online projected gradient descent with bandit feedback.

Each round every agent forms a gradient estimate at its decision, takes a
local step, and the swarm mixes the stepped points through the round's
weight matrix before projecting back onto the feasible set::

    y_i      = x_i - alpha_k * g_i
    x_i(new) = P[ sum_j W_k[i, j] * y_j ]

Rounds are synchronous: mixing uses every agent's ``y`` from the same round.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, DivergenceError, UsageError
from .graph import weight_matrix_at
from .metrics import RegretLedger, consensus_error, per_round_minimizer, stationarity_benchmark
from .smoothing import EstimatorKind, QueryCounter, ResidualMemory, estimate_batch, query_count
from .streams import Purpose, stream

__all__ = [
    "Schedule",
    "AlgorithmConfig",
    "AgentState",
    "SwarmState",
    "StepRecord",
    "theorem_constant_M",
    "appendix_constant_M",
    "initial_state",
    "step",
    "run",
]


@dataclass(frozen=True)
class Schedule:
    """``scale / (k + offset) ** exponent``; ``exponent = 0`` gives a constant."""

    scale: float
    exponent: float = 0.0
    offset: float = 0.0

    def __post_init__(self):
        if not (np.isfinite(self.scale) and self.scale > 0):
            raise UsageError(f"schedule scale must be positive, got {self.scale}")
        if self.exponent < 0:
            raise UsageError("schedule exponent must be >= 0 (non-increasing)")
        if self.offset <= -1:
            raise UsageError("schedule offset must exceed -1 so k + offset > 0 for k >= 1")

    @classmethod
    def constant(cls, value):
        return cls(float(value))

    @classmethod
    def power(cls, scale, exponent, offset=0.0):
        return cls(float(scale), float(exponent), float(offset))

    @classmethod
    def theorem_step(cls, M, a):
        """Step size ``1 / (2 M k^a)``."""
        return cls(1.0 / (2.0 * M), float(a))

    def __call__(self, k):
        if self.exponent == 0:
            return self.scale
        return self.scale / (k + self.offset) ** self.exponent

    def to_config(self):
        if self.exponent == 0:
            return {"kind": "constant", "value": self.scale}
        return {"kind": "power", "scale": self.scale, "exponent": self.exponent,
                "offset": self.offset}


def theorem_constant_M(d, n, big_gamma, gamma, L0):
    """``4 sqrt(3d) n Gamma L0 gamma / (1 - gamma)``."""
    if not 0 < gamma < 1:
        raise UsageError(f"gamma must lie in (0, 1), got {gamma}")
    return 4.0 * np.sqrt(3.0 * d) * n * big_gamma * L0 * gamma / (1.0 - gamma)


def appendix_constant_M(d, n, big_gamma, gamma, L0):
    """Alternative constant ``sqrt(3d) (8 + 6 n Gamma) L0 / (gamma (1 - gamma))``."""
    if not 0 < gamma < 1:
        raise UsageError(f"gamma must lie in (0, 1), got {gamma}")
    return np.sqrt(3.0 * d) * (8.0 + 6.0 * n * big_gamma) * L0 / (gamma * (1.0 - gamma))


@dataclass(frozen=True)
class AlgorithmConfig:
    """Run parameters.

    ``init`` is ``"origin"`` (every agent at the projection of the origin),
    ``"uniform"`` (independent uniform draws over the set's bounding box,
    projected), or an explicit ``(n, d)`` array.
    """

    estimator: EstimatorKind
    alpha: Schedule
    mu: Schedule
    horizon: int
    regret: str = "convex"
    tracked_agent: int = 1
    init: object = "origin"
    minimizer_method: str = "analytic"
    M_override: float = None

    def __post_init__(self):
        object.__setattr__(self, "estimator", EstimatorKind(self.estimator))


@dataclass(frozen=True)
class AgentState:
    x: np.ndarray
    memory: ResidualMemory
    last_estimate: np.ndarray


@dataclass
class SwarmState:
    """Struct-of-arrays state of all agents; row ``i`` is agent ``i + 1``."""

    X: np.ndarray
    memory: ResidualMemory = field(default_factory=ResidualMemory)
    last_estimate: np.ndarray = None

    def agent(self, i):
        """Per-agent view (1-based)."""
        m = self.memory
        mem = m
        if m.initialized:
            mem = ResidualMemory(float(m.previous_value[i - 1]), m.previous_direction[i - 1],
                                 m.previous_mu, True)
        g = None if self.last_estimate is None else self.last_estimate[i - 1]
        return AgentState(self.X[i - 1].copy(), mem, g)


@dataclass
class StepRecord:
    k: int
    X: np.ndarray
    G: np.ndarray
    Y: np.ndarray
    X_next: np.ndarray
    fn_queries: int
    grad_queries: int


def initial_state(config, set, n, seed):
    init = config.init
    if isinstance(init, str):
        if init == "origin":
            X = np.tile(set.project(np.zeros(set.dim)), (n, 1))
        elif init == "uniform":
            lower, upper = set.bounds()
            X = set.project(stream(seed, Purpose.INIT).uniform(lower, upper, size=(n, set.dim)))
        else:
            raise ConfigError(f"unknown init {init!r}")
    else:
        X = np.array(init, dtype=float)
        if X.shape != (n, set.dim):
            raise ConfigError(f"explicit init has shape {X.shape}, expected {(n, set.dim)}")
        if not np.all(set.contains(X, tol=1e-12)):
            raise ConfigError("explicit init is not feasible")
    return SwarmState(X)


def step(state, k, graph, losses, set, config, seed, directions=None):
    """Advance the swarm by one synchronous round.

    ``directions`` overrides the ``(n, d)`` normal draws, which otherwise
    come from the stream keyed by ``(seed, DIRECTIONS, k)``.
    """
    kind = config.estimator
    X = state.X
    n, d = X.shape
    if directions is None:
        directions = stream(seed, Purpose.DIRECTIONS, k).standard_normal((n, d))
    fn = QueryCounter(lambda P: losses.evaluate_all(k, P))
    grad = QueryCounter(lambda P: losses.gradient_all(k, P))
    with np.errstate(invalid="ignore", over="ignore"):  # non-finite G is reported below
        G, memory = estimate_batch(kind, fn, X, config.mu(k), directions, state.memory,
                                   gradient_oracle=grad if losses.has_gradient else None)
    if fn.calls != n * query_count(kind):
        raise AssertionError(f"{kind.value}: {fn.calls} queries, expected {n * query_count(kind)}")
    if not np.all(np.isfinite(G)):
        raise DivergenceError(k, "gradient estimate")
    Y = X - config.alpha(k) * G
    X_next = set.project(weight_matrix_at(graph, k) @ Y)
    record = StepRecord(k, X, G, Y, X_next, fn.calls, grad.calls)
    return SwarmState(X_next, memory, G), record


def _check(config, graph, losses, set):
    if config.horizon < 1:
        raise ConfigError("horizon must be >= 1")
    if graph.n != losses.n:
        raise ConfigError(f"graph has {graph.n} agents but losses have {losses.n}")
    if losses.d != set.dim:
        raise ConfigError(f"losses live in R^{losses.d} but the set in R^{set.dim}")
    if not 1 <= config.tracked_agent <= losses.n:
        raise ConfigError(f"tracked agent {config.tracked_agent} out of range")
    if losses.last_round is not None and losses.last_round < config.horizon:
        raise ConfigError(f"losses only defined up to round {losses.last_round}")
    if config.regret not in ("convex", "nonconvex"):
        raise ConfigError(f"unknown regret kind {config.regret!r}")
    if config.estimator is EstimatorKind.FULL and not losses.has_gradient:
        raise ConfigError("full-gradient feedback needs analytic gradients")
    if config.regret == "nonconvex" and not losses.has_gradient:
        raise ConfigError("nonconvex regret needs analytic gradients")


def run(config, graph, losses, set, seed, on_round=None):
    """Run ``config.horizon`` rounds and return the regret ledger.

    ``on_round(record)`` is called after every round if given.
    """
    _check(config, graph, losses, set)
    state = initial_state(config, set, losses.n, seed)
    ledger = RegretLedger(config.regret, config.tracked_agent)
    j = config.tracked_agent - 1
    for k in range(1, config.horizon + 1):
        new_state, rec = step(state, k, graph, losses, set, config, seed)
        x_j = rec.X[j]
        tracked = float(losses.global_value(k, x_j))
        if config.regret == "convex":
            x_star = per_round_minimizer(losses, k, set, config.minimizer_method)
            benchmark = float(losses.global_value(k, x_star))
            increment = tracked - benchmark
        else:
            g, _, benchmark = stationarity_benchmark(losses, k, x_j, set)
            increment = float(g @ (x_j - set.linear_minimize(g)))
        if not np.isfinite(increment):
            raise DivergenceError(k, "regret increment")
        ledger.append(k, rec.X, losses.evaluate_all(k, rec.X), tracked, benchmark, increment,
                      consensus_error(rec.X), rec.fn_queries, rec.grad_queries)
        if on_round is not None:
            on_round(rec)
        state = new_state
    return ledger


def with_estimator(config, kind):
    return replace(config, estimator=EstimatorKind(kind))
