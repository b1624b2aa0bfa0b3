"""Regret bookkeeping: per-round increments, benchmarks and consensus error.

Two dynamic-regret flavours are supported.  ``convex`` compares the global
loss at the tracked agent's decision with the loss at the round's
minimiser.  ``nonconvex`` uses the stationarity gap
``<g, x_j> - min_{x in set} <g, x>`` with ``g`` the global gradient at
``x_j``, which is zero exactly at stationary points.
"""

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .errors import CapabilityError, UsageError
from .geometry import feasible_grid

__all__ = [
    "RegretLedger",
    "convex_regret_increment",
    "nonconvex_regret_increment",
    "stationarity_benchmark",
    "static_nonconvex_regret",
    "per_round_minimizer",
    "consensus_error",
    "CSV_HEADER_PREFIX",
]

CSV_HEADER_PREFIX = ("k", "agent")
CSV_HEADER_SUFFIX = ("loss", "regret_increment", "cum_regret", "consensus_error", "fn_queries")


def convex_regret_increment(losses, k, x_j, x_star):
    """``f_k(x_j) - f_k(x_star)`` with ``f_k`` the sum of local losses."""
    return float(losses.global_value(k, x_j) - losses.global_value(k, x_star))


def stationarity_benchmark(losses, k, x_j, set):
    """Return ``(g, <g, x_j>, min_{x in set} <g, x>)`` with ``g = grad f_k(x_j)``."""
    if not losses.has_gradient:
        raise CapabilityError("nonconvex regret needs analytic gradients")
    g = losses.global_gradient(k, x_j)
    x_lin = set.linear_minimize(g)
    return g, float(g @ x_j), float(g @ x_lin)


def nonconvex_regret_increment(losses, k, x_j, set):
    """Stationarity gap of the tracked decision; always ``>= 0``.

    Computed as ``<g, x_j - x_lin>`` rather than a difference of two inner
    products so rounding cannot push it below zero on a box.
    """
    x_j = np.asarray(x_j, dtype=float)
    g, _, _ = stationarity_benchmark(losses, k, x_j, set)
    return float(g @ (x_j - set.linear_minimize(g)))


def static_nonconvex_regret(gradients, decisions, set):
    """``sum_k <g_k, x_k> - min_{x in set} <sum_k g_k, x>``."""
    g = np.asarray(gradients, dtype=float)
    x = np.asarray(decisions, dtype=float)
    total = g.sum(axis=0)
    return float(np.einsum("kj,kj->", g, x) - total @ set.linear_minimize(total))


def consensus_error(decisions):
    """``sum_i ||x_i - mean||``."""
    X = np.asarray(decisions, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise UsageError("consensus error needs a non-empty (n, d) array")
    return float(np.linalg.norm(X - X.mean(axis=0), axis=1).sum())


def per_round_minimizer(losses, k, set, method="analytic", step=1e-3, tol=1e-8,
                        max_iter=10_000, grid_points=1024):
    """Minimiser of ``f_k`` over ``set``.

    ``analytic`` asks the loss family for its known minimiser and checks it
    is feasible.  ``grid_then_descent`` scans a feasible Sobol grid and polishes
    the best point with fixed-step projected gradient descent until the
    gradient mapping ``||x - P(x - step g)|| / step`` drops below ``tol``.
    """
    if method == "analytic":
        x = losses.minimizer(k)
        if not set.contains(x, tol=1e-12):
            raise CapabilityError(f"analytic minimiser at round {k} is infeasible")
        return x
    if method != "grid_then_descent":
        raise UsageError(f"unknown minimiser method {method!r}")
    grid = feasible_grid(set, grid_points)
    x = grid[int(np.argmin(losses.global_value(k, grid)))]
    for _ in range(max_iter):
        nxt = set.project(x - step * losses.global_gradient(k, x))
        if np.linalg.norm(x - nxt) / step <= tol:
            return nxt
        x = nxt
    return x


@dataclass
class RegretLedger:
    """Per-round records of one run.

    Array fields grow by one entry per round; ``decisions`` has shape
    ``(T, n, d)`` once finalised.
    """

    regret_kind: str
    tracked_agent: int = 1
    k: list = field(default_factory=list)
    decisions: list = field(default_factory=list)
    agent_losses: list = field(default_factory=list)
    tracked_loss: list = field(default_factory=list)
    benchmark: list = field(default_factory=list)
    increment: list = field(default_factory=list)
    cumulative: list = field(default_factory=list)
    consensus: list = field(default_factory=list)
    fn_queries: list = field(default_factory=list)
    grad_queries: list = field(default_factory=list)

    def append(self, k, decisions, agent_losses, tracked_loss, benchmark, increment,
               consensus, fn_queries, grad_queries):
        prev = self.cumulative[-1] if self.cumulative else 0.0
        self.k.append(int(k))
        self.decisions.append(np.array(decisions, dtype=float))
        self.agent_losses.append(np.array(agent_losses, dtype=float))
        self.tracked_loss.append(float(tracked_loss))
        self.benchmark.append(float(benchmark))
        self.increment.append(float(increment))
        self.cumulative.append(prev + float(increment))
        self.consensus.append(float(consensus))
        self.fn_queries.append(int(fn_queries))
        self.grad_queries.append(int(grad_queries))

    def __len__(self):
        return len(self.k)

    def arrays(self):
        """Record fields as numpy arrays keyed by name."""
        return {
            "k": np.asarray(self.k),
            "decisions": np.asarray(self.decisions),
            "agent_losses": np.asarray(self.agent_losses),
            "tracked_loss": np.asarray(self.tracked_loss),
            "benchmark": np.asarray(self.benchmark),
            "increment": np.asarray(self.increment),
            "cumulative": np.asarray(self.cumulative),
            "consensus": np.asarray(self.consensus),
            "fn_queries": np.asarray(self.fn_queries),
            "grad_queries": np.asarray(self.grad_queries),
        }

    def final_regret(self):
        return self.cumulative[-1] if self.cumulative else 0.0

    def average_regret(self, T=None):
        """``DR_T / T`` at round ``T`` (default: last round)."""
        T = len(self) if T is None else T
        return self.cumulative[T - 1] / T

    def time_averaged_consensus(self, T=None):
        T = len(self) if T is None else T
        return float(np.mean(self.consensus[:T]))

    def csv_header(self):
        d = self.decisions[0].shape[1] if self.decisions else 0
        return list(CSV_HEADER_PREFIX) + [f"x{j}" for j in range(d)] + list(CSV_HEADER_SUFFIX)

    def write_csv(self, fh):
        """One row per round for the tracked agent; floats use ``repr``."""
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(self.csv_header())
        j = self.tracked_agent - 1
        for r in range(len(self)):
            x = self.decisions[r][j]
            writer.writerow(
                [self.k[r], self.tracked_agent, *map(repr, x.tolist()),
                 repr(self.tracked_loss[r]), repr(self.increment[r]),
                 repr(self.cumulative[r]), repr(self.consensus[r]), self.fn_queries[r]]
            )

    def to_csv(self):
        buf = io.StringIO()
        self.write_csv(buf)
        return buf.getvalue()
