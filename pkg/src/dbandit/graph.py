"""Periodic time-varying digraphs and their mixing behaviour.

A :class:`GraphSequence` holds one weight matrix per phase of a period and
repeats them forever.  Row ``i`` of ``W_k`` holds the weights agent ``i``
puts on the values it receives, so one consensus step is ``W_k @ Y``.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.csgraph import connected_components

from .errors import ConstructionError, UsageError

__all__ = [
    "GraphSequence",
    "MixingConstants",
    "ValidationReport",
    "weight_matrix_at",
    "transition_product",
    "mixing_constants",
    "validate",
    "build_periodic_topology",
    "builtin_topology",
    "graph_from_config",
    "max_mixing_deviation",
]

WEIGHTINGS = ("metropolis", "lazy_uniform", "in_degree")
STOCHASTIC_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class GraphSequence:
    """Weights ``snapshots[k mod period]`` used at round ``k``.

    ``zeta`` is the positive-weight floor and ``connectivity_window`` the
    number of consecutive rounds whose union graph is strongly connected.
    """

    snapshots: tuple
    zeta: float
    connectivity_window: int
    name: str = ""

    def __post_init__(self):
        mats = tuple(np.array(w, dtype=float) for w in self.snapshots)
        if not mats:
            raise UsageError("a graph sequence needs at least one snapshot")
        for w in mats:
            w.setflags(write=False)
        object.__setattr__(self, "snapshots", mats)

    @property
    def n(self):
        return self.snapshots[0].shape[0]

    @property
    def period(self):
        return len(self.snapshots)

    def at(self, k):
        return weight_matrix_at(self, k)


@dataclass(frozen=True)
class MixingConstants:
    gamma: float
    big_gamma: float

    def bound(self, steps):
        """Geometric envelope ``big_gamma * gamma**steps``."""
        return self.big_gamma * self.gamma ** np.asarray(steps, dtype=float)


@dataclass
class ValidationReport:
    violations: list = field(default_factory=list)

    @property
    def ok(self):
        return not self.violations

    def __bool__(self):
        return self.ok

    def add(self, kind, message):
        self.violations.append((kind, message))

    def kinds(self):
        return {kind for kind, _ in self.violations}


def weight_matrix_at(seq, k):
    if k < 0:
        raise UsageError(f"round index must be >= 0, got {k}")
    return seq.snapshots[k % seq.period]


def transition_product(seq, k, s):
    """Ordered product ``W_k W_{k-1} ... W_s``."""
    if s > k:
        raise UsageError(f"transition product needs s <= k, got s={s}, k={k}")
    out = weight_matrix_at(seq, s).copy()
    for t in range(s + 1, k + 1):
        out = weight_matrix_at(seq, t) @ out
    return out


def mixing_constants(seq):
    return _mixing_constants(seq.n, seq.zeta, seq.connectivity_window)


def _mixing_constants(n, zeta, window):
    base = 1.0 - zeta / (4.0 * n * n)
    return MixingConstants(gamma=base ** (1.0 / window), big_gamma=base ** -2)


def max_mixing_deviation(seq, k_max, s_min=1):
    """Largest ``|[W(k,s)]_ij - 1/n|`` for every ``s_min <= s <= k <= k_max``.

    Returns an array ``dev`` with ``dev[s - s_min, k - s_min]`` filled for
    ``k >= s`` and NaN elsewhere.
    """
    size = k_max - s_min + 1
    dev = np.full((size, size), np.nan)
    n = seq.n
    for s in range(s_min, k_max + 1):
        prod = weight_matrix_at(seq, s).copy()
        dev[s - s_min, s - s_min] = np.max(np.abs(prod - 1.0 / n))
        for k in range(s + 1, k_max + 1):
            prod = weight_matrix_at(seq, k) @ prod
            dev[s - s_min, k - s_min] = np.max(np.abs(prod - 1.0 / n))
    return dev


def _strongly_connected(adj):
    count, _ = connected_components(adj, directed=True, connection="strong")
    return count == 1


def _support(w):
    adj = (w > 0).astype(int)
    np.fill_diagonal(adj, 0)
    return adj


def validate(seq):
    """Check every snapshot and window against the mixing assumptions.

    Violations are returned as data; nothing is raised.
    """
    report = ValidationReport()
    n = seq.n
    if not 0 < seq.zeta < 1:
        report.add("zeta", f"zeta={seq.zeta} outside (0, 1)")
    for t, w in enumerate(seq.snapshots):
        if w.shape != (n, n):
            report.add("shape", f"snapshot {t} has shape {w.shape}, expected {(n, n)}")
            continue
        if np.any(w < 0):
            report.add("nonnegative", f"snapshot {t} has negative entries")
        if np.any(np.diag(w) < seq.zeta):
            report.add("weight_floor", f"snapshot {t} has a diagonal entry below zeta")
        off = w[~np.eye(n, dtype=bool)]
        if np.any((off > 0) & (off < seq.zeta)):
            report.add("weight_floor", f"snapshot {t} has an edge weight below zeta")
        rows = np.abs(w.sum(axis=1) - 1.0)
        cols = np.abs(w.sum(axis=0) - 1.0)
        if np.any(rows > STOCHASTIC_TOL):
            report.add("row_stochastic", f"snapshot {t} row sums deviate by {rows.max():.3g}")
        if np.any(cols > STOCHASTIC_TOL):
            report.add("doubly_stochastic", f"snapshot {t} column sums deviate by {cols.max():.3g}")
    if "shape" in report.kinds():
        return report
    window = seq.connectivity_window
    if window < 1:
        report.add("connectivity", f"connectivity window {window} < 1")
        return report
    for start in range(seq.period):
        union = sum(_support(seq.snapshots[(start + t) % seq.period]) for t in range(window))
        if not _strongly_connected(union):
            report.add(
                "connectivity",
                f"union of {window} rounds starting at phase {start} is not strongly connected",
            )
    return report


def _symmetrize(part, n):
    adj = np.zeros((n, n), dtype=bool)
    for src, dst in part:
        if not (0 <= src < n and 0 <= dst < n):
            raise UsageError(f"edge ({src}, {dst}) out of range for n={n}")
        if src != dst:
            adj[src, dst] = adj[dst, src] = True
    return adj


def _metropolis(adj):
    deg = adj.sum(axis=1)
    w = np.where(adj, 1.0 / (1.0 + np.maximum.outer(deg, deg)), 0.0)
    np.fill_diagonal(w, 1.0 - w.sum(axis=1))
    return w


def _lazy_uniform(adj):
    n = adj.shape[0]
    closed = adj | np.eye(n, dtype=bool)
    avg = closed / closed.sum(axis=1, keepdims=True)
    return 0.5 * np.eye(n) + 0.5 * avg


def _in_degree(part, n):
    # row i averages over its in-neighbours j (edges j -> i) and itself
    adj = np.eye(n, dtype=bool)
    for src, dst in part:
        if not (0 <= src < n and 0 <= dst < n):
            raise UsageError(f"edge ({src}, {dst}) out of range for n={n}")
        adj[dst, src] = True
    return adj / adj.sum(axis=1, keepdims=True)


def _smallest_window(snapshots):
    period = len(snapshots)
    supports = [_support(w) for w in snapshots]
    for window in range(1, period + 1):
        if all(
            _strongly_connected(sum(supports[(s + t) % period] for t in range(window)))
            for s in range(period)
        ):
            return window
    return None


def build_periodic_topology(n, parts, weighting="metropolis", name=""):
    """Weighted periodic sequence from one directed edge list per phase.

    Parameters
    ----------
    n : int
        Number of agents.
    parts : list of list of (int, int)
        Edge ``(src, dst)`` means ``src`` sends to ``dst``; 0-based.
    weighting : {"metropolis", "lazy_uniform", "in_degree"}
        ``metropolis`` and ``lazy_uniform`` symmetrise each snapshot first and
        are doubly stochastic (``lazy_uniform`` only on regular snapshots).
        ``in_degree`` averages uniformly over in-neighbours and self; it is
        row stochastic but not column stochastic in general, and
        :func:`validate` will say so.

    Returns
    -------
    GraphSequence
        ``zeta`` is the smallest positive weight; ``connectivity_window`` the
        smallest window whose union graph is always strongly connected.
    """
    if weighting not in WEIGHTINGS:
        raise UsageError(f"unknown weighting {weighting!r}; choose from {WEIGHTINGS}")
    if not parts:
        raise UsageError("need at least one edge set")
    snapshots = []
    for t, part in enumerate(parts):
        if weighting == "in_degree":
            w = _in_degree(part, n)
        else:
            adj = _symmetrize(part, n)
            if weighting == "metropolis":
                w = _metropolis(adj)
            else:
                deg = adj.sum(axis=1)
                if np.any(deg != deg[0]):
                    raise ConstructionError(
                        f"lazy_uniform weights on irregular snapshot {t} are not doubly stochastic"
                    )
                w = _lazy_uniform(adj)
        snapshots.append(w)
    window = _smallest_window(snapshots)
    if window is None:
        raise ConstructionError("union of all edge sets is not strongly connected")
    zeta = float(min(w[w > 0].min() for w in snapshots))
    return GraphSequence(tuple(snapshots), zeta, window, name=name)


def _ten_node_parts(n=10):
    forward = [(i, (i + 1) % n) for i in range(n)]
    backward = [((i + 1) % n, i) for i in range(n)]
    even = [(i, i + 1) for i in range(0, n - 1, 2)] + [(i + 1, i) for i in range(0, n - 1, 2)]
    odd = [(i, (i + 1) % n) for i in range(1, n, 2)] + [((i + 1) % n, i) for i in range(1, n, 2)]
    return [forward, even, backward, odd]


BUILTINS = {"ten-node-periodic": _ten_node_parts}


def builtin_topology(name="ten-node-periodic", weighting="metropolis"):
    """Named topology.

    ``ten-node-periodic`` cycles through four digraphs on 10 agents: a directed
    ring, a perfect matching, the reversed ring and the complementary
    matching.
    """
    if name not in BUILTINS:
        raise UsageError(f"unknown builtin topology {name!r}")
    return build_periodic_topology(10, BUILTINS[name](), weighting, name=name)


def graph_from_config(cfg):
    """``{"builtin": name}`` or ``{"n": int, "parts": [[[src, dst], ...], ...]}``."""
    weighting = cfg.get("weighting", "metropolis")
    if "builtin" in cfg:
        return builtin_topology(cfg["builtin"], weighting)
    if "parts" in cfg:
        parts = [[tuple(e) for e in part] for part in cfg["parts"]]
        return build_periodic_topology(int(cfg["n"]), parts, weighting, name="custom")
    raise UsageError("graph config needs 'builtin' or 'parts'")
