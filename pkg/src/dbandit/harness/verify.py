"""Property checks of the mixing, smoothing and estimator bounds.

Each check returns a :class:`CheckResult` holding the measured quantity,
the bound it is compared with and the slack allowed.  The ``fast`` level
trims sample sizes so the whole suite runs in a few seconds; ``full`` uses
``N = 10**5`` Monte-Carlo draws.
"""

from dataclasses import asdict, dataclass

import numpy as np

from ..geometry import L1Ball
from ..graph import builtin_topology, max_mixing_deviation, mixing_constants
from ..losses import TargetTracking
from ..optimizer import AlgorithmConfig, Schedule, run
from ..smoothing import sample_estimates
from ..streams import Purpose, stream

__all__ = ["CheckResult", "verify_suite", "CHECKS"]

LEVELS = {
    "fast": {"k_max": 100, "samples": 20_000, "points": 5},
    "full": {"k_max": 200, "samples": 100_000, "points": 20},
}


@dataclass
class CheckResult:
    name: str
    measured: float
    bound: float
    tolerance: float
    passed: bool
    detail: str = ""

    def line(self):
        mark = "PASS" if self.passed else "FAIL"
        return (f"[{mark}] {self.name}: measured={self.measured:.6g} bound={self.bound:.6g} "
                f"tol={self.tolerance:.3g} {self.detail}")


def check_mixing(k_max=200, **_):
    graph = builtin_topology()
    consts = mixing_constants(graph)
    dev = max_mixing_deviation(graph, k_max)
    steps = np.subtract.outer(np.arange(k_max), np.arange(k_max)).T  # [s, k] -> k - s
    excess = np.nanmax(dev - consts.bound(np.where(steps >= 0, steps, 0)))
    return CheckResult("mixing_bound", float(excess), 0.0, 1e-10, bool(excess <= 1e-10),
                       f"max over 1<=s<=k<={k_max} of deviation minus envelope")


def _l1_scaled(L0, d):
    return lambda x: L0 * np.abs(x).sum(axis=-1) / np.sqrt(d)


def check_smoothing(samples=100_000, points=20, **_):
    d, L0 = 2, 1.0
    f = _l1_scaled(L0, d)
    rng = stream(0, Purpose.VERIFY, 2)
    worst = -np.inf
    for mu in (0.5, 0.1, 0.01):
        for x in rng.uniform(-1, 1, size=(points, d)):
            vals = f(x + mu * rng.standard_normal((samples, d)))
            se = vals.std(ddof=1) / np.sqrt(samples)
            ratio = (abs(vals.mean() - f(x)) - 3 * se) / (mu * L0 * np.sqrt(d))
            worst = max(worst, ratio)
    return CheckResult("smoothing_error", float(worst), 1.0, 0.0, bool(worst <= 1.0),
                       "max of (|f^s - f| - 3 SE) / (mu L0 sqrt d)")


def check_unbiased(samples=100_000, **_):
    rng = stream(0, Purpose.VERIFY, 3)
    c = np.array([1.0, -2.0])
    A = np.array([[2.0, 0.5], [0.5, 1.0]])
    b = np.array([0.3, -0.1])
    x = np.array([0.4, -0.7])
    tests = {
        "linear": (lambda p: p @ c, c),
        "quadratic": (lambda p: 0.5 * np.einsum("...i,ij,...j->...", p, A, p) + p @ b, A @ x + b),
    }
    worst = 0.0
    for fn, grad in tests.values():
        G = sample_estimates("residual", fn, x, 0.1, samples, rng, x_prev=x + 0.01, mu_prev=0.1)
        z = (G.mean(axis=0) - grad) / (G.std(axis=0, ddof=1) / np.sqrt(samples))
        worst = max(worst, float(np.abs(z).max()))
    return CheckResult("residual_unbiased", worst, 4.0, 0.0, worst <= 4.0,
                       "max per-coordinate |z| on linear and quadratic losses")


def second_moment_setup(mu, d=2):
    """Static ``||x||_1`` (Lipschitz constant ``sqrt d``) at two nearby points."""
    x = np.full(d, 0.5) - 0.2 * np.arange(d) / max(d - 1, 1)
    shift = np.ones(d) / np.sqrt(d) * mu**2
    return (lambda p: np.abs(p).sum(axis=-1)), np.sqrt(d), x, x - shift


def second_moment_bound(d, L0, step, mu, mu_prev):
    return 3 * d * L0**2 * step**2 / mu**2 + 12 * (d + 4) ** 2 * L0**2 * mu_prev**2 / mu**2


def check_second_moment(samples=100_000, **_):
    rng = stream(0, Purpose.VERIFY, 4)
    d = 2
    worst = -np.inf
    for mu in (0.1, 0.01):
        fn, L0, x, x_prev = second_moment_setup(mu, d)
        G = sample_estimates("residual", fn, x, mu, samples, rng, x_prev=x_prev, mu_prev=mu)
        sq = np.einsum("ij,ij->i", G, G)
        se = sq.std(ddof=1) / np.sqrt(samples)
        bound = second_moment_bound(d, L0, np.linalg.norm(x - x_prev), mu, mu)
        worst = max(worst, (sq.mean() - 3 * se) / bound)
    return CheckResult("second_moment", float(worst), 1.0, 0.0, bool(worst <= 1.0),
                       "max of (E||g||^2 - 3 SE) / bound over mu in {0.1, 0.01}")


def check_variance_ratio(samples=100_000, **_):
    rng = stream(0, Purpose.VERIFY, 5)
    mu = 0.01
    fn, _, x, x_prev = second_moment_setup(mu)
    one = sample_estimates("one_point", fn, x, mu, samples, rng)
    res = sample_estimates("residual", fn, x, mu, samples, rng, x_prev=x_prev, mu_prev=mu)
    ratio = one.var(axis=0, ddof=1).sum() / res.var(axis=0, ddof=1).sum()
    return CheckResult("variance_ratio", float(ratio), 10.0, 0.0, bool(ratio > 10.0),
                       "total variance one-point / residual at mu = 0.01 (must exceed bound)")


def check_consensus(**_):
    T = 2000
    losses = TargetTracking(T, noise_seed=0)
    cfg = AlgorithmConfig("residual", Schedule.power(1 / 500, 0.5), Schedule.power(1.0, 0.5), T)
    ledger = run(cfg, builtin_topology(), losses, L1Ball(3.0, 2), seed=0)
    late, early = ledger.time_averaged_consensus(T), ledger.time_averaged_consensus(200)
    return CheckResult("consensus_trend", late, early, 0.0, bool(late < early),
                       "time-averaged consensus error at T=2000 vs T=200")


CHECKS = (check_mixing, check_smoothing, check_unbiased, check_second_moment,
          check_variance_ratio, check_consensus)


def verify_suite(level="fast"):
    params = LEVELS[level]
    return [check(**params) for check in CHECKS]


def as_dicts(results):
    return [asdict(r) for r in results]
