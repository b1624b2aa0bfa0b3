"""Replicated experiment runs and their on-disk artifacts.

Layout of an output directory::

    <out>/summary.json
    <out>/<estimator>/run_000.csv ...   one file per replicate
    <out>/<estimator>/mean.csv          mean and standard error over replicates

Replicate ``r`` uses seed ``base + r`` for both the algorithm's random
directions and the loss process, so all estimators face the same loss
sequence and start from the same points.
"""

import concurrent.futures as cf
import csv
import json
import logging
import time
from pathlib import Path

import numpy as np

from ..errors import ConfigError, DivergenceError
from ..geometry import constraint_from_config, feasible_grid
from ..graph import graph_from_config, mixing_constants, validate
from ..losses import TargetTracking, big_theta, lipschitz_estimate, loss_from_config, path_length
from ..optimizer import (AlgorithmConfig, Schedule, appendix_constant_M, run,
                         theorem_constant_M, with_estimator)

__all__ = ["build_components", "run_replicate", "run_experiment", "summarize_curves"]

log = logging.getLogger(__name__)


def _schedule(cfg, *, theorem_M=None):
    kind = cfg["kind"]
    if kind == "constant":
        return Schedule.constant(cfg["value"])
    if kind == "power":
        return Schedule.power(cfg["scale"], cfg.get("exponent", 0.0), cfg.get("offset", 0.0))
    if kind == "theorem":
        return Schedule.theorem_step(theorem_M, cfg.get("exponent", 0.5))
    raise ConfigError(f"unknown schedule kind {kind!r}")


def _theorem_M(exp, graph, losses, cset):
    cfg = exp.alpha
    if "M" in cfg:
        return float(cfg["M"])
    consts = mixing_constants(graph)
    L0 = cfg.get("L0")
    if L0 is None:
        L0 = lipschitz_estimate(losses, cset, rounds=range(1, min(exp.horizon, 50) + 1), pairs=500)
    formula = theorem_constant_M if cfg.get("formula", "theorem") == "theorem" else appendix_constant_M
    return float(formula(cset.dim, graph.n, consts.big_gamma, consts.gamma, L0))


def build_components(exp, replicate=0):
    """Graph, losses, feasible set and algorithm config for one replicate."""
    seed = exp.seed + replicate
    graph = graph_from_config(exp.graph)
    losses = loss_from_config(exp.problem, exp.horizon, noise_seed=seed)
    cset = constraint_from_config(exp.constraint, dim=losses.d)
    if graph.n != losses.n:
        raise ConfigError(f"graph has {graph.n} agents but the problem has {losses.n}")
    M = None
    if exp.alpha["kind"] == "theorem":
        M = _theorem_M(exp, graph, losses, cset)
        b = exp.mu.get("exponent", 0.0)
        if b > exp.alpha.get("exponent", 0.5):
            raise ConfigError("theorem mode needs mu exponent <= alpha exponent")
    alg = AlgorithmConfig(
        estimator=exp.estimators[0],
        alpha=_schedule(exp.alpha, theorem_M=M),
        mu=_schedule(exp.mu),
        horizon=exp.horizon,
        regret=exp.regret,
        tracked_agent=exp.tracked_agent,
        init=exp.init,
        minimizer_method=exp.minimizer,
        M_override=M,
    )
    return graph, losses, cset, alg


def run_replicate(exp, estimator, replicate, out_dir=None):
    """One full run; writes its CSV when ``out_dir`` is given.

    Returns a dict with status, cumulative regret curve and consensus curve.
    """
    graph, losses, cset, alg = build_components(exp, replicate)
    alg = with_estimator(alg, estimator)
    seed = exp.seed + replicate
    result = {"estimator": estimator, "replicate": replicate, "seed": seed}
    try:
        ledger = run(alg, graph, losses, cset, seed)
    except DivergenceError as exc:
        log.warning("%s replicate %d diverged: %s", estimator, replicate, exc)
        result.update(status="failed", round=exc.k, error=str(exc))
        return result
    if out_dir is not None:
        path = Path(out_dir) / estimator / f"run_{replicate:03d}.csv"
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            ledger.write_csv(fh)
        result["csv"] = str(path)
    result.update(
        status="ok",
        cumulative=np.asarray(ledger.cumulative),
        consensus=np.asarray(ledger.consensus),
    )
    return result


def summarize_curves(curves):
    """Mean and standard error over replicates, row-wise per round."""
    arr = np.asarray(curves, dtype=float)
    mean = arr.mean(axis=0)
    if arr.shape[0] > 1:
        se = arr.std(axis=0, ddof=1) / np.sqrt(arr.shape[0])
    else:
        se = np.zeros_like(mean)
    return mean, se


def _loglog_slope(curve):
    T = len(curve)
    ks = np.arange(1, T + 1)
    lo = max(1, T // 10)
    sel = (ks >= lo) & (curve > 0)
    if sel.sum() < 2:
        return None
    return float(np.polyfit(np.log(ks[sel]), np.log(curve[sel]), 1)[0])


def _variation_metrics(exp):
    """Loss-variation and path-length figures for replicate 0, where defined."""
    _, losses, cset, _ = build_components(exp, 0)
    T = exp.horizon
    out = {"Theta_T": big_theta(losses, T, feasible_grid(cset, 64 * 64)), "omega_T": None}
    if isinstance(losses, TargetTracking):
        # every local loss is minimised by the target, so each agent's path is the target's
        out["omega_T"] = losses.n * path_length(losses.target_path[: T + 1])
    return out


def _write_mean_csv(path, mean, se, cons_mean):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k", "mean_cum_regret", "se_cum_regret", "mean_consensus_error"])
        for k in range(len(mean)):
            w.writerow([k + 1, repr(float(mean[k])), repr(float(se[k])), repr(float(cons_mean[k]))])


def run_experiment(exp, out_dir=None, workers=None, variation=True):
    """Run every estimator and replicate; write CSVs and ``summary.json``.

    Returns the summary dict.  Diverged replicates are listed as failures and
    left out of the mean curves; the others still run.
    """
    start = time.perf_counter()
    out_dir = Path(out_dir or exp.out or Path("runs") / exp.name)
    out_dir.mkdir(parents=True, exist_ok=True)
    graph, _, _, _ = build_components(exp, 0)
    report = validate(graph)
    workers = workers or exp.workers
    jobs = [(est, r) for est in exp.estimators for r in range(exp.replicates)]
    if workers > 1:
        with cf.ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run_replicate, [exp] * len(jobs), *zip(*jobs),
                                    [out_dir] * len(jobs)))
    else:
        results = [run_replicate(exp, est, r, out_dir) for est, r in jobs]

    per_est = {}
    for est in exp.estimators:
        ok = [r for r in results if r["estimator"] == est and r["status"] == "ok"]
        failed = [
            {k: r[k] for k in ("replicate", "seed", "round", "error")}
            for r in results if r["estimator"] == est and r["status"] == "failed"
        ]
        entry = {"completed": len(ok), "failed": failed}
        if ok:
            mean, se = summarize_curves([r["cumulative"] for r in ok])
            cons, _ = summarize_curves([r["consensus"] for r in ok])
            _write_mean_csv(out_dir / est / "mean.csv", mean, se, cons)
            T = len(mean)
            entry.update(
                final_mean_regret=float(mean[-1]),
                final_se=float(se[-1]),
                average_regret=float(mean[-1] / T),
                loglog_slope=_loglog_slope(mean),
            )
        per_est[est] = entry

    summary = {
        "config": exp.echo(),
        "seed": exp.seed,
        "graph": {"name": graph.name, "zeta": graph.zeta,
                  "connectivity_window": graph.connectivity_window,
                  "violations": [msg for _, msg in report.violations]},
        "estimators": per_est,
    }
    if variation:
        summary["variation"] = _variation_metrics(exp)
    summary["wall_time_s"] = time.perf_counter() - start
    with open(out_dir / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
    return summary
