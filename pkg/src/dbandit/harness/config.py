"""Experiment configuration files.

Configs are YAML mappings.  Every problem is collected before raising, so a
bad file reports all of its issues at once.
"""

from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import yaml

from ..errors import ConfigError
from ..smoothing import EstimatorKind

__all__ = ["ExperimentConfig", "load_config", "preset_names", "preset_path"]

_KNOWN_KEYS = {
    "name", "description", "problem", "constraint", "graph", "estimators", "alpha", "mu",
    "horizon", "replicates", "seed", "regret", "init", "tracked_agent", "minimizer",
    "workers", "out",
}


@dataclass
class ExperimentConfig:
    name: str
    problem: dict
    constraint: dict
    graph: dict
    estimators: list
    alpha: dict
    mu: dict
    horizon: int
    replicates: int = 20
    seed: int = 0
    regret: str = "convex"
    init: object = "origin"
    tracked_agent: int = 1
    minimizer: str = "analytic"
    workers: int = 1
    out: str = None
    description: str = ""
    raw: dict = field(default_factory=dict, repr=False)

    @classmethod
    def from_mapping(cls, data):
        problems = []
        if not isinstance(data, dict):
            raise ConfigError("config must be a mapping")
        unknown = sorted(set(data) - _KNOWN_KEYS)
        if unknown:
            problems.append(f"unknown keys: {unknown}")
        for key in ("problem", "constraint", "graph", "alpha", "mu", "horizon", "estimators"):
            if key not in data:
                problems.append(f"missing required key {key!r}")
        for key in ("problem", "constraint", "graph", "alpha", "mu"):
            if key in data and not isinstance(data[key], dict):
                problems.append(f"{key!r} must be a mapping")
        estimators = data.get("estimators", [])
        if isinstance(estimators, str):
            estimators = [estimators]
        for est in estimators:
            try:
                EstimatorKind(est)
            except ValueError:
                problems.append(f"unknown estimator {est!r}")
        if "estimators" in data and not estimators:
            problems.append("need at least one estimator")
        for key, low in (("horizon", 1), ("replicates", 1), ("seed", 0), ("tracked_agent", 1),
                         ("workers", 1)):
            if key in data and (not isinstance(data[key], int) or isinstance(data[key], bool)
                                or data[key] < low):
                problems.append(f"{key!r} must be an integer >= {low}")
        for key in ("alpha", "mu"):
            problems.extend(_schedule_problems(key, data.get(key)))
        if data.get("regret", "convex") not in ("convex", "nonconvex"):
            problems.append("'regret' must be 'convex' or 'nonconvex'")
        if data.get("minimizer", "analytic") not in ("analytic", "grid_then_descent"):
            problems.append("'minimizer' must be 'analytic' or 'grid_then_descent'")
        if problems:
            err = ConfigError("; ".join(problems))
            err.problems = problems
            raise err
        return cls(
            name=str(data.get("name", "experiment")),
            problem=dict(data["problem"]),
            constraint=dict(data["constraint"]),
            graph=dict(data["graph"]),
            estimators=list(estimators),
            alpha=dict(data["alpha"]),
            mu=dict(data["mu"]),
            horizon=data["horizon"],
            replicates=data.get("replicates", 20),
            seed=data.get("seed", 0),
            regret=data.get("regret", "convex"),
            init=data.get("init", "origin"),
            tracked_agent=data.get("tracked_agent", 1),
            minimizer=data.get("minimizer", "analytic"),
            workers=data.get("workers", 1),
            out=data.get("out"),
            description=str(data.get("description", "")),
            raw=dict(data),
        )

    def echo(self):
        """Plain-data view for the summary file."""
        return {
            "name": self.name,
            "problem": self.problem,
            "constraint": self.constraint,
            "graph": self.graph,
            "estimators": self.estimators,
            "alpha": self.alpha,
            "mu": self.mu,
            "horizon": self.horizon,
            "replicates": self.replicates,
            "seed": self.seed,
            "regret": self.regret,
            "init": self.init,
            "tracked_agent": self.tracked_agent,
            "minimizer": self.minimizer,
        }


def _schedule_problems(key, cfg):
    if not isinstance(cfg, dict):
        return []
    kind = cfg.get("kind")
    if kind == "constant":
        value = cfg.get("value")
        if not isinstance(value, (int, float)) or value <= 0:
            return [f"{key}.value must be a positive number"]
        return []
    if kind == "power":
        out = []
        if not isinstance(cfg.get("scale"), (int, float)) or cfg["scale"] <= 0:
            out.append(f"{key}.scale must be a positive number")
        if cfg.get("exponent", 0) < 0:
            out.append(f"{key}.exponent must be >= 0")
        if cfg.get("offset", 0) <= -1:
            out.append(f"{key}.offset must be > -1")
        return out
    if kind == "theorem" and key == "alpha":
        a = cfg.get("exponent", 0.5)
        if not 0 < a < 1:
            return ["alpha.exponent must lie in (0, 1) in theorem mode"]
        if cfg.get("formula", "theorem") not in ("theorem", "appendix"):
            return ["alpha.formula must be 'theorem' or 'appendix'"]
        return []
    return [f"{key}.kind {kind!r} not recognised"]


def preset_names():
    root = resources.files("dbandit.harness") / "presets"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".yaml"))


def preset_path(name):
    path = resources.files("dbandit.harness") / "presets" / f"{name}.yaml"
    if not path.is_file():
        raise ConfigError(f"no preset named {name!r}; available: {preset_names()}")
    return path


def load_config(source):
    """Load a config from a file path or a preset name."""
    path = Path(source)
    if not path.is_file():
        if path.suffix or "/" in str(source):
            raise ConfigError(f"config file {source} not found")
        path = preset_path(str(source))
    try:
        data = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {source}: {exc}") from exc
    return ExperimentConfig.from_mapping(data)
