"""Compact convex feasible sets with exact Euclidean projection.

Three families are supported: axis-aligned boxes, L1 balls and L2 balls,
all centred at the origin except boxes.  Every operation accepts either a
single point of shape ``(d,)`` or a stack of points of shape ``(..., d)``
and works row-wise, so a whole swarm of agents can be projected at once.
"""

from dataclasses import dataclass

import numpy as np
from scipy.stats import qmc

from .errors import InputError, UsageError

__all__ = [
    "ConstraintSet",
    "Box",
    "L1Ball",
    "L2Ball",
    "project",
    "linear_minimize",
    "diameter",
    "constraint_from_config",
    "feasible_grid",
]


def _as_points(points, dim, what="point"):
    points = np.asarray(points, dtype=float)
    if points.ndim == 0 or points.shape[-1] != dim:
        raise UsageError(f"{what} has shape {points.shape}, expected (..., {dim})")
    if not np.all(np.isfinite(points)):
        raise InputError(f"{what} has non-finite coordinates")
    return points


class ConstraintSet:
    """Base class; concrete sets implement ``_project`` and ``_argmin_linear``."""

    dim: int

    def project(self, point):
        return self._project(_as_points(point, self.dim))

    def linear_minimize(self, direction):
        direction = _as_points(direction, self.dim, "direction")
        return self._argmin_linear(direction)

    def contains(self, point, tol=1e-12):
        point = _as_points(point, self.dim)
        return self._violation(point) <= tol

    def center(self):
        return np.zeros(self.dim)

    def bounds(self):
        """Axis-aligned bounding box ``(lower, upper)``."""
        raise NotImplementedError

    def diameter(self):
        raise NotImplementedError

    def to_config(self):
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class Box(ConstraintSet):
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.atleast_1d(np.asarray(self.lower, dtype=float))
        upper = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lower.shape != upper.shape or lower.ndim != 1:
            raise UsageError("box bounds must be 1-d arrays of equal length")
        if not (np.all(np.isfinite(lower)) and np.all(np.isfinite(upper))):
            raise InputError("box bounds must be finite")
        if not np.all(lower < upper):
            raise UsageError("box requires lower < upper in every coordinate")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @classmethod
    def cube(cls, half_width, dim):
        return cls(np.full(dim, -float(half_width)), np.full(dim, float(half_width)))

    @property
    def dim(self):
        return self.lower.size

    def _project(self, points):
        return np.clip(points, self.lower, self.upper)

    def _argmin_linear(self, direction):
        # ties (zero components) go to the lower face; all-zero -> centre
        out = np.where(direction > 0, self.lower, self.upper)
        out = np.where(direction == 0, self.lower, out)
        zero = np.all(direction == 0, axis=-1, keepdims=True)
        return np.where(zero, self.center(), out)

    def _violation(self, points):
        return np.max(np.maximum(self.lower - points, points - self.upper), axis=-1)

    def center(self):
        return 0.5 * (self.lower + self.upper)

    def bounds(self):
        return self.lower.copy(), self.upper.copy()

    def diameter(self):
        return float(np.linalg.norm(self.upper - self.lower))

    def to_config(self):
        return {"kind": "box", "lower": self.lower.tolist(), "upper": self.upper.tolist()}


@dataclass(frozen=True, eq=False)
class _Ball(ConstraintSet):
    radius: float
    dim: int

    def __post_init__(self):
        if not (np.isfinite(self.radius) and self.radius > 0):
            raise UsageError(f"ball radius must be positive, got {self.radius}")
        if int(self.dim) < 1:
            raise UsageError("ball dimension must be >= 1")
        object.__setattr__(self, "radius", float(self.radius))
        object.__setattr__(self, "dim", int(self.dim))

    def bounds(self):
        return np.full(self.dim, -self.radius), np.full(self.dim, self.radius)

    def diameter(self):
        return 2.0 * self.radius


class L2Ball(_Ball):

    def _project(self, points):
        norms = np.linalg.norm(points, axis=-1, keepdims=True)
        scale = np.minimum(1.0, self.radius / np.maximum(norms, np.finfo(float).tiny))
        return points * scale

    def _argmin_linear(self, direction):
        norms = np.linalg.norm(direction, axis=-1, keepdims=True)
        safe = np.where(norms > 0, norms, 1.0)
        return np.where(norms > 0, -self.radius * direction / safe, 0.0)

    def _violation(self, points):
        return np.linalg.norm(points, axis=-1) - self.radius

    def to_config(self):
        return {"kind": "l2", "radius": self.radius, "dim": self.dim}


class L1Ball(_Ball):

    def _project(self, points):
        return _project_l1(points, self.radius)

    def _argmin_linear(self, direction):
        mags = np.abs(direction)
        j = np.argmax(mags, axis=-1)  # first maximal index wins ties
        out = np.zeros_like(direction)
        picked = np.take_along_axis(direction, j[..., None], axis=-1)
        np.put_along_axis(out, j[..., None], -self.radius * np.sign(picked), axis=-1)
        return out

    def _violation(self, points):
        return np.sum(np.abs(points), axis=-1) - self.radius

    def to_config(self):
        return {"kind": "l1", "radius": self.radius, "dim": self.dim}


def _project_l1(points, radius):
    """Row-wise projection onto ``{x : ||x||_1 <= radius}``.

    Projects ``|v|`` onto the simplex of size ``radius`` by sorting and
    soft-thresholding, then restores the signs.  Rows already inside the
    ball are returned unchanged.
    """
    flat = points.reshape(-1, points.shape[-1])
    out = flat.copy()
    mags = np.abs(flat)
    outside = mags.sum(axis=1) > radius
    if np.any(outside):
        v = mags[outside]
        u = -np.sort(-v, axis=1)
        css = np.cumsum(u, axis=1)
        ranks = np.arange(1, v.shape[1] + 1)
        cond = u * ranks > css - radius
        rho = v.shape[1] - 1 - np.argmax(cond[:, ::-1], axis=1)
        theta = (css[np.arange(v.shape[0]), rho] - radius) / (rho + 1.0)
        w = np.maximum(v - theta[:, None], 0.0)
        out[outside] = np.sign(flat[outside]) * w
    return out.reshape(points.shape)


def project(set, point):
    """Euclidean projection of ``point`` (or each row of a stack) onto ``set``."""
    return set.project(point)


def linear_minimize(set, direction):
    """A feasible minimiser of ``<direction, x>`` over ``set``."""
    return set.linear_minimize(direction)


def diameter(set):
    return set.diameter()


def constraint_from_config(cfg, dim=None):
    """Build a set from ``{"kind": "box"|"l1"|"l2", ...}``.

    Boxes take ``lower``/``upper`` lists, or a scalar ``half_width`` plus a
    dimension.  Balls take ``radius`` and ``dim`` (falling back to ``dim``).
    """
    cfg = dict(cfg)
    kind = cfg.pop("kind", None)
    if kind == "box":
        if "half_width" in cfg:
            d = cfg.get("dim", dim)
            if d is None:
                raise UsageError("box with half_width needs a dimension")
            return Box.cube(cfg["half_width"], int(d))
        return Box(cfg["lower"], cfg["upper"])
    if kind in ("l1", "l2"):
        d = cfg.get("dim", dim)
        if d is None:
            raise UsageError(f"{kind} ball needs a dimension")
        cls = L1Ball if kind == "l1" else L2Ball
        return cls(float(cfg["radius"]), int(d))
    raise UsageError(f"unknown constraint kind {kind!r}")


def feasible_grid(set, n_points=4096):
    """Deterministic low-discrepancy sample of feasible points.

    An unscrambled Sobol sequence over the bounding box, projected onto the
    set.  Projection piles some points on the boundary, which is harmless for
    sup-type estimates.
    """
    lower, upper = set.bounds()
    m = int(np.ceil(np.log2(max(n_points, 2))))
    pts = qmc.Sobol(set.dim, scramble=False).random_base2(m)[:n_points]
    return set.project(lower + pts * (upper - lower))
