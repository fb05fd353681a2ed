"""Finitely supported probability measures on R^d."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

WEIGHT_SUM_TOL = 1e-12


class MeasureError(ValueError):
    """Raised when a measure cannot be constructed."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Probability measure with strictly positive weights on distinct points.

    ``points`` has shape ``(n, d)``. Zero-weight atoms are dropped at
    construction. ``anchor`` indexes the reference point used for ``|x|``
    in growth estimates; it defaults to the atom closest to the origin.
    """

    points: np.ndarray
    weights: np.ndarray
    anchor: int = -1
    log_weights: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        w = np.asarray(self.weights, dtype=float).ravel()
        if pts.ndim != 2 or pts.shape[0] != w.shape[0]:
            raise MeasureError(
                f"points/weights length mismatch: {pts.shape[0]} vs {w.shape[0]}")
        if w.size == 0:
            raise MeasureError("measure has no atoms")
        if not np.all(np.isfinite(w)) or not np.all(np.isfinite(pts)):
            raise MeasureError("non-finite points or weights")
        if np.any(w < 0):
            raise MeasureError("negative weight")
        total = w.sum()
        if abs(total - 1.0) > WEIGHT_SUM_TOL:
            raise MeasureError(f"weights sum to {total!r}, not 1")
        anchor = self.anchor
        keep = w > 0
        if not np.all(keep):
            if anchor >= 0:
                if not keep[anchor]:
                    raise MeasureError("anchor atom has zero weight")
                anchor = int(np.count_nonzero(keep[:anchor]))
            pts, w = pts[keep], w[keep]
        if len(np.unique(pts, axis=0)) != len(pts):
            raise MeasureError("points are not pairwise distinct")
        if anchor < 0:
            anchor = int(np.argmin(np.linalg.norm(pts, axis=1)))
        elif anchor >= len(w):
            raise MeasureError(f"anchor index {anchor} out of range")
        object.__setattr__(self, "points", _frozen(pts))
        object.__setattr__(self, "weights", _frozen(w))
        object.__setattr__(self, "anchor", anchor)
        object.__setattr__(self, "log_weights", _frozen(np.log(w)))

    @classmethod
    def from_unnormalized(cls, points, masses, anchor: int = -1) -> "DiscreteMeasure":
        m = np.asarray(masses, dtype=float).ravel()
        if np.any(m < 0) or not np.all(np.isfinite(m)):
            raise MeasureError("masses must be finite and nonnegative")
        total = m.sum()
        if total <= 0:
            raise MeasureError("all weights are zero")
        w = m / total
        # absorb rounding so the sum check is exact to working precision
        return cls(points, w / w.sum(), anchor)

    @property
    def size(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def anchor_point(self) -> np.ndarray:
        return self.points[self.anchor]

    def norms(self, reference=None) -> np.ndarray:
        """``|x| = d(x, x0)`` for every atom; ``x0`` defaults to the anchor."""
        ref = self.anchor_point if reference is None else np.asarray(reference, float)
        return np.linalg.norm(self.points - ref, axis=1)

    def mean(self, values) -> float:
        return float(np.dot(self.weights, values))

    def same_as(self, other: "DiscreteMeasure") -> bool:
        return (self.points.shape == other.points.shape
                and np.array_equal(self.points, other.points)
                and np.array_equal(self.weights, other.weights))

    def to_spec(self) -> dict:
        return {"points": self.points.tolist(), "weights": self.weights.tolist()}


def _as_axis_vector(v, d=None) -> np.ndarray:
    a = np.atleast_1d(np.asarray(v, dtype=float))
    if d is not None and a.size == 1 and d > 1:
        a = np.full(d, a[0])
    return a


def make_grid_measure(lo, hi, counts, weight_fn: Callable[[np.ndarray], float]) -> DiscreteMeasure:
    """Regular grid on the box ``[lo, hi]`` with weights proportional to ``weight_fn``."""
    lo = _as_axis_vector(lo)
    hi = _as_axis_vector(hi, lo.size)
    lo = _as_axis_vector(lo, hi.size)
    counts = np.atleast_1d(np.asarray(counts, dtype=int))
    if counts.size == 1 and lo.size > 1:
        counts = np.full(lo.size, counts[0])
    if not (lo.size == hi.size == counts.size):
        raise MeasureError("lo, hi and counts must have the same dimension")
    if np.any(counts < 1):
        raise MeasureError("counts must be >= 1 on every axis")
    axes = [np.linspace(a, b, k) if k > 1 else np.array([a])
            for a, b, k in zip(lo, hi, counts)]
    pts = np.array(list(itertools.product(*axes)), dtype=float)
    masses = np.array([float(weight_fn(p)) for p in pts])
    if np.any(masses < 0) or not np.all(np.isfinite(masses)):
        raise MeasureError("weight_fn must be finite and nonnegative")
    if not np.any(masses > 0):
        raise MeasureError("weight_fn vanishes on the whole grid")
    return DiscreteMeasure.from_unnormalized(pts, masses)


FAMILY_EXPONENTS = {"gaussian": 2.0}


def discretize_subexp_family(family: str, mean, scale: float, n: int, radius: float,
                             p: float | None = None) -> DiscreteMeasure:
    """Discretize ``exp(-(|x-mean|/scale)^p)`` on ``n`` equispaced atoms per axis.

    ``family`` is ``"gaussian"`` (p = 2) or ``"exp_power"`` with explicit ``p``.
    The grid spans ``mean +/- radius*scale`` on every axis.
    """
    if family == "exp_power":
        if p is None or p <= 0:
            raise MeasureError("exp_power family needs a positive exponent p")
        expo = float(p)
    elif family in FAMILY_EXPONENTS:
        expo = FAMILY_EXPONENTS[family]
    else:
        raise MeasureError(f"unknown family {family!r}")
    if n < 2:
        raise MeasureError("n must be >= 2")
    if radius <= 0 or scale <= 0:
        raise MeasureError("radius and scale must be positive")
    mean = _as_axis_vector(mean)
    half = radius * scale
    return make_grid_measure(
        mean - half, mean + half, [n] * mean.size,
        lambda x: np.exp(-(np.linalg.norm(x - mean) / scale) ** expo))


def perturb(m: DiscreteMeasure, kind: str, magnitude: float, seed: int) -> DiscreteMeasure:
    """Seeded reweighting or jitter of a measure; support size is preserved."""
    if magnitude < 0:
        raise MeasureError("magnitude must be nonnegative")
    rng = np.random.default_rng(seed)
    if kind == "reweight":
        u = rng.uniform(-1.0, 1.0, m.size)
        if magnitude == 0:
            return m
        return DiscreteMeasure.from_unnormalized(
            m.points, m.weights * np.exp(magnitude * u), m.anchor)
    if kind == "jitter":
        g = rng.standard_normal((m.size, m.dim))
        r = rng.uniform(0.0, 1.0, m.size) ** (1.0 / m.dim)
        norms = np.linalg.norm(g, axis=1)
        norms[norms == 0] = 1.0
        v = g / norms[:, None] * r[:, None]
        if magnitude == 0:
            return m
        pts = m.points + magnitude * v
        if len(np.unique(pts, axis=0)) != len(pts):
            raise MeasureError("jitter produced coincident points")
        return DiscreteMeasure(pts, m.weights, m.anchor)
    raise MeasureError(f"unknown perturbation kind {kind!r}")


def measure_from_spec(spec: dict) -> DiscreteMeasure:
    """Build a measure from its JSON form (family spec or explicit atoms)."""
    if "points" in spec:
        if "weights" not in spec:
            raise MeasureError("explicit measure needs 'weights'")
        return DiscreteMeasure(spec["points"], spec["weights"], spec.get("anchor", -1))
    if "family" in spec:
        missing = [k for k in ("mean", "scale", "n", "radius") if k not in spec]
        if missing:
            raise MeasureError(f"family measure missing field(s) {missing}")
        return discretize_subexp_family(spec["family"], spec["mean"], float(spec["scale"]),
                                        int(spec["n"]), float(spec["radius"]), spec.get("p"))
    raise MeasureError("measure spec needs 'points'/'weights' or 'family'")


def support_mismatch(a: DiscreteMeasure, b: DiscreteMeasure) -> tuple[list[int], list[int]]:
    """Atoms of ``a`` missing from ``b`` and atoms of ``b`` missing from ``a``.

    Both lists are empty only when the two supports are identical and
    identically ordered.
    """
    if a.points.shape == b.points.shape and np.array_equal(a.points, b.points):
        return [], []
    aset = {tuple(p) for p in a.points}
    bset = {tuple(p) for p in b.points}
    only_a = [i for i, p in enumerate(a.points) if tuple(p) not in bset]
    only_b = [j for j, p in enumerate(b.points) if tuple(p) not in aset]
    if not only_a and not only_b:
        # same atoms, different ordering
        only_a = [i for i in range(a.size) if not np.array_equal(a.points[i], b.points[i])]
    return only_a, only_b
