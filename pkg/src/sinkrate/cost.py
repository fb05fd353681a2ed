"""Cost families, epsilon scaling and the cost-decomposition checks."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable

import numpy as np

from .measures import DiscreteMeasure

KINDS = ("sq_distance", "distance_pow", "custom_matrix", "modulus")


class CostError(ValueError):
    pass


@dataclass(frozen=True)
class Omega:
    """Concave nondecreasing ``omega(s) = a + b * s**q`` with ``q`` in (0, 1]."""

    a: float = 0.0
    b: float = 1.0
    q: float = 1.0

    def __post_init__(self):
        if self.a < 0 or self.b < 0:
            raise CostError("omega needs a >= 0 and b >= 0")
        if not 0 < self.q <= 1:
            raise CostError("omega exponent q must lie in (0, 1]")

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        return self.a + self.b * np.power(s, self.q)

    def scaled(self, factor: float) -> "Omega":
        return Omega(self.a * factor, self.b * factor, self.q)

    def to_spec(self) -> dict:
        return {"a": self.a, "b": self.b, "q": self.q}


@dataclass(frozen=True, eq=False)
class CostModel:
    kind: str
    epsilon: float = 1.0
    p: float = 2.0
    matrix: np.ndarray | None = None
    omega: Omega | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise CostError(f"unknown cost kind {self.kind!r}")
        if not (self.epsilon > 0 and np.isfinite(self.epsilon)):
            raise CostError("epsilon must be positive and finite")
        if self.kind == "distance_pow" and self.p < 0:
            raise CostError("distance_pow needs p >= 0")
        if self.kind == "custom_matrix":
            if self.matrix is None:
                raise CostError("custom_matrix needs a matrix")
            mat = np.array(self.matrix, dtype=float)
            if mat.ndim != 2 or not np.all(np.isfinite(mat)):
                raise CostError("custom matrix must be a finite 2-d array")
            mat.setflags(write=False)
            object.__setattr__(self, "matrix", mat)
        if self.kind == "modulus" and self.omega is None:
            object.__setattr__(self, "omega", Omega())

    def with_epsilon(self, epsilon: float) -> "CostModel":
        return CostModel(self.kind, epsilon, self.p, self.matrix, self.omega)

    @property
    def growth_exponent(self) -> float | None:
        if self.kind == "sq_distance":
            return 2.0
        if self.kind == "distance_pow":
            return float(self.p)
        return None

    def pairwise(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Unscaled cost ``c(x_i, y_j)`` for point arrays of shape (n, d), (m, d)."""
        if self.kind == "custom_matrix":
            raise CostError("custom_matrix has no pointwise formula")
        diff = x[:, None, :] - y[None, :, :]
        if self.kind == "sq_distance":
            return np.sum(diff * diff, axis=-1)
        d = np.sqrt(np.sum(diff * diff, axis=-1))
        if self.kind == "distance_pow":
            return np.power(d, self.p)
        return self.omega(d)

    def to_spec(self) -> dict:
        spec = {"kind": self.kind, "epsilon": self.epsilon}
        if self.kind == "distance_pow":
            spec["p"] = self.p
        if self.kind == "modulus":
            spec.update(self.omega.to_spec())
        if self.kind == "custom_matrix":
            spec["matrix"] = self.matrix.tolist()
        return spec


@dataclass(frozen=True, eq=False)
class CostMatrix:
    """``c(x_i, y_j) / epsilon`` on the supports of ``mx`` and ``my``."""

    entries: np.ndarray
    mx: DiscreteMeasure
    my: DiscreteMeasure
    model: CostModel | None = None
    shape: tuple = field(init=False)

    def __post_init__(self):
        e = np.array(self.entries, dtype=float)
        if e.shape != (self.mx.size, self.my.size):
            raise CostError(f"cost matrix shape {e.shape} does not match supports "
                            f"({self.mx.size}, {self.my.size})")
        if not np.all(np.isfinite(e)):
            raise CostError("cost matrix has non-finite entries")
        e.setflags(write=False)
        object.__setattr__(self, "entries", e)
        object.__setattr__(self, "shape", e.shape)

    @property
    def epsilon(self) -> float:
        return self.model.epsilon if self.model is not None else 1.0


def build_cost_matrix(model: CostModel, mx: DiscreteMeasure, my: DiscreteMeasure) -> CostMatrix:
    if model.kind == "custom_matrix":
        if model.matrix.shape != (mx.size, my.size):
            raise CostError(f"custom matrix has shape {model.matrix.shape}, "
                            f"expected ({mx.size}, {my.size})")
        raw = model.matrix
    else:
        if mx.dim != my.dim:
            raise CostError("supports live in different dimensions")
        raw = model.pairwise(mx.points, my.points)
    return CostMatrix(raw / model.epsilon, mx, my, model)


def load_cost_csv(path) -> np.ndarray:
    """Headerless row-major CSV of floats."""
    with open(path, newline="") as fh:
        rows = [[float(v) for v in row] for row in csv.reader(fh) if row]
    if not rows or len({len(r) for r in rows}) != 1:
        raise CostError(f"{path}: ragged or empty cost matrix")
    return np.array(rows)


def cost_from_spec(spec: dict, base_dir: Path | None = None) -> CostModel:
    kind = spec.get("kind")
    if kind not in KINDS:
        raise CostError(f"cost.kind: unknown kind {kind!r}")
    eps = float(spec.get("epsilon", 1.0))
    if kind == "distance_pow":
        if "p" not in spec:
            raise CostError("cost.p: required for distance_pow")
        return CostModel(kind, eps, p=float(spec["p"]))
    if kind == "modulus":
        return CostModel(kind, eps, omega=Omega(float(spec.get("a", 0.0)),
                                                float(spec.get("b", 1.0)),
                                                float(spec.get("q", 1.0))))
    if kind == "custom_matrix":
        if "matrix" in spec:
            mat = np.array(spec["matrix"], dtype=float)
        elif "path" in spec:
            path = Path(spec["path"])
            if base_dir is not None and not path.is_absolute():
                path = base_dir / path
            mat = load_cost_csv(path)
        else:
            raise CostError("cost.matrix: custom_matrix needs 'matrix' or 'path'")
        return CostModel(kind, eps, matrix=mat)
    return CostModel(kind, eps)


# -- decompositions c = c1(x) + c2(y) + chat(x, y) -------------------------

@dataclass(frozen=True)
class CrossTerm:
    """``K_minus |x|^alpha |y|^beta <= +-chat`` contribution, ``K_plus`` for the upper side."""

    k_plus: float
    k_minus: float
    alpha: float
    beta: float


@dataclass(frozen=True)
class Decomposition:
    """Growth data of an (unscaled) cost, with ``|x|, |y|`` measured from a common point.

    ``c1``, ``c2``, ``a_plus``, ``a_minus`` act on norms.
    """

    p: float
    c1: Callable[[np.ndarray], np.ndarray]
    c2: Callable[[np.ndarray], np.ndarray]
    a_plus: Callable[[np.ndarray], np.ndarray]
    a_minus: Callable[[np.ndarray], np.ndarray]
    terms: tuple


def _zero(r):
    return np.zeros_like(np.asarray(r, dtype=float))


def decomposition(model: CostModel) -> Decomposition | None:
    """Closed-form decomposition for the built-in superlinear kinds, else ``None``."""
    if model.kind == "sq_distance":
        sq = lambda r: np.asarray(r, dtype=float) ** 2
        return Decomposition(2.0, sq, sq, _zero, _zero, (CrossTerm(2.0, 2.0, 1.0, 1.0),))
    if model.kind == "distance_pow" and model.p >= 1:
        p = float(model.p)
        k = p * 2.0 ** (p - 1)
        a = lambda r: k * np.asarray(r, dtype=float) ** p
        return Decomposition(p, _zero, lambda r: np.asarray(r, dtype=float) ** p, a, a,
                             (CrossTerm(k, k, 1.0, p - 1.0),))
    return None


def modulus_for(model: CostModel, mx: DiscreteMeasure | None = None,
                my: DiscreteMeasure | None = None) -> Omega | None:
    """Modulus ``omega`` of the scaled cost ``c/epsilon`` in each variable, if one applies."""
    inv = 1.0 / model.epsilon
    if model.kind == "distance_pow" and model.p <= 1:
        if model.p == 0:
            return Omega(0.0, 0.0, 1.0)
        return Omega(0.0, inv, float(model.p))
    if model.kind == "modulus":
        return model.omega.scaled(inv)
    if model.kind == "custom_matrix":
        m = model.matrix
        osc = max(float(np.max(np.ptp(m, axis=1))), float(np.max(np.ptp(m, axis=0))))
        return Omega(osc * inv, 0.0, 1.0)
    return None


# -- numerical checks of the decomposition inequalities --------------------

@dataclass
class CheckReport:
    max_violation: float
    n_samples: int
    details: dict

    @property
    def passed(self) -> bool:
        return self.max_violation <= 1e-9


def _pairs(sample_pairs: Iterable):
    xs, ys = [], []
    for x, y in sample_pairs:
        xs.append(np.atleast_1d(np.asarray(x, dtype=float)))
        ys.append(np.atleast_1d(np.asarray(y, dtype=float)))
    return np.array(xs), np.array(ys)


def check_distance_pow_decomposition(p: float, sample_pairs, x0=None) -> CheckReport:
    """Max of ``|d(x,y)^p - |y|^p| - p 2^(p-1) (|x||y|^(p-1) + |x|^p)`` over the samples."""
    if p < 1:
        raise CostError("decomposition needs p >= 1; use the modulus route for p < 1")
    xs, ys = _pairs(sample_pairs)
    ref = np.zeros(xs.shape[1]) if x0 is None else np.asarray(x0, float)
    nx = np.linalg.norm(xs - ref, axis=1)
    ny = np.linalg.norm(ys - ref, axis=1)
    d = np.linalg.norm(xs - ys, axis=1)
    lhs = np.abs(d ** p - ny ** p)
    rhs = p * 2.0 ** (p - 1) * (nx * ny ** (p - 1) + nx ** p)
    viol = lhs - rhs
    return CheckReport(float(np.max(viol)), len(viol), {"lhs": lhs, "rhs": rhs})


def check_gateaux_decomposition(c: Callable, C: float, p: float, sample_pairs) -> CheckReport:
    """Check both growth inequalities for a differentiable cost ``c(x, y)`` on R^d.

    The product norm is ``|(x, y)| = |x| + |y|``.
    """
    xs, ys = _pairs(sample_pairs)
    zero = np.zeros(xs.shape[1])
    zy = np.zeros(ys.shape[1])
    c00 = float(c(zero, zy))
    v1, v2 = [], []
    for x, y in zip(xs, ys):
        nx, ny = np.linalg.norm(x), np.linalg.norm(y)
        c0y = float(c(zero, y))
        v1.append(abs(float(c(x, y)) - c0y) - 2.0 ** (p - 1) * C * (1 + nx * ny ** (p - 1) + nx ** p))
        v2.append(abs(c0y) - abs(c00) - C * (1 + ny ** p))
    v1, v2 = np.array(v1), np.array(v2)
    return CheckReport(float(max(v1.max(), v2.max())), len(v1),
                       {"displacement": float(v1.max()), "anchor_growth": float(v2.max())})


def check_modulus(model: CostModel, omega: Omega, mx: DiscreteMeasure, my: DiscreteMeasure) -> CheckReport:
    """Sample check of ``|c(x,y1) - c(x,y2)| <= omega(d(y1,y2))`` (and with x, y swapped)."""
    c = build_cost_matrix(model, mx, my).entries
    dy = np.linalg.norm(my.points[:, None] - my.points[None], axis=-1)
    dx = np.linalg.norm(mx.points[:, None] - mx.points[None], axis=-1)
    vy = np.abs(c[:, :, None] - c[:, None, :]) - omega(dy)[None]
    vx = np.abs(c[:, None, :] - c[None, :, :]) - omega(dx)[:, :, None]
    return CheckReport(float(max(vy.max(), vx.max())), vy.size + vx.size,
                       {"y_side": float(vy.max()), "x_side": float(vx.max())})
