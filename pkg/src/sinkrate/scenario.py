"""Scenario configuration: parsing and validation of the JSON batch document."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .bounds import AlphaGrid, BoundsError, default_grid_size
from .cost import CostError, CostModel, build_cost_matrix, cost_from_spec
from .measures import DiscreteMeasure, MeasureError, measure_from_spec

PERTURB_TARGETS = ("mu", "nu", "both")


class ScenarioError(ValueError):
    """Invalid configuration; ``field`` names the offending entry."""

    def __init__(self, field_path: str, message: str):
        super().__init__(f"{field_path}: {message}")
        self.field = field_path


@dataclass(frozen=True)
class Perturbation:
    kind: str
    magnitudes: tuple
    seeds: tuple
    target: str = "both"


@dataclass(frozen=True)
class Scenario:
    name: str
    mu: dict
    nu: dict
    cost: dict
    max_t: int = 1000
    ref_tol: float = 1e-14
    stop_tol: float = 1e-13
    alpha_grid: AlphaGrid = field(default_factory=AlphaGrid)
    epsilon_grid: tuple | None = None
    perturbation: Perturbation | None = None
    certificate_mode: bool = False
    base_dir: str = "."

    def measures(self) -> tuple[DiscreteMeasure, DiscreteMeasure]:
        return measure_from_spec(self.mu), measure_from_spec(self.nu)

    def cost_model(self, epsilon: float | None = None) -> CostModel:
        model = cost_from_spec(self.cost, Path(self.base_dir))
        return model if epsilon is None else model.with_epsilon(epsilon)


def _number(obj, key, where, default, kind=float, positive=False, minimum=None):
    if key not in obj:
        return default
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ScenarioError(f"{where}.{key}", f"expected a number, got {v!r}")
    if kind is int and (not float(v).is_integer()):
        raise ScenarioError(f"{where}.{key}", f"expected an integer, got {v!r}")
    v = kind(v)
    if not math.isfinite(v):
        raise ScenarioError(f"{where}.{key}", "must be finite")
    if positive and v <= 0:
        raise ScenarioError(f"{where}.{key}", "must be positive")
    if minimum is not None and v < minimum:
        raise ScenarioError(f"{where}.{key}", f"must be >= {minimum}")
    return v


def _alpha_grid(obj, where) -> AlphaGrid:
    if obj is None:
        return AlphaGrid()
    if not isinstance(obj, dict):
        raise ScenarioError(where, "expected an object")
    lo = _number(obj, "lo_exp", where, -20.0)
    hi = _number(obj, "hi_exp", where, 20.0)
    size = _number(obj, "size", where, None, int, minimum=1)
    if hi < lo:
        raise ScenarioError(f"{where}.hi_exp", "must be >= lo_exp")
    try:
        return AlphaGrid(2.0 ** lo, 2.0 ** hi, default_grid_size() if size is None else size)
    except BoundsError as e:
        raise ScenarioError(where, str(e)) from None


def _perturbation(obj, where) -> Perturbation | None:
    if obj is None:
        return None
    if not isinstance(obj, dict):
        raise ScenarioError(where, "expected an object")
    kind = obj.get("kind")
    if kind not in ("reweight", "jitter"):
        raise ScenarioError(f"{where}.kind", f"expected 'reweight' or 'jitter', got {kind!r}")
    mags = obj.get("magnitudes")
    if not isinstance(mags, list) or not mags:
        raise ScenarioError(f"{where}.magnitudes", "expected a nonempty list")
    for i, m in enumerate(mags):
        if isinstance(m, bool) or not isinstance(m, (int, float)) or m < 0:
            raise ScenarioError(f"{where}.magnitudes[{i}]", "must be a nonnegative number")
    seeds = obj.get("seeds", [0])
    if not isinstance(seeds, list) or not seeds or not all(
            isinstance(s, int) and not isinstance(s, bool) and s >= 0 for s in seeds):
        raise ScenarioError(f"{where}.seeds", "expected a nonempty list of nonnegative integers")
    target = obj.get("target", "both")
    if target not in PERTURB_TARGETS:
        raise ScenarioError(f"{where}.target", f"expected one of {PERTURB_TARGETS}")
    return Perturbation(kind, tuple(float(m) for m in mags), tuple(seeds), target)


def parse_scenario(obj, index: int, base_dir: str = ".") -> Scenario:
    where = f"scenarios[{index}]"
    if not isinstance(obj, dict):
        raise ScenarioError(where, "expected an object")
    name = obj.get("name")
    if not isinstance(name, str) or not name or "/" in name or name in (".", ".."):
        raise ScenarioError(f"{where}.name", "expected a nonempty string usable as a directory name")
    for key in ("mu", "nu", "cost"):
        if not isinstance(obj.get(key), dict):
            raise ScenarioError(f"{where}.{key}", "missing or not an object")
    eps_grid = obj.get("epsilon_grid")
    if eps_grid is not None:
        if not isinstance(eps_grid, list) or not eps_grid:
            raise ScenarioError(f"{where}.epsilon_grid", "expected a nonempty list")
        for i, e in enumerate(eps_grid):
            if isinstance(e, bool) or not isinstance(e, (int, float)) or not e > 0:
                raise ScenarioError(f"{where}.epsilon_grid[{i}]", "must be a positive number")
        if len(set(map(float, eps_grid))) != len(eps_grid):
            raise ScenarioError(f"{where}.epsilon_grid", "entries must be distinct")
        eps_grid = tuple(float(e) for e in eps_grid)
    mode = obj.get("certificate_mode", False)
    if not isinstance(mode, bool):
        raise ScenarioError(f"{where}.certificate_mode", "expected true or false")
    s = Scenario(
        name=name, mu=obj["mu"], nu=obj["nu"], cost=obj["cost"],
        max_t=_number(obj, "max_t", where, 1000, int, minimum=1),
        ref_tol=_number(obj, "ref_tol", where, 1e-14, positive=True),
        stop_tol=_number(obj, "stop_tol", where, 1e-13, minimum=0.0),
        alpha_grid=_alpha_grid(obj.get("alpha_grid"), f"{where}.alpha_grid"),
        epsilon_grid=eps_grid,
        perturbation=_perturbation(obj.get("perturbation"), f"{where}.perturbation"),
        certificate_mode=mode, base_dir=base_dir)
    # build everything once so errors surface at validation time
    try:
        mx = measure_from_spec(s.mu)
    except MeasureError as e:
        raise ScenarioError(f"{where}.mu", str(e)) from None
    try:
        my = measure_from_spec(s.nu)
    except MeasureError as e:
        raise ScenarioError(f"{where}.nu", str(e)) from None
    try:
        build_cost_matrix(s.cost_model(), mx, my)
    except (CostError, OSError, ValueError, TypeError) as e:
        raise ScenarioError(f"{where}.cost", str(e)) from None
    return s


def parse_config(doc, base_dir: str = ".") -> list[Scenario]:
    if not isinstance(doc, dict):
        raise ScenarioError("config", "top level must be an object")
    items = doc.get("scenarios")
    if not isinstance(items, list):
        raise ScenarioError("scenarios", "missing or not a list")
    out = [parse_scenario(obj, i, base_dir) for i, obj in enumerate(items)]
    seen = {}
    for i, s in enumerate(out):
        if s.name in seen:
            raise ScenarioError(f"scenarios[{i}].name",
                                f"duplicate name {s.name!r} (also scenarios[{seen[s.name]}])")
        seen[s.name] = i
    return out


def load_config(path) -> list[Scenario]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ScenarioError("config", f"cannot read {path}: {e.strerror}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ScenarioError("config", f"invalid JSON at line {e.lineno} column {e.colno}: {e.msg}") from None
    return parse_config(doc, str(path.parent.resolve()))
