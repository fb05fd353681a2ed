"""Benchmark scenario catalogue shared by the shipped config and the test suites."""

from __future__ import annotations

import json
import sys

import numpy as np


def _gauss(mean, scale=1.0, n=32, radius=3.0):
    return {"family": "gaussian", "mean": list(np.atleast_1d(mean).astype(float)),
            "scale": scale, "n": n, "radius": radius}


def _atoms(points, weights):
    return {"points": [[float(p)] for p in points], "weights": list(map(float, weights))}


def _bounded_matrix(n, m, seed=11, hi=3.0):
    rng = np.random.default_rng(seed)
    return np.round(rng.uniform(0.0, hi, (n, m)), 6).tolist()


TWO = _atoms([0.0, 1.0], [0.3, 0.7]), _atoms([0.0, 1.0], [0.6, 0.4])
SWEEP = {"kind": "reweight", "magnitudes": [0.01, 0.05, 0.1], "seeds": [0, 1, 2, 3, 4],
         "target": "both"}


def benchmark_scenarios() -> list[dict]:
    g0, g1 = _gauss([0.0]), _gauss([0.5])
    a = np.linspace(0.0, 1.0, 8)
    separable = (a[:, None] ** 2 + 2.0 * a[None, :]).tolist()
    small = _gauss([0.0], n=8, radius=2.0), _gauss([0.25], n=8, radius=2.0)
    return [
        {"name": "zero_cost", "mu": small[0], "nu": small[1],
         "cost": {"kind": "custom_matrix", "matrix": [[0.0] * 8] * 8}, "max_t": 50},
        {"name": "separable", "mu": small[0], "nu": small[1],
         "cost": {"kind": "custom_matrix", "matrix": separable}, "max_t": 50},
        {"name": "two_by_two", "mu": TWO[0], "nu": TWO[1],
         "cost": {"kind": "custom_matrix", "matrix": [[0.0, 1.0], [1.0, 0.0]]}, "max_t": 200,
         "perturbation": SWEEP},
        {"name": "gauss_sq_eps1", "mu": g0, "nu": g1,
         "cost": {"kind": "sq_distance", "epsilon": 1.0}, "max_t": 2000},
        {"name": "gauss_sq_eps0.25", "mu": g0, "nu": g1,
         "cost": {"kind": "sq_distance", "epsilon": 0.25}, "max_t": 2000},
        {"name": "gauss_sq_far", "mu": _gauss([0.0], 0.5), "nu": _gauss([3.0], 0.5),
         "cost": {"kind": "sq_distance", "epsilon": 0.1}, "max_t": 4000},
        {"name": "gauss2d_sq", "mu": _gauss([0.0, 0.0], n=8, radius=2.5),
         "nu": _gauss([0.5, -0.25], n=8, radius=2.5),
         "cost": {"kind": "sq_distance", "epsilon": 0.5}, "max_t": 2000},
        {"name": "dist_pow1", "mu": g0, "nu": g1,
         "cost": {"kind": "distance_pow", "p": 1.0, "epsilon": 0.5}, "max_t": 2000},
        {"name": "dist_pow1.5", "mu": g0, "nu": g1,
         "cost": {"kind": "distance_pow", "p": 1.5, "epsilon": 0.5}, "max_t": 2000},
        {"name": "dist_pow0.5", "mu": g0, "nu": g1,
         "cost": {"kind": "distance_pow", "p": 0.5, "epsilon": 0.5}, "max_t": 2000},
        {"name": "bounded_custom", "mu": g0, "nu": g1,
         "cost": {"kind": "custom_matrix", "matrix": _bounded_matrix(32, 32), "epsilon": 0.5},
         "max_t": 2000},
        {"name": "stability16", "mu": _gauss([0.0], n=16), "nu": _gauss([0.5], n=16),
         "cost": {"kind": "sq_distance", "epsilon": 0.5}, "max_t": 2000,
         "perturbation": SWEEP},
        {"name": "eps_scaling", "mu": g0, "nu": g1, "cost": {"kind": "sq_distance"},
         "epsilon_grid": [1.0, 0.5, 0.25, 0.1], "max_t": 4000},
    ]


def benchmark_config() -> dict:
    return {"scenarios": benchmark_scenarios()}


if __name__ == "__main__":
    json.dump(benchmark_config(), sys.stdout, indent=1)
    sys.stdout.write("\n")
