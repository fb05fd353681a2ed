"""Log-sum-exp, relative entropy and total variation (all in nats)."""

from __future__ import annotations

import numpy as np


def log_sum_exp(values, log_weights=None, axis=None):
    """``log sum_i exp(values_i + log_weights_i)`` with max-subtraction.

    ``log_weights`` broadcasts against ``values``. With ``axis=None`` the
    reduction runs over every entry and a float is returned.
    """
    v = np.asarray(values, dtype=float)
    if log_weights is not None:
        v = v + np.asarray(log_weights, dtype=float)
    if v.size == 0:
        raise ValueError("log_sum_exp of an empty input")
    m = np.max(v, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    out = np.log(np.sum(np.exp(v - m), axis=axis, keepdims=True)) + m
    if axis is None:
        return float(out.reshape(()))
    return np.squeeze(out, axis=axis)


def _pair(p, q):
    p = np.asarray(p, dtype=float).ravel()
    q = np.asarray(q, dtype=float).ravel()
    if p.shape != q.shape:
        raise ValueError(f"length mismatch: {p.size} vs {q.size}")
    return p, q


def kl(p, q) -> float:
    """Relative entropy ``H(p|q) = sum p log(p/q)``; ``inf`` if ``p`` is not dominated by ``q``."""
    p, q = _pair(p, q)
    pos = p > 0
    if np.any(q[pos] <= 0):
        return float("inf")
    # the sum is >= 0 exactly; rounding can leave a tiny negative
    return max(float(np.sum(p[pos] * (np.log(p[pos]) - np.log(q[pos])))), 0.0)


def kl_from_log_ratio(p, log_ratio) -> float:
    """``sum p * log_ratio``, i.e. ``H(p|q)`` when ``log_ratio = log(p/q)`` is known exactly."""
    p, r = _pair(p, log_ratio)
    pos = p > 0
    return float(np.sum(p[pos] * r[pos]))


def total_variation(p, q) -> float:
    p, q = _pair(p, q)
    return 0.5 * float(np.sum(np.abs(p - q)))
