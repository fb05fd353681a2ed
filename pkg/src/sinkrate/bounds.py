"""Certified constants, non-asymptotic bound curves and dominance verification."""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np

from .cost import CostMatrix
from .divergence import kl, log_sum_exp, total_variation
from .measures import DiscreteMeasure, support_mismatch
from .sinkhorn import (Coupling, SinkhornTrace, coupling_entropies, log_xi, phi_lp_errors,
                       solve_reference)

ALPHA_GRID_ENV = "SINKRATE_ALPHA_GRID_SIZE"
DOMINANCE_SLACK = 1e-9
MONOTONE_SLACK = 1e-10
GAP_FLOOR = -1e-10
IDENTITY_RTOL = 1e-9
INF = float("inf")
NAN = float("nan")


class BoundsError(RuntimeError):
    pass


# -- the Bolley-Villani constant C(F) ----------------------------------------

def default_grid_size() -> int:
    raw = os.environ.get(ALPHA_GRID_ENV)
    if raw is None:
        return 161
    try:
        n = int(raw)
    except ValueError:
        raise BoundsError(f"{ALPHA_GRID_ENV} must be an integer, got {raw!r}") from None
    if n < 2:
        raise BoundsError(f"{ALPHA_GRID_ENV} must be >= 2")
    return n


@dataclass(frozen=True)
class AlphaGrid:
    """Log-spaced grid ``lo .. hi`` (inclusive) for the infimum over alpha."""

    lo: float = 2.0 ** -20
    hi: float = 2.0 ** 20
    size: int = field(default_factory=default_grid_size)
    refine: bool = True

    def __post_init__(self):
        if not (0 < self.lo <= self.hi) or not math.isfinite(self.hi):
            raise BoundsError("alpha grid needs 0 < lo <= hi < inf")
        if self.size < 1:
            raise BoundsError("alpha grid needs at least one point")

    @classmethod
    def from_exponents(cls, lo_exp: float = -20, hi_exp: float = 20, size: int | None = None,
                       refine: bool = True) -> "AlphaGrid":
        return cls(2.0 ** lo_exp, 2.0 ** hi_exp, default_grid_size() if size is None else size, refine)

    @property
    def values(self) -> np.ndarray:
        if self.size == 1:
            return np.array([self.lo])
        return np.exp(np.linspace(math.log(self.lo), math.log(self.hi), self.size))

    def scaled(self, factor: float) -> "AlphaGrid":
        """Grid with every alpha multiplied by ``factor``."""
        return AlphaGrid(self.lo * factor, self.hi * factor, self.size, self.refine)

    def to_json(self) -> dict:
        return {"lo": self.lo, "hi": self.hi, "size": self.size, "refine": self.refine}


@dataclass(frozen=True)
class CF:
    value: float
    alpha: float


def _cf_objective(alpha: float, absF: np.ndarray, logw: np.ndarray) -> float:
    return (2.0 / alpha) * (1.5 + log_sum_exp(alpha * absF, logw))


def cf_constant(F, m: DiscreteMeasure, grid: AlphaGrid | None = None) -> CF:
    """``min_alpha (2/alpha)(3/2 + log int e^{alpha|F|} dm)`` over the grid, locally refined.

    The value is the objective at an actual alpha, hence an upper bound for the infimum.
    """
    grid = grid or AlphaGrid()
    absF = np.abs(np.asarray(F, dtype=float))
    if absF.shape != m.weights.shape:
        raise BoundsError(f"F has {absF.size} entries, measure has {m.size} atoms")
    logw = m.log_weights
    alphas = grid.values
    vals = np.array([_cf_objective(a, absF, logw) for a in alphas])
    k = int(np.argmin(vals))
    best_v, best_a = float(vals[k]), float(alphas[k])
    if grid.refine and grid.size > 2:
        lo = math.log(alphas[max(k - 1, 0)])
        hi = math.log(alphas[min(k + 1, len(alphas) - 1)])
        for _ in range(60):
            m1 = lo + (hi - lo) / 3
            m2 = hi - (hi - lo) / 3
            v1 = _cf_objective(math.exp(m1), absF, logw)
            v2 = _cf_objective(math.exp(m2), absF, logw)
            for v, lg in ((v1, m1), (v2, m2)):
                if v < best_v:
                    best_v, best_a = v, math.exp(lg)
            if v1 <= v2:
                hi = m2
            else:
                lo = m1
    return CF(best_v, best_a)


def bolley_villani_check(F, m: DiscreteMeasure, m_prime: DiscreteMeasure,
                         grid: AlphaGrid | None = None) -> dict:
    """``|int F d(m' - m)| <= C(F)(sqrt(H(m'|m)) + H(m'|m)/2)``; slack = rhs - lhs."""
    only_a, only_b = support_mismatch(m, m_prime)
    if only_a or only_b:
        raise BoundsError(f"supports differ at atoms {only_a} / {only_b}")
    F = np.asarray(F, dtype=float)
    lhs = abs(float(np.dot(m_prime.weights - m.weights, F)))
    h = kl(m_prime.weights, m.weights)
    cf = cf_constant(F, m, grid)
    rhs = cf.value * (math.sqrt(h) + 0.5 * h)
    return {"lhs": lhs, "rhs": rhs, "slack": rhs - lhs, "C": cf.value, "alpha": cf.alpha, "H": h}


# -- trace constants -------------------------------------------------------

@dataclass(frozen=True)
class C1Constants:
    C1: float
    C1_t: int
    C1_alpha: float
    C1_tilde: float
    C1_tilde_t: int
    C1_tilde_alpha: float

    @property
    def C1_bar(self) -> float:
        return self.C1 + self.C1_tilde


def c1_constants(trace: SinkhornTrace, grid: AlphaGrid | None = None) -> C1Constants:
    """Suprema over every recorded ``phi_t`` of ``C(phi_t - phi*)`` and ``C(phi_t)``."""
    if not trace.has_reference:
        raise BoundsError("c1_constants needs a trace with a reference attached")
    grid = grid or AlphaGrid()
    star = trace.pi_star.phi
    best = (-INF, 0, NAN)
    best_t = (-INF, 0, NAN)
    for t, phi in enumerate(trace.phis):
        a = cf_constant(phi - star, trace.mx, grid)
        if a.value > best[0]:
            best = (a.value, t, a.alpha)
        b = cf_constant(phi, trace.mx, grid)
        if b.value > best_t[0]:
            best_t = (b.value, t, b.alpha)
    return C1Constants(best[0], best[1], best[2], best_t[0], best_t[1], best_t[2])


def certificate_c1(trace: SinkhornTrace, K_iterate: float, p: float, reference,
                   grid: AlphaGrid | None = None) -> CF:
    """``C(2K(1 + |x|^p))``: covers every ``t`` since ``|phi_t - phi*| <= |phi_t| + |phi*|``."""
    r = trace.mx.norms(reference)
    return cf_constant(2.0 * K_iterate * (1.0 + r ** p), trace.mx, grid)


@dataclass
class BoundReport:
    C1: float
    C1_tilde: float
    kappa: float
    H_star_R: float
    H_star_pi0: float
    H_pi0_R: float
    H_star_pi2t1: float
    t0: int
    t1: int
    t2: int
    t3: int
    t1_bound_holds: bool
    alpha_grid: AlphaGrid
    C_F_values: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)

    @property
    def C1_bar(self) -> float:
        return self.C1 + self.C1_tilde

    @property
    def rate_constant(self) -> float:
        """The constant ``5 (C1^2 v H(pi*|R))`` of the loosest regime-(b) form."""
        return 5.0 * max(self.C1 ** 2, self.H_star_R)

    def to_json(self) -> dict:
        return {
            "C1": self.C1, "C1_tilde": self.C1_tilde, "C1_bar": self.C1_bar,
            "kappa": self.kappa, "H_star_R": self.H_star_R, "H_star_pi0": self.H_star_pi0,
            "H_pi0_R": self.H_pi0_R, "H_star_pi2t1": self.H_star_pi2t1,
            "t0": self.t0, "t1": self.t1, "t2": self.t2, "t3": self.t3,
            "t1_bound_holds": self.t1_bound_holds, "rate_constant": self.rate_constant,
            "C_F_values": self.C_F_values, "alpha_grid": self.alpha_grid.to_json(),
            "provenance": self.provenance,
        }


def kappa_of(C1: float, H_star_R: float) -> float:
    a = INF if C1 <= 0 else 1.0 / (1.5 * C1)
    b = INF if H_star_R <= 0 else (2.0 * H_star_R) ** -0.5
    return min(a, b)


def t3_of(kappa: float, H_star_pi0: float, cap: int = 10 ** 7) -> int:
    target = math.log(2.0 * max(H_star_pi0, 1e-300))
    step = math.log1p(kappa)
    for t in range(1, cap):
        if (t // 2) * step + math.log(t) >= target:
            return t
    raise BoundsError("t3 scan did not terminate")


def rate_constants(trace: SinkhornTrace, C1: float, C1_tilde: float,
                   grid: AlphaGrid | None = None, provenance: dict | None = None) -> BoundReport:
    """Theorem constants ``kappa, t0..t3`` read from a trace with a reference attached."""
    if not trace.has_reference:
        raise BoundsError("rate_constants needs a trace with a reference attached")
    H_R = trace.row("H_pistar_pit", -1)
    if not math.isfinite(H_R):
        raise BoundsError("H(pi*|R) is not finite")
    H0 = trace.row("H_pistar_pit", 0)
    H_pi0_R = trace.row("nu_psi", 0) + trace.log_xi
    below = np.nonzero(trace.H_mu2t_mu[1:] <= 1.0)[0]
    if below.size == 0:
        raise BoundsError(f"H(mu_2t|mu) stays above 1 for all {trace.T + 1} recorded iterations; "
                          "t0 is not observable")
    t0 = int(below[0])
    t1 = max(t0 - 1, 0)
    kappa = kappa_of(C1, H_R)
    t2 = int(math.ceil(H_R - H_pi0_R))
    t3 = t3_of(kappa, H0)
    holds = t1 <= max(min(t2, t3) - 1, 0)
    return BoundReport(C1=C1, C1_tilde=C1_tilde, kappa=kappa, H_star_R=H_R, H_star_pi0=H0,
                       H_pi0_R=H_pi0_R, H_star_pi2t1=trace.row("H_pistar_pit", t1),
                       t0=t0, t1=t1, t2=t2, t3=t3, t1_bound_holds=bool(holds),
                       alpha_grid=grid or AlphaGrid(), provenance=dict(provenance or {}))


# -- per-t bound curves ------------------------------------------------------

@dataclass(frozen=True)
class TheoremBound:
    value: float
    regime: str
    geometric: float
    forms: tuple


def theorem_bound_curve(report: BoundReport, t: int) -> TheoremBound:
    """Bound on ``H(pi*|pi_2t)``: geometric for ``t < t1``, nested O(1/t) forms after."""
    if t < 0:
        raise BoundsError("t must be >= 0")
    k, t1 = report.kappa, report.t1
    if t < t1:
        g = report.H_star_pi0 * (1.0 + k) ** (-t)
        return TheoremBound(g, "a", g, (NAN, NAN, NAN))
    s = 0.5 * k * k * (t - t1)

    def nested(h):
        return 0.0 if h <= 0 else 1.0 / (1.0 / h + s)

    f1 = nested(report.H_star_pi2t1)
    f2 = nested(report.H_star_R)
    f3 = INF if t == t1 else report.rate_constant / (t - t1)
    return TheoremBound(min(f1, f2, f3), "b", NAN, (f1, f2, f3))


def _half_offset(report: BoundReport, t: int) -> int:
    return t // 2 - report.t1


def marginal_bound(trace: SinkhornTrace, report: BoundReport, t: int) -> tuple[float, float]:
    """(trace-based proposition bound, closed-form corollary bound) on the symmetric marginal entropy."""
    prop = INF if t < 1 else 2.0 * trace.row("H_pistar_pit", t // 2) / t
    d = _half_offset(report, t)
    cor = INF if d <= 0 else 2.0 * report.rate_constant / (d * t)
    return prop, cor


def coupling_entropy_bound(trace: SinkhornTrace, report: BoundReport, t: int) -> tuple[float, float]:
    """(``C1(sqrt h + h/2)`` with ``h = H(mu_2t|mu)``, closed-form corollary bound)."""
    h = trace.row("H_mu2t_mu", t)
    stab = report.C1 * (math.sqrt(h) + 0.5 * h)
    d = _half_offset(report, t)
    M = max(report.C1 ** 2, math.sqrt(report.H_star_R) * report.C1)
    cor = INF if d <= 0 else 5.0 * M / math.sqrt(d * t)
    return stab, cor


def suboptimality_bound(trace: SinkhornTrace, report: BoundReport, t: int) -> tuple[float, float, float]:
    """(intermediate ``C1_bar(sqrt h + h/2)``, stated closed form with a minimum, closed form with a maximum)."""
    h = trace.row("H_mu2t_mu", t)
    cb = report.C1_bar
    inter = cb * (math.sqrt(h) + 0.5 * h)
    d = _half_offset(report, t)
    if d <= 0:
        return inter, INF, INF
    root = math.sqrt(d * t)
    sh = math.sqrt(report.H_star_R)
    return (inter, 5.0 * min(report.C1, sh) * cb / root, 5.0 * max(report.C1, sh) * cb / root)


CURVE_COLUMNS = ("theorem", "theorem_a", "theorem_b1", "theorem_b2", "theorem_b3",
                 "marginal_prop", "marginal_cor", "coupling_stab", "coupling_cor",
                 "subopt_inter", "subopt_cor_min", "subopt_cor_max")


def bound_curves(trace: SinkhornTrace, report: BoundReport) -> dict[str, np.ndarray]:
    """Every per-t curve, aligned with trace rows ``t = -1..T`` (row -1 is NaN)."""
    cols = {c: [NAN] for c in CURVE_COLUMNS}
    for t in range(trace.T + 1):
        tb = theorem_bound_curve(report, t)
        mp, mc = marginal_bound(trace, report, t)
        cs, cc = coupling_entropy_bound(trace, report, t)
        si, smin, smax = suboptimality_bound(trace, report, t)
        row = {
            "theorem": tb.value,
            # regime (a) is empty when t1 = 0: no curve is emitted
            "theorem_a": tb.geometric if tb.regime == "a" else NAN,
            "theorem_b1": tb.forms[0], "theorem_b2": tb.forms[1], "theorem_b3": tb.forms[2],
            "marginal_prop": mp, "marginal_cor": mc, "coupling_stab": cs, "coupling_cor": cc,
            "subopt_inter": si, "subopt_cor_min": smin, "subopt_cor_max": smax,
        }
        for c in CURVE_COLUMNS:
            cols[c].append(row[c])
    return {c: np.array(v) for c, v in cols.items()}


# -- verdicts ---------------------------------------------------------------

@dataclass
class Verdict:
    name: str
    passed: bool
    worst_slack: float
    worst_t: int | None
    checked: int
    note: str = ""

    def to_json(self) -> dict:
        return {"passed": self.passed, "worst_slack": self.worst_slack,
                "worst_t": self.worst_t, "checked": self.checked, "note": self.note}


def _verdict(name, ts, slack, threshold=0.0, note="") -> Verdict:
    ts = np.asarray(ts)
    slack = np.asarray(slack, dtype=float)
    if slack.size == 0:
        return Verdict(name, True, INF, None, 0, note or "no admissible t")
    k = int(np.argmin(slack))
    return Verdict(name, bool(np.all(slack >= threshold)), float(slack[k]), int(ts[k]),
                   int(slack.size), note)


def check_identity(trace: SinkhornTrace) -> Verdict:
    """``H(pi*|pi_2t) - H(pi*|pi_2t+2) = H(mu|mu_2t) + H(nu|nu_2t+1)`` for ``t = 0..T-1``.

    Slack is ``tol - |lhs - rhs|`` with ``tol = 1e-9 * max(|lhs|, |rhs|)`` plus the
    rounding estimate carried by the two entropies (potentials are float64).
    """
    H = trace.H_pistar_pit[1:]
    E = trace.H_pistar_err[1:]
    lhs = H[:-1] - H[1:]
    rhs = trace.H_mu_mu2t[1:-1] + trace.H_nu_nu2t1[1:-1]
    tol = IDENTITY_RTOL * np.maximum(np.abs(lhs), np.abs(rhs)) + E[:-1] + E[1:]
    return _verdict("identity", np.arange(trace.T), tol - np.abs(lhs - rhs),
                    note="relative 1e-9 plus float64 rounding floor")


def check_monotonicity(trace: SinkhornTrace) -> Verdict:
    """Nonincreasing ``H(pi*|pi_k)``, the two interleaved marginal chains, nondecreasing means."""
    slacks, ts = [], []

    def dec(seq, t_of):
        d = np.asarray(seq[:-1]) - np.asarray(seq[1:]) + MONOTONE_SLACK
        slacks.extend(d)
        ts.extend(t_of(np.arange(len(d))))

    if trace.has_reference:
        dec(trace.entropy_chain(), lambda k: (k - 1) // 2)
    T = trace.T
    a = trace.H_mu2t_mu[1:]
    b = trace.H_nu_nu2t1[1:]
    r_a = trace.H_mu_mu2t[1:]
    r_b = trace.H_nu2t1_nu[1:]
    chain1 = np.empty(2 * T + 2)
    chain1[0::2], chain1[1::2] = a, b
    chain2 = np.empty(2 * T + 2)
    chain2[0::2], chain2[1::2] = r_a, r_b
    dec(chain1, lambda k: k // 2)
    dec(chain2, lambda k: k // 2)
    dec(-trace.mu_phi, lambda k: k - 1)
    dec(-trace.nu_psi, lambda k: k - 1)
    return _verdict("monotonicity", ts, slacks)


def check_theorem(trace: SinkhornTrace, report: BoundReport) -> Verdict:
    ts = np.arange(trace.T + 1)
    meas = trace.H_pistar_pit[1:]
    b = np.array([theorem_bound_curve(report, t).value for t in ts])
    v = _verdict("theorem", ts, b - meas, -DOMINANCE_SLACK)
    if not report.t1_bound_holds:
        v.passed = False
        v.note = "t1 exceeds ((t2 ^ t3) - 1)^+"
    return v


def check_difference_inequality(trace: SinkhornTrace, report: BoundReport) -> Verdict:
    H = trace.H_pistar_pit[1:]
    ts = np.arange(trace.T)
    k = report.kappa
    nxt = H[1:]
    rhs = np.where(ts >= report.t1, k * k * nxt ** 2, k * nxt)
    return _verdict("difference_inequality", ts, (H[:-1] - H[1:]) - rhs, -DOMINANCE_SLACK)


def _valid_cor_ts(trace, report):
    return np.array([t for t in range(trace.T + 1) if _half_offset(report, t) > 0], dtype=int)


def check_marginal(trace: SinkhornTrace, report: BoundReport) -> tuple[Verdict, Verdict]:
    meas = trace.marginal_sum()
    ts = np.arange(1, trace.T + 1)
    prop = np.array([marginal_bound(trace, report, t)[0] for t in ts])
    cts = _valid_cor_ts(trace, report)
    cor = np.array([marginal_bound(trace, report, t)[1] for t in cts])
    return (_verdict("marginal_prop", ts, prop - meas[ts], -DOMINANCE_SLACK),
            _verdict("marginal_cor", cts, cor - meas[cts] if cts.size else [], -DOMINANCE_SLACK))


def check_coupling(trace: SinkhornTrace, report: BoundReport) -> tuple[Verdict, Verdict]:
    meas = trace.H_pistar_pit[1:] + trace.H_pit_pistar[1:]
    ts = np.arange(trace.T + 1)
    stab = np.array([coupling_entropy_bound(trace, report, t)[0] for t in ts])
    cts = _valid_cor_ts(trace, report)
    cor = np.array([coupling_entropy_bound(trace, report, t)[1] for t in cts])
    return (_verdict("coupling_stab", ts, stab - meas, -DOMINANCE_SLACK),
            _verdict("coupling_cor", cts, cor - meas[cts] if cts.size else [], -DOMINANCE_SLACK))


def check_suboptimality(trace: SinkhornTrace, report: BoundReport) -> tuple[Verdict, Verdict, Verdict]:
    """Gap in ``[-1e-10, bound]`` for the intermediate and both closed forms."""
    gap = trace.dual_gap[1:]
    ts = np.arange(trace.T + 1)
    floor = gap - GAP_FLOOR
    inter = np.array([suboptimality_bound(trace, report, t)[0] for t in ts])
    cts = _valid_cor_ts(trace, report)
    forms = np.array([suboptimality_bound(trace, report, t)[1:] for t in cts]).reshape(-1, 2)
    out = [_verdict("subopt_inter", ts, np.minimum(inter - gap + DOMINANCE_SLACK, floor))]
    for j, name in enumerate(("subopt_cor_min", "subopt_cor_max")):
        s = np.minimum(forms[:, j] - gap[cts] + DOMINANCE_SLACK, floor[cts]) if cts.size else []
        out.append(_verdict(name, cts, s))
    return tuple(out)


def check_phi_lp(trace: SinkhornTrace, p: float) -> Verdict:
    """``int |phi_t - phi*|^p d mu`` decreases over the last quarter of iterations (no rate)."""
    e = phi_lp_errors(trace, p)
    start = (3 * (trace.T + 1)) // 4
    tail = e[start:]
    if tail.size < 2:
        return Verdict(f"phi_L{p:g}", True, INF, None, 0, "trace too short")
    # decrease is asserted down to the rounding level of the potentials
    floor = 64 * np.finfo(float).eps * (1.0 + float(np.max(np.abs(trace.pi_star.phi)))) ** p
    slack = tail[:-1] - tail[1:] + floor
    return _verdict(f"phi_L{p:g}", np.arange(start, start + slack.size), slack)


# -- slopes -----------------------------------------------------------------

NOISE_FLOOR = 1e-15


def fit_slope(ts, values, noise_floor: float = NOISE_FLOOR) -> float:
    """Least-squares slope of ``log value`` vs ``log t`` over the final decade ``[T/10, T]``.

    Points with ``t < 1`` or values at the float noise floor are excluded; NaN if
    fewer than three points remain.
    """
    ts = np.asarray(ts, dtype=float)
    v = np.asarray(values, dtype=float)
    if ts.size == 0:
        return NAN
    T = ts.max()
    keep = (ts >= max(1.0, T / 10.0)) & (v > noise_floor) & np.isfinite(v)
    if np.count_nonzero(keep) < 3:
        return NAN
    return float(np.polyfit(np.log(ts[keep]), np.log(v[keep]), 1)[0])


def rate_slopes(trace: SinkhornTrace) -> dict[str, float]:
    ts = np.arange(trace.T + 1)
    out = {"marginal": fit_slope(ts, trace.marginal_sum())}
    if trace.has_reference:
        out["coupling"] = fit_slope(ts, trace.H_pistar_pit[1:] + trace.H_pit_pistar[1:])
        out["H_pistar_pit"] = fit_slope(ts, trace.H_pistar_pit[1:])
        out["dual_gap"] = fit_slope(ts, trace.dual_gap[1:])
    return out


def scaling_fit(epsilons, values) -> float:
    """Slope of ``log value`` against ``log(1/epsilon)``."""
    x = np.log(1.0 / np.asarray(epsilons, dtype=float))
    y = np.log(np.asarray(values, dtype=float))
    if x.size < 2:
        return NAN
    return float(np.polyfit(x, y, 1)[0])


# -- stability and the value function ---------------------------------------

@dataclass
class StabilityReport:
    measured: float
    bound: float
    bound_b: float
    C1: float
    C2: float | None
    C1_b: float
    C2_b: float | None
    H_mu: tuple
    H_nu: tuple

    @property
    def slack(self) -> float:
        return self.bound - self.measured

    def to_json(self) -> dict:
        return {"measured": self.measured, "bound": self.bound, "bound_b": self.bound_b,
                "C1": self.C1, "C2": self.C2, "C1_b": self.C1_b, "C2_b": self.C2_b,
                "H_mu_prime_mu": self.H_mu[0], "H_mu_mu_prime": self.H_mu[1],
                "H_nu_prime_nu": self.H_nu[0], "H_nu_nu_prime": self.H_nu[1]}


def _require_same_support(a: DiscreteMeasure, b: DiscreteMeasure, label: str):
    only_a, only_b = support_mismatch(a, b)
    if only_a or only_b:
        raise BoundsError(f"{label}: supports are not equivalent; atoms {only_a} of the base "
                          f"measure and {only_b} of the perturbed measure have no counterpart")


def _bv_terms(C, h):
    return C * (math.sqrt(h) + 0.5 * h)


def stability_bound(problem: tuple, problem_prime: tuple, grid: AlphaGrid | None = None,
                    ref_tol: float = 1e-14, solutions: tuple | None = None) -> StabilityReport:
    """Solve both problems and compare measured ``H(pi'|pi) + H(pi|pi')`` with the bound.

    ``problem = (cost, mx, my)``. The two problems must share supports (the
    entropies between marginals are otherwise infinite).
    """
    cost, mx, my = problem
    cost_p, mx_p, my_p = problem_prime
    _require_same_support(mx, mx_p, "first marginal")
    _require_same_support(my, my_p, "second marginal")
    if not np.array_equal(cost.entries, cost_p.entries):
        raise BoundsError("the two problems use different cost matrices")
    if solutions is None:
        pi, _ = solve_reference(cost, mx, my, ref_tol)
        pi_p, _ = solve_reference(cost_p, mx_p, my_p, ref_tol)
    else:
        pi, pi_p = solutions
    grid = grid or AlphaGrid()
    dphi = pi_p.phi - pi.phi
    dpsi = pi_p.psi - pi.psi
    lr_mu = mx_p.log_weights - mx.log_weights
    lr_nu = my_p.log_weights - my.log_weights
    L = dphi[:, None] + dpsi[None, :] + lr_mu[:, None] + lr_nu[None, :]
    measured = float(np.sum(pi_p.joint * L) - np.sum(pi.joint * L))

    h_mu = (kl(mx_p.weights, mx.weights), kl(mx.weights, mx_p.weights))
    h_nu = (kl(my_p.weights, my.weights), kl(my.weights, my_p.weights))
    same_nu = my.same_as(my_p)
    C1 = cf_constant(dphi, mx, grid).value
    bound = C1 * math.sqrt(h_mu[0]) + (1 + C1 / 2) * h_mu[0] + h_mu[1]
    C2 = None
    if not same_nu:
        C2 = cf_constant(dpsi, my, grid).value
        bound += C2 * math.sqrt(h_nu[0]) + (1 + C2 / 2) * h_nu[0] + h_nu[1]
    # variant (b): pi' written over mu x nu absorbs the marginal log-ratios
    C1b = cf_constant(dphi + lr_mu, mx, grid).value
    bound_b = _bv_terms(C1b, h_mu[0])
    C2b = None
    if not same_nu:
        C2b = cf_constant(dpsi + lr_nu, my, grid).value
        bound_b += _bv_terms(C2b, h_nu[0])
    return StabilityReport(measured, bound, bound_b, C1, C2, C1b, C2b, h_mu, h_nu)


def relative_entropy_to_R(pi: Coupling, log_xi: float) -> float:
    """``H(pi|R) = int (f + g) d pi + log xi`` for a potential-form coupling."""
    return float(pi.row_marginal @ pi.phi + pi.col_marginal @ pi.psi) + log_xi


def value_function_bound(pi: Coupling, pi_prime: Coupling, cost: CostMatrix,
                         grid: AlphaGrid | None = None, marginal_tol: float = 1e-8) -> dict:
    """``H(pi|R) - H(pi'|R) <= H(pi|pi') + C~1(...) + C~2(...)`` for potential-form couplings.

    ``pi`` must have marginals ``(mu, nu)``; ``pi'`` may have any marginals. The
    ``C~2`` term is dropped when the second marginals agree.
    """
    mx, my = pi.mx, pi.my
    if pi_prime.mx is not mx and not pi_prime.mx.same_as(mx):
        raise BoundsError("both couplings must be written over the same mu x nu")
    if (np.max(np.abs(pi.row_marginal - mx.weights)) > marginal_tol
            or np.max(np.abs(pi.col_marginal - my.weights)) > marginal_tol):
        raise BoundsError("pi must have marginals (mu, nu)")
    grid = grid or AlphaGrid()
    lx = log_xi(cost, mx, my)
    lhs = relative_entropy_to_R(pi, lx) - relative_entropy_to_R(pi_prime, lx)
    H_pp, _, _ = coupling_entropies(pi, pi_prime.phi, pi_prime.psi)
    mu_p, nu_p = pi_prime.row_marginal, pi_prime.col_marginal
    h_mu = kl(mu_p / mu_p.sum(), mx.weights)
    C1t = cf_constant(pi_prime.phi, mx, grid).value
    rhs = H_pp + _bv_terms(C1t, h_mu)
    C2t = None
    if total_variation(nu_p, my.weights) > 1e-12:
        h_nu = kl(nu_p / nu_p.sum(), my.weights)
        C2t = cf_constant(pi_prime.psi, my, grid).value
        rhs += _bv_terms(C2t, h_nu)
    return {"lhs": lhs, "rhs": rhs, "slack": rhs - lhs, "H_pi_piprime": H_pp,
            "C1_tilde": C1t, "C2_tilde": C2t}

