"""Log-domain Sinkhorn iteration with per-iteration entropy diagnostics.

Indexing follows the dual recursion: ``phi_0 = 0``, ``psi_t = phi_t^c``,
``phi_{t+1} = psi_t^c``. The primal iterates are ``pi_{2t} = (phi_t, psi_t)``
and ``pi_{2t+1} = (phi_{t+1}, psi_t)`` in potential form, with
``pi_{-1} = R = (phi_0, psi_{-1})`` and ``psi_{-1} = -log xi``.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .conjugate import conjugate, conjugate_y
from .cost import CostMatrix
from .divergence import log_sum_exp
from .measures import DiscreteMeasure

EPS = np.finfo(float).eps


class SinkhornError(RuntimeError):
    def __init__(self, message: str, iteration: int | None = None):
        super().__init__(message if iteration is None else f"iteration {iteration}: {message}")
        self.iteration = iteration


class InvariantViolation(RuntimeError):
    pass


# -- relative entropies in log-ratio form ----------------------------------

def _floating(a):
    """Array view keeping extended precision when given, float64 otherwise."""
    a = np.asarray(a)
    return a if a.dtype.kind == "f" else a.astype(float)


def _expm1_minus_id(d):
    """``e^d - 1 - d``, accurate for small ``|d|``."""
    d = _floating(d)
    small = np.abs(d) < 1e-3
    out = np.expm1(d) - d
    s = d[small]
    out[small] = s * s * (0.5 + s * (1 / 6 + s * (1 / 24 + s * (1 / 120 + s / 720))))
    return out


def _xexp_minus_expm1(d):
    """``d e^d - e^d + 1``, accurate for small ``|d|``."""
    d = _floating(d)
    small = np.abs(d) < 1e-3
    out = d * np.exp(d) - np.expm1(d)
    s = d[small]
    out[small] = s * s * (0.5 + s * (1 / 3 + s * (1 / 8 + s * (1 / 30 + s / 144))))
    return out


def entropy_pair(weights, log_ratio) -> tuple[float, float]:
    """``(H(q|p), H(p|q))`` for ``dq/dp = exp(log_ratio)`` with both normalised.

    Uses the normalisation ``sum p e^r = 1`` to write both divergences as sums
    of nonnegative terms, which avoids cancellation near convergence.
    """
    w = np.asarray(weights, dtype=float)
    r = np.asarray(log_ratio, dtype=float)
    return float(np.sum(w * _xexp_minus_expm1(r))), float(np.sum(w * _expm1_minus_id(r)))


# -- couplings ---------------------------------------------------------------

@dataclass(frozen=True)
class Potentials:
    phi: np.ndarray
    psi: np.ndarray


@dataclass(frozen=True, eq=False)
class Coupling:
    """Potential-form coupling ``d pi = exp(phi + psi - c) d(mu x nu)``."""

    phi: np.ndarray
    psi: np.ndarray
    log_density: np.ndarray
    joint: np.ndarray
    row_marginal: np.ndarray
    col_marginal: np.ndarray
    mx: DiscreteMeasure = field(repr=False)
    my: DiscreteMeasure = field(repr=False)

    @property
    def log_joint(self) -> np.ndarray:
        return self.log_density + self.mx.log_weights[:, None] + self.my.log_weights[None, :]

    @property
    def potentials(self) -> Potentials:
        return Potentials(self.phi, self.psi)


def primal_coupling(phi, psi, cost: CostMatrix, mx: DiscreteMeasure, my: DiscreteMeasure,
                    half_step: bool = False) -> Coupling:
    """Build ``pi_ij = mu_i nu_j exp(phi_i + psi_j - c_ij)``.

    With ``half_step=True`` the potentials are expected to come from a Sinkhorn
    half-step, so the total mass must be 1 to within 1e-8.
    """
    phi = np.asarray(phi, dtype=float)
    psi = np.asarray(psi, dtype=float)
    if not (np.all(np.isfinite(phi)) and np.all(np.isfinite(psi))):
        raise InvariantViolation("non-finite potentials")
    logd = phi[:, None] + psi[None, :] - cost.entries
    joint = np.exp(logd + mx.log_weights[:, None] + my.log_weights[None, :])
    if half_step and abs(joint.sum() - 1.0) > 1e-8:
        raise InvariantViolation(f"coupling mass {joint.sum()!r} after a half-step")
    return Coupling(phi, psi, logd, joint, joint.sum(axis=1), joint.sum(axis=0), mx, my)


def coupling_entropies(target: Coupling, other_phi, other_psi, err_scale: float = 0.0):
    """``(H(target|other), H(other|target))`` for a potential-form ``other`` with the same cost.

    The log-ratio reduces to ``phi - phi' + psi - psi'``; the returned error is a
    first-order rounding estimate for ``H(target|other)`` given an absolute
    potential error ``err_scale``.
    """
    d = (np.asarray(other_phi)[:, None] - target.phi[:, None]) + \
        (np.asarray(other_psi)[None, :] - target.psi[None, :])
    w = target.joint
    fwd = float(np.sum(w * _expm1_minus_id(d)))
    rev = float(np.sum(w * _xexp_minus_expm1(d)))
    err = err_scale * float(np.sum(w * np.abs(np.expm1(d))))
    return fwd, rev, err


# -- iteration --------------------------------------------------------------

def log_xi(cost: CostMatrix, mx: DiscreteMeasure, my: DiscreteMeasure) -> float:
    """``log int e^{-c} d(mu x nu)``."""
    return log_sum_exp(-cost.entries, mx.log_weights[:, None] + my.log_weights[None, :])


def sinkhorn_step(phi_t, cost: CostMatrix, mx: DiscreteMeasure, my: DiscreteMeasure):
    """One full iteration ``phi_t -> (psi_t, phi_{t+1})``."""
    psi = conjugate(phi_t, cost, mx)
    return psi, conjugate_y(psi, cost, my)


ROW_FIELDS = ("mu_phi", "nu_psi", "H_mu2t_mu", "H_mu_mu2t", "H_nu_nu2t1", "H_nu2t1_nu")
REF_FIELDS = ("H_pistar_pit", "H_pit_pistar", "dual_gap")


@dataclass(frozen=True, eq=False)
class SinkhornTrace:
    """Iterate history; row arrays are indexed by ``t + 1`` for ``t = -1, ..., T``.

    ``phis[k] = phi_k`` for ``k = 0..T+1`` and ``psis[k] = psi_{k-1}`` for
    ``k = 0..T+2``. Row ``t = -1`` describes ``pi_{-1} = R`` with potentials
    ``(phi_0, psi_{-1})``; marginal entropies are undefined (NaN) there.
    """

    cost: CostMatrix = field(repr=False)
    mx: DiscreteMeasure = field(repr=False)
    my: DiscreteMeasure = field(repr=False)
    T: int
    log_xi: float
    phis: np.ndarray = field(repr=False)
    psis: np.ndarray = field(repr=False)
    mu_phi: np.ndarray = field(repr=False)
    nu_psi: np.ndarray = field(repr=False)
    H_mu2t_mu: np.ndarray = field(repr=False)
    H_mu_mu2t: np.ndarray = field(repr=False)
    H_nu_nu2t1: np.ndarray = field(repr=False)
    H_nu2t1_nu: np.ndarray = field(repr=False)
    stopped_by_tolerance: bool = False
    # filled by attach_reference
    pi_star: Coupling | None = field(default=None, repr=False)
    H_pistar_pit: np.ndarray | None = field(default=None, repr=False)
    H_pit_pistar: np.ndarray | None = field(default=None, repr=False)
    H_pistar_odd: np.ndarray | None = field(default=None, repr=False)
    H_pistar_err: np.ndarray | None = field(default=None, repr=False)
    dual_gap: np.ndarray | None = field(default=None, repr=False)

    @property
    def ts(self) -> np.ndarray:
        return np.arange(-1, self.T + 1)

    def phi(self, t: int) -> np.ndarray:
        return self.phis[t]

    def psi(self, t: int) -> np.ndarray:
        return self.psis[t + 1]

    def row(self, name: str, t: int) -> float:
        return float(getattr(self, name)[t + 1])

    @property
    def has_reference(self) -> bool:
        return self.pi_star is not None

    def marginal_sum(self) -> np.ndarray:
        """``H(mu_2t|mu) + H(mu|mu_2t)`` for ``t = 0..T``."""
        return self.H_mu2t_mu[1:] + self.H_mu_mu2t[1:]

    def coupling(self, k: int) -> Coupling:
        """Primal iterate ``pi_k`` for ``k >= -1``."""
        if k == -1:
            return primal_coupling(self.phis[0], self.psis[0], self.cost, self.mx, self.my)
        t, odd = divmod(k, 2)
        if odd:
            return primal_coupling(self.phis[t + 1], self.psis[t + 1], self.cost, self.mx, self.my)
        return primal_coupling(self.phis[t], self.psis[t + 1], self.cost, self.mx, self.my)

    def entropy_chain(self) -> np.ndarray:
        """``H(pi*|pi_k)`` for ``k = -1, 0, 1, ..., 2T+1``."""
        if not self.has_reference:
            raise ValueError("no reference attached")
        out = [self.H_pistar_pit[0]]
        for t in range(self.T + 1):
            out.append(self.H_pistar_pit[t + 1])
            out.append(self.H_pistar_odd[t + 1])
        return np.array(out)


def _marginal_entropies(mx, my, phi_t, phi_next, psi_t, psi_next):
    a, b = entropy_pair(mx.weights, phi_t - phi_next)
    c, d = entropy_pair(my.weights, psi_t - psi_next)
    # (H(mu_2t|mu), H(mu|mu_2t), H(nu|nu_{2t+1}), H(nu_{2t+1}|nu))
    return a, b, d, c


def run(cost: CostMatrix, mx: DiscreteMeasure, my: DiscreteMeasure, max_t: int = 1000,
        stop_tol: float = 0.0) -> SinkhornTrace:
    """Run Sinkhorn from ``phi_0 = 0`` until ``t = max_t`` or the symmetric
    marginal entropy ``H(mu_2t|mu) + H(mu|mu_2t)`` drops to ``stop_tol``."""
    if max_t < 1:
        raise ValueError("max_t must be >= 1")
    lx = log_xi(cost, mx, my)
    phis = [np.zeros(mx.size)]
    psis = [np.full(my.size, -lx)]
    rows_mu = []
    T = max_t
    stopped = False
    for t in range(max_t + 1):
        psi, phi_next = sinkhorn_step(phis[-1], cost, mx, my)
        if not (np.all(np.isfinite(psi)) and np.all(np.isfinite(phi_next))):
            raise SinkhornError("non-finite potentials", t)
        psis.append(psi)
        phis.append(phi_next)
        h = entropy_pair(mx.weights, phis[-2] - phi_next)
        rows_mu.append(h)
        if h[0] + h[1] <= stop_tol:
            T, stopped = t, True
            break
    psis.append(conjugate(phis[-1], cost, mx))
    if not np.all(np.isfinite(psis[-1])):
        raise SinkhornError("non-finite potentials", T + 1)
    phis = np.array(phis)
    psis = np.array(psis)

    nan = np.nan
    H1, H2, H3, H4 = [nan], [nan], [nan], [nan]
    for t in range(T + 1):
        a, b = rows_mu[t]
        d, c = entropy_pair(my.weights, psis[t + 1] - psis[t + 2])
        H1.append(a)
        H2.append(b)
        H3.append(c)
        H4.append(d)
    mu_phi = np.concatenate([[mx.mean(phis[0])], phis[:T + 1] @ mx.weights])
    nu_psi = psis[:T + 2] @ my.weights
    for a in (phis, psis, mu_phi, nu_psi):
        a.setflags(write=False)
    return SinkhornTrace(cost, mx, my, T, lx, phis, psis, mu_phi, nu_psi,
                         np.array(H1), np.array(H2), np.array(H3), np.array(H4), stopped)


def solve_reference(cost: CostMatrix, mx: DiscreteMeasure, my: DiscreteMeasure,
                    ref_tol: float = 1e-14, max_iter: int = 200_000,
                    patience: int = 25) -> tuple[Coupling, Potentials]:
    """Approximate ``(pi*, phi*, psi*)`` by Sinkhorn run to a machine-precision fixed point.

    Iterates until ``max(H(mu_2t|mu), H(mu|mu_2t)) <= ref_tol`` and the sup-norm
    increment of ``phi_t`` has stopped decreasing for ``patience`` steps. The
    result is ``(phi_{t+1}, psi_t)`` after a final psi-then-phi half-step, so the
    first marginal is exact and ``mu(phi*)`` is the Sinkhorn limit of ``mu(phi_t)``.
    """
    if ref_tol <= 0:
        raise ValueError("ref_tol must be positive")
    phi = np.zeros(mx.size)
    best = np.inf
    stale = 0
    reached = False
    for it in range(max_iter):
        psi, phi_next = sinkhorn_step(phi, cost, mx, my)
        if not np.all(np.isfinite(phi_next)):
            raise SinkhornError("non-finite potentials in reference solve", it)
        h = entropy_pair(mx.weights, phi - phi_next)
        step = float(np.max(np.abs(phi_next - phi)))
        phi = phi_next
        if max(h) <= ref_tol:
            reached = True
        if reached:
            if step <= 2 * EPS * (1.0 + float(np.max(np.abs(phi)))):
                break
            if step < best:
                best, stale = step, 0
            else:
                stale += 1
                if stale >= patience:
                    break
    else:
        if not reached:
            raise SinkhornError(
                f"reference solve did not reach tolerance {ref_tol:g} in {max_iter} "
                "iterations; increase epsilon or the iteration cap")
    psi = conjugate(phi, cost, mx)
    phi = conjugate_y(psi, cost, my)
    pi = primal_coupling(phi, psi, cost, mx, my, half_step=True)
    return pi, Potentials(phi, psi)


def dual_gap(pot_t: Potentials, pot_star: Potentials, mx: DiscreteMeasure, my: DiscreteMeasure) -> float:
    """``int (phi* + psi* - phi_t - psi_t) d(mu x nu)``."""
    return mx.mean(pot_star.phi - pot_t.phi) + my.mean(pot_star.psi - pot_t.psi)


def attach_reference(trace: SinkhornTrace, pi_star: Coupling) -> SinkhornTrace:
    """Fill the reference-dependent rows (``H(pi*|pi_t)``, ``H(pi_t|pi*)``, dual gap)."""
    mx, my = trace.mx, trace.my
    scale = 16 * EPS * (1.0 + float(np.max(np.abs(pi_star.phi))) + float(np.max(np.abs(pi_star.psi))))
    fwd, rev, odd, err, gap = [], [], [], [], []
    star = Potentials(pi_star.phi, pi_star.psi)
    # row t = -1: pi_{-1} = R = (phi_0, psi_{-1})
    pairs = [(trace.phis[0], trace.psis[0], trace.phis[0], trace.psis[0])]
    for t in range(trace.T + 1):
        pairs.append((trace.phis[t], trace.psis[t + 1], trace.phis[t + 1], trace.psis[t + 1]))
    for a, b, a_odd, b_odd in pairs:
        f, r, e = coupling_entropies(pi_star, a, b, scale)
        fo, _, _ = coupling_entropies(pi_star, a_odd, b_odd, scale)
        fwd.append(f)
        rev.append(r)
        err.append(e)
        odd.append(fo)
        gap.append(dual_gap(Potentials(a, b), star, mx, my))
    return dataclasses.replace(
        trace, pi_star=pi_star, H_pistar_pit=np.array(fwd), H_pit_pistar=np.array(rev),
        H_pistar_odd=np.array(odd), H_pistar_err=np.array(err), dual_gap=np.array(gap))


def phi_lp_errors(trace: SinkhornTrace, p: float = 1.0) -> np.ndarray:
    """``int |phi_t - phi*|^p d mu`` for ``t = 0..T``."""
    if not trace.has_reference:
        raise ValueError("no reference attached")
    d = np.abs(trace.phis[:trace.T + 1] - trace.pi_star.phi[None, :]) ** p
    return d @ trace.mx.weights


def solve(cost: CostMatrix, mx: DiscreteMeasure, my: DiscreteMeasure, max_t: int = 1000,
          stop_tol: float = 0.0, ref_tol: float = 1e-14) -> SinkhornTrace:
    """Reference solve plus an instrumented run with the reference attached."""
    pi_star, _ = solve_reference(cost, mx, my, ref_tol)
    return attach_reference(run(cost, mx, my, max_t, stop_tol), pi_star)


def identity_audit(cost: CostMatrix, mx: DiscreteMeasure, my: DiscreteMeasure, T: int,
                   dtype=np.longdouble, max_ref_iter: int = 200_000, patience: int = 50) -> dict:
    """Recompute both sides of the per-iteration entropy identity in ``dtype``.

    Runs ``T + 1`` Sinkhorn steps and a fixed-point reference in the wider type
    (weights renormalised there) and returns ``lhs = H(pi*|pi_2t) - H(pi*|pi_2t+2)``,
    ``rhs = H(mu|mu_2t) + H(nu|nu_2t+1)`` and their relative difference for
    ``t = 0..T-1``.
    """
    C = np.asarray(cost.entries, dtype=dtype)
    wx = np.asarray(mx.weights, dtype=dtype)
    wy = np.asarray(my.weights, dtype=dtype)
    wx, wy = wx / wx.sum(), wy / wy.sum()
    lx, ly = np.log(wx), np.log(wy)
    eps = float(np.finfo(dtype).eps)

    def lse(v, axis):
        m = np.max(v, axis=axis, keepdims=True)
        return np.squeeze(m + np.log(np.sum(np.exp(v - m), axis=axis, keepdims=True)), axis)

    def cx(f):
        return -lse(f[:, None] - C + lx[:, None], 0)

    def cy(g):
        return -lse(g[None, :] - C + ly[None, :], 1)

    phis, psis = [np.zeros(mx.size, dtype=dtype)], []
    for _ in range(T + 1):
        psis.append(cx(phis[-1]))
        phis.append(cy(psis[-1]))
    phi, best, stale = phis[-1], np.inf, 0
    for it in range(max_ref_iter):
        nxt = cy(cx(phi))
        step = float(np.max(np.abs(nxt - phi)))
        phi = nxt
        if step <= 4 * eps * (1.0 + float(np.max(np.abs(phi)))):
            break
        if step < best:
            best, stale = step, 0
        else:
            stale += 1
            if stale >= patience:
                break
    else:
        raise SinkhornError("extended-precision reference did not settle", it)
    psi_s = cx(phi)
    phi_s = cy(psi_s)
    star = np.exp(phi_s[:, None] + psi_s[None, :] - C + lx[:, None] + ly[None, :])

    def H_star(k):
        d = (phis[k] - phi_s)[:, None] + (psis[k] - psi_s)[None, :]
        return np.sum(star * _expm1_minus_id(d))

    H = np.array([H_star(t) for t in range(T + 1)])
    lhs = H[:-1] - H[1:]
    rhs = np.array([np.sum(wx * _expm1_minus_id(phis[t] - phis[t + 1]))
                    + np.sum(wy * _expm1_minus_id(psis[t] - psis[t + 1])) for t in range(T)])
    den = np.maximum(np.abs(lhs), np.abs(rhs))
    rel = np.where(den > 0, np.abs(lhs - rhs) / np.where(den > 0, den, 1), 0)
    return {"lhs": lhs.astype(float), "rhs": rhs.astype(float), "rel": rel.astype(float),
            "H": H.astype(float), "dtype": np.dtype(dtype).name}
