"""Soft c-transforms and a priori growth estimates for biconjugate functions.

One Sinkhorn step is one biconjugation: ``psi_t = conjugate(phi_t)`` and
``phi_{t+1} = biconjugate(phi_t)``. The growth certificates below turn the
closed-form cost decompositions of :mod:`sinkrate.cost` into explicit,
t-uniform bounds on such functions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .cost import CostMatrix, CostModel, Omega, decomposition, modulus_for
from .divergence import log_sum_exp
from .measures import DiscreteMeasure


def conjugate(f, cost: CostMatrix, mx: DiscreteMeasure) -> np.ndarray:
    """``f^c(y_j) = -log sum_i mu_i exp(f_i - c_ij)``."""
    f = np.asarray(f, dtype=float)
    return -log_sum_exp(f[:, None] - cost.entries, mx.log_weights[:, None], axis=0)


def conjugate_y(g, cost: CostMatrix, my: DiscreteMeasure) -> np.ndarray:
    """Conjugate of a function on the Y-support, integrating against ``my``."""
    g = np.asarray(g, dtype=float)
    return -log_sum_exp(g[None, :] - cost.entries, my.log_weights[None, :], axis=1)


def biconjugate(f, cost: CostMatrix, mx: DiscreteMeasure, my: DiscreteMeasure) -> np.ndarray:
    return conjugate_y(conjugate(f, cost, mx), cost, my)


# -- moment generating function constants ---------------------------------

def mgf_constants(lam: float, Kexp: float, p: float, q: float) -> tuple[float, float]:
    """``(C0, C)`` with ``int exp(t|y|^q) dnu <= C0 exp(C t^(p/(p-q)))`` for all t >= 0.

    ``Kexp = int exp(lam |y|^p) dnu``.
    """
    if not 0 < q < p:
        raise ValueError("need 0 < q < p")
    if lam <= 0 or Kexp < 1:
        raise ValueError("need lam > 0 and Kexp >= 1")
    C = (2 * q / (lam * p)) ** (q / (p - q)) * (1 - q / p)
    return math.sqrt(Kexp), C


def mgf_tail_constant(C: float, p: float, q: float) -> float:
    """``C'`` in the tail bound ``P(|Y| >= s) <= C0 exp(-C' s^p)`` implied by the MGF bound.

    Equals ``-inf_t (C t^(p/(p-q)) - t) `` evaluated at ``s = 1``, i.e.
    ``(q/p) ((p-q)/(C p))^(p/q - 1)``.
    """
    return (q / p) * ((p - q) / (C * p)) ** (p / q - 1)


def mgf_check(nu: DiscreteMeasure, norms, lam: float, p: float, q: float, t_grid) -> dict:
    """Forward MGF bound and the converse tail bound on a discrete measure."""
    r = np.asarray(norms, dtype=float)
    log_kexp = log_sum_exp(lam * r ** p, nu.log_weights)
    C0, C = mgf_constants(lam, math.exp(log_kexp), p, q)
    t = np.asarray(t_grid, dtype=float)
    lhs = np.array([log_sum_exp(tt * r ** q, nu.log_weights) for tt in t])
    rhs = math.log(C0) + C * t ** (p / (p - q))
    Cp = mgf_tail_constant(C, p, q)
    s = np.unique(r)
    tail = np.array([nu.weights[r >= si].sum() for si in s])
    tail_rhs = C0 * np.exp(-Cp * s ** p)
    return {
        "C0": C0, "C": C, "C_tail": Cp,
        "mgf_slack": float(np.min(rhs - lhs)),
        "tail_slack": float(np.min(tail_rhs - tail)),
    }


# -- growth certificates ---------------------------------------------------

@dataclass
class GrowthCertificate:
    """Constants of the growth lemma for a scaled cost ``c / epsilon``.

    Norms ``|x|`` and ``|y|`` are distances to ``reference`` (the anchor of mu).
    """

    p: float
    epsilon: float
    reference: np.ndarray
    A_plus: float
    A_alpha: list
    B_beta: list
    K_plus: list
    K_minus: list
    alpha: list
    beta: list
    alpha_tilde: list
    lam: float
    log_Kexp: float
    C0: float
    C: float
    K: float
    K_iterate: float
    mu_c1: float
    nu_c2: float
    log_xi: float
    cost: CostMatrix = field(repr=False)
    c1: Callable = field(repr=False)
    c2: Callable = field(repr=False)
    a_plus: Callable = field(repr=False)
    a_minus: Callable = field(repr=False)

    @property
    def N(self) -> int:
        return len(self.alpha)

    @property
    def log_C0(self) -> float:
        return 0.5 * self.log_Kexp

    def to_json(self) -> dict:
        return {
            "p": self.p, "epsilon": self.epsilon, "reference": self.reference.tolist(),
            "A_plus": self.A_plus, "A_alpha": self.A_alpha, "B_beta": self.B_beta,
            "K_plus": self.K_plus, "K_minus": self.K_minus, "alpha": self.alpha,
            "beta": self.beta, "alpha_tilde": self.alpha_tilde, "lambda": self.lam,
            "log_Kexp": self.log_Kexp, "C0": self.C0, "C": self.C, "K": self.K,
            "K_iterate": self.K_iterate,
        }


def _lower_sum(C, N, terms, A_alpha, rx):
    """``C sum_i N^(p/at_i - 1) (K+_i A_i + K-_i |x|^a_i)^(p/at_i)``; terms = (K+, K-, a, at, p)."""
    out = np.zeros_like(rx)
    for (kp, km, a, at, p), A in zip(terms, A_alpha):
        r = p / at
        out = out + C * N ** (r - 1) * (kp * A + km * rx ** a) ** r
    return out


def _mgf_pair(lam, log_kexp, p, betas):
    C0s, Cs = [1.0], [0.0]
    for b in betas:
        if b == 0:
            # int e^{t |y|^0} = e^t exactly
            C0s.append(1.0)
            Cs.append(1.0)
        else:
            C0 = math.exp(0.5 * log_kexp)
            Cs.append((2 * b / (lam * p)) ** (b / (p - b)) * (1 - b / p))
            C0s.append(C0)
    return max(C0s), max(Cs)


def _envelopes(dec, eps, rx, mu, nu, ry, C, log_C0):
    """Nonnegative envelopes with ``f^cc <= -nu(f^c) + U`` and ``f^cc >= mu(f) - L`` on the support."""
    inv = 1.0 / eps
    c1x = dec.c1(rx) * inv
    mu_c1 = mu.mean(c1x)
    nu_c2 = nu.mean(dec.c2(ry) * inv)
    A_plus = mu.mean(dec.a_plus(rx)) * inv
    terms = [(t.k_plus * inv, t.k_minus * inv, t.alpha, dec.p - t.beta, dec.p) for t in dec.terms]
    A_alpha = [mu.mean(rx ** t.alpha) for t in dec.terms]
    B_beta = [nu.mean(ry ** t.beta) for t in dec.terms]
    N = len(terms)
    U = np.abs(c1x) + abs(nu_c2) + dec.a_plus(rx) * inv
    for (kp, _, a, _, _), B in zip(terms, B_beta):
        U = U + kp * B * rx ** a
    L = (np.abs(c1x) + abs(mu_c1) + A_plus + log_C0 + dec.a_minus(rx) * inv
         + _lower_sum(C, N, terms, A_alpha, rx))
    return U, L, dict(mu_c1=mu_c1, nu_c2=nu_c2, A_plus=A_plus, A_alpha=A_alpha, B_beta=B_beta)


DEFAULT_LAMBDA_GRID = tuple(2.0 ** k for k in np.arange(-12, 4.25, 0.25))


def build_growth_certificate(model: CostModel, cost: CostMatrix, lam: float | None = None,
                             lambda_grid=DEFAULT_LAMBDA_GRID) -> GrowthCertificate | None:
    """Certificate for the built-in superlinear costs; ``None`` means "not certified".

    If ``lam`` is omitted, the exponential-moment parameter is picked from
    ``lambda_grid`` to minimise the uniform constant ``K``; any choice is valid.
    """
    dec = decomposition(model)
    if dec is None:
        return None
    mu, nu = cost.mx, cost.my
    ref = mu.anchor_point
    rx, ry = mu.norms(ref), nu.norms(ref)
    p = dec.p
    betas = [t.beta for t in dec.terms]
    log_xi = log_sum_exp(-cost.entries, mu.log_weights[:, None] + nu.log_weights[None, :])
    denom = 1.0 + rx ** p

    def evaluate(lmb):
        log_kexp = log_sum_exp(lmb * ry ** p, nu.log_weights)
        C0, C = _mgf_pair(lmb, log_kexp, p, betas)
        U, L, parts = _envelopes(dec, model.epsilon, rx, mu, nu, ry, C, math.log(C0))
        K = float(np.max(np.maximum(U, L) / denom))
        K_it = float(np.max(np.maximum(max(log_xi, 0.0) + U, L) / denom))
        return K, K_it, log_kexp, C0, C, parts

    if lam is None:
        cands = [(evaluate(l)[0], l) for l in lambda_grid]
        lam = min(cands)[1]
    K, K_it, log_kexp, C0, C, parts = evaluate(lam)
    return GrowthCertificate(
        p=p, epsilon=model.epsilon, reference=np.array(ref), A_plus=parts["A_plus"],
        A_alpha=parts["A_alpha"], B_beta=parts["B_beta"],
        K_plus=[t.k_plus / model.epsilon for t in dec.terms],
        K_minus=[t.k_minus / model.epsilon for t in dec.terms],
        alpha=[t.alpha for t in dec.terms], beta=betas,
        alpha_tilde=[p - b for b in betas], lam=float(lam), log_Kexp=log_kexp,
        C0=C0, C=C, K=K, K_iterate=K_it, mu_c1=parts["mu_c1"], nu_c2=parts["nu_c2"],
        log_xi=log_xi, cost=cost,
        c1=lambda r: dec.c1(r) / model.epsilon, c2=lambda r: dec.c2(r) / model.epsilon,
        a_plus=lambda r: dec.a_plus(r) / model.epsilon,
        a_minus=lambda r: dec.a_minus(r) / model.epsilon)


@dataclass
class GrowthBound:
    upper_fn: Callable     # bound on f^c - c2 as a function of |y|
    lower_fn: Callable     # bound on f^cc - c1 as a function of |x|
    K: float
    upper_on_support: np.ndarray
    lower_on_support: np.ndarray
    envelope_on_support: np.ndarray   # mu(f^-) + nu((f^c)^-) + K (1 + |x|^p)


def growth_bound(cert: GrowthCertificate | None, f, mu_f: float | None = None,
                 nu_fc: float | None = None) -> GrowthBound | None:
    """Pointwise bounds for ``f^c - c2`` (above) and ``f^cc - c1`` (below), plus uniform ``K``.

    Returns ``None`` when the cost carries no certificate.
    """
    if cert is None:
        return None
    cost = cert.cost
    mu, nu = cost.mx, cost.my
    f = np.asarray(f, dtype=float)
    fc = conjugate(f, cost, mu)
    if mu_f is None:
        mu_f = mu.mean(f)
    if nu_fc is None:
        nu_fc = nu.mean(fc)
    mu_f_c1 = mu_f - cert.mu_c1
    terms = [(kp, km, a, at, cert.p) for kp, km, a, at in
             zip(cert.K_plus, cert.K_minus, cert.alpha, cert.alpha_tilde)]

    def upper_fn(ry):
        ry = np.asarray(ry, dtype=float)
        out = cert.A_plus - mu_f_c1 + np.zeros_like(ry)
        for kp, A, b in zip(cert.K_plus, cert.A_alpha, cert.beta):
            out = out + kp * A * ry ** b
        return out

    def lower_fn(rx):
        rx = np.asarray(rx, dtype=float)
        return (mu_f_c1 - cert.A_plus - cert.log_C0 - cert.a_minus(rx)
                - _lower_sum(cert.C, cert.N, terms, cert.A_alpha, rx))

    rx, ry = mu.norms(cert.reference), nu.norms(cert.reference)
    neg = mu.mean(np.maximum(-f, 0.0)) + nu.mean(np.maximum(-fc, 0.0))
    return GrowthBound(upper_fn, lower_fn, cert.K, upper_fn(ry), lower_fn(rx),
                       neg + cert.K * (1.0 + rx ** cert.p))


# -- sublinear costs: modulus route ----------------------------------------

@dataclass
class ModulusCertificate:
    omega: Omega
    A1: float
    B1: float
    K: float

    def to_json(self) -> dict:
        return {"omega": self.omega.to_spec(), "A1": self.A1, "B1": self.B1, "K": self.K}


def build_modulus_certificate(model: CostModel, cost: CostMatrix) -> ModulusCertificate | None:
    """``|phi_t(x)| <= K + omega(|x|)`` certificate; ``|x|`` measured from each anchor."""
    omega = modulus_for(model)
    if omega is None:
        return None
    mu, nu = cost.mx, cost.my
    A1 = mu.mean(mu.norms())
    B1 = nu.mean(nu.norms())
    log_xi = log_sum_exp(-cost.entries, mu.log_weights[:, None] + nu.log_weights[None, :])
    mean_cost = float(mu.weights @ cost.entries @ nu.weights)
    # 0 <= mu(phi_t) <= C(mu, nu) + log xi <= int c d(mu x nu) + log xi
    K = max(mean_cost + log_xi, 0.0) + float(omega(A1))
    return ModulusCertificate(omega, A1, B1, K)


def modulus_conjugate_check(cert: ModulusCertificate, f, cost: CostMatrix,
                            mx: DiscreteMeasure, my: DiscreteMeasure) -> dict:
    """Max violations of the modulus propagation inequalities for ``f^c`` (<= 0 expected)."""
    fc = conjugate(f, cost, mx)
    om = cert.omega
    dyy = np.linalg.norm(my.points[:, None] - my.points[None], axis=-1)
    osc = np.abs(fc[:, None] - fc[None, :]) - om(dyy)
    centred = np.abs(fc - my.mean(fc))
    w1 = dyy @ my.weights
    via_w1 = centred - om(w1)
    via_b1 = centred - om(cert.B1 + my.norms())
    return {
        "oscillation": float(osc.max()),
        "centred_w1": float(via_w1.max()),
        "centred_b1": float(via_b1.max()),
        "max_violation": float(max(osc.max(), via_w1.max(), via_b1.max())),
    }


def growth_ratio(phis, norms, p: float) -> float:
    """``max_t max_x |phi_t(x)| / (1 + |x|^p)``."""
    phis = np.atleast_2d(np.asarray(phis, dtype=float))
    return float(np.max(np.abs(phis) / (1.0 + np.asarray(norms) ** p)))


def modulus_excess(phis, norms, omega: Omega) -> float:
    """``max_t max_x |phi_t(x)| - omega(|x|)``; compare against the certificate ``K``."""
    phis = np.atleast_2d(np.asarray(phis, dtype=float))
    return float(np.max(np.abs(phis) - omega(np.asarray(norms))))
