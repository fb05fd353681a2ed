import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sinkrate.conjugate import (biconjugate, build_growth_certificate, build_modulus_certificate,
                                conjugate, conjugate_y, growth_bound, mgf_check, mgf_constants,
                                mgf_tail_constant, modulus_conjugate_check)
from sinkrate.cost import CostModel, Omega, build_cost_matrix
from sinkrate.measures import DiscreteMeasure, discretize_subexp_family


@pytest.fixture(scope="module")
def pair():
    m = discretize_subexp_family("gaussian", [0.0], 1.0, 16, 3.0)
    n = discretize_subexp_family("gaussian", [0.5], 1.0, 16, 3.0)
    return m, n


def test_zero_cost_zero_function(pair):
    m, n = pair
    c = build_cost_matrix(CostModel("custom_matrix", matrix=np.zeros((16, 16))), m, n)
    np.testing.assert_allclose(conjugate(np.zeros(16), c, m), 0.0, atol=1e-15)
    np.testing.assert_allclose(biconjugate(np.zeros(16), c, m, n), 0.0, atol=1e-15)


def test_y_only_cost_gives_c2(pair):
    m, n = pair
    c2 = np.linspace(0, 3, 16)
    c = build_cost_matrix(CostModel("custom_matrix", matrix=np.tile(c2, (16, 1))), m, n)
    np.testing.assert_allclose(conjugate(np.zeros(16), c, m), c2, atol=1e-14)


@given(st.floats(-30, 30))
def test_additive_equivariance(a):
    m = discretize_subexp_family("gaussian", [0.0], 1.0, 8, 3.0)
    c = build_cost_matrix(CostModel("sq_distance", 0.5), m, m)
    f = np.sin(np.arange(8.0))
    np.testing.assert_allclose(conjugate(f + a, c, m), conjugate(f, c, m) - a, atol=1e-12)
    np.testing.assert_allclose(biconjugate(f + a, c, m, m), biconjugate(f, c, m, m) + a, atol=1e-12)


def test_conjugate_y_ordering(pair):
    m, n = pair
    c = build_cost_matrix(CostModel("sq_distance"), m, n)
    g = np.cos(np.arange(16.0))
    direct = -np.log(np.exp(g[None, :] - c.entries) @ n.weights)
    np.testing.assert_allclose(conjugate_y(g, c, n), direct, rtol=1e-13)


def test_mgf_constants_examples():
    C0, C = mgf_constants(1.0, 4.0, 2.0, 1.0)
    assert C0 == 2.0 and C == 0.5
    assert mgf_constants(0.3, 1.0, 3.0, 1.0)[0] == 1.0
    with pytest.raises(ValueError):
        mgf_constants(1.0, 2.0, 2.0, 2.0)


def test_mgf_constant_numeric_sup_oracle():
    # sup_xi (2 t xi - xi^2) = t^2 = 2 C t^2 for C = 1/2 (lambda = 1, p = 2, q = 1)
    xi = np.linspace(0, 50, 2_000_001)
    for t in (0.5, 1.0, 3.0, 7.0):
        sup = np.max(2 * t * xi - xi ** 2)
        assert sup / (2 * t ** 2) == pytest.approx(mgf_constants(1.0, 1.0, 2.0, 1.0)[1], abs=1e-6)


@pytest.mark.parametrize("p,q,C", [(2.0, 1.0, 0.5), (3.0, 1.0, 0.2), (2.0, 0.5, 1.3)])
def test_tail_constant_is_legendre_value(p, q, C):
    # -inf_t (C t^(p/(p-q)) - t) computed numerically
    t = np.linspace(0, 20, 400_001)
    val = -np.min(C * t ** (p / (p - q)) - t)
    assert mgf_tail_constant(C, p, q) == pytest.approx(val, rel=1e-6)
    if (p, q, C) == (2.0, 1.0, 0.5):
        assert mgf_tail_constant(C, p, q) == 0.5


@pytest.mark.parametrize("lam", [0.25, 1.0])
def test_mgf_check_on_three_atoms(lam):
    nu = DiscreteMeasure([[0.0], [1.0], [2.0]], [0.5, 0.3, 0.2])
    rep = mgf_check(nu, nu.norms(), lam, 2.0, 1.0, np.arange(0, 10.5, 0.5))
    assert rep["mgf_slack"] >= 0 and rep["tail_slack"] >= 0


def test_growth_bound_reduces_without_cross_terms(pair):
    # a certificate with no cross terms: f^c <= -mu(f), f^cc >= mu(f) - log C0
    m, n = pair
    model = CostModel("sq_distance")
    c = build_cost_matrix(model, m, n)
    cert = build_growth_certificate(model, c)
    import dataclasses
    bare = dataclasses.replace(cert, A_plus=0.0, A_alpha=[], B_beta=[], K_plus=[], K_minus=[],
                               alpha=[], beta=[], alpha_tilde=[], mu_c1=0.0,
                               a_minus=lambda r: 0.0 * np.asarray(r))
    f = np.linspace(-1, 1, 16)
    gb = growth_bound(bare, f)
    np.testing.assert_allclose(gb.upper_on_support, -m.mean(f))
    np.testing.assert_allclose(gb.lower_on_support, m.mean(f) - cert.log_C0)


@pytest.mark.parametrize("kind,p,eps", [("sq_distance", 2.0, 1.0), ("sq_distance", 2.0, 0.3),
                                        ("distance_pow", 1.5, 0.5), ("distance_pow", 1.0, 1.0)])
def test_growth_bound_dominates_conjugates(pair, kind, p, eps):
    m, n = pair
    model = CostModel(kind, eps, p=p)
    c = build_cost_matrix(model, m, n)
    cert = build_growth_certificate(model, c)
    rng = np.random.default_rng(1)
    ref = cert.reference
    rx, ry = m.norms(ref), n.norms(ref)
    for _ in range(20):
        f = rng.normal(0, 2, 16) + rng.uniform(-5, 5)
        gb = growth_bound(cert, f)
        fc = conjugate(f, c, m)
        fcc = conjugate_y(fc, c, n)
        assert np.all(fc - cert.c2(ry) <= gb.upper_on_support + 1e-9)
        assert np.all(fcc - cert.c1(rx) >= gb.lower_on_support - 1e-9)
        assert np.all(np.abs(fcc) <= gb.envelope_on_support + 1e-9)


def test_growth_K_scaling_in_epsilon(pair):
    m, n = pair
    eps = np.array([1.0, 0.5, 0.25, 0.1])
    Ks = []
    for e in eps:
        model = CostModel("sq_distance", e)
        Ks.append(build_growth_certificate(model, build_cost_matrix(model, m, n)).K)
    slope = np.polyfit(np.log(1 / eps), np.log(Ks), 1)[0]
    # alpha = p - max beta = 1 for the quadratic cost, so K grows at most like eps^-2
    assert slope <= 2.0 + 0.2


def test_custom_matrix_not_certified(pair):
    m, n = pair
    model = CostModel("custom_matrix", matrix=np.ones((16, 16)))
    c = build_cost_matrix(model, m, n)
    assert build_growth_certificate(model, c) is None
    assert growth_bound(None, np.zeros(16)) is None


def test_modulus_check_examples(pair):
    m, n = pair
    model = CostModel("distance_pow", 1.0, p=0.5)
    c = build_cost_matrix(model, m, n)
    cert = build_modulus_certificate(model, c)
    for f in (np.zeros(16), np.linspace(-2, 2, 16) ** 2):
        rep = modulus_conjugate_check(cert, f, c, m, n)
        assert rep["max_violation"] <= 1e-12
    bounded = CostModel("modulus", 1.0, omega=Omega(2.0, 0.0, 1.0))
    cb = build_cost_matrix(CostModel("custom_matrix", matrix=np.random.default_rng(0).uniform(0, 2, (16, 16))), m, n)
    cert_b = build_modulus_certificate(bounded, cb)
    fc = conjugate(np.zeros(16), cb, m)
    assert np.ptp(fc) <= 2.0
    assert modulus_conjugate_check(cert_b, np.zeros(16), cb, m, n)["oscillation"] <= 0.0
    assert build_modulus_certificate(CostModel("sq_distance"), c) is None


def test_certificate_json_is_finite(pair):
    m, n = pair
    model = CostModel("distance_pow", 0.5, p=1.5)
    cert = build_growth_certificate(model, build_cost_matrix(model, m, n))
    js = cert.to_json()
    assert all(math.isfinite(js[k]) for k in ("K", "C0", "C", "lambda"))
    assert js["alpha_tilde"] == [1.0] and js["beta"] == [0.5]
