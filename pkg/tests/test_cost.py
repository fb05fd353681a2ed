import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sinkrate.cost import (CostError, CostMatrix, CostModel, Omega, build_cost_matrix,
                           check_distance_pow_decomposition, check_gateaux_decomposition,
                           check_modulus, cost_from_spec, decomposition, load_cost_csv,
                           modulus_for)
from sinkrate.measures import DiscreteMeasure, discretize_subexp_family


def pt(*coords):
    return DiscreteMeasure([list(coords)], [1.0])


@pytest.mark.parametrize("eps,expect", [(1.0, 4.0), (0.5, 8.0)])
def test_sq_distance_entry(eps, expect):
    c = build_cost_matrix(CostModel("sq_distance", eps), pt(0.0), pt(2.0))
    assert c.entries[0, 0] == expect


def test_distance_pow_euclidean():
    c = build_cost_matrix(CostModel("distance_pow", 1.0, p=1.0), pt(0.0, 0.0), pt(3.0, 4.0))
    assert c.entries[0, 0] == 5.0


def test_custom_matrix_scaled_and_shape_checked():
    mx = DiscreteMeasure([[0.0], [1.0]], [0.5, 0.5])
    c = build_cost_matrix(CostModel("custom_matrix", 0.5, matrix=[[0, 1], [2, 3]]), mx, mx)
    np.testing.assert_array_equal(c.entries, [[0, 2], [4, 6]])
    with pytest.raises(CostError, match="shape"):
        build_cost_matrix(CostModel("custom_matrix", matrix=[[0, 1, 2]]), mx, mx)


def test_invalid_models():
    with pytest.raises(CostError):
        CostModel("sq_distance", 0.0)
    with pytest.raises(CostError):
        CostModel("distance_pow", 1.0, p=-1.0)
    with pytest.raises(CostError):
        CostModel("wasserstein")
    with pytest.raises(CostError):
        Omega(0.0, 1.0, 1.5)


def test_epsilon_scaling_property():
    m = discretize_subexp_family("gaussian", [0.0, 1.0], 1.0, 3, 2.0)
    for kind, p in (("sq_distance", 2.0), ("distance_pow", 1.5), ("distance_pow", 0.5)):
        base = build_cost_matrix(CostModel(kind, 1.0, p=p), m, m).entries
        scaled = build_cost_matrix(CostModel(kind, 0.3, p=p), m, m).entries
        np.testing.assert_allclose(scaled, base / 0.3, rtol=1e-15)
        np.testing.assert_array_equal(base, base.T)


def test_cost_from_spec_and_csv(tmp_path):
    f = tmp_path / "c.csv"
    f.write_text("0,1\n1,0\n")
    np.testing.assert_array_equal(load_cost_csv(f), [[0, 1], [1, 0]])
    model = cost_from_spec({"kind": "custom_matrix", "path": "c.csv", "epsilon": 2}, tmp_path)
    assert model.epsilon == 2.0 and model.matrix.shape == (2, 2)
    assert cost_from_spec({"kind": "distance_pow", "p": 1.5}).p == 1.5
    with pytest.raises(CostError, match="p"):
        cost_from_spec({"kind": "distance_pow"})
    with pytest.raises(CostError, match="kind"):
        cost_from_spec({"kind": "nope"})
    (tmp_path / "bad.csv").write_text("0,1\n1\n")
    with pytest.raises(CostError, match="ragged"):
        load_cost_csv(tmp_path / "bad.csv")


def test_cost_matrix_shape_invariant():
    mx = DiscreteMeasure([[0.0], [1.0]], [0.5, 0.5])
    with pytest.raises(CostError):
        CostMatrix(np.zeros((3, 2)), mx, mx)


def test_distance_pow_check_examples():
    assert check_distance_pow_decomposition(2.0, [((0.0,), (5.0,))]).max_violation == 0.0
    # |x| = 1, |y| = 3: rhs = 2*2*(3 + 1) = 16 on either side of the anchor
    r = check_distance_pow_decomposition(2.0, [((-1.0,), (3.0,)), ((1.0,), (3.0,))])
    np.testing.assert_array_equal(r.details["lhs"], [7.0, 5.0])
    np.testing.assert_array_equal(r.details["rhs"], [16.0, 16.0])
    assert r.max_violation == -9.0
    with pytest.raises(CostError):
        check_distance_pow_decomposition(0.5, [((0.0,), (1.0,))])


@given(st.floats(1.0, 4.0), st.integers(1, 3), st.integers(0, 2 ** 31))
def test_distance_pow_check_randomized(p, d, seed):
    rng = np.random.default_rng(seed)
    xs = rng.normal(0, 3, (50, d))
    ys = rng.normal(0, 3, (50, d))
    x0 = rng.normal(0, 1, d)
    assert check_distance_pow_decomposition(p, zip(xs, ys), x0).passed


def test_gateaux_check_examples():
    const = check_gateaux_decomposition(lambda x, y: 3.0, 1.0, 2.0, [((1.0,), (2.0,))])
    assert const.details["displacement"] < 0
    grid = np.linspace(-3, 3, 13)
    pairs = [((a,), (b,)) for a in grid for b in grid]
    r = check_gateaux_decomposition(lambda x, y: float(np.sum((x - y) ** 2)), 2.0, 2.0, pairs)
    assert r.passed
    zero = check_gateaux_decomposition(lambda x, y: float(np.sum((x - y) ** 2)), 2.0, 2.0,
                                       [((0.0,), (b,)) for b in grid])
    assert zero.details["displacement"] < 0


def test_decomposition_reconstructs_sq_distance():
    # |x - y|^2 = |x|^2 + |y|^2 - 2<x, y>, cross term bounded by 2|x||y|
    rng = np.random.default_rng(3)
    dec = decomposition(CostModel("sq_distance"))
    x, y = rng.normal(size=(40, 2)), rng.normal(size=(40, 2))
    nx, ny = np.linalg.norm(x, axis=1), np.linalg.norm(y, axis=1)
    chat = np.sum((x - y) ** 2, axis=1) - dec.c1(nx) - dec.c2(ny)
    t = dec.terms[0]
    assert np.all(np.abs(chat) <= t.k_plus * nx ** t.alpha * ny ** t.beta + 1e-12)
    assert decomposition(CostModel("distance_pow", p=0.5)) is None
    assert decomposition(CostModel("custom_matrix", matrix=[[0.0]])) is None


def test_modulus_certificates_verified():
    m = discretize_subexp_family("gaussian", [0.0], 1.0, 12, 3.0)
    n = discretize_subexp_family("gaussian", [0.4], 1.0, 12, 3.0)
    for model in (CostModel("distance_pow", 0.5, p=0.5), CostModel("distance_pow", 1.0, p=1.0),
                  CostModel("modulus", 0.25, omega=Omega(0.1, 2.0, 0.5)),
                  CostModel("custom_matrix", 0.5,
                            matrix=np.random.default_rng(0).uniform(0, 2, (12, 12)))):
        omega = modulus_for(model)
        assert check_modulus(model, omega, m, n).passed, model.kind
    assert modulus_for(CostModel("sq_distance")) is None
    assert modulus_for(CostModel("distance_pow", p=0.0))(5.0) == 0.0
