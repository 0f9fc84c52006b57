import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conecanon import certify, cones, ma_solver
from conecanon.barriers import (
    Jet3,
    PotentialHandle,
    canonical_potential,
    lorentz_potential,
    orthant_potential,
    shifted,
    transport,
)
from conecanon.errors import DegenerateHessian, NonConvexWitness, RankDeficient
from conecanon.sampling import sample_cone, sample_domain
from conecanon.suite import polyhedral_examples, random_matrix

TRIANGLE = cones.PolyhedralDomain([[1, 0], [0, 1], [-1, -1]], [0, 0, 1])
SQUARE = cones.PolyhedralDomain([[1, 0], [-1, 0], [0, 1], [0, -1]], [0, 1, 0, 1])


def test_sc_ratio_orthant_axis():
    J = orthant_potential(3).jets(np.ones((1, 3)))[0]
    assert certify.sc_ratio(J, np.array([1.0, 0, 0])) == pytest.approx(1.0, abs=1e-15)


@settings(max_examples=50, deadline=None)
@given(st.floats(1e-3, 1e3), st.lists(st.floats(-1, 1), min_size=3, max_size=3).filter(lambda v: np.linalg.norm(v) > 1e-3))
def test_sc_ratio_scale_invariant(lam, v):
    J = lorentz_potential(3).jets(np.array([[2.0, 0.3, -0.4]]))[0]
    v = np.array(v)
    assert certify.sc_ratio(J, lam * v) == pytest.approx(certify.sc_ratio(J, v), rel=1e-10)


def test_lorentz3_self_concordance_sup():
    F = lorentz_potential(3)
    X = sample_cone(cones.lorentz(3), 1250, seed=4)
    rep = certify.self_concordance_sup(F, X, dirs_per_sample=8, seed=4)
    assert rep.passed and rep.statistic <= 1 + 1e-9
    assert rep.count >= 10**4


@pytest.mark.parametrize("spec", [cones.lorentz(3), cones.psd(2), cones.orthant(3)], ids=repr)
def test_witness_reproduces_statistic(spec):
    F = canonical_potential(spec)
    X = sample_cone(spec, 300, seed=5)
    for rep, col in ((certify.self_concordance_sup(F, X, seed=5), "sc"), (certify.barrier_parameter_sup(F, X, seed=5), "nu")):
        x = np.array(rep.witness["point"])[None]
        v = np.array(rep.witness["direction"])[None, None]
        d1, d2, d3 = F.along(x, v)
        again = (d3 * d3 / (4 * d2**3) if col == "sc" else d1 * d1 / d2)[0, 0]
        assert abs(again - rep.statistic) <= 1e-12 * max(1.0, rep.statistic)


def test_barrier_parameter_examples():
    F = orthant_potential(2)
    J = F.jets(np.ones((1, 2)))[0]
    assert certify.nu_ratio(J, np.array([1.0, 0.0])) == pytest.approx(1.0)
    X = sample_cone(cones.lorentz(4), 100, seed=6)
    L = canonical_potential(cones.lorentz(4))
    d1, d2, _ = L.along(X, X[:, None, :])
    np.testing.assert_allclose(d1 * d1 / d2, 4, rtol=1e-9)
    rep = certify.barrier_parameter_sup(L, sample_cone(cones.lorentz(4), 1250, seed=6), dirs=8, seed=6)
    assert abs(rep.statistic - 4) <= 1e-6 and rep.passed


def test_self_concordance_affine_invariance():
    A = random_matrix(11, 3)
    F = lorentz_potential(3)
    T = transport(F, A)
    X = sample_cone(cones.lorentz(3), 50, seed=7, depth=2.0)
    V = np.random.default_rng(0).normal(size=(50, 3))
    for x, v in zip(X, V):
        a = certify.sc_ratio(F.jets(x[None])[0], v)
        b = certify.sc_ratio(T.jets((A @ x)[None])[0], A @ v)
        assert abs(a - b) <= 1e-10


def test_barrier_parameter_shift_invariant():
    F = lorentz_potential(3)
    X = sample_cone(cones.lorentz(3), 200, seed=8)
    a = certify.barrier_parameter_sup(F, X, seed=1).statistic
    b = certify.barrier_parameter_sup(shifted(F, 0.37), X, seed=1).statistic
    assert a == b


def test_subsolution_examples():
    G = certify.polyhedral_log_barrier(TRIANGLE)
    assert certify.subsolution_check(G, sample_domain(TRIANGLE, 500, seed=1)).statistic >= 1 - 1e-12
    G = certify.polyhedral_log_barrier(SQUARE)
    assert certify.subsolution_check(G, sample_domain(SQUARE, 500, seed=2)).statistic >= 1 - 1e-12
    rep = certify.subsolution_check(orthant_potential(3), sample_cone(cones.orthant(3), 100, seed=3))
    assert rep.statistic == pytest.approx(1.0, abs=1e-13)


def test_subsolution_transforms_with_determinant():
    G = certify.polyhedral_log_barrier(TRIANGLE)
    A = np.array([[2.0, 0.5], [-0.3, 1.2]])
    T = transport(G, A)
    Y = sample_domain(TRIANGLE, 100, seed=4, depth=2.0)
    for y in Y[:20]:
        a = certify.subsolution_check(G, y[None]).statistic
        b = certify.subsolution_check(T, (A @ y)[None]).statistic
        assert abs(a - b) <= 1e-10 * a


def test_non_convex_witness():
    def ev(X):
        n = len(X)
        return Jet3(np.zeros(n), np.zeros((n, 2)), -np.broadcast_to(np.eye(2), (n, 2, 2)).copy())

    G = PotentialHandle(ev, cones.orthant(2), None, "user")
    with pytest.raises(NonConvexWitness):
        certify.subsolution_check(G, np.ones((1, 2)))
    with pytest.raises(DegenerateHessian):
        certify.barrier_parameter_sup(G, np.ones((1, 2)))


def test_schwarz_examples():
    F = lorentz_potential(3)
    X = sample_cone(cones.lorentz(3), 500, seed=9, depth=3.0)
    assert certify.schwarz_dominance(F, F, X).statistic == 0
    bumped = shifted(F, 0.1)
    rep = certify.subsolution_check(bumped, sample_cone(cones.lorentz(3), 100, seed=9, depth=1.0))
    assert not rep.passed and rep.statistic == pytest.approx(math.exp(-0.2), rel=1e-10)
    for G in ma_solver.circumscribed_potentials(cones.lorentz(3), count=8):
        assert certify.schwarz_dominance(F, G, X).passed


@pytest.mark.parametrize("name", ["triangle", "square", "cut_quadrant"])
def test_polyhedral_constants(name):
    dom, want = polyhedral_examples()[name]
    G = certify.polyhedral_log_barrier(dom)
    assert G.info["c"] == pytest.approx(want, abs=1e-9)
    assert certify.subsolution_check(G, sample_domain(dom, 1000, seed=10)).statistic >= 1 - 1e-9


def test_barrier_polynomial_matches_hessian_determinant():
    Y = sample_domain(SQUARE, 50, seed=11, depth=1.0)
    l = SQUARE.values(Y)
    H = np.einsum("na,ai,aj->nij", 1 / l**2, SQUARE.A, SQUARE.A)
    want = np.linalg.det(H) * np.prod(l**2, axis=1)
    np.testing.assert_allclose(certify.barrier_polynomial(SQUARE, Y), want, rtol=1e-10)


def test_rank_deficient_domain():
    with pytest.raises(RankDeficient):
        certify.polyhedral_log_barrier(cones.PolyhedralDomain([[1, 0], [-1, 0]], [0, 1]))
