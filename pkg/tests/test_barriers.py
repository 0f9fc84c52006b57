import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from conecanon import barriers, cones
from conecanon.barriers import (
    canonical_potential,
    canonical_residual,
    eval_jet3,
    log_homogeneity_defect,
    lorentz_potential,
    orthant_potential,
    product_potential,
    psd_potential,
    shifted,
    transport,
)
from conecanon.errors import NonInteriorPoint, SingularMatrix
from conecanon.sampling import sample_cone
from conecanon.suite import random_matrix, residual_cones

CLOSED = [cones.orthant(3), cones.lorentz(2), cones.lorentz(4), cones.psd(2), cones.psd(3),
          cones.product([cones.lorentz(3), cones.orthant(2)]),
          cones.linear_image(cones.lorentz(3), random_matrix(7, 3))]


def fd_hessian(f, x, h=1e-4):
    d = len(x)
    I = np.eye(d) * h
    H = np.empty((d, d))
    for i in range(d):
        for j in range(d):
            H[i, j] = (f(x + I[i] + I[j]) - f(x + I[i] - I[j]) - f(x - I[i] + I[j]) + f(x - I[i] - I[j])) / (4 * h * h)
    return H


def test_lorentz_constant_symbolic_oracle():
    x0, x1 = sp.symbols("x0 x1", positive=True)
    q = x0**2 - x1**2
    f = -sp.log(q)
    H = sp.simplify(sp.hessian(f, (x0, x1)).det())
    assert sp.simplify(H - 4 / q**2) == 0
    # H(f + c) = e^{2(f + c)} forces e^{2c} = 4
    c = math.log(2)
    F = lorentz_potential(2)
    assert F.constant == pytest.approx(c, abs=1e-15)
    assert F.value(np.array([[1.0, 0.0]]))[0] == pytest.approx(math.log(2), abs=1e-12)
    assert F.value(np.array([[2.0, 0.0]]))[0] == pytest.approx(-math.log(2), abs=1e-12)


def test_orthant_examples():
    F = orthant_potential(4)
    assert F.value(np.ones((1, 4)))[0] == 0
    assert F.value(np.full((1, 4), math.e))[0] == pytest.approx(-4)
    J = eval_jet3(orthant_potential(2), [1.0, 1.0])
    np.testing.assert_array_equal(J.hess, np.eye(2))
    assert math.exp(2 * J.value) == pytest.approx(np.linalg.det(J.hess))
    assert J.third[0, 0, 0] == -2 and J.third[0, 0, 1] == 0


def test_lorentz3_residual_with_fd_hessian():
    F = lorentz_potential(3)
    x = np.array([2.0, 1.0, 0.0])
    f = lambda p: F.value(p[None])[0]
    H = fd_hessian(f, x)
    assert abs(np.linalg.det(H) * math.exp(-2 * f(x)) - 1) < 1e-6
    assert canonical_residual(F, x[None])[0] <= 1e-12


def test_psd_examples():
    F1 = psd_potential(1)
    assert F1.constant == pytest.approx(0, abs=1e-14)
    assert F1.value(np.array([[3.0]]))[0] == pytest.approx(-math.log(3))
    F = psd_potential(2)
    I = cones.svec(np.eye(2))
    assert F.value((2 * I)[None])[0] == pytest.approx(F.value(I[None])[0] - 3 * math.log(2), abs=1e-13)
    X = cones.svec(np.diag([1.0, 2.0]))
    f = lambda p: F.value(p[None])[0]
    assert abs(np.linalg.det(fd_hessian(f, X)) * math.exp(-2 * f(X)) - 1) < 1e-6
    assert canonical_residual(F, X[None])[0] <= 1e-10


def test_transport_examples():
    O = orthant_potential(2)
    T = transport(O, math.e**0.7 * np.eye(2))
    X = sample_cone(cones.orthant(2), 50, seed=1)
    np.testing.assert_allclose(T.value(X), O.value(X), atol=1e-13)
    T = transport(O, np.diag([2.0, 1.0]))
    assert T.value(np.array([[2.0, 1.0]]))[0] == pytest.approx(-math.log(2), abs=1e-15)
    with pytest.raises(SingularMatrix):
        transport(O, np.zeros((2, 2)))


def test_transport_residual_and_chain_rule():
    A = random_matrix(3, 3)
    T = transport(lorentz_potential(3), A)
    # margins down to 0.1: rounding in the Hessian determinant grows like cond(g) * eps
    X = sample_cone(cones.linear_image(cones.lorentz(3), A), 100, seed=2, depth=1.0)
    assert canonical_residual(T, X).max() <= 1e-12
    x = X[0]
    f = lambda p: T.value(p[None])[0]
    np.testing.assert_allclose(T.jets(x[None]).hess[0], fd_hessian(f, x, 1e-4 * np.linalg.norm(x)), rtol=1e-5)


def test_product_examples():
    P = product_potential([orthant_potential(1), orthant_potential(1)])
    X = sample_cone(cones.orthant(2), 100, seed=4)
    np.testing.assert_allclose(P.value(X), orthant_potential(2).value(X), rtol=1e-14)
    assert product_potential([lorentz_potential(2), orthant_potential(1)]).alpha == -3
    Q = canonical_potential(cones.product([cones.psd(2), cones.lorentz(3)]))
    assert canonical_residual(Q, sample_cone(Q.cone, 100, seed=5, depth=1.0)).max() <= 1e-12


def test_lorentz_gradient_example():
    J = eval_jet3(lorentz_potential(2), [1.0, 0.0])
    np.testing.assert_allclose(J.grad, [-2.0, 0.0], atol=1e-15)


def test_non_interior_raises():
    with pytest.raises(NonInteriorPoint):
        orthant_potential(2).value(np.array([[1.0, 0.0]]))
    with pytest.raises(NonInteriorPoint):
        lorentz_potential(3).value(np.array([[1.0, 1.0, 0.0]]))
    with pytest.raises(NonInteriorPoint):
        psd_potential(2).value(cones.svec(np.diag([1.0, -1e-3]))[None])


@pytest.mark.parametrize("spec", CLOSED, ids=repr)
def test_euler_identities(spec):
    F = canonical_potential(spec)
    X = sample_cone(spec, 200, seed=6, depth=2.0)
    J = F.jets(X)
    d = spec.dim
    np.testing.assert_allclose(np.einsum("ni,ni->n", X, J.grad), -d, rtol=1e-12)
    np.testing.assert_allclose(np.einsum("ni,nij->nj", X, J.hess), -J.grad, rtol=1e-10, atol=1e-10 * np.abs(J.grad).max())
    np.testing.assert_allclose(np.einsum("ni,nijk->njk", X, J.third), -2 * J.hess, rtol=1e-9,
                               atol=1e-9 * np.abs(J.hess).max())


@pytest.mark.parametrize("spec", CLOSED, ids=repr)
def test_jets_match_richardson_differences(spec):
    """Differencing error falls at order >= 1.9 as the step halves."""
    F = canonical_potential(spec)
    x = sample_cone(spec, 1, seed=8, depth=1.0)[0]
    v = np.random.default_rng(1).normal(size=spec.dim)
    J = F.jets(x[None])[0]
    exact = [J.grad @ v, v @ J.hess @ v, J.cubic(v, v, v)]
    f = lambda t: F.value((x + t * v)[None])[0]
    s = 0.05 * cones.contains(spec, x) / np.linalg.norm(v)
    errs = []
    for h in (s, s / 2, s / 4):
        d1 = (f(h) - f(-h)) / (2 * h)
        d2 = (f(h) - 2 * f(0) + f(-h)) / h**2
        d3 = (f(2 * h) - 2 * f(h) + 2 * f(-h) - f(-2 * h)) / (2 * h**3)
        errs.append(np.abs(np.array([d1, d2, d3]) - exact))
    orders = np.log2(errs[0] / errs[1]), np.log2(errs[1] / errs[2])
    assert np.all(np.minimum(*orders) >= 1.9)


@pytest.mark.parametrize("spec", residual_cones(), ids=repr)
def test_canonical_residual_closed_forms(spec):
    F = canonical_potential(spec)
    assert canonical_residual(F, sample_cone(spec, 1000, seed=9, depth=2.0)).max() <= 1e-10


def test_log_homogeneity_defect():
    X = sample_cone(cones.orthant(3), 100, seed=10)
    assert log_homogeneity_defect(orthant_potential(3), X) <= 1e-14
    F = orthant_potential(3)

    def corrupted(Y):
        J = F.evaluator(Y)
        J.value = J.value + Y[:, 0]
        return J

    bad = barriers.PotentialHandle(corrupted, F.cone, F.alpha, "user")
    assert log_homogeneity_defect(bad, X) > 0.1


@settings(max_examples=40, deadline=None)
@given(st.floats(-3, 3), st.floats(0, 0.99), st.floats(0, 2 * math.pi), st.floats(0.1, 10))
def test_log_homogeneity_property(t, r, theta, s):
    F = lorentz_potential(3)
    p = s * np.array([1.0, r * math.cos(theta), r * math.sin(theta)])
    assert F.value((math.exp(t) * p)[None])[0] == pytest.approx(F.value(p[None])[0] - 3 * t, abs=1e-12)


def test_shift_changes_constant_only():
    F = orthant_potential(2)
    G = shifted(F, 0.1)
    X = sample_cone(F.cone, 10, seed=11)
    np.testing.assert_allclose(G.value(X) - F.value(X), 0.1)
    np.testing.assert_array_equal(G.jets(X).hess, F.jets(X).hess)


def test_user_potential_matches_closed_form():
    U = barriers.user_potential(lambda x: -math.log(x[0] ** 2 - x[1] ** 2) + math.log(2), cones.lorentz(2), -2.0)
    L = lorentz_potential(2)
    X = np.array([[1.5, 0.3], [2.0, -0.5]])
    Ju, Jl = U.jets(X), L.jets(X)
    np.testing.assert_allclose(Ju.grad, Jl.grad, rtol=1e-8)
    np.testing.assert_allclose(Ju.hess, Jl.hess, rtol=1e-5)
    np.testing.assert_allclose(Ju.third, Jl.third, rtol=1e-3, atol=1e-3)
