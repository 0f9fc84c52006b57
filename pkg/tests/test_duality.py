import numpy as np
import pytest

from conecanon import cones, duality
from conecanon.barriers import canonical_potential, lorentz_potential, orthant_potential, transport
from conecanon.errors import DomainMismatch
from conecanon.sampling import sample_cone
from conecanon.suite import SEED, _numeric_duality, jittered_polygon_cone, random_matrix

SPECS = [cones.orthant(3), cones.lorentz(2), cones.lorentz(4), cones.psd(2), cones.psd(3),
         cones.linear_image(cones.lorentz(3), random_matrix(5, 3)),
         cones.product([cones.lorentz(3), cones.orthant(2)])]


def test_gradient_map_examples():
    np.testing.assert_allclose(duality.gradient_map(orthant_potential(2), [1.0, 2.0]), [1.0, 0.5])
    np.testing.assert_allclose(duality.gradient_map(lorentz_potential(2), [1.0, 0.0]), [2.0, 0.0], atol=1e-15)


@pytest.mark.parametrize("spec", SPECS, ids=repr)
def test_identity_and_roundtrip(spec):
    F, Fd = canonical_potential(spec), duality.dual_potential(spec)
    X = sample_cone(spec, 500, seed=1, depth=3.0)
    assert duality.duality_identity_defect(F, Fd, X) <= 1e-10
    assert duality.inverse_map_roundtrip(F, Fd, X) <= 1e-10
    assert duality.dual_margins(F, X).min() > 0
    assert duality.homogeneity_defect(F, X) <= 1e-12


def test_orthant_defects_vanish():
    F = orthant_potential(3)
    X = sample_cone(cones.orthant(3), 200, seed=2)
    assert duality.duality_identity_defect(F, F, X) <= 1e-14
    assert duality.inverse_map_roundtrip(F, F, X) <= 1e-15


@pytest.mark.parametrize("spec", [cones.lorentz(3), cones.psd(2), cones.orthant(3)], ids=repr)
def test_pullback_isometry(spec):
    F, Fd = canonical_potential(spec), duality.dual_potential(spec)
    X = sample_cone(spec, 300, seed=3, depth=3.0)
    assert duality.pullback_isometry_defect(F, Fd, X) <= 1e-8


@pytest.mark.parametrize("spec", [cones.orthant(3), cones.lorentz(3), cones.lorentz(4), cones.psd(2)], ids=repr)
def test_automorphism_equivariance(spec):
    F = canonical_potential(spec)
    X = sample_cone(spec, 200, seed=4, depth=2.0)
    maps = duality.automorphisms(spec)
    for A in maps:
        # each generated map sends the cone into itself
        assert np.all(cones.contains(spec, X @ A.T) > 0)
    assert duality.equivariance_defect(F, X, maps) <= 1e-10


def test_domain_mismatch():
    with pytest.raises(DomainMismatch):
        duality.duality_identity_defect(orthant_potential(2), orthant_potential(3), np.ones((1, 2)))
    # the gradient image of an orthant point is not in a rotated orthant's dual
    R = np.array([[0.0, -1.0], [1.0, 0.0]])
    with pytest.raises(DomainMismatch):
        duality.duality_identity_defect(orthant_potential(2), transport(orthant_potential(2), R), np.ones((1, 2)))


def test_report_fields():
    F = lorentz_potential(3)
    rep = duality.dual_pair_report(F, F, np.array([2.0, 0.5, -0.3]))
    assert rep.identity_defect <= 1e-13 and rep.roundtrip_defect <= 1e-13 and rep.dual_margin > 0


def test_monotonicity_signs_orthant():
    F = orthant_potential(3)
    X = sample_cone(cones.orthant(3), 50, seed=5, depth=2.0)
    V = np.abs(np.random.default_rng(0).normal(size=(50, 3, 3)))
    assert min(duality.monotonicity_signs(F, X, V).values()) >= 0


def test_numeric_duality_within_solver_tolerance():
    ident, rt, tol, margin = _numeric_duality(jittered_polygon_cone(SEED), 1 / 64, 150)
    assert ident <= 10 * tol and rt <= 10 * tol and margin > 0
