import numpy as np
import pytest

from conecanon import cones, geometry
from conecanon.barriers import canonical_potential, lorentz_potential, orthant_potential, transport
from conecanon.errors import IllConditionedMetric
from conecanon.sampling import sample_cone
from conecanon.suite import random_matrix

CANON = [cones.orthant(3), cones.lorentz(3), cones.lorentz(4), cones.psd(2),
         cones.linear_image(cones.orthant(3), random_matrix(2, 3))]


def test_orthant_at_ones():
    rep = geometry.geometry_at(orthant_potential(2), [1.0, 1.0])
    assert rep.scalar_curvature == pytest.approx(0, abs=1e-12)
    np.testing.assert_allclose(rep.kappa, -2 * rep.g, atol=1e-8)
    assert rep.kappa_scalar == pytest.approx(-4, abs=1e-7)
    assert rep.pick_norm2 == pytest.approx(0, abs=1e-14)


def test_lorentz3_axis_scalar_curvature():
    rep = geometry.geometry_at(lorentz_potential(3), [1.0, 0.0, 0.0])
    assert rep.scalar_curvature == pytest.approx(-2 / 3, abs=1e-12)


def test_pick_norm_extremes():
    # flat orthants sit at the upper bound 4n(n-1)/(n+1), Lorentz cones at 0
    X = sample_cone(cones.orthant(4), 50, seed=1, depth=2.0)
    G = geometry.geometry_batch(orthant_potential(4), X)
    np.testing.assert_allclose(G["pick_norm2"], 4 * 3 * 2 / 4, rtol=1e-10)
    X = sample_cone(cones.lorentz(4), 50, seed=1, depth=2.0)
    G = geometry.geometry_batch(lorentz_potential(4), X)
    assert np.abs(G["pick_norm2"]).max() <= 1e-12


def test_koszul_two_ways():
    F = lorentz_potential(3)
    X = sample_cone(cones.lorentz(3), 50, seed=2, depth=1.0)
    d = geometry.identity_defects(F, X)
    assert d["koszul_fd"].max() <= 1e-8
    assert d["koszul_canonical"].max() <= 1e-10


@pytest.mark.parametrize("spec", CANON, ids=repr)
def test_pick_tensor_structure(spec):
    F = canonical_potential(spec)
    X = sample_cone(spec, 100, seed=3, depth=2.0)
    G = geometry.geometry_batch(F, X)
    A = G["pick"]
    scale = np.abs(G["jet"].third).max()
    for perm in [(0, 2, 1, 3), (0, 3, 2, 1), (0, 2, 3, 1)]:
        assert np.abs(A - A.transpose(perm)).max() <= 1e-14 * scale
    d = geometry.identity_defects(F, X, G)
    unit = 1 + G["cond"]
    assert (d["pick_trace"] / unit).max() <= 1e-10
    assert (d["pick_radial"] / unit).max() <= 1e-10


@pytest.mark.parametrize("spec", CANON, ids=repr)
def test_identities_scaled_by_conditioning(spec):
    F = canonical_potential(spec)
    X = sample_cone(spec, 300, seed=4, depth=3.0)
    G = geometry.geometry_batch(F, X)
    d = geometry.identity_defects(F, X, G)
    unit = 1 + G["cond"]
    limits = {"grad_norm2": 1e-10, "laplacian": 1e-8, "kappa_einstein": 1e-9,
              "koszul_canonical": 1e-10, "scalar_identity": 1e-8}
    for k, lim in limits.items():
        assert (d[k] / unit).max() <= lim, k


def test_curvature_bounds_examples():
    r = geometry.curvature_bounds_check(orthant_potential(3), sample_cone(cones.orthant(3), 100, seed=5, depth=3.0))
    assert r.passed and abs(r.max_eigenvalue) <= 1e-12 and abs(r.min_eigenvalue) <= 1e-12
    r = geometry.curvature_bounds_check(lorentz_potential(3), sample_cone(cones.lorentz(3), 100, seed=6, depth=1.0))
    assert r.passed
    assert r.min_eigenvalue == pytest.approx(-1 / 3, abs=1e-8)
    T = transport(orthant_potential(3), random_matrix(9, 3))
    r = geometry.curvature_bounds_check(T, sample_cone(T.cone, 100, seed=7, depth=1.0))
    assert r.passed and max(abs(r.max_eigenvalue), abs(r.min_eigenvalue)) <= 1e-9


def test_harmonicity_examples():
    h = geometry.harmonicity_check(orthant_potential(2), np.array([[2.0, 3.0]]))
    assert h["grad_norm2"] <= 1e-15
    h = geometry.harmonicity_check(lorentz_potential(2), np.array([[1.0, 0.0]]))
    assert h["laplacian"] <= 1e-12
    h = geometry.harmonicity_check(canonical_potential(cones.psd(2)), sample_cone(cones.psd(2), 50, seed=8, depth=1.0))
    assert h["flat_laplacian"] <= 1e-12


def test_ill_conditioned_metric_raises():
    with pytest.raises(IllConditionedMetric):
        geometry.geometry_at(orthant_potential(2), [1.0, 1e-7])


def test_scalar_rows_columns():
    rows = geometry.scalar_rows(orthant_potential(2), np.array([[1.0, 2.0], [3.0, 1.0]]))
    assert len(rows) == 2 and set(geometry.SCALAR_COLUMNS) <= set(rows[0])
