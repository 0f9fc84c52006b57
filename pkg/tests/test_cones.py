import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linprog

from conecanon import cones
from conecanon.errors import DimensionMismatch, MalformedSpec, SliceUnbounded, UnsupportedDual
from conecanon.sampling import sample_cone
from conecanon.suite import rotation

ALL = [
    cones.orthant(3),
    cones.lorentz(3),
    cones.psd(2),
    cones.polyhedral([[1, 0, 0], [0, 1, 0], [0, 0, 1], [1, 1, -1]]),
    cones.linear_image(cones.lorentz(3), [[1, 0.2, 0], [0, 1, 0.3], [0.1, 0, 1]]),
    cones.product([cones.lorentz(2), cones.orthant(1)]),
]


def test_validate_examples():
    rep = cones.validate_proper(cones.orthant(3))
    assert rep.proper
    np.testing.assert_allclose(rep.witness, [1, 1, 1])
    slab = cones.polyhedral([[1, 0], [-1, 0]])
    assert not cones.validate_proper(slab).proper
    rep = cones.validate_proper(cones.lorentz(3))
    assert rep.proper
    np.testing.assert_allclose(rep.witness, [1, 0, 0])


def test_lorentz_witness_against_lp_oracle():
    # independent check: y.x >= margin on sampled unit generators (1, cos, sin)
    ang = np.linspace(0, 2 * np.pi, 400, endpoint=False)
    gens = np.stack([np.ones_like(ang), np.cos(ang), np.sin(ang)], 1) / math.sqrt(2)
    res = linprog(np.r_[0, 0, 0, -1.0], A_ub=np.c_[-gens, np.ones(len(gens))], b_ub=np.zeros(len(gens)),
                  bounds=[(-1, 1)] * 3 + [(None, None)], method="highs")
    y = res.x[:3] / np.linalg.norm(res.x[:3])
    np.testing.assert_allclose(y, [1, 0, 0], atol=1e-6)
    w = cones.validate_proper(cones.lorentz(3)).witness
    assert np.all(gens @ w > 0)


def test_malformed_specs():
    with pytest.raises(MalformedSpec):
        cones.linear_image(cones.orthant(2), [[1, 2], [2, 4]])
    with pytest.raises(MalformedSpec):
        cones.polyhedral([[0, 0], [1, 0]])
    with pytest.raises(MalformedSpec):
        cones.from_json({"variant": "Simplex", "dim": 3})


def test_contains_examples():
    assert cones.contains(cones.orthant(2), [1, 2]) == 1
    assert cones.contains(cones.lorentz(2), [1, 1]) == 0
    X = cones.svec(np.diag([2.0, -1.0]))
    assert cones.contains(cones.psd(2), X) == pytest.approx(-1)
    with pytest.raises(DimensionMismatch):
        cones.contains(cones.orthant(2), [1, 2, 3])


def test_psd_embedding_is_isometric():
    rng = np.random.default_rng(3)
    A, B = rng.normal(size=(2, 3, 3))
    A, B = A + A.T, B + B.T
    assert cones.svec(A) @ cones.svec(B) == pytest.approx(np.trace(A @ B))
    np.testing.assert_allclose(cones.smat(cones.svec(A)[None], 3)[0], A)


@pytest.mark.parametrize("spec", ALL, ids=repr)
def test_homogeneity_of_margin(spec):
    X = sample_cone(spec, 1000, seed=1, depth=3.0)
    t = np.exp(np.random.default_rng(0).uniform(-3, 3, len(X)))
    np.testing.assert_allclose(cones.contains(spec, X * t[:, None]), t * cones.contains(spec, X), rtol=1e-12, atol=1e-15)


@pytest.mark.parametrize("spec", ALL, ids=repr)
def test_duality_pairing_positive(spec):
    dual = cones.dual_cone(spec)
    X = sample_cone(spec, 1000, seed=2, depth=3.0)
    Y = sample_cone(dual, 1000, seed=3, depth=3.0)
    assert np.all(np.einsum("ni,ni->n", X, Y) > 0)


def test_dual_examples():
    assert cones.dual_cone(cones.orthant(3)).variant == "Orthant"
    A = np.array([[2.0, 1.0], [0.5, 1.0]])
    d = cones.dual_cone(cones.linear_image(cones.orthant(2), A))
    np.testing.assert_allclose(d.A, np.linalg.inv(A).T)
    quad = cones.polyhedral([[1, 0], [0, 1]])
    rays = cones.dual_cone(quad).normals
    # vertex-enumeration oracle: the generators of the quadrant are the two axes
    assert sorted(map(tuple, np.round(rays, 12))) == [(0.0, 1.0), (1.0, 0.0)]


def test_double_dual_polyhedral():
    spec = cones.polyhedral([[1, 0, 0], [0, 1, 0], [0, 0, 1], [1, 1, -1]])
    back = cones.dual_cone(cones.dual_cone(spec))
    X = np.random.default_rng(4).normal(size=(2000, 3))
    np.testing.assert_array_equal(cones.contains(spec, X) > 1e-9, cones.contains(back, X) > 1e-9)


def test_polyhedral_dual_cap():
    with pytest.raises(UnsupportedDual):
        cones.dual_cone(cones.polyhedral(np.eye(5)))


def test_cross_section_examples():
    cs = cones.cross_section(cones.orthant(2), np.array([1.0, 1.0]))
    ends = cs.to_cone(np.array([[cs.lo[0]], [cs.hi[0]]]))
    np.testing.assert_allclose(sorted(map(tuple, ends)), [(0, 1), (1, 0)], atol=1e-12)
    disk = cones.cross_section(cones.lorentz(3), np.array([1.0, 0.0, 0.0]))
    np.testing.assert_allclose(disk.origin, [1, 0, 0])
    np.testing.assert_allclose(np.abs(disk.hi), 1.0, atol=3e-3)
    R = rotation(math.pi / 6)
    rot = cones.linear_image(cones.orthant(2), R)
    w = np.linalg.inv(R).T @ np.ones(2)
    cs = cones.cross_section(rot, w)
    ends = cs.to_cone(np.array([[cs.lo[0]], [cs.hi[0]]]))
    want = (R @ np.eye(2)).T
    np.testing.assert_allclose(sorted(map(tuple, ends)), sorted(map(tuple, want)), atol=1e-12)


def test_cross_section_rejects_exterior_covector():
    with pytest.raises(SliceUnbounded):
        cones.cross_section(cones.orthant(2), np.array([1.0, -1.0]))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-0.9, 0.9), min_size=2, max_size=2))
def test_slice_bijection(y):
    cs = cones.cross_section(cones.lorentz(3), np.array([1.0, 0.1, -0.2]))
    Y = np.array([y]) * 0.5 + cs.center
    if not cs.inside(Y)[0]:
        return
    np.testing.assert_allclose(cs.to_chart(cs.to_cone(Y)), Y, atol=1e-12)


@pytest.mark.parametrize("spec", ALL, ids=repr)
def test_json_round_trip(spec):
    back = cones.from_json(cones.to_json(spec))
    X = np.random.default_rng(5).normal(size=(200, spec.dim))
    np.testing.assert_allclose(cones.contains(back, X), cones.contains(spec, X))
