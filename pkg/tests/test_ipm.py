import math

import numpy as np
import pytest

from conecanon import cones, ipm
from conecanon.barriers import canonical_potential, orthant_potential, transport
from conecanon.errors import Infeasible, Unbounded
from conecanon.suite import numeric_potential


def lp():
    return ipm.ConicProgram([1, 0], [[1, 1]], [1], cones.orthant(2))


def socp(d=2):
    A = np.zeros((1, d))
    A[0, 1] = 1
    return ipm.ConicProgram(np.eye(d)[0], A, [1], cones.lorentz(d))


def test_newton_step_hand_oracle():
    # H = diag(4, 4), grad = (-2, -2) at (1/2, 1/2); the KKT system gives dx = (-1/8, 1/8)
    step, lam = ipm.newton_direction(orthant_potential(2), lp(), np.array([0.5, 0.5]), 1.0)
    np.testing.assert_allclose(step, [-0.125, 0.125], atol=1e-15)
    assert lam == pytest.approx(math.sqrt(1 / 8), rel=1e-14)


def test_analytic_center_is_stationary():
    prog = ipm.ConicProgram([0, 0], [[1, 1]], [2], cones.orthant(2))
    step, lam = ipm.newton_direction(orthant_potential(2), prog, np.array([1.0, 1.0]), 1.0)
    assert np.abs(step).max() <= 1e-15 and lam <= 1e-15


def test_decrement_affine_invariant():
    M = np.array([[2.0, 1.0], [0.5, 3.0]])
    Minv = np.linalg.inv(M)
    base = lp()
    moved = ipm.ConicProgram(base.c @ Minv, base.A @ Minv, base.b, cones.linear_image(cones.orthant(2), M))
    T = transport(orthant_potential(2), M)
    for x in ([0.3, 0.7], [0.9, 0.1]):
        x = np.array(x)
        s0, l0 = ipm.newton_direction(orthant_potential(2), base, x, 0.7)
        s1, l1 = ipm.newton_direction(T, moved, M @ x, 0.7)
        assert l0 == pytest.approx(l1, rel=1e-12)
        np.testing.assert_allclose(s1, M @ s0, atol=1e-14)


def test_lp_solution_and_trace():
    x, trace = ipm.solve_conic(lp(), eps=1e-8)
    assert trace.status == "optimal" and trace.gap_bound <= 1e-8
    assert x[0] <= 1e-8 and abs(x[1] - 1) <= 1e-8
    assert trace.iterations <= trace.iteration_bound
    A = lp().A
    mus = [r["mu"] for r in trace.records]
    assert all(b <= a for a, b in zip(mus, mus[1:]))
    assert all(r["margin"] > 0 for r in trace.records)
    assert np.abs(A @ x - 1).max() <= 1e-10


def test_gap_certificate_shrinks_by_fixed_factor():
    _, trace = ipm.solve_conic(lp(), eps=1e-6)
    mus = sorted(set(r["mu"] for r in trace.records), reverse=True)
    ratios = np.array(mus[1:]) / np.array(mus[:-1])
    np.testing.assert_allclose(ratios, 1 - 0.1 / math.sqrt(2), rtol=1e-12)


def test_socp_boundary_optimum():
    x, trace = ipm.solve_conic(socp(), eps=1e-8)
    assert abs(x[0] - 1) <= 1e-8 and trace.gap_bound <= 1e-8


def test_transported_lp_agrees():
    M = np.array([[2.0, 1.0], [0.5, 3.0]])
    Minv = np.linalg.inv(M)
    moved = ipm.ConicProgram(np.array([1.0, 0.0]) @ Minv, np.array([[1.0, 1.0]]) @ Minv, [1],
                             cones.linear_image(cones.orthant(2), M))
    x, _ = ipm.solve_conic(moved, eps=1e-8)
    y, _ = ipm.solve_conic(lp(), eps=1e-8)
    assert abs(moved.c @ x - lp().c @ y) <= 1e-8


def test_infeasible_and_unbounded():
    with pytest.raises(Infeasible):
        ipm.solve_conic(ipm.ConicProgram([1, 0], [[1, 1]], [-1], cones.orthant(2)))
    with pytest.raises(Unbounded):
        ipm.solve_conic(ipm.ConicProgram([-1, 0], [[1, -1]], [0], cones.orthant(2)))


def test_phase_one_gives_interior_point():
    prog = ipm.ConicProgram([1, 1, 1], [[1, 2, 3]], [-0.5], cones.lorentz(3))
    x = ipm.phase_one(prog)
    assert cones.contains(prog.cone, x) > 0 and abs(prog.A @ x - prog.b)[0] <= 1e-10


def test_program_validation():
    with pytest.raises(ValueError):
        ipm.ConicProgram([1, 0], [[1, 1], [2, 2]], [1, 2], cones.orthant(2))
    with pytest.raises(ValueError):
        ipm.ConicProgram([1, 0], [[1, 1]], [1], cones.orthant(2), x0=[0.5, 0.6])
    prog = ipm.ConicProgram.from_json({"c": [1, 0], "A": [[1, 1]], "b": [1], "cone": {"variant": "Orthant", "dim": 2}})
    assert prog.cone.dim == 2


def test_barrier_parameter_sets_iteration_count():
    """Doubling the barrier doubles nu; outer steps grow by sqrt(2) times the ratio of log factors."""
    eps = 1e-8
    for d in (2, 3, 4, 5):
        F = canonical_potential(cones.lorentz(d))
        _, t1 = ipm.solve_conic(socp(d), barrier=F, eps=eps)
        _, t2 = ipm.solve_conic(socp(d), barrier=ipm.scaled_barrier(F, 2.0), eps=eps)
        predicted = math.sqrt(2) * math.log(2 * d / eps) / math.log(d / eps)
        assert t2.outer_steps / t1.outer_steps == pytest.approx(predicted, rel=0.1)


def test_numeric_barrier_is_flagged():
    spec = cones.orthant(2)
    F = numeric_potential(spec, 1 / 64)
    x, trace = ipm.solve_conic(lp(), barrier=F, eps=1e-8)
    assert trace.numeric_barrier and trace.eps_floor > 1e-8
    assert trace.gap_bound <= trace.eps_floor
    assert lp().c @ x <= trace.gap_bound


def test_trace_csv(tmp_path):
    _, trace = ipm.solve_conic(lp(), eps=1e-4)
    path = tmp_path / "trace.csv"
    trace.write_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "iteration,mu,decrement,objective,margin" and len(lines) == len(trace.records) + 1
