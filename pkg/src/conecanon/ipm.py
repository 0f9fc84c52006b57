"""Short-step primal path-following for linear programs over a cone."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from . import cones
from .barriers import Jet3, PotentialHandle, canonical_potential
from .errors import Infeasible, SingularKKT, Unbounded
from .ma_solver import probe_points, residual_sup

CENTERING_THRESHOLD = 0.25


@dataclass
class ConicProgram:
    """min c.x subject to A x = b and x in the cone."""

    c: np.ndarray
    A: np.ndarray
    b: np.ndarray
    cone: cones.ConeSpec
    x0: np.ndarray | None = None

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
        self.b = np.asarray(self.b, dtype=float)
        if self.A.shape != (len(self.b), self.cone.dim) or len(self.c) != self.cone.dim:
            raise ValueError("program dimensions do not match the cone")
        if np.linalg.matrix_rank(self.A) < len(self.b):
            raise ValueError("equality constraints must have full row rank")
        if self.x0 is not None:
            self.x0 = np.asarray(self.x0, dtype=float)
            if np.linalg.norm(self.A @ self.x0 - self.b) > 1e-10 * max(1.0, np.linalg.norm(self.b)):
                raise ValueError("x0 violates the equality constraints")
            if cones.contains(self.cone, self.x0) <= 0:
                raise ValueError("x0 is not interior to the cone")

    @classmethod
    def from_json(cls, obj, cone=None):
        spec = cone if cone is not None else cones.from_json(obj["cone"])
        return cls(obj["c"], obj["A"], obj["b"], spec, obj.get("x0"))


@dataclass
class IpmTrace:
    records: list = field(default_factory=list)
    status: str = "running"
    iterations: int = 0
    outer_steps: int = 0
    gap_bound: float = math.inf
    iteration_bound: int = 0
    nu: float = 0.0
    eps_floor: float = 0.0
    numeric_barrier: bool = False

    def add(self, mu, decrement, objective, margin):
        self.records.append({"mu": mu, "decrement": decrement, "objective": objective, "margin": margin})

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["iteration", "mu", "decrement", "objective", "margin"])
            for i, r in enumerate(self.records):
                wr.writerow([i, repr(r["mu"]), repr(r["decrement"]), repr(r["objective"]), repr(r["margin"])])


def scaled_barrier(F, factor):
    """factor * F, whose barrier parameter is factor times that of F."""

    def ev(X):
        J = F.evaluator(X)
        third = None if J.third is None else factor * J.third
        return Jet3(factor * J.value, factor * J.grad, factor * J.hess, third)

    alpha = None if F.alpha is None else factor * F.alpha
    return PotentialHandle(ev, F.cone, alpha, F.label, constant=factor * F.constant)


def barrier_nu(F):
    return float(-F.alpha) if F.alpha is not None else float(F.dim)


def newton_direction(F, program, x, mu):
    """Newton step for min c.x / mu + F(x) on {A x = b}, and its decrement sqrt(dx' g dx)."""
    J = F.jets(np.asarray(x, dtype=float)[None])[0]
    A = program.A
    m, d = A.shape
    K = np.zeros((d + m, d + m))
    K[:d, :d] = J.hess
    K[:d, d:] = A.T
    K[d:, :d] = A
    rhs = np.concatenate([-(program.c / mu + J.grad), np.zeros(m)])
    try:
        sol = np.linalg.solve(K, rhs)
    except np.linalg.LinAlgError:
        raise SingularKKT("KKT matrix is singular") from None
    if not np.all(np.isfinite(sol)):
        raise SingularKKT("KKT solve produced non-finite values")
    step = sol[:d]
    return step, float(np.sqrt(max(step @ J.hess @ step, 0.0)))


def _restore(program, x):
    """Remove drift from A x = b (the Newton steps satisfy A dx = 0 only to rounding)."""
    r = program.A @ x - program.b
    return x - program.A.T @ np.linalg.solve(program.A @ program.A.T, r)


def _margin(F, x):
    return float(cones.contains(F.cone, x))


def _center(F, program, x, mu, trace, target, max_steps, scale):
    for _ in range(max_steps):
        step, lam = newton_direction(F, program, x, mu)
        trace.add(mu, lam, float(program.c @ x), _margin(F, x))
        if lam <= target:
            return x, lam
        x = _restore(program, x + step / (1 + lam))
        trace.iterations += 1
        if np.linalg.norm(x) > 1e8 * scale:
            raise Unbounded("iterates diverge along a direction of decreasing objective")
    raise Unbounded("centering did not converge; the objective appears unbounded below")


def _gap_bound(nu, mu, lam):
    # duality gap of an approximately central point with decrement lam < 1
    return mu * (nu + (lam + math.sqrt(nu)) * lam / (1 - lam))


def solve_conic(program, barrier=None, eps=1e-8, theta=0.1, K=20.0, mu0=1.0, nu=None, max_iter=20000):
    """Short-step path following; returns (x, trace) with c.x - opt <= trace.gap_bound <= eps.

    Each outer step shrinks mu by (1 - theta / sqrt(nu)) and re-centers to
    decrement <= 1/4. The certified bound mu (nu + (lam + sqrt(nu)) lam / (1 - lam))
    accounts for the residual decrement lam of the last iterate. A numerically
    solved barrier raises eps to 10 times its canonical residual.
    """
    F = barrier if barrier is not None else canonical_potential(program.cone)
    nu = barrier_nu(F) if nu is None else float(nu)
    trace = IpmTrace(nu=nu)
    if F.label == "numeric":
        # Hessian noise of a solved potential limits the certifiable gap
        trace.numeric_barrier = True
        trace.eps_floor = 10 * residual_sup(F, probe_points(F.grid, 100))
        eps = max(eps, trace.eps_floor)
    x = program.x0 if program.x0 is not None else phase_one(program)
    scale = 1.0 + np.linalg.norm(x)
    mu = mu0
    x, lam = _center(F, program, x, mu, trace, CENTERING_THRESHOLD, 500, scale)
    trace.iteration_bound = int(math.ceil(K * math.sqrt(nu) * math.log(max(nu * mu0 / eps, math.e))))
    shrink = 1 - theta / math.sqrt(nu)
    while _gap_bound(nu, mu, lam) > eps:
        if trace.iterations > max_iter:
            raise Unbounded("iteration limit reached")
        mu *= shrink
        trace.outer_steps += 1
        step, lam = newton_direction(F, program, x, mu)
        trace.add(mu, lam, float(program.c @ x), _margin(F, x))
        x = _restore(program, x + (step if lam < 1 else step / (1 + lam)))
        trace.iterations += 1
        x, lam = _center(F, program, x, mu, trace, CENTERING_THRESHOLD, 500, scale)
    trace.gap_bound = _gap_bound(nu, mu, lam)
    trace.status = "optimal"
    return x, trace


def phase_one(program, eps=1e-9, radius=1e3):
    """A strictly feasible point, from min s over A x + s (b - A e) = b with x in the cone, s >= -1.

    e is an interior point of the cone. The auxiliary set is cut by w.x <= radius * w.e
    for a dual-interior w so that its analytic center exists. Once s < 0 the point
    (x + |s| e) / (1 + |s|) is strictly feasible; a certified optimum at or above 0
    means there is no strictly feasible point inside the cut.
    """
    spec = program.cone
    e = cones.interior_point(spec)
    r = program.b - program.A @ e
    if np.linalg.norm(r) <= 1e-12 * max(1.0, np.linalg.norm(program.b)):
        return e
    w = cones.validate_proper(spec).witness
    R = radius * float(w @ e)
    d, m = spec.dim, len(program.b)
    aux_cone = cones.product([spec, cones.orthant(2)])
    # variables (x, sigma, t) with sigma = s + 1 >= 0 and slack t = R - w.x >= 0
    A = np.zeros((m + 1, d + 2))
    A[:m, :d] = program.A
    A[:m, d] = r
    A[m, :d] = w
    A[m, d + 1] = 1.0
    b = np.concatenate([program.b + r, [R]])
    c = np.zeros(d + 2)
    c[d] = 1.0
    F = canonical_potential(aux_cone)
    nu = barrier_nu(F)
    aux = ConicProgram(c, A, b, aux_cone, np.concatenate([e, [2.0, R - w @ e]]))
    trace = IpmTrace(nu=nu)
    mu = 1.0
    z, lam = _center(F, aux, aux.x0, mu, trace, CENTERING_THRESHOLD, 500, 1.0 + np.linalg.norm(aux.x0))
    shrink = 1 - 0.1 / math.sqrt(nu)
    while True:
        if z[d] < 1:
            s = 1 - z[d]
            return _restore(program, (z[:d] + s * e) / (1 + s))
        gap = _gap_bound(nu, mu, lam)
        if z[d] - gap >= 1 or gap < eps:
            raise Infeasible("no strictly feasible point: the auxiliary optimum is not below zero")
        mu *= shrink
        z, lam = _center(F, aux, z, mu, trace, CENTERING_THRESHOLD, 500, 1.0)
