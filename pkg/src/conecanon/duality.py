"""Gradient map between a cone and its dual, and checks of the duality identities."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import cones
from .barriers import canonical_potential
from .errors import DomainMismatch, UnsupportedDual
from .sampling import draw, unit_directions


@dataclass
class DualPairReport:
    x: np.ndarray
    y: np.ndarray
    identity_defect: float
    dual_margin: float
    roundtrip_defect: float


def _dual_margin(spec, Y):
    try:
        return cones.contains(cones.dual_cone(spec), Y)
    except UnsupportedDual:
        return np.full(len(np.atleast_2d(Y)), np.nan)


def gradient_map(F, x):
    """y = -dF(x), which lies in the dual cone; accepts one point or a batch."""
    x = np.asarray(x, dtype=float)
    Y = -F.jets(np.atleast_2d(x)).grad
    return Y[0] if x.ndim == 1 else Y


def dual_potential(spec):
    """Closed-form canonical potential of the dual cone."""
    return canonical_potential(cones.dual_cone(spec))


def _dual_images(F, F_dual, samples):
    X = np.atleast_2d(np.asarray(samples, dtype=float))
    if F.dim != F_dual.dim:
        raise DomainMismatch("potentials live in different dimensions")
    Y = gradient_map(F, X)
    if np.any(cones.contains(F_dual.cone, Y) <= 0):
        raise DomainMismatch("gradient images leave the domain of the dual potential")
    return X, Y


def duality_identity_defect(F, F_dual, samples):
    """sup |F(x) + F_dual(-dF(x))|."""
    X, Y = _dual_images(F, F_dual, samples)
    return float(np.max(np.abs(F.value(X) + F_dual.value(Y))))


def inverse_map_roundtrip(F, F_dual, samples):
    """sup |Phi_dual(Phi(x)) - x| / |x|."""
    X, Y = _dual_images(F, F_dual, samples)
    back = gradient_map(F_dual, Y)
    return float(np.max(np.linalg.norm(back - X, axis=1) / np.linalg.norm(X, axis=1)))


def pullback_isometry_defect(F, F_dual, samples, dirs=8, seed=0):
    """sup |g_dual(Phi x)(dPhi v, dPhi v) - 1| over g-unit directions v at x.

    With g = L L^T and v = L^{-T} u for a unit u, dPhi v = -L u, so only the
    Cholesky factor of g and directional derivatives of F_dual are needed.
    """
    X, Y = _dual_images(F, F_dual, samples)
    L = np.linalg.cholesky(F.jets(X).hess)
    U = unit_directions(seed, len(X), X.shape[1], dirs)
    pushed = -np.einsum("nij,nmj->nmi", L, U)
    _, d2, _ = F_dual.along(Y, pushed)
    return float(np.max(np.abs(d2 - 1)))


def dual_pair_report(F, F_dual, x):
    x = np.asarray(x, dtype=float)
    y = gradient_map(F, x)
    back = gradient_map(F_dual, y)
    return DualPairReport(
        x, y,
        float(abs(np.expm1(F.value(x[None])[0] + F_dual.value(y[None])[0]))),
        float(_dual_margin(F.cone, y[None])[0]),
        float(np.linalg.norm(back - x)),
    )


def dual_margins(F, samples):
    """Dual-cone margins of the gradient images (NaN where the dual is not enumerable)."""
    return _dual_margin(F.cone, gradient_map(F, np.atleast_2d(samples)))


def homogeneity_defect(F, samples, t=2.0):
    """sup |Phi(t x) - Phi(x) / t| / |Phi(x)|."""
    X = np.atleast_2d(samples)
    Y = gradient_map(F, X)
    return float(np.max(np.linalg.norm(gradient_map(F, t * X) - Y / t, axis=1) / np.linalg.norm(Y, axis=1)))


# ------------------------------------------------------------ automorphisms


def _boost(d, k, eta):
    A = np.eye(d)
    c, s = np.cosh(eta), np.sinh(eta)
    A[0, 0] = A[k, k] = c
    A[0, k] = A[k, 0] = s
    return A


def _rotation(d, i, j, th):
    A = np.eye(d)
    c, s = np.cos(th), np.sin(th)
    A[i, i] = A[j, j] = c
    A[i, j], A[j, i] = -s, s
    return A


def _congruence(P):
    """Matrix of X -> P X P^T on svec coordinates."""
    m = len(P)
    E = cones.svec_basis(m)
    cols = [cones.svec(P @ Ek @ P.T) for Ek in E]
    return np.column_stack(cols)


def automorphisms(spec, count=6, seed=0):
    """A small seeded set of linear automorphisms of an orthant, Lorentz or PSD cone."""
    d = spec.dim
    R = draw(seed, 7, count, lambda g, s: g.uniform(-1, 1, size=(s, d * d + 2)))
    out = []
    for r in R:
        if spec.variant == "Orthant":
            A = np.diag(np.exp(r[:d]))
        elif spec.variant == "Lorentz":
            A = np.exp(r[-1]) * _boost(d, 1 + int(abs(r[0]) * (d - 1)) % (d - 1), r[1])
            if d > 2:
                A = _rotation(d, 1, 2, np.pi * r[2]) @ A
        elif spec.variant == "PSD":
            P = np.eye(spec.order) + 0.5 * r[: spec.order**2].reshape(spec.order, spec.order)
            A = _congruence(P)
        else:
            raise NotImplementedError("automorphisms are generated for orthant, Lorentz and PSD cones")
        out.append(A)
    return out


def equivariance_defect(F, samples, maps):
    """sup |Phi(A x) - A^{-T} Phi(x)| / |A^{-T} Phi(x)| over samples and automorphisms A."""
    X = np.atleast_2d(samples)
    Y = gradient_map(F, X)
    worst = 0.0
    for A in maps:
        want = Y @ np.linalg.inv(A)
        got = gradient_map(F, X @ A.T)
        worst = max(worst, float(np.max(np.linalg.norm(got - want, axis=1) / np.linalg.norm(want, axis=1))))
    return worst


# ------------------------------------------------- complete monotonicity signs


def monotonicity_signs(F, samples, directions):
    """Smallest (-1)^k D_{v1..vk} e^F / e^F for k = 1, 2, 3 and cone directions v.

    ``directions`` has shape (N, 3, dim); every row must lie in the closed cone.
    Nonnegative values at every order are necessary for complete monotonicity.
    """
    X = np.atleast_2d(samples)
    V = np.asarray(directions, dtype=float)
    J = F.jets(X)
    a, b, c = V[:, 0], V[:, 1], V[:, 2]
    Fa = np.einsum("ni,ni->n", J.grad, a)
    Fb = np.einsum("ni,ni->n", J.grad, b)
    Fc = np.einsum("ni,ni->n", J.grad, c)
    Fab = np.einsum("nij,ni,nj->n", J.hess, a, b)
    Fac = np.einsum("nij,ni,nj->n", J.hess, a, c)
    Fbc = np.einsum("nij,ni,nj->n", J.hess, b, c)
    Fabc = J.cubic(a, b, c)
    first = -Fa
    second = Fab + Fa * Fb
    third = -(Fabc + Fab * Fc + Fac * Fb + Fbc * Fa + Fa * Fb * Fc)
    return {"order1": float(first.min()), "order2": float(second.min()), "order3": float(third.min())}
