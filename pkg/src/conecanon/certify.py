"""Sampling certificates for barrier inequalities and Schwarz-lemma dominance."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from . import cones
from .barriers import Jet3, PotentialHandle
from .errors import (
    DegenerateHessian,
    DomainMismatch,
    NonConvexWitness,
    RankDeficient,
    UnboundedDomain,
)
from .sampling import unit_directions


@dataclass
class CertReport:
    property: str
    statistic: float
    count: int
    seed: int
    witness: dict
    passed: bool
    threshold: float

    def to_dict(self):
        return {
            "property": self.property,
            "statistic": self.statistic,
            "count": self.count,
            "seed": self.seed,
            "witness": self.witness,
            "pass": self.passed,
            "threshold": self.threshold,
        }


def _cholesky(g, X):
    try:
        return np.linalg.cholesky(g)
    except np.linalg.LinAlgError:
        ev = np.linalg.eigvalsh(g)
        i = int(np.argmin(ev[:, 0]))
        raise DegenerateHessian(f"Hessian not positive definite at {X[i].tolist()}") from None


def sc_ratio(J, v):
    """(F_ijk v^i v^j v^k)^2 / (4 (F_ij v^i v^j)^3) for a single jet and direction."""
    c = np.einsum("ijk,i,j,k->", J.third, v, v, v)
    q = v @ J.hess @ v
    return float(c * c / (4 * q**3))


def _whitened_cubic(J, Linv):
    return np.einsum("nabc,nia,njb,nkc->nijk", J.third, Linv, Linv, Linv)


def _ascent(W, u, steps):
    """Shifted symmetric higher-order power iteration for max |W(u,u,u)| on the unit sphere."""
    shift = np.sqrt((W**2).sum(axis=(1, 2, 3)))[:, None]
    sign = np.sign(np.einsum("nijk,ni,nj,nk->n", W, u, u, u))[:, None]
    sign[sign == 0] = 1
    for _ in range(steps):
        u = sign * np.einsum("nijk,nj,nk->ni", W, u, u) + shift * u
        u /= np.linalg.norm(u, axis=1, keepdims=True)
    return u


def self_concordance_sup(F, samples, dirs_per_sample=8, seed=0, tol=1e-9, ascent_steps=25):
    """Sup of the self-concordance ratio over samples and directions.

    Candidate directions per point: radial, coordinate axes,
    ``dirs_per_sample`` random ones, and one from power-iteration ascent in
    whitened coordinates. The whitened tensor only proposes directions; every
    candidate is scored with the handle's directional derivatives.
    """
    X = np.atleast_2d(np.asarray(samples, dtype=float))
    N, d = X.shape
    J = F.jets(X)
    L = _cholesky(J.hess, X)
    Linv = np.linalg.inv(L)
    W = _whitened_cubic(J, Linv)
    cands = [X[:, None, :], np.broadcast_to(np.eye(d), (N, d, d))]
    if dirs_per_sample:
        cands.append(unit_directions(seed, N, d, dirs_per_sample))
    V = np.concatenate(cands, axis=1)
    U = np.einsum("nji,nmj->nmi", L, V)
    U /= np.linalg.norm(U, axis=2, keepdims=True)
    rough = np.einsum("nijk,nmi,nmj,nmk->nm", W, U, U, U) ** 2
    up = _ascent(W, U[np.arange(N), np.argmax(rough, axis=1)], ascent_steps)
    V = np.concatenate([V, np.einsum("nji,nj->ni", Linv, up)[:, None, :]], axis=1)
    V /= np.linalg.norm(V, axis=2, keepdims=True)
    _, d2, d3 = F.along(X, V)
    vals = d3 * d3 / (4 * d2**3)
    i, m = np.unravel_index(int(np.argmax(vals)), vals.shape)
    stat = float(vals[i, m])
    return CertReport("self_concordance", stat, int(vals.size), int(seed),
                      {"point": X[i].tolist(), "direction": V[i, m].tolist()}, bool(stat <= 1 + tol), 1 + tol)


def nu_ratio(J, v):
    """(F_i v^i)^2 / (F_ij v^i v^j) for a single jet and direction."""
    return float((J.grad @ v) ** 2 / (v @ J.hess @ v))


def barrier_parameter_sup(F, samples, dirs=8, seed=0, tol=1e-9):
    """Sup of (F_i v^i)^2 / F_ij v^i v^j; the maximizer v = g^{-1} dF is among the candidates."""
    X = np.atleast_2d(np.asarray(samples, dtype=float))
    N, d = X.shape
    J = F.jets(X)
    _cholesky(J.hess, X)
    opt = np.linalg.solve(J.hess, J.grad[:, :, None])[:, :, 0]
    V = [X[:, None, :], opt[:, None, :]]
    if dirs:
        V.append(unit_directions(seed, N, d, dirs))
    V = np.concatenate(V, axis=1)
    V /= np.linalg.norm(V, axis=2, keepdims=True)
    d1, d2, _ = F.along(X, V)
    vals = d1 * d1 / d2
    i, m = np.unravel_index(int(np.argmax(vals)), vals.shape)
    stat = float(vals[i, m])
    nu = float(-F.alpha) if F.alpha is not None else float(d)
    return CertReport("barrier_parameter", stat, int(vals.size), int(seed),
                      {"point": X[i].tolist(), "direction": V[i, m].tolist(),
                       "radial_ratio_max_error": float(np.max(np.abs(vals[:, 0] - nu)))},
                      bool(stat <= nu * (1 + tol)), nu * (1 + tol))


def subsolution_check(G, samples, tol=1e-9):
    """inf of H(G) e^{-2G} over samples; non-convex samples raise NonConvexWitness."""
    X = np.atleast_2d(np.asarray(samples, dtype=float))
    J = G.jets(X)
    ev = np.linalg.eigvalsh(J.hess)
    bad = ev[:, 0] <= 0
    if bad.any():
        i = int(np.argmax(bad))
        raise NonConvexWitness(f"Hessian not positive definite at {X[i].tolist()}", X[i])
    ratio = np.exp(J.log_hessian_det() - 2 * J.value)
    i = int(np.argmin(ratio))
    return CertReport("subsolution", float(ratio[i]), len(X), 0, {"point": X[i].tolist()},
                      bool(ratio[i] >= 1 - tol), 1 - tol)


def schwarz_dominance(F_ref, G, samples, tol=1e-8):
    """sup (G - F_ref) over samples, which must lie in the domains of both potentials."""
    X = np.atleast_2d(np.asarray(samples, dtype=float))
    if F_ref.dim != G.dim:
        raise DomainMismatch("potentials live in different dimensions")
    if np.any(cones.contains(G.cone, X) <= 0):
        raise DomainMismatch("some samples lie outside the domain of G")
    diff = G.jets(X).value - F_ref.jets(X).value
    i = int(np.argmax(diff))
    return CertReport("dominance", float(diff[i]), len(X), 0, {"point": X[i].tolist()},
                      bool(diff[i] <= tol), tol)


# ------------------------------------------------- polyhedral log-barrier


def _minor_table(A):
    n = A.shape[1]
    subsets = list(itertools.combinations(range(len(A)), n))
    dets = np.array([np.linalg.det(A[list(J)]) for J in subsets])
    mask = np.ones((len(subsets), len(A)), bool)
    for k, J in enumerate(subsets):
        mask[k, list(J)] = False
    return dets**2, mask


def barrier_polynomial(domain, Y):
    """p(y) = H(G0) prod l_a^2 for G0 = -sum log l_a, by the Cauchy-Binet expansion.

    p(y) = sum over n-subsets J of det(A_J)^2 prod_{a not in J} l_a(y)^2.
    """
    w, mask = _minor_table(domain.A)
    l2 = domain.values(Y) ** 2
    return np.where(mask[None], l2[:, None, :], 1.0).prod(axis=2) @ w


def _vertices(domain):
    A, b = domain.A, domain.b
    n = A.shape[1]
    out = []
    for J in itertools.combinations(range(len(A)), n):
        M = A[list(J)]
        if abs(np.linalg.det(M)) < 1e-12:
            continue
        y = np.linalg.solve(M, -b[list(J)])
        if np.all(domain.values(y)[0] >= -1e-9):
            out.append(y)
    return np.array(out).reshape(-1, n)


def sharp_barrier_constant(domain, unbounded_radius=1e6):
    """c = -1/2 log min p over the closed domain, and the minimizer.

    The minimum is found by SLSQP from the Chebyshev center, every vertex and
    every vertex-pair midpoint.
    """
    A = domain.A
    n = A.shape[1]
    if np.linalg.matrix_rank(A) < n:
        raise RankDeficient("facet normals do not span the ambient space")
    V = _vertices(domain)
    starts = [domain.chebyshev_center()] + list(V)
    starts += [(p + q) / 2 for p, q in itertools.combinations(V, 2)]
    scale = 1.0 + max(np.abs(s).max() for s in starts)

    def f(y):
        return float(barrier_polynomial(domain, y[None])[0])

    cons = [{"type": "ineq", "fun": lambda y: domain.values(y)[0]}]
    best = None
    for s in starts:
        res = minimize(f, s, method="SLSQP", constraints=cons, options={"ftol": 1e-16, "maxiter": 500})
        y = res.x if np.all(domain.values(res.x)[0] >= -1e-12) else s
        val = f(y)
        if best is None or val < best[0]:
            best = (val, y)
    val, y = best
    if np.linalg.norm(y) > unbounded_radius * scale or val <= 0:
        raise UnboundedDomain("the barrier polynomial has no minimum on the domain")
    return -0.5 * np.log(val), y


def polyhedral_log_barrier(domain):
    """G = -sum log l_a - c with the largest c making H(G) >= e^{2G} hold on the domain."""
    if not isinstance(domain, cones.PolyhedralDomain):
        domain = cones.PolyhedralDomain(*domain)
    c, argmin = sharp_barrier_constant(domain)
    A = domain.A
    w, mask = _minor_table(A)

    def ev(Y):
        l = domain.values(Y)
        r = 1.0 / l
        grad = -r @ A
        hess = np.einsum("na,ai,aj->nij", r * r, A, A)
        third = -2 * np.einsum("na,ai,aj,ak->nijk", r**3, A, A, A)
        # log det of A^T diag(l^-2) A by Cauchy-Binet: positive terms, no cancellation
        terms = np.where(~mask[None], (r * r)[:, None, :], 1.0).prod(axis=2) * w
        logdet = np.log(terms.sum(axis=1))
        return Jet3(-np.log(l).sum(axis=1) - c, grad, hess, third, logdet)

    return PotentialHandle(ev, domain, None, "closed-form", constant=-c, info={"c": c, "argmin": argmin.tolist()})
