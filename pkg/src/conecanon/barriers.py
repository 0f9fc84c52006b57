"""Third-order jets of canonical potentials and candidate barriers."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import cones
from .errors import DimensionMismatch, NonInteriorPoint, SingularMatrix

EPS_BD = 1e-9


@dataclass
class Jet3:
    """Value, gradient, Hessian and third derivative; arrays may carry a leading batch axis."""

    value: np.ndarray
    grad: np.ndarray
    hess: np.ndarray
    third: np.ndarray | None = None
    logdet: np.ndarray | None = None

    def __getitem__(self, i):
        pick = lambda a: None if a is None else a[i]
        return Jet3(self.value[i], self.grad[i], self.hess[i], pick(self.third), pick(self.logdet))

    def log_hessian_det(self):
        """log det of the Hessian; evaluators may supply a cancellation-free value."""
        if self.logdet is not None:
            return self.logdet
        sign, ld = np.linalg.slogdet(self.hess)
        return np.where(sign > 0, ld, np.nan)

    def cubic(self, u, v, w):
        """Directional third derivative F_ijk u^i v^j w^k."""
        return np.einsum("...ijk,...i,...j,...k->...", self.third, u, v, w)


@dataclass(eq=False)
class PotentialHandle:
    """A potential on an open domain, evaluated in batches.

    ``evaluator`` maps an (N, dim) array of interior points to a batched Jet3.
    ``alpha`` is the logarithmic homogeneity degree, or None on non-conic domains.
    """

    evaluator: Callable[[np.ndarray], Jet3]
    cone: object
    alpha: float | None
    label: str
    constant: float = 0.0
    eps_bd: float = EPS_BD
    info: dict = field(default_factory=dict)
    directional: Callable | None = None

    @property
    def dim(self):
        return self.cone.dim

    def jets(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.dim:
            raise DimensionMismatch(f"points have {X.shape[1]} coordinates, domain has dim {self.dim}")
        m = cones.contains(self.cone, X)
        scale = np.linalg.norm(X, axis=1) if self.alpha is not None else 1.0
        bad = ~(m > self.eps_bd * scale)
        if bad.any():
            i = int(np.argmax(bad))
            raise NonInteriorPoint(f"point {X[i].tolist()} is not interior (margin {m[i]:.3g})")
        return self.evaluator(X)

    def value(self, X):
        return self.jets(X).value

    def along(self, X, V):
        """First three derivatives of t -> F(x + t v), each of shape (N, M).

        ``V`` holds M directions per point, shape (N, M, dim). Closed forms
        evaluate these without assembling the Hessian, which keeps them
        accurate where the metric is badly conditioned.
        """
        X = np.atleast_2d(np.asarray(X, dtype=float))
        V = np.asarray(V, dtype=float)
        if self.directional is not None:
            self.jets(X[:1])
            return self.directional(X, V)
        return _contract(self.jets(X), V)


def _contract(J, V):
    d1 = np.einsum("ni,nmi->nm", J.grad, V)
    d2 = np.einsum("nmi,nij,nmj->nm", V, J.hess, V)
    d3 = np.einsum("nijk,nmi,nmj,nmk->nm", J.third, V, V, V)
    return d1, d2, d3


def eval_jet3(F, x):
    """Jet of F at a single point (returns unbatched arrays) or at an (N, dim) batch."""
    x = np.asarray(x, dtype=float)
    J = F.jets(x)
    return J[0] if x.ndim == 1 else J


def canonical_residual(F, X):
    """|H(F) e^{-2F} - 1| at each point of the batch."""
    J = F.jets(X)
    out = np.abs(np.expm1(J.log_hessian_det() - 2 * J.value))
    return np.where(np.isnan(out), np.inf, out)


# ---------------------------------------------------------- closed forms


def _orthant_jet(X):
    N, d = X.shape
    r = 1.0 / X
    idx = np.arange(d)
    H = np.zeros((N, d, d))
    H[:, idx, idx] = r * r
    T = np.zeros((N, d, d, d))
    T[:, idx, idx, idx] = -2 * r**3
    return Jet3(-np.log(X).sum(axis=1), -r, H, T)


def _orthant_along(X, V):
    W = V / X[:, None, :]
    return -W.sum(axis=2), (W * W).sum(axis=2), -2 * (W**3).sum(axis=2)


def orthant_potential(dim):
    """F(x) = -sum log x^i on the positive orthant."""
    return PotentialHandle(_orthant_jet, cones.orthant(dim), -float(dim), "closed-form", directional=_orthant_along)


def _anchor_constant(raw, anchor):
    J = raw(np.atleast_2d(anchor))
    sign, logdet = np.linalg.slogdet(J.hess[0])
    return 0.5 * (logdet - 2 * J.value[0])


def _lorentz_raw(X):
    N = X.shape[1]
    s = np.r_[1.0, -np.ones(N - 1)]
    Jm = np.diag(s)
    z = X * s
    q = (X * z).sum(axis=1)
    zz = np.einsum("ni,nj->nij", z, z)
    grad = -N * z / q[:, None]
    hess = (N / q**2)[:, None, None] * (2 * zz - q[:, None, None] * Jm)
    sym = (np.einsum("ik,nj->nijk", Jm, z) + np.einsum("jk,ni->nijk", Jm, z) + np.einsum("ij,nk->nijk", Jm, z))
    third = (2 * N / q**2)[:, None, None, None] * sym - (8 * N / q**3)[:, None, None, None] * np.einsum("nij,nk->nijk", zz, z)
    return Jet3(-0.5 * N * np.log(q), grad, hess, third)


def _lorentz_along(X, V):
    N = X.shape[1]
    r = np.linalg.norm(X[:, 1:], axis=1)
    q = ((X[:, 0] - r) * (X[:, 0] + r))[:, None]
    a = X[:, None, 0] * V[:, :, 0] - np.einsum("ni,nmi->nm", X[:, 1:], V[:, :, 1:])
    b = V[:, :, 0] ** 2 - (V[:, :, 1:] ** 2).sum(axis=2)
    # 2a^2 - qb >= a^2 by the reverse Cauchy-Schwarz inequality, so no cancellation
    return -N * a / q, N * (2 * a * a - q * b) / q**2, 6 * N * a * b / q**2 - 8 * N * a**3 / q**3


def lorentz_potential(dim, anchor=None):
    """F = -(dim/2) log(x0^2 - |xbar|^2) + c with c fixed at the anchor (default e0)."""
    spec = cones.lorentz(dim)
    anchor = np.eye(dim)[0] if anchor is None else np.asarray(anchor, dtype=float)
    if cones.contains(spec, anchor) <= 0:
        raise NonInteriorPoint("anchor must be interior")
    c = _anchor_constant(_lorentz_raw, anchor)

    def ev(X):
        J = _lorentz_raw(X)
        J.value = J.value + c
        return J

    return PotentialHandle(ev, spec, -float(dim), "closed-form", constant=c, directional=_lorentz_along)


def _psd_raw(m):
    E = cones.svec_basis(m)
    p = (m + 1) / 2

    def raw(X):
        M = cones.smat(X, m)
        sign, logdet = np.linalg.slogdet(M)
        Y = np.linalg.inv(M)
        Z = np.einsum("nab,kbc->nkac", Y, E)
        grad = -p * np.einsum("nkaa->nk", Z)
        hess = p * np.einsum("nkab,nlba->nkl", Z, Z)
        t1 = np.einsum("nkab,nlbc,nmca->nklm", Z, Z, Z)
        third = -p * (t1 + t1.transpose(0, 1, 3, 2))
        return Jet3(-p * logdet, grad, hess, third)

    return raw


def _psd_along(m):
    p = (m + 1) / 2

    def along(X, V):
        lam, Q = np.linalg.eigh(cones.smat(X, m))
        s = 1 / np.sqrt(lam)
        Vm = cones.smat(V.reshape(-1, V.shape[-1]), m).reshape(V.shape[:2] + (m, m))
        W = np.einsum("nab,nmbc,ncd->nmad", Q.transpose(0, 2, 1), Vm, Q)
        W = W * s[:, None, :, None] * s[:, None, None, :]
        W2 = W @ W
        tr = lambda M: np.einsum("nmaa->nm", M)
        return -p * tr(W), p * tr(W2), -2 * p * tr(W2 @ W)

    return along


def psd_potential(m, anchor=None):
    """F = -((m+1)/2) log det X + c_m in the isometric embedding; c_m fixed at the anchor (default I)."""
    spec = cones.psd(m)
    raw = _psd_raw(m)
    anchor = cones.svec(np.eye(m)) if anchor is None else np.asarray(anchor, dtype=float)
    if cones.contains(spec, anchor) <= 0:
        raise NonInteriorPoint("anchor must be positive definite")
    c = _anchor_constant(raw, anchor)

    def ev(X):
        J = raw(X)
        J.value = J.value + c
        return J

    return PotentialHandle(ev, spec, -float(spec.dim), "closed-form", constant=c, directional=_psd_along(m))


def transport(F, A):
    """Potential x -> F(A^{-1} x) - log|det A| on the image cone A(domain)."""
    A = np.asarray(A, dtype=float)
    if A.shape != (F.dim, F.dim):
        raise DimensionMismatch("transport matrix has the wrong shape")
    sign, logdet = np.linalg.slogdet(A)
    if sign == 0 or not np.isfinite(logdet) or np.linalg.cond(A) > 1e14:
        raise SingularMatrix("transport matrix is singular")
    Ainv = np.linalg.inv(A)

    def ev(X):
        J = F.evaluator(X @ Ainv.T)
        third = None
        if J.third is not None:
            third = np.einsum("nabc,ai,bj,ck->nijk", J.third, Ainv, Ainv, Ainv)
        # det(A^-T H A^-1) = det H / det(A)^2, taken before the transform amplifies rounding
        ld = J.log_hessian_det() - 2 * logdet
        return Jet3(J.value - logdet, J.grad @ Ainv, np.einsum("nab,ai,bj->nij", J.hess, Ainv, Ainv), third, ld)

    along = None
    if F.directional is not None:
        along = lambda X, V: F.directional(X @ Ainv.T, V @ Ainv.T)
    if isinstance(F.cone, cones.ConeSpec):
        cone = cones.linear_image(F.cone, A)
    else:
        cone = cones.PolyhedralDomain(F.cone.A @ Ainv, F.cone.b)
    return PotentialHandle(ev, cone, F.alpha, "transported", constant=F.constant - logdet, directional=along)


def product_potential(Fs):
    """Sum of potentials on a product cone, with block-assembled jets."""
    Fs = list(Fs)
    if not Fs:
        raise DimensionMismatch("empty product")
    spec = cones.product([F.cone for F in Fs])
    sl = cones.blocks(spec)
    d = spec.dim
    alpha = None if any(F.alpha is None for F in Fs) else float(sum(F.alpha for F in Fs))

    def ev(X):
        n = len(X)
        val = np.zeros(n)
        grad = np.zeros((n, d))
        hess = np.zeros((n, d, d))
        third = np.zeros((n, d, d, d))
        logdet = np.zeros(n)
        for F, s in zip(Fs, sl):
            J = F.evaluator(X[:, s])
            val += J.value
            grad[:, s] = J.grad
            hess[:, s, s] = J.hess
            third[:, s, s, s] = J.third
            logdet += J.log_hessian_det()
        return Jet3(val, grad, hess, third, logdet)

    def along(X, V):
        out = [0.0, 0.0, 0.0]
        for F, s in zip(Fs, sl):
            if F.directional is None:
                parts = _contract(F.evaluator(X[:, s]), V[:, :, s])
            else:
                parts = F.directional(X[:, s], V[:, :, s])
            out = [o + p for o, p in zip(out, parts)]
        return tuple(out)

    return PotentialHandle(ev, spec, alpha, "closed-form", constant=sum(F.constant for F in Fs), directional=along)


def simplicial_potential(normals):
    """Canonical potential -sum log(a.x) + log|det N| of the simplicial cone {N x > 0}."""
    N = np.asarray(normals, dtype=float)
    if N.shape[0] != N.shape[1]:
        raise DimensionMismatch("a simplicial cone needs as many facets as dimensions")
    F = transport(orthant_potential(len(N)), np.linalg.inv(N))
    return PotentialHandle(F.evaluator, cones.polyhedral(N), F.alpha, "closed-form", constant=F.constant,
                           directional=F.directional)


def canonical_potential(spec, anchor=None):
    """Closed-form canonical potential for homogeneous and simplicial cones and their combinations."""
    v = spec.variant
    if v == "Orthant":
        return orthant_potential(spec.dim)
    if v == "Lorentz":
        return lorentz_potential(spec.dim, anchor)
    if v == "PSD":
        return psd_potential(spec.order, anchor)
    if v == "Polyhedral":
        N = spec.normals
        if N.shape[0] == N.shape[1] and np.linalg.matrix_rank(N) == spec.dim:
            return simplicial_potential(N)
        raise NotImplementedError("no closed form for a non-simplicial polyhedral cone; use ma_solver")
    if v == "LinearImage":
        F = transport(canonical_potential(spec.inner), spec.A)
        F.cone = spec
        return F
    F = product_potential([canonical_potential(f) for f in spec.factors])
    F.cone = spec
    return F


# ------------------------------------------------------- user candidates


def user_potential(func, cone, alpha=None, rel_step=None):
    """Wrap a scalar function; derivatives come from nested central differences.

    Gradient and Hessian use steps 1e-5 and 1e-4 relative to |x|; the third
    derivative differences the difference-quotient Hessian with step 1e-3.
    """
    steps = rel_step or (1e-5, 1e-4, 1e-3)

    def one(x, h1, h2):
        d = len(x)
        I = np.eye(d)
        f0 = func(x)
        g = np.array([(func(x + h1 * I[i]) - func(x - h1 * I[i])) / (2 * h1) for i in range(d)])
        H = np.zeros((d, d))
        for i in range(d):
            for j in range(i, d):
                H[i, j] = H[j, i] = (
                    func(x + h2 * (I[i] + I[j])) - func(x + h2 * (I[i] - I[j]))
                    - func(x - h2 * (I[i] - I[j])) + func(x - h2 * (I[i] + I[j]))
                ) / (4 * h2 * h2)
        return f0, g, H

    def ev(X):
        n, d = X.shape
        val, grad = np.zeros(n), np.zeros((n, d))
        hess, third = np.zeros((n, d, d)), np.zeros((n, d, d, d))
        for k, x in enumerate(X):
            s = max(1.0, np.linalg.norm(x)) if alpha is not None else 1.0
            val[k], grad[k], hess[k] = one(x, steps[0] * s, steps[1] * s)
            h3 = steps[2] * s
            for i in range(d):
                e = np.eye(d)[i]
                third[k, i] = (one(x + h3 * e, steps[0] * s, steps[1] * s)[2] - one(x - h3 * e, steps[0] * s, steps[1] * s)[2]) / (2 * h3)
            third[k] = (third[k] + third[k].transpose(1, 2, 0) + third[k].transpose(2, 0, 1)) / 3
        return Jet3(val, grad, hess, third)

    return PotentialHandle(ev, cone, alpha, "user")


def shifted(F, delta):
    """F + delta as a new handle (same cone and homogeneity)."""

    def ev(X):
        J = F.evaluator(X)
        J.value = J.value + delta
        return J

    return PotentialHandle(ev, F.cone, F.alpha, F.label, constant=F.constant + delta, directional=F.directional)


def log_homogeneity_defect(F, samples, ts=(-1.0, -0.5, 0.5, 1.0)):
    """sup |F(e^t x) - F(x) - alpha t|; NaN entries mark failed evaluations."""
    X = np.atleast_2d(np.asarray(samples, dtype=float))
    worst = 0.0
    try:
        base = F.jets(X).value
    except Exception:
        return float("nan")
    for t in ts:
        try:
            v = F.jets(np.exp(t) * X).value
        except Exception:
            return float("nan")
        worst = max(worst, float(np.max(np.abs(v - base - F.alpha * t))))
    return worst
